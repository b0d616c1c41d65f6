use mmwdse::channel::{generate_channel, ArrayGeometry};
use mmwdse::dump::MatrixDump;
use mmwdse::evaluation::{min_tx_power, scenario_noise, DropSet, PreparedDesign, SearchOptions};
use mmwdse::hardware::{design_for, power_enob, total_power, Block, ComponentLibrary};
use mmwdse::link_budget::{dbm_to_relative, Scenario};
use mmwdse::precoding::{precode, Architecture};
use mmwdse::quantization::{required_enob, NoiseModel};

#[test]
fn scenario_to_power_breakdown() {
    let sc = Scenario::builtin("everywhere_50mbps").unwrap();
    let lib = ComponentLibrary::default();
    let noise = scenario_noise(&sc);
    let drops = DropSet::generate(&sc, 64, 2, 16, 7).unwrap();
    for arch in Architecture::ALL {
        let d = design_for(arch, 64, 2, &lib).unwrap();
        let p = min_tx_power(&d, &drops, sc.budget.se_target_bps_hz, &noise, &SearchOptions::default()).unwrap();
        assert!(p.converged && p.monotone, "{arch}");
        assert!((p.achieved_se - sc.budget.se_target_bps_hz).abs() <= 0.1 || p.achieved_se > sc.budget.se_target_bps_hz);

        // At the found power, a DAC at the required ENOB costs little SE.
        let req = required_enob(arch, dbm_to_relative(p.min_p_out_dbm), 64, 2, &NoiseModel::new(sc.sigma2_rx()));
        let enob = power_enob(req, &lib);
        let q = PreparedDesign::new(&p.design.with_dac_bits(Some(enob + 1)), &drops, &noise).unwrap();
        let se = q.mean_se(p.min_p_out_dbm, &noise).unwrap();
        assert!(se > 0.97 * p.achieved_se, "{arch}: {se} vs {}", p.achieved_se);

        let b = total_power(&p.design, enob, sc.budget.bandwidth_ghz(), &lib).unwrap();
        let sum: f64 = b.rows.iter().map(|r| r.total_w).sum();
        assert!((b.total_w() - sum).abs() < 1e-9);
        let pa = b.row(Block::Pa);
        assert_eq!(pa.count, 64);
        assert!((pa.total_w - dbm_to_relative(p.min_p_out_dbm) * 39.810717 / lib.eta_pa).abs() < 1e-3 * pa.total_w);
    }
}

#[test]
fn same_seed_same_sweep() {
    let sc = Scenario::builtin("self_backhauling").unwrap();
    let a = DropSet::generate(&sc, 32, 1, 6, 3).unwrap();
    let b = DropSet::generate(&sc, 32, 1, 6, 3).unwrap();
    assert_eq!(a.channels, b.channels);
    let c = DropSet::generate(&sc, 32, 1, 6, 4).unwrap();
    assert_ne!(a.channels, c.channels);
}

#[test]
fn dumps_survive_both_formats() {
    let sc = Scenario::builtin("dense_urban_mbb").unwrap();
    let set = generate_channel(&ArrayGeometry::near_square(16), &sc.receiver, &sc.clusters, 3, true, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let dump = MatrixDump::from_channels(&set);
    for name in ["h.bin", "h.csv"] {
        let p = dir.path().join(name);
        dump.save(&p).unwrap();
        assert_eq!(MatrixDump::load(&p).unwrap(), dump);
    }
    let d = mmwdse::precoding::ArrayDesign::fh(16, 3, 3);
    let pre = precode(&set.post_combining(), &d, &scenario_noise(&sc)).unwrap();
    let pd = MatrixDump::from_precoder(&pre, 11);
    let p = dir.path().join("pre.bin");
    pd.save(&p).unwrap();
    let back = MatrixDump::load(&p).unwrap();
    assert_eq!(back.matrices[0], pre.r);
    assert_eq!(back.matrices[1], pre.b);
}
