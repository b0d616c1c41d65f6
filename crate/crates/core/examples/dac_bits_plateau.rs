//! SE against DAC resolution at each architecture's minimum power, next to
//! the ENOB the closed form asks for.

use mmwdse::evaluation::{min_tx_power, scenario_noise, DropSet, PreparedDesign, SearchOptions};
use mmwdse::hardware::{design_for, ComponentLibrary};
use mmwdse::link_budget::{dbm_to_relative, Scenario};
use mmwdse::precoding::Architecture;
use mmwdse::quantization::{required_enob, NoiseModel};

fn main() -> mmwdse::Result<()> {
    let sc = Scenario::builtin("dense_urban_mbb").expect("shipped scenario");
    let (n, u, trials) = (128, 8, 30);
    let noise = scenario_noise(&sc);
    let drops = DropSet::generate(&sc, n, u, trials, 1)?;
    let lib = ComponentLibrary::default();
    for arch in Architecture::ALL {
        let d = design_for(arch, n, u, &lib)?;
        let p = min_tx_power(&d, &drops, sc.budget.se_target_bps_hz, &noise, &SearchOptions::default())?;
        let enob = required_enob(arch, dbm_to_relative(p.min_p_out_dbm), n, u, &NoiseModel::new(sc.sigma2_rx()));
        print!("{arch} at {:.1} dBm (ENOB {:.1}):", p.min_p_out_dbm, enob);
        for bits in 2..=12 {
            let q = PreparedDesign::new(&p.design.with_dac_bits(Some(bits)), &drops, &noise)?;
            print!(" {bits}b {:.1}", q.mean_se(p.min_p_out_dbm, &noise)?);
        }
        println!("  | unquantized {:.1}", p.achieved_se);
    }
    Ok(())
}
