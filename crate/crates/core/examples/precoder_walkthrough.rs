//! Precodes one drop with each architecture and shows the regularization
//! choice, per-user SINR terms and the analog-stage structure.

use mmwdse::channel::{generate_combined, ArrayGeometry};
use mmwdse::evaluation::{scenario_noise, sinr_per_user, TxNoiseModel};
use mmwdse::hardware::{design_for, ComponentLibrary};
use mmwdse::link_budget::Scenario;
use mmwdse::precoding::{alpha_grid, precode, Architecture, DigitalStage};

fn main() -> mmwdse::Result<()> {
    let sc = Scenario::builtin("everywhere_50mbps").expect("shipped scenario");
    let (n, u) = (64, 4);
    let noise = scenario_noise(&sc);
    let c = generate_combined(&ArrayGeometry::near_square(n), &sc.receiver, &sc.clusters, u, sc.los, 7)?.rows;
    let lib = ComponentLibrary::default();

    for arch in Architecture::ALL {
        let d = design_for(arch, n, u, &lib)?.with_power_dbm(58.0).with_dac_bits(Some(6));
        let stage = DigitalStage::new(&c, &d)?;
        let grid = alpha_grid(&stage, &noise);
        let pre = precode(&c, &d, &noise)?;
        let r = sinr_per_user(&c, &pre, &noise, &d, TxNoiseModel::Propagated)?;
        println!("{arch}: M={} K={} R is {}x{}, alpha {:.3e} from {} grid points", d.m, d.k, pre.r.nrows(), pre.r.ncols(), pre.alpha, grid.len());
        for (i, m) in r.per_user.iter().enumerate() {
            println!(
                "  user {i}: signal {:.3e}  interference {:.3e}  tx noise {:.3e}  rx noise {:.3e}  SINR {:.1} dB",
                m.signal_gain.norm_sqr(),
                m.interference,
                m.tx_noise,
                m.rx_noise,
                m.sinr_db
            );
        }
        println!("  sum SE {:.2} bps/Hz", r.sum_se);
    }
    Ok(())
}
