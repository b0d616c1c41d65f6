//! Minimum transmit power and the DAC resolution it implies, per
//! architecture, for a scenario at one (N, U).
//!
//! `cargo run --release --example enob_requirements -- [scenario] [N] [U] [trials]`

use mmwdse::evaluation::{min_tx_power, scenario_noise, DropSet, SearchOptions};
use mmwdse::hardware::{design_for, ComponentLibrary};
use mmwdse::link_budget::{dbm_to_relative, Scenario};
use mmwdse::precoding::Architecture;
use mmwdse::quantization::{required_enob, NoiseModel};

fn main() -> mmwdse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sc = Scenario::resolve(args.first().map(String::as_str).unwrap_or("dense_urban_mbb"))?;
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let u: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(sc.budget.allowed_stream_counts[0]);
    let trials: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);

    let noise = scenario_noise(&sc);
    let drops = DropSet::generate(&sc, n, u, trials, 1)?;
    let lib = ComponentLibrary::default();
    println!("{} N={n} U={u}, {trials} drops", sc.budget.name);
    for arch in Architecture::ALL {
        let d = design_for(arch, n, u, &lib)?;
        let p = min_tx_power(&d, &drops, sc.budget.se_target_bps_hz, &noise, &SearchOptions::default())?;
        let enob = required_enob(arch, dbm_to_relative(p.min_p_out_dbm), n, u, &NoiseModel::new(sc.sigma2_rx()));
        println!("  {arch}: {:6.2} dBm  SE {:.2}  ENOB {:.2}", p.min_p_out_dbm, p.achieved_se, enob);
    }
    Ok(())
}
