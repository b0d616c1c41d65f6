//! Minimum transmit power over array size for every architecture and
//! allowed stream count of a scenario. Writes min_power.csv and an SVG.
//!
//! `cargo run --release --example min_power_sweep -- [scenario] [trials] [out_dir]`

use mmwdse::cli::{run, Mode, SweepSpec};
use mmwdse::evaluation::SearchOptions;
use mmwdse::hardware::ComponentLibrary;
use mmwdse::link_budget::Scenario;
use mmwdse::precoding::Architecture;

fn main() -> mmwdse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = SweepSpec {
        scenarios: vec![Scenario::resolve(args.first().map(String::as_str).unwrap_or("everywhere_50mbps"))?],
        library: ComponentLibrary::default(),
        mode: Mode::MinPower,
        architectures: Architecture::ALL.to_vec(),
        n: vec![16, 32, 64, 128, 256],
        u: vec![],
        trials: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30),
        seed: 1,
        out: args.get(2).map(Into::into).unwrap_or_else(|| "out".into()),
        plot: true,
        fom_mw_per_gops: vec![],
        search: SearchOptions::default(),
    };
    let report = run(&spec)?;
    print!("{}", std::fs::read_to_string(&report.files[0])?);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
