//! Best design per architecture as baseband processing efficiency varies.
//!
//! `cargo run --release --example dsp_sensitivity -- [scenario] [trials] [out_dir]`

use mmwdse::cli::{run, Mode, SweepSpec, DEFAULT_FOM_MW_PER_GOPS};
use mmwdse::evaluation::SearchOptions;
use mmwdse::hardware::ComponentLibrary;
use mmwdse::link_budget::Scenario;
use mmwdse::precoding::Architecture;

fn main() -> mmwdse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = SweepSpec {
        scenarios: vec![Scenario::resolve(args.first().map(String::as_str).unwrap_or("self_backhauling"))?],
        library: ComponentLibrary::default(),
        mode: Mode::DspSensitivity,
        architectures: Architecture::ALL.to_vec(),
        n: vec![32, 64, 128, 256, 512],
        u: vec![],
        trials: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30),
        seed: 1,
        out: args.get(2).map(Into::into).unwrap_or_else(|| "out".into()),
        plot: true,
        fom_mw_per_gops: DEFAULT_FOM_MW_PER_GOPS.to_vec(),
        search: SearchOptions::default(),
    };
    let report = run(&spec)?;
    print!("{}", std::fs::read_to_string(&report.files[0])?);
    Ok(())
}
