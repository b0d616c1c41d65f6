//! Power and area breakdown of one design per architecture at a given output
//! power and ENOB.
//!
//! `cargo run --example power_area_report -- [N] [U] [p_out_dbm] [enob] [components.toml]`

use mmwdse::hardware::{design_for, total_power, ComponentLibrary};
use mmwdse::precoding::Architecture;

fn main() -> mmwdse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(256);
    let u: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let dbm: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30.0);
    let enob: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(6);
    let lib = match args.get(4) {
        Some(p) => ComponentLibrary::load(std::path::Path::new(p))?,
        None => ComponentLibrary::default(),
    };
    for arch in Architecture::ALL {
        let d = design_for(arch, n, u, &lib)?.with_power_dbm(dbm);
        let b = total_power(&d, enob, 0.85, &lib)?;
        println!("{arch} N={n} U={u} M={} K={} at {dbm} dBm, {enob} bits", d.m, d.k);
        println!("  {:<18} {:>7} {:>11} {:>10} {:>10}", "block", "count", "unit mW", "total W", "mm2");
        for r in &b.rows {
            println!("  {:<18} {:>7} {:>11.3} {:>10.3} {:>10.2}", r.block, r.count, r.unit_w * 1e3, r.total_w, r.total_mm2);
        }
        println!("  {:<18} {:>7} {:>11} {:>10.3} {:>10.2}\n", "total", "", "", b.total_w(), b.total_mm2());
    }
    Ok(())
}
