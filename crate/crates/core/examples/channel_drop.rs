//! Draws one multi-user drop, prints its rays and combined gains, and writes
//! the channel matrices as a binary and a CSV dump.
//!
//! `cargo run --example channel_drop -- [N] [U] [seed] [out_dir]`

use mmwdse::channel::{generate_channel, ArrayGeometry};
use mmwdse::dump::MatrixDump;
use mmwdse::link_budget::Scenario;

fn main() -> mmwdse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(64);
    let u: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let out = std::path::PathBuf::from(args.get(3).map(String::as_str).unwrap_or("out"));

    let sc = Scenario::builtin("dense_urban_mbb").expect("shipped scenario");
    let tx = ArrayGeometry::near_square(n);
    let set = generate_channel(&tx, &sc.receiver, &sc.clusters, u, sc.los, seed)?;

    for (i, rays) in set.paths.iter().enumerate() {
        let los = rays.iter().filter(|r| r.cluster.is_none()).map(|r| r.gain.norm_sqr()).sum::<f64>();
        let strongest = rays.iter().max_by(|a, b| a.gain.norm_sqr().total_cmp(&b.gain.norm_sqr())).unwrap();
        println!(
            "user {i}: {} rays, LOS share {:.2}, strongest ray AoD ({:+.1}, {:+.1}) deg",
            rays.len(),
            los,
            strongest.departure.azimuth,
            strongest.departure.elevation
        );
    }
    let c = set.post_combining();
    for (i, row) in c.row_iter().enumerate() {
        println!("user {i}: |w^H H|^2 = {:.1} (N x N_rx = {})", row.norm_squared(), n * sc.receiver.num_elements);
    }

    std::fs::create_dir_all(&out)?;
    let dump = MatrixDump::from_channels(&set);
    for name in ["channel.bin", "channel.csv"] {
        let path = out.join(name);
        dump.save(&path)?;
        println!("wrote {} ({} matrices)", path.display(), dump.matrices.len());
    }
    Ok(())
}
