//! Prints the derived link-budget rows of every shipped scenario.

use mmwdse::link_budget::{sinr_target, snr_pre_beamforming, Scenario};

fn main() {
    println!("{:<20} {:>8} {:>10} {:>10} {:>8}  SINR target per U", "scenario", "BW MHz", "noise dBm", "SNR dB", "SE");
    for sc in Scenario::builtins() {
        let b = &sc.budget;
        let targets: Vec<String> = b
            .allowed_stream_counts
            .iter()
            .map(|&u| format!("U={u}: {:.1} dB", sinr_target(b.se_target_bps_hz, u)))
            .collect();
        println!(
            "{:<20} {:>8.0} {:>10.1} {:>10.1} {:>8.1}  {}",
            b.name,
            b.bandwidth_mhz,
            b.rx_noise_dbm,
            snr_pre_beamforming(b),
            b.se_target_bps_hz,
            targets.join(", ")
        );
    }
}
