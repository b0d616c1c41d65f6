//! Main-lobe loss of a quantized phased array against the cosine bound.

use mmwdse::channel::{steering_vector, ArrayGeometry};
use mmwdse::linalg::CMatrix;
use mmwdse::precoding::quantize_phase;
use mmwdse::quantization::gain_degradation_bound;

fn main() -> mmwdse::Result<()> {
    println!("{:>3} {:>10}  worst measured loss over steering angles, dB", "Q", "bound dB");
    for q in 1..=6u32 {
        let mut line = format!("{q:>3} {:>10.3} ", gain_degradation_bound(q));
        for n in [4usize, 16, 64] {
            let geom = ArrayGeometry::linear(n);
            let mut worst: f64 = 0.0;
            for k in 0..=240 {
                let az = -60.0 + 0.5 * k as f64;
                let a = steering_vector(&geom, az, 0.0)?;
                let r = quantize_phase(&CMatrix::from_column_slice(n, 1, a.as_slice()), q);
                let g = (a.adjoint() * &r)[(0, 0)].norm_sqr() / n as f64;
                worst = worst.max(10.0 * (n as f64 / g).log10());
            }
            line += &format!(" N={n}: {worst:.3}");
        }
        println!("{line}");
    }
    Ok(())
}
