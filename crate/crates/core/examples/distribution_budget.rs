//! Signal level along the RF distribution path from mixer to PA input, with
//! the amplifiers it needs.

use mmwdse::hardware::{design_for, design_distribution, ComponentLibrary};
use mmwdse::precoding::Architecture;

fn main() -> mmwdse::Result<()> {
    let lib = ComponentLibrary::default();
    for (arch, n, u) in [(Architecture::Da, 256, 16), (Architecture::Sa, 256, 8), (Architecture::Fh, 256, 16)] {
        let d = design_for(arch, n, u, &lib)?;
        let b = design_distribution(&d, &lib)?;
        println!("{arch} N={n} U={u}: split/combine loss {} dB, {} compensation amps", b.splitter_combiner_loss_db(), b.comp_amps());
        for s in &b.stages {
            println!("  {:<24} {:>+6.2} dB -> {:>+7.2} dBm  x{}", s.name, s.gain_db, s.level_dbm, s.instances);
        }
        println!("  PA input {:+.2} dBm\n", b.pa_input_dbm());
    }
    Ok(())
}
