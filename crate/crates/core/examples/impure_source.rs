//! Distilling an imperfect single-photon source instead of a coherent pulse.
//!
//! cargo run --example impure_source

use photon_distill::distillation::{distill_general, single_photon_fidelity, DistillationConfig, Parity};
use photon_distill::fockspace::DensityMatrix;

fn main() -> photon_distill::Result<()> {
    let config = DistillationConfig::paper().corrected();
    for p1 in [0.3, 0.56, 0.8] {
        let input = DensityMatrix::diagonal(&[1.0 - p1, p1])?.resized(config.dim)?;
        let (out, p_up) = distill_general(&input, &config, Parity::Odd)?;
        println!(
            "input F1 = {:.2}  ->  heralded F1 = {:.3}, P(up) = {:.3}",
            p1,
            single_photon_fidelity(&out),
            p_up
        );
    }

    // Without detection errors or detuning only the cavity losses remain.
    let clean = DistillationConfig::ideal(config.params.with_detunings(0.0, 0.0));
    let input = DensityMatrix::diagonal(&[0.44, 0.56])?.resized(clean.dim)?;
    let (out, _) = distill_general(&input, &clean, Parity::Odd)?;
    println!("ideal detection, resonant: F1 = {:.3}", single_photon_fidelity(&out));
    Ok(())
}
