//! Wigner function of the heralded state, with and without removing the
//! downstream loss, plus a cut along the position quadrature.
//!
//! cargo run --example wigner_negativity

use photon_distill::distillation::{distill_coherent, DistillationConfig, Parity};
use photon_distill::fockspace::wigner;

fn main() -> photon_distill::Result<()> {
    let alpha = 0.31f64.sqrt();
    let corrected = distill_coherent(&DistillationConfig::paper().corrected(), alpha, Parity::Odd)?;
    let raw = distill_coherent(&DistillationConfig::paper(), alpha, Parity::Odd)?;

    println!("W(0,0): corrected {:.4}, uncorrected {:.4}", wigner(&corrected, 0.0, 0.0), wigner(&raw, 0.0, 0.0));
    println!("    q   corrected  uncorrected");
    for i in -10..=10 {
        let q = 0.25 * i as f64;
        println!("{q:5.2}   {:+.4}    {:+.4}", wigner(&corrected, q, 0.0), wigner(&raw, q, 0.0));
    }
    Ok(())
}
