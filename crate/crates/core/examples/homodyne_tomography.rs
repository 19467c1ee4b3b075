//! Simulated homodyne measurement of the heralded photon followed by a
//! maximum-likelihood reconstruction and removal of a known loss.
//!
//! cargo run --release --example homodyne_tomography

use photon_distill::distillation::{distill_coherent, DistillationConfig, Parity};
use photon_distill::tomography::{default_phases, loss_correct, mle_reconstruct, sample_homodyne};

fn main() -> photon_distill::Result<()> {
    let efficiency = 0.749;
    let truth = distill_coherent(&DistillationConfig::paper().corrected(), 0.31f64.sqrt(), Parity::Odd)?.resized(10)?;

    let samples = sample_homodyne(&truth, &default_phases(12), 200_000 / 12, efficiency, 1)?;
    println!("{} quadrature samples", samples.len());

    // Detector inefficiency folded into the POVM.
    let res = mle_reconstruct(&samples, 10, efficiency, 2000, 1e-10)?;
    println!(
        "efficiency-aware MLE: {} iterations, converged = {}, fidelity = {:.4}",
        res.iterations,
        res.converged,
        res.rho.fidelity(&truth)?
    );

    // Same data treated as lossless, then the loss removed afterwards.
    let naive = mle_reconstruct(&samples, 10, 1.0, 2000, 1e-10)?;
    let fixed = loss_correct(&naive.rho, 1.0 - efficiency)?;
    println!(
        "lossless MLE + inversion: fidelity before {:.4}, after {:.4}",
        naive.rho.fidelity(&truth)?,
        fixed.fidelity(&truth)?
    );

    let p = res.rho.populations();
    println!("reconstructed p0..p3 = {:.3} {:.3} {:.3} {:.3}", p[0], p[1], p[2], p[3]);
    Ok(())
}
