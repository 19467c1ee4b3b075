//! Recovers loss, detection error and cavity detuning from noisy synthetic
//! Fock populations.
//!
//! cargo run --release --example imperfection_fit

use photon_distill::calibration::{fit_imperfections_with, synthetic_observations, FitOptions, Imperfections};
use photon_distill::cavity::CavityParams;
use photon_distill::distillation::PAPER_DOWNSTREAM_LOSS;

fn main() -> photon_distill::Result<()> {
    let params = CavityParams::paper().with_delta_a(6.0);
    let truth = Imperfections::paper();
    let grid: Vec<f64> = (1..=25).map(|i| 0.1 * i as f64).collect();
    let obs = synthetic_observations(&params, &truth, PAPER_DOWNSTREAM_LOSS, &grid, 0.01, 42)?;

    let fit = fit_imperfections_with(&obs, &params, &FitOptions::default())?;
    println!("truth: L = {:.3}, eps = {:.4}, delta_c = {:.2}", truth.loss, truth.epsilon, truth.delta_c);
    println!(
        "fit:   L = {:.3}, eps = {:.4}, delta_c = {:.2}  (residual {:.2e}, {} evaluations)",
        fit.l_fit, fit.epsilon, fit.delta_c, fit.residual, fit.evaluations
    );
    for r in &fit.restarts {
        println!(
            "  start ({:.3}, {:.4}, {:+.2}): {:.2e} -> {:.2e}",
            r.start[0], r.start[1], r.start[2], r.start_residual, r.residual
        );
    }
    Ok(())
}
