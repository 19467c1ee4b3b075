//! Second-order correlation of the heralded pulses: analytic curve with dark
//! counts, a Monte Carlo HBT run across experimental runs, and the
//! narrow-band check for several pulse shapes.
//!
//! cargo run --release --example hbt_g2

use photon_distill::distillation::{distill_coherent, DistillationConfig, Parity};
use photon_distill::photonstats::{
    bandwidth_check, g2_curve, hbt_monte_carlo, G2Method, HbtConfig, PulseKind, PulseShape,
};

fn main() -> photon_distill::Result<()> {
    let config = DistillationConfig::paper_photon_counting();
    let hbt = HbtConfig::experiment();
    let pulse = PulseShape::experiment(0.11);

    let grid = [0.002, 0.01, 0.03, 0.11, 0.3, 1.0, 2.5];
    println!("alpha^2   g2(0), 20 Hz dark counts");
    for row in g2_curve(&config, &grid, &hbt, &pulse, G2Method::Analytic)? {
        println!("{:6.3}    {:.4}", row.alpha_sq, row.g2_zero.unwrap_or(f64::NAN));
    }

    let rho = distill_coherent(&config, 0.11f64.sqrt(), Parity::Odd)?;
    for kind in [PulseKind::Gaussian, PulseKind::DoublePeak, PulseKind::Rectangular] {
        let pulse = pulse.with_kind(kind);
        let res = hbt_monte_carlo(&rho, &pulse, &hbt)?;
        let check = bandwidth_check(&pulse, &config.params);
        println!(
            "{kind:?}: g2(0) = {:.3} +- {:.3}, g2(1) = {:.3}, spectral FWHM / kappa = {:.3} ({})",
            res.g2_zero.unwrap_or(f64::NAN),
            res.stderr.unwrap_or(f64::NAN),
            res.g2_tau[1].g2.unwrap_or(f64::NAN),
            check.ratio,
            if check.valid { "narrow-band" } else { "too broad" }
        );
    }
    Ok(())
}
