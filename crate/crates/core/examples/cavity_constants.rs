//! Cavity figures of merit for the experimental resonator and a fiber
//! cavity derived from its geometry.
//!
//! cargo run --example cavity_constants

use photon_distill::cavity::{branch_amplitudes, cooperativity, f1_max, fiber_params, xi, CavityParams};
use photon_distill::Complex64;

fn report(name: &str, p: &CavityParams) -> photon_distill::Result<()> {
    println!(
        "{name:>6}: g = {:7.2}  kappa = {:7.2}  kappa_r = {:7.2}  gamma = {:4.1}  C = {:6.2}  xi = {:.4}  F1_max = {:.4}",
        p.g(),
        p.kappa(),
        p.kappa_r(),
        p.gamma(),
        cooperativity(p)?,
        xi(p)?,
        f1_max(p)?
    );
    Ok(())
}

fn main() -> photon_distill::Result<()> {
    let paper = CavityParams::paper();
    report("paper", &paper)?;

    // 39 µm fiber cavity, 13.5 ppm parasitic loss per mirror, 1300 ppm out-coupler.
    let fiber = fiber_params(39e-6, 13.5, 1300.0, 240.0, 3.0)?;
    report("fiber", &fiber)?;

    // Reflection amplitudes per atomic branch at unit input.
    let one = Complex64::new(1.0, 0.0);
    for coupled in [true, false] {
        let b = branch_amplitudes(&paper, coupled, one);
        println!(
            "atom {}: r = {:+.4}{:+.4}i  |t|^2 + |m|^2 + |a|^2 = {:.4}  total = {:.6}",
            if coupled { "coupled  " } else { "uncoupled" },
            b.r.re,
            b.r.im,
            b.output_power() - b.r.norm_sqr(),
            b.output_power()
        );
    }
    Ok(())
}
