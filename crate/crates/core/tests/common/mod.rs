#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use photon_distill::calibration::{combine_losses, LossBudget, LossItem};
use photon_distill::cavity::CavityParams;
use photon_distill::distillation::{distill, distill_general, reflected_state, DistillationConfig, Parity};
use photon_distill::fockspace::{pure_loss_channel, DensityMatrix};
use photon_distill::photonstats::{hbt_monte_carlo, HbtConfig, PulseShape};
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngAlgorithm, RngSeed, TestRng, TestRunner};

pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![min];
    }
    (0..steps).map(|i| min + (max - min) * i as f64 / (steps - 1) as f64).collect()
}

pub fn proptest_config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..Config::default()
    }
}

pub fn runner(cases: u32, seed: u64) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    TestRunner::new_with_rng(proptest_config(cases, seed), TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

/// Random mixed state `G G† / tr` from Gaussian-ish entries, weighted toward
/// low photon numbers so truncation stays benign.
pub fn arb_state(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |v| {
        let g = DMatrix::from_fn(dim, dim, |m, n| {
            let k = 2 * (m * dim + n);
            Complex64::new(v[k], v[k + 1]) * 0.5f64.powi(m as i32)
        });
        DensityMatrix::from_unnormalized(&g * g.adjoint()).expect("nonzero Gram matrix")
    })
}

/// Random cavity with moderate rates and detunings.
pub fn arb_params() -> impl Strategy<Value = CavityParams> {
    (0.5f64..20.0, 0.5f64..5.0, 0.0f64..1.0, 0.0f64..1.0, 0.5f64..5.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(
        |(g, kr, kt, km, gamma, da, dc)| {
            CavityParams::from_channels(g, kr, kt, km, gamma)
                .unwrap()
                .with_detunings(da, dc)
        },
    )
}

pub fn arb_config() -> impl Strategy<Value = DistillationConfig> {
    (arb_params(), 0.0f64..0.1, 0.0f64..0.5, 0.0f64..0.5).prop_map(|(params, eps, lu, ld)| DistillationConfig {
        params,
        detection_error: eps,
        uncorrected_loss: lu,
        downstream_loss: ld,
        dim: 12,
    })
}

fn check_state(rho: &DensityMatrix, what: &str) -> Result<(), TestCaseError> {
    rho.check_invariants()
        .map_err(|e| TestCaseError::fail(format!("{what}: {e}")))
}

/// Every channel output satisfies the density-matrix invariants.
pub fn prop_channel_invariants(
    rho: &DensityMatrix,
    config: &DistillationConfig,
    transmission: f64,
) -> Result<(), TestCaseError> {
    check_state(&pure_loss_channel(rho, transmission).unwrap(), "loss channel")?;
    for parity in [Parity::Odd, Parity::Even] {
        match distill_general(rho, config, parity) {
            Ok((out, p)) => {
                check_state(&out, "distill_general")?;
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p), "probability {p}");
            }
            Err(photon_distill::Error::EmptyBranch(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
    Ok(())
}

/// `P(↑)ρ↑ + P(↓)ρ↓` equals the unconditioned reflected state. Evaluated
/// at 20 levels, where the truncated tail is negligible for `α ≤ 1.2`.
pub fn prop_recombination(config: &DistillationConfig, alpha: f64) -> Result<(), TestCaseError> {
    let config = &config.with_dim(20);
    let out = match distill(config, alpha) {
        Ok(out) => out,
        Err(photon_distill::Error::EmptyBranch(_)) => return Ok(()),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    let total = out.rho_odd.elements().scale(out.p_up) + out.rho_even.elements().scale(out.p_down);
    let reflected = reflected_state(config, alpha).unwrap();
    let err = (total - reflected.elements()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    prop_assert!(err < 1e-10, "recombination error {err}");
    prop_assert!((out.p_up + out.p_down - 1.0).abs() < 1e-12);
    Ok(())
}

/// With an ideal cavity and no imperfections the odd herald holds only odd
/// photon numbers and the even herald only even ones.
pub fn prop_parity_purity(rho: &DensityMatrix) -> Result<(), TestCaseError> {
    let ideal = DistillationConfig {
        dim: rho.dim(),
        ..DistillationConfig::ideal(CavityParams::from_channels(1e8, 2.5, 0.0, 0.0, 3.0).unwrap())
    };
    for (parity, wrong) in [(Parity::Odd, 0), (Parity::Even, 1)] {
        if let Ok((out, _)) = distill_general(rho, &ideal, parity) {
            let leak: f64 = out.populations().iter().skip(wrong).step_by(2).sum();
            prop_assert!(leak < 1e-10, "{parity:?} herald leaks {leak}");
        }
    }
    Ok(())
}

/// Loss channels compose multiplicatively, and so do budget entries.
pub fn prop_loss_composition(rho: &DensityMatrix, t1: f64, t2: f64) -> Result<(), TestCaseError> {
    let two_step = pure_loss_channel(&pure_loss_channel(rho, t1).unwrap(), t2).unwrap();
    let one_step = pure_loss_channel(rho, t1 * t2).unwrap();
    let err = two_step.max_abs_diff(&one_step);
    prop_assert!(err < 1e-12, "composition error {err}");
    let item = |loss: f64| LossItem {
        label: String::new(),
        loss,
    };
    let both = combine_losses(&LossBudget::new(vec![item(1.0 - t1), item(1.0 - t2)]).unwrap());
    prop_assert!((both - (1.0 - t1 * t2)).abs() < 1e-12);
    Ok(())
}

/// g²(0) from the HBT simulation does not depend on detector efficiency.
pub fn prop_g2_efficiency_invariance(rho: &DensityMatrix, seed: u64) -> Result<(), TestCaseError> {
    let pulse = PulseShape::experiment(rho.mean_photon_number());
    let run = |eta: f64, seed: u64| {
        hbt_monte_carlo(
            rho,
            &pulse,
            &HbtConfig {
                detector_efficiency: eta,
                dark_count_rate: 0.0,
                trials: 200_000,
                seed,
                max_offset: 0,
                ..HbtConfig::default()
            },
        )
        .unwrap()
    };
    let a = run(1.0, seed);
    let b = run(0.3, seed.wrapping_add(1));
    let (ga, gb) = (a.g2_zero.unwrap(), b.g2_zero.unwrap());
    let se = (a.stderr.unwrap().powi(2) + b.stderr.unwrap().powi(2)).sqrt();
    prop_assert!((ga - gb).abs() <= 3.0 * se, "η=1: {ga} η=0.3: {gb} se {se}");
    Ok(())
}
