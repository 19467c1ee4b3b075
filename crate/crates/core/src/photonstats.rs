//! Photon-counting statistics of distilled pulses: analytic g²(0), a
//! Hanbury Brown–Twiss Monte Carlo across experimental runs, and the
//! narrow-band check of the pulse envelope against the cavity linewidth.
//!
//! Detectors are modeled without dead time, so every photon reaching a
//! detector within the pulse window produces a count. Coincidences between
//! run `i` on detector A and run `i + τ` on detector B are the product of
//! the two counts, which makes the estimator independent of detector
//! efficiency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::cavity::CavityParams;
use crate::distillation::{distill_coherent, DistillationConfig, Parity};
use crate::error::{domain, Error, Result};
use crate::fockspace::{photon_statistics, DensityMatrix};

/// Spectral FWHM / κ below which the pulse counts as narrow-band.
pub const BANDWIDTH_THRESHOLD: f64 = 0.1;

/// Coincidence window in units of the pulse duration.
pub const WINDOW_PER_DURATION: f64 = 3.0;

/// Trials generated per RNG stream.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Gaussian,
    /// Two Gaussian lobes of FWHM `duration/2` whose centres are `duration` apart.
    DoublePeak,
    Rectangular,
}

/// Temporal envelope of the input pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub kind: PulseKind,
    /// FWHM for the Gaussian, full length for the rectangle, seconds.
    pub duration: f64,
    pub mean_photon_number: f64,
    /// Hz.
    pub repetition_rate: f64,
}

impl PulseShape {
    pub fn new(kind: PulseKind, duration: f64, mean_photon_number: f64, repetition_rate: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(domain(format!("pulse duration {duration} must be positive")));
        }
        if !(mean_photon_number >= 0.0) {
            return Err(domain(format!("mean photon number {mean_photon_number} must be ≥ 0")));
        }
        if !(repetition_rate > 0.0) {
            return Err(domain("repetition rate must be positive"));
        }
        Ok(Self {
            kind,
            duration,
            mean_photon_number,
            repetition_rate,
        })
    }

    /// 2.3 µs Gaussian at 500 Hz.
    pub fn experiment(mean_photon_number: f64) -> Self {
        Self {
            kind: PulseKind::Gaussian,
            duration: 2.3e-6,
            mean_photon_number,
            repetition_rate: 500.0,
        }
    }

    pub fn with_kind(mut self, kind: PulseKind) -> Self {
        self.kind = kind;
        self
    }

    /// Photon flux at time `t` (s⁻¹); integrates to the mean photon number.
    pub fn intensity(&self, t: f64) -> f64 {
        self.mean_photon_number * self.unit_envelope(t)
    }

    fn unit_envelope(&self, t: f64) -> f64 {
        let gauss = |t: f64, fwhm: f64| {
            let norm = (4.0 * LN_2 / PI).sqrt() / fwhm;
            norm * (-4.0 * LN_2 * t * t / (fwhm * fwhm)).exp()
        };
        match self.kind {
            PulseKind::Gaussian => gauss(t, self.duration),
            PulseKind::DoublePeak => {
                let half = 0.5 * self.duration;
                0.5 * (gauss(t - half, half) + gauss(t + half, half))
            }
            PulseKind::Rectangular => {
                if t.abs() <= 0.5 * self.duration {
                    1.0 / self.duration
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> f64 {
        match self.kind {
            PulseKind::Gaussian => 3.0 * self.duration,
            PulseKind::DoublePeak => 2.5 * self.duration,
            PulseKind::Rectangular => 0.5 * self.duration,
        }
    }

    /// FWHM of the power spectrum of the field envelope `√I(t)`, Hz.
    pub fn spectral_fwhm(&self) -> f64 {
        const TIME_POINTS: usize = 4000;
        const FREQ_POINTS: usize = 4000;
        let half_span = self.support();
        let dt = 2.0 * half_span / TIME_POINTS as f64;
        let field: Vec<(f64, f64)> = (0..TIME_POINTS)
            .map(|i| {
                let t = -half_span + (i as f64 + 0.5) * dt;
                (t, self.unit_envelope(t).sqrt())
            })
            .collect();
        // The envelope is even in t, so its transform is a cosine transform.
        let power = |nu: f64| -> f64 {
            let amp: f64 = field.iter().map(|&(t, e)| e * (2.0 * PI * nu * t).cos()).sum::<f64>() * dt;
            amp * amp
        };
        let peak = power(0.0);
        let nu_max = 8.0 / self.duration;
        let dnu = nu_max / FREQ_POINTS as f64;
        let mut prev = (0.0, peak);
        for i in 1..=FREQ_POINTS {
            let nu = i as f64 * dnu;
            let p = power(nu);
            if p < 0.5 * peak {
                let frac = (prev.1 - 0.5 * peak) / (prev.1 - p);
                return 2.0 * (prev.0 + frac * dnu);
            }
            prev = (nu, p);
        }
        2.0 * nu_max
    }
}

/// Settings of the Hanbury Brown–Twiss simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbtConfig {
    /// Probability that a photon at a detector produces a count.
    pub detector_efficiency: f64,
    /// Hz per detector.
    pub dark_count_rate: f64,
    /// Seconds; `None` uses three pulse durations.
    pub coincidence_window: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Largest run offset τ evaluated.
    pub max_offset: usize,
}

impl Default for HbtConfig {
    fn default() -> Self {
        Self {
            detector_efficiency: 0.5,
            dark_count_rate: 0.0,
            coincidence_window: None,
            trials: 1_000_000,
            seed: 0,
            max_offset: 5,
        }
    }
}

impl HbtConfig {
    pub fn experiment() -> Self {
        Self {
            dark_count_rate: 20.0,
            ..Self::default()
        }
    }

    pub fn window(&self, pulse: &PulseShape) -> f64 {
        self.coincidence_window.unwrap_or(WINDOW_PER_DURATION * pulse.duration)
    }

    /// Mean dark counts per detector per window.
    pub fn dark_mean(&self, pulse: &PulseShape) -> f64 {
        self.dark_count_rate * self.window(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return Err(domain(format!("detector efficiency {} outside [0, 1]", self.detector_efficiency)));
        }
        if !(self.dark_count_rate >= 0.0) {
            return Err(domain("dark count rate must be ≥ 0"));
        }
        if let Some(w) = self.coincidence_window {
            if !(w > 0.0) {
                return Err(domain("coincidence window must be positive"));
            }
        }
        if self.trials <= self.max_offset {
            return Err(domain("need more trials than the largest run offset"));
        }
        Ok(())
    }
}

/// Σ n(n−1)p_n / n̄²; `None` for a state without photons.
pub fn g2_analytic(rho: &DensityMatrix) -> Option<f64> {
    photon_statistics(rho).g2_zero
}

/// Expected value of the HBT estimator at τ = 0 with `dark_mean` Poisson
/// dark counts per detector and window.
///
/// Returns `None` when neither signal nor dark counts reach the detectors.
pub fn g2_with_dark_counts(rho: &DensityMatrix, efficiency: f64, dark_mean: f64) -> Option<f64> {
    let stats = photon_statistics(rho);
    let pairs: f64 = stats
        .probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
        .sum();
    let single = 0.5 * efficiency * stats.mean + dark_mean;
    if single <= 0.0 {
        return None;
    }
    let coincidence = 0.25 * efficiency * efficiency * pairs + efficiency * stats.mean * dark_mean + dark_mean * dark_mean;
    Some(coincidence / (single * single))
}

/// One point of g²(τ), τ in units of the repetition period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2TauPoint {
    pub tau_index: usize,
    pub g2: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbtResult {
    /// τ = 0 first.
    pub g2_tau: Vec<G2TauPoint>,
    pub g2_zero: Option<f64>,
    pub stderr: Option<f64>,
    pub counts_a: u64,
    pub counts_b: u64,
    pub coincidences_zero: u64,
    pub trials: usize,
}

/// Simulates the HBT experiment run by run.
///
/// Each chunk of trials draws from its own RNG stream derived from the
/// seed, so results do not depend on the number of threads.
pub fn hbt_monte_carlo(rho: &DensityMatrix, pulse: &PulseShape, cfg: &HbtConfig) -> Result<HbtResult> {
    cfg.validate()?;
    let probabilities = rho.populations();
    let mut cdf = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in &probabilities {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let dark = cfg.dark_mean(pulse);
    let dark_dist = if dark > 0.0 {
        Some(Poisson::new(dark).map_err(|e| domain(format!("dark counts: {e}")))?)
    } else {
        None
    };
    let eta = cfg.detector_efficiency;
    let chunks = cfg.trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<(u32, u32)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chunk as u64);
            let len = CHUNK.min(cfg.trials - chunk * CHUNK);
            (0..len)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    let n = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64;
                    let to_a = sample_binomial(&mut rng, n, 0.5);
                    let mut a = sample_binomial(&mut rng, to_a, eta) as u32;
                    let mut b = sample_binomial(&mut rng, n - to_a, eta) as u32;
                    if let Some(d) = &dark_dist {
                        a += d.sample(&mut rng) as u32;
                        b += d.sample(&mut rng) as u32;
                    }
                    (a, b)
                })
                .collect()
        })
        .collect();
    let runs: Vec<(u32, u32)> = per_chunk.into_iter().flatten().collect();
    let n = runs.len() as f64;
    let (counts_a, counts_b) = runs
        .iter()
        .fold((0u64, 0u64), |(sa, sb), &(a, b)| (sa + a as u64, sb + b as u64));
    let g2_tau: Vec<G2TauPoint> = (0..=cfg.max_offset)
        .map(|tau| estimate_at_offset(&runs, tau))
        .collect();
    let coincidences_zero = runs.iter().map(|&(a, b)| a as u64 * b as u64).sum();
    if counts_a == 0 || counts_b == 0 {
        log::warn!("g² undefined: {counts_a} counts on A, {counts_b} on B over {n} runs");
    }
    Ok(HbtResult {
        g2_zero: g2_tau[0].g2,
        stderr: g2_tau[0].stderr,
        g2_tau,
        counts_a,
        counts_b,
        coincidences_zero,
        trials: runs.len(),
    })
}

fn sample_binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

/// Coincidence rate at offset τ over the product of singles rates, with a
/// first-order error estimate.
fn estimate_at_offset(runs: &[(u32, u32)], tau: usize) -> G2TauPoint {
    let pairs = runs.len() - tau;
    let n = pairs as f64;
    let mut sums = [0.0f64; 6];
    for i in 0..pairs {
        let a = runs[i].0 as f64;
        let b = runs[i + tau].1 as f64;
        let x = a * b;
        sums[0] += a;
        sums[1] += a * a;
        sums[2] += b;
        sums[3] += b * b;
        sums[4] += x;
        sums[5] += x * x;
    }
    let mean = |s: f64| s / n;
    let (ma, mb, mx) = (mean(sums[0]), mean(sums[2]), mean(sums[4]));
    if ma == 0.0 || mb == 0.0 {
        return G2TauPoint {
            tau_index: tau,
            g2: None,
            stderr: None,
        };
    }
    let var = |s: f64, s2: f64| (s2 / n - (s / n).powi(2)).max(0.0);
    let g2 = mx / (ma * mb);
    let rel_a = var(sums[0], sums[1]) / (n * ma * ma);
    let rel_b = var(sums[2], sums[3]) / (n * mb * mb);
    let stderr = if mx > 0.0 {
        g2 * (var(sums[4], sums[5]) / (n * mx * mx) + rel_a + rel_b).sqrt()
    } else {
        // No coincidences: quote the value one coincidence would give.
        1.0 / (n * ma * mb)
    };
    G2TauPoint {
        tau_index: tau,
        g2: Some(g2),
        stderr: Some(stderr),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G2Method {
    Analytic,
    MonteCarlo,
}

/// Row of a g²(0) scan over the input intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Row {
    pub alpha_sq: f64,
    pub g2_zero: Option<f64>,
    pub stderr: Option<f64>,
    pub status: String,
}

/// g²(0) of the odd-heralded output for each α² of the grid.
pub fn g2_curve(
    config: &DistillationConfig,
    alpha_sq_grid: &[f64],
    cfg: &HbtConfig,
    pulse: &PulseShape,
    method: G2Method,
) -> Result<Vec<G2Row>> {
    config.validate()?;
    cfg.validate()?;
    alpha_sq_grid
        .iter()
        .enumerate()
        .map(|(i, &alpha_sq)| {
            if !(alpha_sq >= 0.0) {
                return Err(domain(format!("α² = {alpha_sq} must be ≥ 0")));
            }
            let rho = match distill_coherent(config, alpha_sq.sqrt(), Parity::Odd) {
                Ok(rho) => rho,
                Err(Error::EmptyBranch(msg)) => {
                    log::warn!("α² = {alpha_sq}: {msg}");
                    return Ok(G2Row {
                        alpha_sq,
                        g2_zero: None,
                        stderr: None,
                        status: "empty_branch".into(),
                    });
                }
                Err(e) => return Err(e),
            };
            let pulse = PulseShape {
                mean_photon_number: alpha_sq,
                ..*pulse
            };
            let (g2_zero, stderr) = match method {
                G2Method::Analytic => (
                    g2_with_dark_counts(&rho, cfg.detector_efficiency, cfg.dark_mean(&pulse)),
                    Some(0.0),
                ),
                G2Method::MonteCarlo => {
                    let run_cfg = HbtConfig {
                        seed: cfg.seed.wrapping_add(i as u64),
                        ..*cfg
                    };
                    let res = hbt_monte_carlo(&rho, &pulse, &run_cfg)?;
                    (res.g2_zero, res.stderr)
                }
            };
            let status = if g2_zero.is_some() { "ok" } else { "undefined" };
            Ok(G2Row {
                alpha_sq,
                g2_zero,
                stderr,
                status: status.into(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthCheck {
    pub valid: bool,
    /// Spectral FWHM over the cavity linewidth.
    pub ratio: f64,
    pub spectral_fwhm_hz: f64,
}

/// Compares the spectral width of the pulse with the cavity field decay
/// rate κ (κ/2π in MHz, as stored in [`CavityParams`]).
pub fn bandwidth_check(pulse: &PulseShape, params: &CavityParams) -> BandwidthCheck {
    let fwhm = pulse.spectral_fwhm();
    let ratio = fwhm / (params.kappa() * 1e6);
    BandwidthCheck {
        valid: ratio < BANDWIDTH_THRESHOLD,
        ratio,
        spectral_fwhm_hz: fwhm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::coherent_state;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn coherent(alpha_sq: f64, dim: usize) -> DensityMatrix {
        DensityMatrix::from_pure(&coherent_state(Complex64::new(alpha_sq.sqrt(), 0.0), dim).unwrap()).unwrap()
    }

    fn quick(trials: usize, eta: f64, dark: f64, seed: u64) -> HbtConfig {
        HbtConfig {
            detector_efficiency: eta,
            dark_count_rate: dark,
            trials,
            seed,
            ..HbtConfig::default()
        }
    }

    #[test]
    fn analytic_reference_values() {
        assert_abs_diff_eq!(g2_analytic(&coherent(0.7, 30)).unwrap(), 1.0, epsilon = 1e-3);
        assert_eq!(g2_analytic(&DensityMatrix::fock(1, 4).unwrap()), Some(0.0));
        assert_eq!(g2_analytic(&DensityMatrix::vacuum(4).unwrap()), None);
    }

    #[test]
    fn dark_counts_push_toward_one() {
        let one = DensityMatrix::fock(1, 3).unwrap();
        assert_eq!(g2_with_dark_counts(&one, 0.5, 0.0), Some(0.0));
        let nearly_dark = DensityMatrix::diagonal(&[1.0 - 1e-9, 1e-9, 0.0]).unwrap();
        assert_abs_diff_eq!(g2_with_dark_counts(&nearly_dark, 0.5, 1e-3).unwrap(), 1.0, epsilon = 1e-5);
        assert_eq!(g2_with_dark_counts(&DensityMatrix::vacuum(3).unwrap(), 0.5, 0.0), None);
    }

    #[test]
    fn coherent_monte_carlo_is_poissonian() {
        let pulse = PulseShape::experiment(0.5);
        let res = hbt_monte_carlo(&coherent(0.5, 20), &pulse, &quick(1_000_000, 0.5, 0.0, 9)).unwrap();
        assert_abs_diff_eq!(res.g2_zero.unwrap(), 1.0, epsilon = 0.02);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.4, 0.1]).unwrap();
        let pulse = PulseShape::experiment(0.5);
        let cfg = quick(200_000, 0.5, 20.0, 3);
        let a = hbt_monte_carlo(&rho, &pulse, &cfg).unwrap();
        let b = hbt_monte_carlo(&rho, &pulse, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_signal_is_undefined() {
        let pulse = PulseShape::experiment(0.0);
        let res = hbt_monte_carlo(&DensityMatrix::vacuum(3).unwrap(), &pulse, &quick(1000, 0.5, 0.0, 1)).unwrap();
        assert_eq!(res.g2_zero, None);
        assert_eq!(res.counts_a, 0);
    }

    #[test]
    fn gaussian_time_bandwidth_product() {
        let pulse = PulseShape::experiment(0.1);
        let expected = 2.0 * LN_2 / (PI * 2.3e-6);
        assert_abs_diff_eq!(pulse.spectral_fwhm() / expected, 1.0, epsilon = 0.01);
        let check = bandwidth_check(&pulse, &CavityParams::paper());
        assert!(check.valid, "{check:?}");
    }

    #[test]
    fn short_rectangle_is_broadband() {
        let pulse = PulseShape::new(PulseKind::Rectangular, 10e-9, 0.1, 500.0).unwrap();
        // sinc² main lobe: FWHM ≈ 0.886 / T.
        assert_abs_diff_eq!(pulse.spectral_fwhm() * 10e-9, 0.886, epsilon = 0.01);
        assert!(!bandwidth_check(&pulse, &CavityParams::paper()).valid);
        let long = PulseShape::new(PulseKind::Gaussian, 1.0, 0.1, 0.5).unwrap();
        assert!(bandwidth_check(&long, &CavityParams::paper()).ratio < 1e-6);
    }

    #[test]
    fn envelopes_integrate_to_mean_photon_number() {
        for kind in [PulseKind::Gaussian, PulseKind::DoublePeak, PulseKind::Rectangular] {
            let pulse = PulseShape::new(kind, 2.3e-6, 0.11, 500.0).unwrap();
            let span = 4.0 * pulse.duration;
            let steps = 200_000;
            let dt = 2.0 * span / steps as f64;
            let total: f64 = (0..steps).map(|i| pulse.intensity(-span + (i as f64 + 0.5) * dt) * dt).sum();
            assert_abs_diff_eq!(total, 0.11, epsilon = 1e-4);
        }
        assert!(PulseShape::new(PulseKind::Gaussian, 0.0, 0.1, 500.0).is_err());
    }
}
