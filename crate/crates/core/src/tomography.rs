//! Homodyne tomography: a forward sampler for quadrature data and an
//! iterative maximum-likelihood (RρR) reconstruction.
//!
//! Samples are binned on a fixed quadrature grid. Each bin at phase θ is a
//! POVM element `Π(θ)_ab = e^{−iθ(a−b)} ∫_bin ψ_a ψ_b dx`; detector
//! inefficiency is folded in by applying the adjoint loss channel to every
//! element, so the reconstruction returns the state before the loss.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{domain, Error, Result};
use crate::fockspace::{bernoulli_map, hermite_functions, pure_loss_channel, quadrature_pdf, DensityMatrix, PSD_TOL};

/// Largest absolute row sum tolerated when inverting a loss channel.
pub const MAX_INVERSION_CONDITION: f64 = 1e8;

/// Slack allowed on the log-likelihood before a step counts as a decrease.
const LIKELIHOOD_SLACK: f64 = 1e-12;

/// One homodyne record: local-oscillator phase and quadrature outcome
/// (vacuum variance 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub theta: f64,
    pub x: f64,
}

/// Uniform quadrature grid used for sampling and binning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub min: f64,
    pub max: f64,
    /// Number of grid points; there are `points − 1` bins.
    pub points: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            min: -6.0,
            max: 6.0,
            points: 801,
        }
    }
}

impl QuadratureGrid {
    fn validate(&self) -> Result<()> {
        if self.points < 3 || !(self.max > self.min) {
            return Err(domain("quadrature grid needs at least 3 points and max > min"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.points - 1
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / self.bins() as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step()
    }

    /// Bin holding `x`; values outside the grid go to the edge bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let idx = ((x - self.min) / self.step()).floor();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.bins() - 1)
        }
    }
}

/// `n` equally spaced phases in `[0, π)`.
pub fn default_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI * k as f64 / n as f64).collect()
}

fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Draws homodyne samples from `rho` seen through a detector of efficiency
/// `efficiency`.
///
/// Each phase gets its own RNG stream derived from `seed`, so the output is
/// identical regardless of how phases are scheduled across threads.
pub fn sample_homodyne(
    rho: &DensityMatrix,
    phases: &[f64],
    samples_per_phase: usize,
    efficiency: f64,
    seed: u64,
) -> Result<Vec<QuadratureSample>> {
    sample_homodyne_on(rho, phases, samples_per_phase, efficiency, seed, &QuadratureGrid::default())
}

pub fn sample_homodyne_on(
    rho: &DensityMatrix,
    phases: &[f64],
    samples_per_phase: usize,
    efficiency: f64,
    seed: u64,
    grid: &QuadratureGrid,
) -> Result<Vec<QuadratureSample>> {
    if phases.is_empty() {
        return Err(domain("at least one local-oscillator phase is required"));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(domain(format!("efficiency {efficiency} outside (0, 1]")));
    }
    grid.validate()?;
    let lossy = pure_loss_channel(rho, efficiency)?;
    let per_phase: Vec<Vec<QuadratureSample>> = phases
        .par_iter()
        .enumerate()
        .map(|(stream, &theta)| {
            let theta = wrap_phase(theta);
            // Cumulative bin masses from the trapezoid rule.
            let pdf: Vec<f64> = (0..grid.points)
                .map(|i| quadrature_pdf(&lossy, theta, grid.point(i)).max(0.0))
                .collect();
            let mut cdf = Vec::with_capacity(grid.bins());
            let mut acc = 0.0;
            for i in 0..grid.bins() {
                acc += 0.5 * (pdf[i] + pdf[i + 1]) * grid.step();
                cdf.push(acc);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream as u64);
            (0..samples_per_phase)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    let bin = cdf.partition_point(|&c| c < u).min(grid.bins() - 1);
                    let x = grid.point(bin) + rng.random::<f64>() * grid.step();
                    QuadratureSample { theta, x }
                })
                .collect()
        })
        .collect();
    Ok(per_phase.into_iter().flatten().collect())
}

/// Outcome of an RρR run.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    /// Mean log-likelihood per sample after each iteration (index 0 is the start point).
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ReconstructionResult {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace holds the start point")
    }

    pub fn report(&self) -> ReconstructionReport {
        let dim = self.rho.dim();
        let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..dim).map(|m| (0..dim).map(|n| f(&self.rho.get(m, n))).collect()).collect()
        };
        ReconstructionReport {
            dim,
            iterations: self.iterations,
            converged: self.converged,
            final_log_likelihood: self.final_log_likelihood(),
            rho: MatrixParts {
                real: part(|c| c.re),
                imag: part(|c| c.im),
            },
        }
    }
}

/// JSON form of a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub rho: MatrixParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixParts {
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl ReconstructionReport {
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let dim = self.dim;
        let elements = DMatrix::from_fn(dim, dim, |m, n| Complex64::new(self.rho.real[m][n], self.rho.imag[m][n]));
        DensityMatrix::from_raw(elements)
    }
}

/// Settings for [`mle_reconstruct_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub dim: usize,
    pub efficiency: f64,
    pub max_iter: usize,
    /// Stop once the per-sample log-likelihood gain falls below this.
    pub tol: f64,
    pub grid: QuadratureGrid,
}

impl MleOptions {
    pub fn new(dim: usize, efficiency: f64) -> Self {
        Self {
            dim,
            efficiency,
            max_iter: 5000,
            tol: 1e-10,
            grid: QuadratureGrid::default(),
        }
    }
}

/// Bin projectors of one phase: frequencies and efficiency-adjusted real
/// matrices `E†(∫_bin ψ_a ψ_b)`.
struct PhaseData {
    /// `e^{−iθa}`.
    rotation: Vec<Complex64>,
    bins: Vec<(f64, usize)>,
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// `∫_bin ψ_a ψ_b dx` by 5-point Gauss–Legendre quadrature.
fn bin_gram(grid: &QuadratureGrid, bin: usize, dim: usize) -> DMatrix<f64> {
    let lo = grid.point(bin);
    let half = 0.5 * grid.step();
    let mid = lo + half;
    let mut out = DMatrix::zeros(dim, dim);
    for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS.iter()) {
        let psi = hermite_functions(mid + half * node, dim);
        for a in 0..dim {
            for b in 0..dim {
                out[(a, b)] += weight * half * psi[a] * psi[b];
            }
        }
    }
    out
}

/// Adjoint of the loss channel on a real symmetric operator.
fn adjoint_loss(op: &DMatrix<f64>, efficiency: f64) -> DMatrix<f64> {
    if efficiency == 1.0 {
        return op.clone();
    }
    let dim = op.nrows();
    let coeff = |n: usize, k: usize| -> f64 {
        let kk = k.min(n - k);
        let binom = (0..kk).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        (binom * efficiency.powi((n - k) as i32) * (1.0 - efficiency).powi(k as i32)).sqrt()
    };
    DMatrix::from_fn(dim, dim, |m, n| {
        (0..=m.min(n)).map(|k| coeff(m, k) * coeff(n, k) * op[(m - k, n - k)]).sum()
    })
}

fn log_likelihood_and_probs(
    rho: &DMatrix<Complex64>,
    phases: &[PhaseData],
    povm: &[DMatrix<f64>],
) -> (f64, Vec<Vec<f64>>) {
    let dim = rho.nrows();
    let mut total = 0.0;
    let probs = phases
        .iter()
        .map(|phase| {
            // Rotated state D†ρD with D = diag(e^{−iθa}).
            let rotated = DMatrix::from_fn(dim, dim, |a, b| {
                (phase.rotation[a].conj() * rho[(a, b)] * phase.rotation[b]).re
            });
            phase
                .bins
                .iter()
                .map(|&(freq, idx)| {
                    let p = rotated.dot(&povm[idx]).max(f64::MIN_POSITIVE);
                    total += freq * p.ln();
                    p
                })
                .collect()
        })
        .collect();
    (total, probs)
}

fn r_operator(phases: &[PhaseData], povm: &[DMatrix<f64>], probs: &[Vec<f64>], dim: usize) -> DMatrix<Complex64> {
    let mut r = DMatrix::<Complex64>::zeros(dim, dim);
    for (phase, p) in phases.iter().zip(probs) {
        let mut s = DMatrix::<f64>::zeros(dim, dim);
        for (&(freq, idx), &pj) in phase.bins.iter().zip(p) {
            s += &povm[idx] * (freq / pj);
        }
        for a in 0..dim {
            for b in 0..dim {
                r[(a, b)] += phase.rotation[a] * s[(a, b)] * phase.rotation[b].conj();
            }
        }
    }
    r
}

fn sandwich(left: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let out = left * rho * left.adjoint();
    let out = (&out + out.adjoint()).scale(0.5);
    let tr: f64 = out.diagonal().iter().map(|c| c.re).sum();
    out.unscale(tr)
}

/// Maximum-likelihood reconstruction with the default grid.
pub fn mle_reconstruct(
    samples: &[QuadratureSample],
    dim: usize,
    efficiency: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ReconstructionResult> {
    let mut opts = MleOptions::new(dim, efficiency);
    opts.max_iter = max_iter;
    opts.tol = tol;
    mle_reconstruct_with(samples, &opts)
}

/// Iterates `ρ ← N[R(ρ) ρ R(ρ)]` with `R = Σ_j f_j Π_j / p_j(ρ)` from the
/// maximally mixed state.
///
/// A plain RρR step that would lower the likelihood is replaced by a diluted
/// step `(1 + μR)ρ(1 + μR)` with halving `μ`, so the likelihood trace never
/// decreases.
pub fn mle_reconstruct_with(samples: &[QuadratureSample], opts: &MleOptions) -> Result<ReconstructionResult> {
    let dim = opts.dim;
    if dim < 2 {
        return Err(Error::InvalidDimension(dim, 2));
    }
    if !(opts.efficiency > 0.0 && opts.efficiency <= 1.0) {
        return Err(domain(format!("efficiency {} outside (0, 1]", opts.efficiency)));
    }
    if samples.is_empty() {
        return Err(domain("no homodyne samples"));
    }
    opts.grid.validate()?;
    if samples.len() < 10 * dim * dim {
        log::warn!(
            "{} samples is few for a {dim}-dimensional reconstruction (recommended ≥ {})",
            samples.len(),
            10 * dim * dim
        );
    }
    let first_x = samples[0].x;
    let degenerate = samples.iter().all(|s| s.x == first_x);

    // Histogram per phase.
    let total = samples.len() as f64;
    let mut histograms: BTreeMap<u64, (f64, BTreeMap<usize, usize>)> = BTreeMap::new();
    for s in samples {
        let theta = wrap_phase(s.theta);
        let entry = histograms.entry(theta.to_bits()).or_insert_with(|| (theta, BTreeMap::new()));
        *entry.1.entry(opts.grid.bin_of(s.x)).or_default() += 1;
    }
    let used_bins: Vec<usize> = {
        let mut all: Vec<usize> = histograms.values().flat_map(|(_, h)| h.keys().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    };
    let povm: Vec<DMatrix<f64>> = used_bins
        .par_iter()
        .map(|&bin| adjoint_loss(&bin_gram(&opts.grid, bin, dim), opts.efficiency))
        .collect();
    let slot: BTreeMap<usize, usize> = used_bins.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let phases: Vec<PhaseData> = histograms
        .values()
        .map(|(theta, hist)| PhaseData {
            rotation: (0..dim).map(|a| Complex64::from_polar(1.0, -theta * a as f64)).collect(),
            bins: hist.iter().map(|(bin, &count)| (count as f64 / total, slot[bin])).collect(),
        })
        .collect();

    let mut rho = DMatrix::<Complex64>::identity(dim, dim).unscale(dim as f64);
    let (mut loglik, mut probs) = log_likelihood_and_probs(&rho, &phases, &povm);
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    let identity = DMatrix::<Complex64>::identity(dim, dim);
    while iterations < opts.max_iter {
        let r = r_operator(&phases, &povm, &probs, dim);
        let mut candidate = sandwich(&r, &rho);
        let (mut next_ll, mut next_probs) = log_likelihood_and_probs(&candidate, &phases, &povm);
        let mut mu = 1.0;
        while next_ll < loglik - LIKELIHOOD_SLACK && mu > 1e-8 {
            let step = &identity + r.scale(mu);
            candidate = sandwich(&step, &rho);
            (next_ll, next_probs) = log_likelihood_and_probs(&candidate, &phases, &povm);
            mu *= 0.5;
        }
        if next_ll < loglik - LIKELIHOOD_SLACK {
            log::warn!("no likelihood-increasing step found after {iterations} iterations");
            break;
        }
        iterations += 1;
        let gain = next_ll - loglik;
        rho = candidate;
        loglik = next_ll;
        probs = next_probs;
        trace.push(loglik);
        if gain < opts.tol {
            converged = true;
            break;
        }
    }
    if degenerate {
        log::warn!("all quadrature samples are identical; reconstruction is not meaningful");
        converged = false;
    }
    let mut state = DensityMatrix::from_unnormalized(rho)?;
    if state.min_eigenvalue() < -PSD_TOL {
        state = state.clip_to_psd()?.0;
    }
    Ok(ReconstructionResult {
        rho: state,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}

/// Removes a known pure loss `loss` from a state by inverting the Bernoulli
/// map (exact on the truncated space).
///
/// Small negative eigenvalues produced by the inversion are clipped and the
/// state renormalized; the clipped weight is logged.
pub fn loss_correct(rho: &DensityMatrix, loss: f64) -> Result<DensityMatrix> {
    if !(0.0..1.0).contains(&loss) {
        return Err(domain(format!("loss {loss} outside [0, 1)")));
    }
    if loss == 0.0 {
        return Ok(rho.clone());
    }
    let (inverted, condition) = bernoulli_map(rho.elements(), 1.0 / (1.0 - loss));
    if !(condition <= MAX_INVERSION_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let hermitian = (&inverted + inverted.adjoint()).scale(0.5);
    let state = DensityMatrix::from_raw(hermitian)?;
    if state.min_eigenvalue() < -PSD_TOL {
        let (repaired, clipped) = state.clip_to_psd()?;
        log::warn!("loss correction produced negative eigenvalues; clipped weight {clipped:.3e}");
        return Ok(repaired);
    }
    Ok(state)
}

/// Writes samples as CSV with header `theta,x`.
pub fn write_samples_csv<W: Write>(writer: W, samples: &[QuadratureSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<QuadratureSample>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["theta", "x"] {
        return Err(Error::Config(format!("sample file header must be `theta,x`, found {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
