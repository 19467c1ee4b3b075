//! Truncated Fock-space linear algebra for a single bosonic mode.
//!
//! States live in the span of `|0⟩ … |N−1⟩`. Quadratures use
//! `a = (x + i p)/√2`: the vacuum quadrature variance is 1/2 and the vacuum
//! Wigner function is `exp(−q² − p²)/π`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Elementwise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for a normalized state.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed norm deficit of a physically constructed truncated state.
pub const TRUNCATION_BUDGET: f64 = 1e-10;

/// Default truncation, adequate for mean photon numbers up to about 2.5.
pub const DEFAULT_DIM: usize = 20;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Pure state in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: DVector<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension(0, 1));
        }
        Ok(Self {
            amplitudes: DVector::from_vec(amplitudes),
        })
    }

    /// Fock state `|n⟩`.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidDimension(dim, n + 1));
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[n] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|ψ⟩⟨ψ|` without renormalization.
    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Coherent state `|α⟩ = e^{−|α|²/2} Σ αⁿ/√n! |n⟩`, truncated at `dim`.
///
/// The result is not renormalized; its norm deficit is the Poisson tail mass
/// beyond `dim − 1`.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<FockVector> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim, 2));
    }
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        log::warn!(
            "coherent amplitude |α|² = {:.3} is large for truncation dimension {dim}",
            alpha.norm_sqr()
        );
    }
    let mut amplitudes = DVector::zeros(dim);
    amplitudes[0] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 1..dim {
        amplitudes[n] = amplitudes[n - 1] * alpha / (n as f64).sqrt();
    }
    Ok(FockVector { amplitudes })
}

/// Overlap `⟨a|b⟩` of two (untruncated) coherent states.
pub fn coherent_overlap(a: Complex64, b: Complex64) -> Complex64 {
    (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b).exp()
}

/// Density operator in the truncated Fock basis.
///
/// Values built through [`DensityMatrix::new`] are checked for Hermiticity,
/// unit trace and positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validating constructor.
    pub fn new(elements: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_raw(elements)?;
        rho.check_invariants()?;
        Ok(rho)
    }

    /// Wraps a square matrix without checking the state invariants.
    pub fn from_raw(elements: DMatrix<Complex64>) -> Result<Self> {
        if elements.nrows() != elements.ncols() {
            return Err(Error::DimensionMismatch(elements.nrows(), elements.ncols()));
        }
        if elements.nrows() == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        Ok(Self { elements })
    }

    /// Normalizes a positive operator by its trace.
    pub fn from_unnormalized(elements: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_raw(elements)?;
        let tr = rho.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidState(format!("trace {tr} cannot be normalized")));
        }
        Ok(Self {
            elements: rho.elements.unscale(tr),
        })
    }

    /// Normalized projector onto a pure state.
    pub fn from_pure(psi: &FockVector) -> Result<Self> {
        Self::from_unnormalized(psi.projector())
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(0, dim)
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        Self::from_pure(&FockVector::fock(n, dim)?)
    }

    /// Fock-diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let dim = populations.len();
        let elements = DMatrix::from_fn(dim, dim, |m, n| {
            if m == n {
                Complex64::new(populations[m], 0.0)
            } else {
                C0
            }
        });
        Self::new(elements)
    }

    /// Thermal state with mean photon number `mean`, truncated and renormalized.
    pub fn thermal(mean: f64, dim: usize) -> Result<Self> {
        if mean < 0.0 {
            return Err(domain(format!("thermal mean {mean} is negative")));
        }
        let ratio = mean / (1.0 + mean);
        let pops: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
        let total: f64 = pops.iter().sum();
        Self::diagonal(&pops.iter().map(|p| p / total).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn into_elements(self) -> DMatrix<Complex64> {
        self.elements
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.elements[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|c| c.re).sum()
    }

    /// Photon-number populations `ρ_nn`.
    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|c| c.re).collect()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.elements[(i, j)] - self.elements[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitian_part().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.elements + self.elements.adjoint()).scale(0.5)
    }

    /// Checks Hermiticity, unit trace and positivity at the module tolerances.
    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.2e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(())
    }

    /// Projects onto the PSD cone by clipping negative eigenvalues, then
    /// renormalizes. Returns the repaired state and the clipped weight.
    pub fn clip_to_psd(&self) -> Result<(Self, f64)> {
        let eig = self.hermitian_part().symmetric_eigen();
        let clipped: f64 = eig.eigenvalues.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        let vals = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0), 0.0));
        let repaired = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint();
        Ok((Self::from_unnormalized(repaired)?, clipped))
    }

    /// Restricts to (or zero-pads to) `dim` levels without renormalizing.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        let old = self.dim();
        let elements = DMatrix::from_fn(dim, dim, |m, n| {
            if m < old && n < old {
                self.elements[(m, n)]
            } else {
                C0
            }
        });
        Ok(Self { elements })
    }

    /// Largest elementwise distance to another state of the same dimension.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.elements
            .iter()
            .zip(other.elements.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let sqrt_rho = hermitian_sqrt(&self.hermitian_part());
        let inner = &sqrt_rho * other.hermitian_part() * &sqrt_rho;
        let inner = (&inner + inner.adjoint()).scale(0.5);
        let root_trace: f64 = inner
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .sum();
        Ok(root_trace * root_trace)
    }

    /// Photon-number mean `Σ n ρ_nn`.
    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Applies the Bernoulli (beam-splitter) map with transmission `t`.
///
/// For `t ∈ [0, 1]` this is the physical loss channel; `t > 1` gives its
/// formal inverse, which is exact on the truncated space because the map is
/// triangular in photon number.
pub(crate) fn bernoulli_map(rho: &DMatrix<Complex64>, t: f64) -> (DMatrix<Complex64>, f64) {
    let dim = rho.nrows();
    let sqrt_t = t.sqrt();
    let lost = 1.0 - t;
    let mut out = DMatrix::zeros(dim, dim);
    let mut row_norm = vec![0.0_f64; dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            let rho_mn = rho[(m, n)];
            for k in 0..=m.min(n) {
                let coeff = (binomial(m, k) * binomial(n, k)).sqrt()
                    * sqrt_t.powi((m + n - 2 * k) as i32)
                    * lost.powi(k as i32);
                out[(m - k, n - k)] += rho_mn * coeff;
                row_norm[(m - k) * dim + (n - k)] += coeff.abs();
            }
        }
    }
    let cond = row_norm.into_iter().fold(0.0, f64::max);
    (out, cond)
}

/// Pure-loss channel with intensity transmission `transmission`.
pub fn pure_loss_channel(rho: &DensityMatrix, transmission: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&transmission) {
        return Err(domain(format!("transmission {transmission} outside [0, 1]")));
    }
    if transmission == 1.0 {
        return Ok(rho.clone());
    }
    let (out, _) = bernoulli_map(rho.elements(), transmission);
    DensityMatrix::from_raw(out)
}

/// Normalized harmonic-oscillator eigenfunctions `ψ_0(x) … ψ_{count−1}(x)`.
///
/// Uses the normalized upward recurrence
/// `ψ_{n+1} = √(2/(n+1)) x ψ_n − √(n/(n+1)) ψ_{n−1}`, which stays bounded
/// for every `n` and never forms Hermite polynomials or factorials.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(count);
    if count == 0 {
        return psi;
    }
    psi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if count > 1 {
        psi.push(2.0_f64.sqrt() * x * psi[0]);
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
        psi.push(next);
    }
    psi
}

/// Homodyne quadrature density `pr(x, θ) = Σ ρ_mn e^{iθ(m−n)} ψ_m(x) ψ_n(x)`.
pub fn quadrature_pdf(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    let dim = rho.dim();
    let psi = hermite_functions(x, dim);
    let mut total = 0.0;
    for m in 0..dim {
        total += rho.get(m, m).re * psi[m] * psi[m];
        for n in 0..m {
            let phase = Complex64::from_polar(1.0, theta * (m - n) as f64);
            total += 2.0 * (rho.get(m, n) * phase).re * psi[m] * psi[n];
        }
    }
    total
}

/// Generalized Laguerre values `L_j^{(k)}(x)` for `j = 0 … count−1`.
fn laguerre_column(k: usize, x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let kf = k as f64;
    out.push(1.0);
    if count > 1 {
        out.push(1.0 + kf - x);
    }
    for j in 1..count.saturating_sub(1) {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * out[j] - (jf + kf) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Wigner function at phase-space point `(q, p)`, normalized so that
/// `∬ W dq dp = 1` and `W_vac(0, 0) = 1/π`.
///
/// Evaluated from the Fock-basis Laguerre expansion of the displaced parity
/// operator.
pub fn wigner(rho: &DensityMatrix, q: f64, p: f64) -> f64 {
    let dim = rho.dim();
    let beta = Complex64::new(q, p) / 2.0_f64.sqrt();
    let r2 = beta.norm_sqr();
    let arg = 4.0 * r2;
    let two_beta = beta.conj() * 2.0;
    let mut total = 0.0;
    for k in 0..dim {
        // Off-diagonal distance k = m − n.
        let lag = laguerre_column(k, arg, dim - k);
        let beta_pow = two_beta.powu(k as u32);
        // √(n!/(n+k)!) built incrementally in n.
        let mut ratio = (1..=k).fold(1.0, |acc, i| acc / (i as f64).sqrt());
        for n in 0..dim - k {
            if n > 0 {
                ratio *= (n as f64 / (n + k) as f64).sqrt();
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let weight = sign * ratio * lag[n];
            if k == 0 {
                total += rho.get(n, n).re * weight;
            } else {
                total += 2.0 * (rho.get(n + k, n) * beta_pow).re * weight;
            }
        }
    }
    total * (-2.0 * r2).exp() / PI
}

/// One sample of a Wigner function on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerPoint {
    pub q: f64,
    pub p: f64,
    pub w: f64,
}

/// Wigner function on the product grid `qs × ps`, `q` varying fastest.
pub fn wigner_grid(rho: &DensityMatrix, qs: &[f64], ps: &[f64]) -> Vec<WignerPoint> {
    use rayon::prelude::*;
    ps.par_iter()
        .flat_map_iter(|&p| qs.iter().map(move |&q| WignerPoint { q, p, w: wigner(rho, q, p) }))
        .collect()
}

/// Smallest value on a grid, `None` for an empty grid.
pub fn wigner_minimum(points: &[WignerPoint]) -> Option<WignerPoint> {
    points.iter().copied().min_by(|a, b| a.w.total_cmp(&b.w))
}

/// Photon-number statistics of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub probabilities: Vec<f64>,
    pub mean: f64,
    /// `None` when the mean photon number vanishes.
    pub g2_zero: Option<f64>,
}

pub fn photon_statistics(rho: &DensityMatrix) -> PhotonStatistics {
    let probabilities = rho.populations();
    let mean: f64 = probabilities.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let second: f64 = probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
        .sum();
    let g2_zero = (mean > 0.0).then(|| second / (mean * mean));
    PhotonStatistics {
        probabilities,
        mean,
        g2_zero,
    }
}
