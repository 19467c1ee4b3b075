//! Heralded parity distillation.
//!
//! Reflecting light from the cavity with the atom in `(|↑⟩ + |↓⟩)/√2`,
//! rotating the atom by π/2 and detecting it projects the reflected light on
//! odd (atom found in ↑) or even (↓) photon number. Imperfect contrast comes
//! from the cavity loss modes, which partially record the atomic state,
//! from detuning, from post-cavity loss and from atomic detection errors.
//!
//! Two independent routes build the heralded state:
//!
//! - [`distill_coherent`] uses the closed form for a coherent input, where
//!   every output mode stays coherent and tracing out the loss modes only
//!   damps the cross terms between the two branch states.
//! - [`distill_general`] propagates an arbitrary Fock-basis input through
//!   branch operators built from the per-photon amplitudes.
//!
//! For coherent inputs the two agree to truncation accuracy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{branch_amplitudes, BranchAmplitudes, CavityParams};
use crate::error::{domain, Error, Result};
use crate::fockspace::{
    bernoulli_map, coherent_overlap, coherent_state, pure_loss_channel, DensityMatrix, DEFAULT_DIM,
};

/// Loss from the fitted model of the experiment, relative to the ideal cavity output.
pub const PAPER_FIT_LOSS: f64 = 0.352;
/// Propagation and detection loss that is corrected in homodyne data.
pub const PAPER_DOWNSTREAM_LOSS: f64 = 0.251;
/// Fraction of wrong atomic-state detections.
pub const PAPER_DETECTION_ERROR: f64 = 0.013;
/// Fitted light–cavity detuning (2π·MHz).
pub const PAPER_DELTA_C: f64 = 0.39;
/// Average AC-Stark shift of the atomic resonance (2π·MHz).
pub const PAPER_DELTA_A: f64 = 6.0;

/// Photon-number parity selected by the atomic herald.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Atom detected in ↑.
    Odd,
    /// Atom detected in ↓.
    Even,
}

/// Everything that shapes the heralded state besides the input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillationConfig {
    pub params: CavityParams,
    /// Probability that the atomic detection returns the wrong state.
    pub detection_error: f64,
    /// Production-side loss that is never corrected.
    pub uncorrected_loss: f64,
    /// Propagation and detection loss, removable by correction.
    pub downstream_loss: f64,
    /// Fock truncation dimension.
    pub dim: usize,
}

impl DistillationConfig {
    /// Ideal protocol on the given cavity: no extra loss, perfect detection.
    pub fn ideal(params: CavityParams) -> Self {
        Self {
            params,
            detection_error: 0.0,
            uncorrected_loss: 0.0,
            downstream_loss: 0.0,
            dim: DEFAULT_DIM,
        }
    }

    /// The experimental cavity with the fitted imperfections: `Δ_a = 6`,
    /// `Δ_c = 0.39` (2π·MHz), 1.3% detection error, 13.5% uncorrected loss
    /// and 25.1% downstream loss. Use [`Self::corrected`] for loss-corrected
    /// homodyne data.
    pub fn paper() -> Self {
        Self {
            params: CavityParams::paper().with_detunings(PAPER_DELTA_A, PAPER_DELTA_C),
            detection_error: PAPER_DETECTION_ERROR,
            uncorrected_loss: 1.0 - (1.0 - PAPER_FIT_LOSS) / (1.0 - PAPER_DOWNSTREAM_LOSS),
            downstream_loss: PAPER_DOWNSTREAM_LOSS,
            dim: DEFAULT_DIM,
        }
    }

    /// Photon-counting configuration: the cavity is locked to `Δ_c = 0`.
    pub fn paper_photon_counting() -> Self {
        let mut cfg = Self::paper();
        cfg.params = cfg.params.with_delta_c(0.0);
        cfg
    }

    /// Same configuration with the downstream loss removed.
    pub fn corrected(mut self) -> Self {
        self.downstream_loss = 0.0;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Total intensity transmission after the cavity.
    pub fn transmission(&self) -> f64 {
        (1.0 - self.uncorrected_loss) * (1.0 - self.downstream_loss)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("detection_error", self.detection_error),
            ("uncorrected_loss", self.uncorrected_loss),
            ("downstream_loss", self.downstream_loss),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.dim < 2 {
            return Err(Error::InvalidDimension(self.dim, 2));
        }
        Ok(())
    }

    /// Reads the cavity keys plus optional `detection_error`,
    /// `uncorrected_loss`, `downstream_loss` and `dim` from a flat config.
    /// Missing imperfection keys default to zero.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let params = CavityParams::from_config_str(text)?;
        let table = crate::cavity::parse_flat_config(text)?;
        let get = |k: &str| table.get(k).copied().unwrap_or(0.0);
        let dim = table.get("dim").map(|d| *d as usize).unwrap_or(DEFAULT_DIM);
        let cfg = Self {
            params,
            detection_error: get("detection_error"),
            uncorrected_loss: get("uncorrected_loss"),
            downstream_loss: get("downstream_loss"),
            dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = self.params.to_config_string();
        for (k, v) in [
            ("detection_error", self.detection_error),
            ("uncorrected_loss", self.uncorrected_loss),
            ("downstream_loss", self.downstream_loss),
        ] {
            out.push_str(&format!("{k} = {v:?}\n"));
        }
        out.push_str(&format!("dim = {}\n", self.dim));
        out
    }
}

/// Ideal parity probabilities and the herald probabilities after detection errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldProbabilities {
    pub p_odd: f64,
    pub p_even: f64,
    /// Probability to find the atom in ↑.
    pub p_up: f64,
    pub p_down: f64,
}

impl HeraldProbabilities {
    fn from_parity(p_odd: f64, epsilon: f64) -> Self {
        let p_even = 1.0 - p_odd;
        let p_up = (1.0 - epsilon) * p_odd + epsilon * p_even;
        Self {
            p_odd,
            p_even,
            p_up,
            p_down: 1.0 - p_up,
        }
    }

    pub fn herald(&self, parity: Parity) -> f64 {
        match parity {
            Parity::Odd => self.p_up,
            Parity::Even => self.p_down,
        }
    }
}

/// Both heralded outcomes of one distillation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedOutput {
    /// State after detecting ↑.
    pub rho_odd: DensityMatrix,
    /// State after detecting ↓.
    pub rho_even: DensityMatrix,
    pub p_up: f64,
    pub p_down: f64,
}

/// Output amplitudes of both atomic branches for a real input amplitude.
#[derive(Debug, Clone, Copy)]
struct CoherentBranches {
    up: BranchAmplitudes,
    down: BranchAmplitudes,
    /// `⟨l↓|l↑⟩` of the joint loss mode.
    loss_overlap: Complex64,
}

impl CoherentBranches {
    fn new(params: &CavityParams, alpha: f64) -> Self {
        let amp = Complex64::new(alpha, 0.0);
        let up = branch_amplitudes(params, true, amp);
        let down = branch_amplitudes(params, false, amp);
        let loss_overlap = up
            .loss_modes()
            .iter()
            .zip(down.loss_modes().iter())
            .map(|(u, d)| coherent_overlap(*d, *u))
            .product();
        Self { up, down, loss_overlap }
    }

    /// `⟨r↓ l↓ | r↑ l↑⟩`.
    fn total_overlap(&self) -> Complex64 {
        coherent_overlap(self.down.r, self.up.r) * self.loss_overlap
    }

    /// Odd-parity probability `(1 − Re⟨ψ↓|ψ↑⟩)/2`, evaluated without
    /// cancellation for weak inputs.
    fn p_odd(&self) -> f64 {
        let z = -0.5 * self.down.r.norm_sqr() - 0.5 * self.up.r.norm_sqr() + self.down.r.conj() * self.up.r;
        let z = self
            .up
            .loss_modes()
            .iter()
            .zip(self.down.loss_modes().iter())
            .fold(z, |acc, (u, d)| acc - 0.5 * u.norm_sqr() - 0.5 * d.norm_sqr() + d.conj() * u);
        let half = (z.im / 2.0).sin();
        let one_minus_re = -z.re.exp_m1() * z.im.cos() + 2.0 * half * half;
        debug_assert!((one_minus_re - (1.0 - self.total_overlap().re)).abs() < 1e-12);
        (0.5 * one_minus_re).clamp(0.0, 1.0)
    }
}

/// Herald probabilities for a coherent input of real amplitude `alpha`.
///
/// The ideal odd probability is `(1 − Re⟨ψ↓|ψ↑⟩)/2`, which on resonance is
/// `(1 − e^{−2ξα²})/2`; detection errors then give
/// `P(↑) = (1 − ε)·P_odd + ε·P_even`.
pub fn herald_probability(config: &DistillationConfig, alpha: f64) -> Result<HeraldProbabilities> {
    config.validate()?;
    if alpha < 0.0 {
        return Err(domain(format!("alpha = {alpha} must be nonnegative")));
    }
    let branches = CoherentBranches::new(&config.params, alpha);
    Ok(HeraldProbabilities::from_parity(branches.p_odd(), config.detection_error))
}

/// Unnormalized parity-projected operators `(odd, even)` for a coherent input,
/// including post-cavity loss but before detection-error mixing.
fn coherent_parity_operators(
    config: &DistillationConfig,
    alpha: f64,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, f64)> {
    config.validate()?;
    if alpha < 0.0 {
        return Err(domain(format!("alpha = {alpha} must be nonnegative")));
    }
    let branches = CoherentBranches::new(&config.params, alpha);
    let transmission = config.transmission();
    let nu = transmission.sqrt();
    let lost = (1.0 - transmission).sqrt();
    let a = coherent_state(branches.up.r * nu, config.dim)?;
    let b = coherent_state(branches.down.r * nu, config.dim)?;
    // Cross-term damping: cavity loss modes and the lost part of the reflection.
    let coherence = branches.loss_overlap * coherent_overlap(branches.down.r * lost, branches.up.r * lost);

    let aa = a.projector();
    let bb = b.projector();
    let ab = a.amplitudes() * b.amplitudes().adjoint() * coherence;
    let cross = &ab + ab.adjoint();
    let base = (&aa + &bb).scale(0.25);
    let odd = &base - cross.scale(0.25);
    let even = &base + cross.scale(0.25);
    Ok((odd, even, branches.p_odd()))
}

fn mix_heralds(
    odd: &DMatrix<Complex64>,
    even: &DMatrix<Complex64>,
    epsilon: f64,
    parity: Parity,
) -> DMatrix<Complex64> {
    let (right, wrong) = match parity {
        Parity::Odd => (odd, even),
        Parity::Even => (even, odd),
    };
    right.scale(1.0 - epsilon) + wrong.scale(epsilon)
}

fn normalize_branch(unnormalized: DMatrix<Complex64>, what: &str) -> Result<DensityMatrix> {
    let tr: f64 = unnormalized.diagonal().iter().map(|c| c.re).sum();
    if !(tr > 0.0) {
        return Err(Error::EmptyBranch(what.to_string()));
    }
    DensityMatrix::from_unnormalized(unnormalized)
}

/// Heralded state for a coherent input `|α⟩` with real `α ≥ 0`.
///
/// Closed form: with `a = ν r↑`, `b = ν r↓` and `ν = √T` the total
/// post-cavity transmission,
/// `ρ∓ ∝ |a⟩⟨a| + |b⟩⟨b| ∓ (c |a⟩⟨b| + h.c.)`, where `c = ⟨l↓|l↑⟩·⟨√L r↓|√L r↑⟩`
/// reduces to `e^{−2(1−ξ)ξα²}·e^{−2Lξ²α²}` on resonance. Detection errors
/// mix in the opposite branch with Bayesian weights.
pub fn distill_coherent(config: &DistillationConfig, alpha: f64, parity: Parity) -> Result<DensityMatrix> {
    let (odd, even, _) = coherent_parity_operators(config, alpha)?;
    let mixed = mix_heralds(&odd, &even, config.detection_error, parity);
    normalize_branch(mixed, &format!("{parity:?} herald at alpha = {alpha}"))
}

/// Both heralded outcomes with their probabilities.
pub fn distill(config: &DistillationConfig, alpha: f64) -> Result<HeraldedOutput> {
    let (odd, even, p_odd) = coherent_parity_operators(config, alpha)?;
    let probs = HeraldProbabilities::from_parity(p_odd, config.detection_error);
    let eps = config.detection_error;
    Ok(HeraldedOutput {
        rho_odd: normalize_branch(mix_heralds(&odd, &even, eps, Parity::Odd), "odd herald")?,
        rho_even: normalize_branch(mix_heralds(&odd, &even, eps, Parity::Even), "even herald")?,
        p_up: probs.p_up,
        p_down: probs.p_down,
    })
}

/// Reflected light without conditioning on the atom, after post-cavity loss.
pub fn reflected_state(config: &DistillationConfig, alpha: f64) -> Result<DensityMatrix> {
    let (odd, even, _) = coherent_parity_operators(config, alpha)?;
    DensityMatrix::from_unnormalized(odd + even)
}

/// Bayesian mixture after imperfect atomic detection:
/// `ρ_eff = ((1 − ε)·P_odd·ρ_odd + ε·P_even·ρ_even) / P(↑)`.
pub fn detection_error_mix(
    rho_odd: &DensityMatrix,
    rho_even: &DensityMatrix,
    p_odd: f64,
    epsilon: f64,
) -> Result<DensityMatrix> {
    if rho_odd.dim() != rho_even.dim() {
        return Err(Error::DimensionMismatch(rho_odd.dim(), rho_even.dim()));
    }
    if !(0.0..=1.0).contains(&p_odd) || !(0.0..=1.0).contains(&epsilon) {
        return Err(domain("probabilities must lie in [0, 1]"));
    }
    let p_even = 1.0 - p_odd;
    let p_up = (1.0 - epsilon) * p_odd + epsilon * p_even;
    if !(p_up > 0.0) {
        return Err(Error::EmptyBranch("no weight on the ↑ herald".into()));
    }
    if epsilon == 0.0 {
        return Ok(rho_odd.clone());
    }
    if epsilon == 1.0 {
        return Ok(rho_even.clone());
    }
    let mixed = rho_odd.elements().scale((1.0 - epsilon) * p_odd / p_up)
        + rho_even.elements().scale(epsilon * p_even / p_up);
    DensityMatrix::from_unnormalized(mixed)
}

/// Per-photon branch data: kept amplitude `τ_s = r_s/α` and the loss-mode
/// cross overlaps `χ_{ss'} = Σ_j l_{s,j} l̄_{s',j}` at unit input amplitude.
struct PhotonBranches {
    tau_up: Complex64,
    tau_down: Complex64,
    chi_up_up: f64,
    chi_down_down: f64,
    chi_up_down: Complex64,
}

impl PhotonBranches {
    fn new(params: &CavityParams) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let up = branch_amplitudes(params, true, one);
        let down = branch_amplitudes(params, false, one);
        let dot = |x: &[Complex64; 3], y: &[Complex64; 3]| -> Complex64 {
            x.iter().zip(y.iter()).map(|(a, b)| a * b.conj()).sum()
        };
        Self {
            tau_up: up.r,
            tau_down: down.r,
            chi_up_up: dot(&up.loss_modes(), &up.loss_modes()).re,
            chi_down_down: dot(&down.loss_modes(), &down.loss_modes()).re,
            chi_up_down: dot(&up.loss_modes(), &down.loss_modes()),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_k χ^k A_k^s ρ A_k^{s'}†` with `A_k^s |n⟩ = √C(n,k) τ_s^{n−k} |n−k⟩`:
/// the reflected-mode block of branch `s` against branch `s'` after tracing
/// out `k` photons lost to the cavity loss modes.
fn branch_block(
    rho: &DMatrix<Complex64>,
    tau_left: Complex64,
    tau_right: Complex64,
    chi: Complex64,
) -> DMatrix<Complex64> {
    let dim = rho.nrows();
    let left_pow: Vec<Complex64> = (0..dim).map(|m| tau_left.powu(m as u32)).collect();
    let right_pow: Vec<Complex64> = (0..dim).map(|n| tau_right.conj().powu(n as u32)).collect();
    DMatrix::from_fn(dim, dim, |m, n| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut chi_k = Complex64::new(1.0, 0.0);
        for k in 0..dim - m.max(n) {
            let weight = (binomial(m + k, k) * binomial(n + k, k)).sqrt();
            acc += chi_k * weight * rho[(m + k, n + k)];
            chi_k *= chi;
        }
        left_pow[m] * right_pow[n] * acc
    })
}

/// Distills an arbitrary input state.
///
/// Each input photon is sent into the reflected mode with amplitude `τ_s`
/// and into the loss modes otherwise, depending on the atomic branch `s`.
/// Tracing out the loss modes turns the branch operators into Kraus families
/// indexed by the number `k` of lost photons; cross terms between branches
/// pick up `χ_{↑↓}^k`. The heralded operator is
/// `(T↑↑ + T↓↓ ∓ (T↑↓ + T↓↑))/4`, followed by post-cavity loss and detection
/// errors. `k` runs over every value the truncation admits, so nothing is
/// discarded inside the truncated space.
///
/// Returns the normalized state and the herald probability.
pub fn distill_general(
    rho_in: &DensityMatrix,
    config: &DistillationConfig,
    parity: Parity,
) -> Result<(DensityMatrix, f64)> {
    config.validate()?;
    let branches = PhotonBranches::new(&config.params);
    let rho = rho_in.elements();
    let real = |x: f64| Complex64::new(x, 0.0);
    let up_up = branch_block(rho, branches.tau_up, branches.tau_up, real(branches.chi_up_up));
    let down_down = branch_block(rho, branches.tau_down, branches.tau_down, real(branches.chi_down_down));
    let up_down = branch_block(rho, branches.tau_up, branches.tau_down, branches.chi_up_down);
    let cross = &up_down + up_down.adjoint();
    let base = (&up_up + &down_down).scale(0.25);
    let odd = &base - cross.scale(0.25);
    let even = &base + cross.scale(0.25);

    let t = config.transmission();
    let (odd, even) = if t < 1.0 {
        (bernoulli_map(&odd, t).0, bernoulli_map(&even, t).0)
    } else {
        (odd, even)
    };
    let mixed = mix_heralds(&odd, &even, config.detection_error, parity);
    let probability: f64 = mixed.diagonal().iter().map(|c| c.re).sum();
    let state = normalize_branch(mixed, &format!("{parity:?} herald of general input"))?;
    Ok((state, probability))
}

/// Overlap with the single-photon Fock state, `⟨1|ρ|1⟩`.
pub fn single_photon_fidelity(rho: &DensityMatrix) -> f64 {
    if rho.dim() < 2 {
        return 0.0;
    }
    rho.get(1, 1).re
}

/// Absolute two-and-more-photon suppression, `1 − Σ_{n≥2} ρ_nn`.
pub fn multi_photon_suppression(rho: &DensityMatrix) -> f64 {
    1.0 - rho.populations().iter().skip(2).sum::<f64>()
}

/// Suppression relative to a Poissonian state of mean `alpha_sq`:
/// `1 − P_ρ(n≥2) / P_coh(n≥2)`.
pub fn relative_multi_photon_suppression(rho: &DensityMatrix, alpha_sq: f64) -> Option<f64> {
    let coherent_tail = -(-alpha_sq).exp_m1() - alpha_sq * (-alpha_sq).exp();
    if !(coherent_tail > 0.0) {
        return None;
    }
    let tail: f64 = rho.populations().iter().skip(2).sum();
    Some(1.0 - tail / coherent_tail)
}

/// One point of an intensity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha_sq: f64,
    pub p_up: Option<f64>,
    pub f1: Option<f64>,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub p3: Option<f64>,
    pub suppression: Option<f64>,
    /// `ok`, or the reason the point was skipped.
    pub status: String,
}

impl SweepRow {
    fn evaluate(config: &DistillationConfig, alpha_sq: f64) -> Self {
        let attempt = || -> Result<Self> {
            if alpha_sq < 0.0 {
                return Err(domain(format!("alpha_sq = {alpha_sq} is negative")));
            }
            let alpha = alpha_sq.sqrt();
            let probs = herald_probability(config, alpha)?;
            let rho = distill_coherent(config, alpha, Parity::Odd)?;
            let pops = rho.populations();
            let pop = |n: usize| pops.get(n).copied();
            Ok(Self {
                alpha_sq,
                p_up: Some(probs.p_up),
                f1: Some(single_photon_fidelity(&rho)),
                p0: pop(0),
                p1: pop(1),
                p2: pop(2),
                p3: pop(3),
                suppression: Some(multi_photon_suppression(&rho)),
                status: "ok".into(),
            })
        };
        attempt().unwrap_or_else(|err| Self {
            alpha_sq,
            p_up: None,
            f1: None,
            p0: None,
            p1: None,
            p2: None,
            p3: None,
            suppression: None,
            status: match err {
                Error::EmptyBranch(_) => "empty_branch".into(),
                other => format!("error: {other}"),
            },
        })
    }
}

/// Evaluates the odd herald over a grid of mean input photon numbers.
///
/// Points run in parallel; the output order follows the grid. Failed points
/// are kept with a status instead of aborting the sweep.
pub fn sweep(config: &DistillationConfig, alpha_sq_grid: &[f64]) -> Vec<SweepRow> {
    alpha_sq_grid
        .par_iter()
        .map(|&a2| SweepRow::evaluate(config, a2))
        .collect()
}

/// Applies the pure-loss channel to an already heralded state.
pub fn apply_loss(rho: &DensityMatrix, loss: f64) -> Result<DensityMatrix> {
    pure_loss_channel(rho, 1.0 - loss)
}
