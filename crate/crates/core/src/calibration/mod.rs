//! Loss-budget arithmetic and the three-parameter fit of the imperfection
//! model (total loss, detection error, cavity detuning) to measured Fock
//! populations.

pub mod simplex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::cavity::CavityParams;
use crate::distillation::{distill_coherent, DistillationConfig, Parity, PAPER_DOWNSTREAM_LOSS};
use crate::error::{domain, Error, Result};
use crate::fockspace::DEFAULT_DIM;
use simplex::{minimize, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossItem {
    pub label: String,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub items: Vec<LossItem>,
}

impl LossBudget {
    pub fn new(items: Vec<LossItem>) -> Result<Self> {
        for item in &items {
            if !(0.0..1.0).contains(&item.loss) {
                return Err(domain(format!("loss `{}` = {} outside [0, 1)", item.label, item.loss)));
            }
        }
        Ok(Self { items })
    }

    /// Propagation and detection losses of the homodyne setup.
    pub fn experiment() -> Self {
        Self::from_csv(include_str!("../../data/loss_budget.csv").as_bytes()).expect("bundled budget is valid")
    }

    /// Reads CSV with header `label,loss`; an empty file is an empty budget.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        if r.headers()?.is_empty() {
            return Ok(Self::default());
        }
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["label", "loss"] {
            return Err(Error::Config(format!("budget header must be `label,loss`, found {headers:?}")));
        }
        let items = r.deserialize().collect::<std::result::Result<Vec<LossItem>, _>>()?;
        Self::new(items)
    }

    pub fn total(&self) -> f64 {
        combine_losses(self)
    }
}

/// `1 − Π(1 − L_i)`.
pub fn combine_losses(budget: &LossBudget) -> f64 {
    1.0 - budget.items.iter().map(|i| 1.0 - i.loss).product::<f64>()
}

/// Loss left after removing `corrected` from `total`: `1 − (1−total)/(1−corrected)`.
pub fn residual_loss(total: f64, corrected: f64) -> Result<f64> {
    if !(corrected < 1.0) {
        return Err(domain(format!("corrected loss {corrected} must be < 1")));
    }
    if total < corrected {
        return Err(Error::InconsistentBudget { total, corrected });
    }
    Ok(1.0 - (1.0 - total) / (1.0 - corrected))
}

/// Measured populations of the loss-corrected, odd-heralded state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub alpha_sq: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

pub fn read_observations<R: Read>(reader: R) -> Result<Vec<Observation>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["alpha_sq", "p0", "p1", "p2"] {
        return Err(Error::Config(format!(
            "observation header must be `alpha_sq,p0,p1,p2`, found {headers:?}"
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_observations<W: Write>(writer: W, rows: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Imperfection parameters of the production process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Imperfections {
    /// Total loss relative to the ideal state.
    pub loss: f64,
    pub epsilon: f64,
    /// 2π·MHz.
    pub delta_c: f64,
}

impl Imperfections {
    pub fn paper() -> Self {
        Self {
            loss: crate::distillation::PAPER_FIT_LOSS,
            epsilon: crate::distillation::PAPER_DETECTION_ERROR,
            delta_c: crate::distillation::PAPER_DELTA_C,
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.loss, self.epsilon, self.delta_c]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self {
            loss: x[0],
            epsilon: x[1],
            delta_c: x[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub loss: (f64, f64),
    pub epsilon: (f64, f64),
    pub delta_c: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            loss: (0.0, 0.8),
            epsilon: (0.0, 0.1),
            delta_c: (-2.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub bounds: FitBounds,
    /// Loss removed from the data before fitting; the fitted loss cannot go below it.
    pub correction: f64,
    pub restarts: usize,
    pub dim: usize,
    pub simplex: SimplexOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bounds: FitBounds::default(),
            correction: PAPER_DOWNSTREAM_LOSS,
            restarts: 8,
            dim: DEFAULT_DIM,
            simplex: SimplexOptions::default(),
        }
    }
}

impl FitOptions {
    fn box_bounds(&self) -> [(f64, f64); 3] {
        let b = &self.bounds;
        [(b.loss.0.max(self.correction), b.loss.1), b.epsilon, b.delta_c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub start: [f64; 3],
    pub start_residual: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub l_fit: f64,
    pub epsilon: f64,
    pub delta_c: f64,
    /// Sum of squared population errors.
    pub residual: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub restarts: Vec<RestartRecord>,
}

impl FitResult {
    pub fn imperfections(&self) -> Imperfections {
        Imperfections {
            loss: self.l_fit,
            epsilon: self.epsilon,
            delta_c: self.delta_c,
        }
    }
}

/// Distillation configuration the populations are compared against: the
/// loss not removed by `correction` stays on the state.
pub fn model_config(params: &CavityParams, imp: &Imperfections, correction: f64, dim: usize) -> Result<DistillationConfig> {
    Ok(DistillationConfig {
        params: params.with_delta_c(imp.delta_c),
        detection_error: imp.epsilon,
        uncorrected_loss: residual_loss(imp.loss, correction)?,
        downstream_loss: 0.0,
        dim,
    })
}

/// Model `(p0, p1, p2)` of the odd-heralded state at each α².
pub fn model_populations(
    params: &CavityParams,
    imp: &Imperfections,
    correction: f64,
    dim: usize,
    alpha_sq: &[f64],
) -> Result<Vec<Observation>> {
    let config = model_config(params, imp, correction, dim)?;
    alpha_sq
        .iter()
        .map(|&a2| {
            let pops = distill_coherent(&config, a2.sqrt(), Parity::Odd)?.populations();
            Ok(Observation {
                alpha_sq: a2,
                p0: pops[0],
                p1: pops[1],
                p2: pops[2],
            })
        })
        .collect()
}

/// Sum over rows and n ∈ {0, 1, 2} of squared population errors.
pub fn fit_objective(
    observations: &[Observation],
    params: &CavityParams,
    imp: &Imperfections,
    correction: f64,
    dim: usize,
) -> f64 {
    let grid: Vec<f64> = observations.iter().map(|o| o.alpha_sq).collect();
    match model_populations(params, imp, correction, dim, &grid) {
        Ok(model) => model
            .iter()
            .zip(observations)
            .map(|(m, o)| (m.p0 - o.p0).powi(2) + (m.p1 - o.p1).powi(2) + (m.p2 - o.p2).powi(2))
            .sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Forward-model populations with multiplicative Gaussian noise of relative
/// size `relative_noise`.
pub fn synthetic_observations(
    params: &CavityParams,
    truth: &Imperfections,
    correction: f64,
    alpha_sq: &[f64],
    relative_noise: f64,
    seed: u64,
) -> Result<Vec<Observation>> {
    let clean = model_populations(params, truth, correction, DEFAULT_DIM, alpha_sq)?;
    if relative_noise == 0.0 {
        return Ok(clean);
    }
    let normal = Normal::new(0.0, relative_noise).map_err(|e| domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(clean
        .into_iter()
        .map(|o| Observation {
            alpha_sq: o.alpha_sq,
            p0: o.p0 * (1.0 + normal.sample(&mut rng)),
            p1: o.p1 * (1.0 + normal.sample(&mut rng)),
            p2: o.p2 * (1.0 + normal.sample(&mut rng)),
        })
        .collect())
}

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Start points spread over the box by a Halton sequence.
pub fn restart_points(opts: &FitOptions) -> Vec<[f64; 3]> {
    let bounds = opts.box_bounds();
    (1..=opts.restarts)
        .map(|k| {
            let mut p = [0.0; 3];
            for (d, base) in [2, 3, 5].into_iter().enumerate() {
                let (lo, hi) = bounds[d];
                p[d] = lo + halton(k, base) * (hi - lo);
            }
            p
        })
        .collect()
}

/// Fit with the default options: the 8-restart bounded simplex and the
/// downstream correction of the experiment.
pub fn fit_imperfections(observations: &[Observation], params: &CavityParams, bounds: FitBounds) -> Result<FitResult> {
    fit_imperfections_with(
        observations,
        params,
        &FitOptions {
            bounds,
            ..FitOptions::default()
        },
    )
}

pub fn fit_imperfections_with(observations: &[Observation], params: &CavityParams, opts: &FitOptions) -> Result<FitResult> {
    let mut distinct: Vec<f64> = observations.iter().map(|o| o.alpha_sq).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(domain(format!(
            "need observations at ≥ 4 distinct α², got {}",
            distinct.len()
        )));
    }
    if opts.restarts == 0 {
        return Err(domain("at least one restart is required"));
    }
    let bounds = opts.box_bounds();
    if bounds.iter().any(|(lo, hi)| lo > hi) {
        return Err(domain(format!("empty search box {bounds:?}")));
    }
    let objective = |x: &[f64]| fit_objective(observations, params, &Imperfections::from_slice(x), opts.correction, opts.dim);
    let runs: Vec<(RestartRecord, Vec<f64>, usize)> = restart_points(opts)
        .par_iter()
        .map(|start| {
            let res = minimize(objective, start, &bounds, &opts.simplex);
            let record = RestartRecord {
                start: *start,
                start_residual: objective(start),
                residual: res.value,
                converged: res.converged,
            };
            (record, res.x, res.evaluations)
        })
        .collect();
    // Lowest residual wins; earlier restarts win ties.
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.0.residual < runs[best].0.residual {
            best = i;
        }
    }
    let x = Imperfections::from_slice(&runs[best].1);
    let converged = runs[best].0.converged;
    if !converged {
        log::warn!("simplex did not converge; returning best point found");
    }
    Ok(FitResult {
        l_fit: x.loss,
        epsilon: x.epsilon,
        delta_c: x.delta_c,
        residual: runs[best].0.residual,
        converged,
        evaluations: runs.iter().map(|r| r.2).sum(),
        restarts: runs.into_iter().map(|r| r.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn experiment_budget_total() {
        let b = LossBudget::experiment();
        assert_eq!(b.items.len(), 11);
        assert_abs_diff_eq!(b.total(), 0.251, epsilon = 1e-3);
    }

    #[test]
    fn combine_trivial_cases() {
        assert_eq!(combine_losses(&LossBudget::default()), 0.0);
        let one = LossBudget::new(vec![LossItem { label: "x".into(), loss: 0.3 }]).unwrap();
        assert_abs_diff_eq!(combine_losses(&one), 0.3, epsilon = 1e-15);
        assert!(LossBudget::new(vec![LossItem { label: "x".into(), loss: 1.0 }]).is_err());
    }

    #[test]
    fn residual_loss_examples() {
        assert_abs_diff_eq!(residual_loss(0.352, 0.251).unwrap(), 0.135, epsilon = 1e-3);
        assert_abs_diff_eq!(residual_loss(0.4, 0.0).unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(residual_loss(0.251, 0.251).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(residual_loss(0.2, 0.251), Err(Error::InconsistentBudget { .. })));
    }

    #[test]
    fn budget_csv_parsing() {
        assert_eq!(LossBudget::from_csv("".as_bytes()).unwrap().total(), 0.0);
        let b = LossBudget::from_csv("label,loss\na,0.1\nb,0.2\n".as_bytes()).unwrap();
        assert_abs_diff_eq!(b.total(), 0.28, epsilon = 1e-12);
        assert!(LossBudget::from_csv("name,value\na,0.1\n".as_bytes()).is_err());
    }

    #[test]
    fn halton_points_are_inside_the_box() {
        let opts = FitOptions::default();
        let pts = restart_points(&opts);
        assert_eq!(pts.len(), 8);
        for p in pts {
            assert!(p[0] >= opts.correction && p[0] <= 0.8);
            assert!((0.0..=0.1).contains(&p[1]));
            assert!((-2.0..=2.0).contains(&p[2]));
        }
    }

    #[test]
    fn fit_rejects_too_few_rows() {
        let rows = vec![
            Observation {
                alpha_sq: 0.1,
                p0: 0.5,
                p1: 0.5,
                p2: 0.0
            };
            5
        ];
        assert!(fit_imperfections(&rows, &CavityParams::paper(), FitBounds::default()).is_err());
    }

    #[test]
    fn noiseless_trivial_fit() {
        let params = CavityParams::paper();
        let truth = Imperfections {
            loss: 0.0,
            epsilon: 0.0,
            delta_c: 0.0,
        };
        let grid = [0.1, 0.3, 0.6, 1.0, 1.6];
        let obs = synthetic_observations(&params, &truth, 0.0, &grid, 0.0, 0).unwrap();
        let opts = FitOptions {
            correction: 0.0,
            ..FitOptions::default()
        };
        let fit = fit_imperfections_with(&obs, &params, &opts).unwrap();
        assert!(fit.residual < 1e-10, "{fit:?}");
        assert_abs_diff_eq!(fit.l_fit, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.epsilon, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.delta_c, 0.0, epsilon = 2e-2);
        for r in &fit.restarts {
            assert!(fit.residual <= r.start_residual);
        }
    }
}
