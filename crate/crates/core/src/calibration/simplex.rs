//! Nelder–Mead simplex minimization inside a box. Trial points are clamped
//! to the bounds before evaluation.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evaluations: usize,
    /// Stop when the objective spread across the simplex drops below this.
    pub f_tol: f64,
    /// ...and every vertex lies within this (relative to the box size) of the best.
    pub x_tol: f64,
    /// Initial edge length as a fraction of each box side.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 4000,
            f_tol: 1e-14,
            x_tol: 1e-7,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

pub fn minimize<F>(f: F, start: &[f64], bounds: &[(f64, f64)], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x0 = start.to_vec();
    clamp(&mut x0, bounds);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&x0);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = opts.initial_step * (hi - lo);
        let mut x = x0.clone();
        // Step away from the nearer wall so the vertex stays distinct.
        x[i] += if x[i] + step <= hi { step } else { -step };
        clamp(&mut x, bounds);
        let v = eval(&x);
        simplex.push((x, v));
    }

    let scale: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo).max(f64::MIN_POSITIVE)).collect();
    let mut converged = false;
    while evaluations.get() < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).zip(&scale).map(|((a, b), s)| (a - b).abs() / s))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && size <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut x, bounds);
            x
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = vertex.0.iter().zip(&best_x).map(|(v, b)| b + 0.5 * (v - b)).collect();
            clamp(&mut x, bounds);
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexResult {
        x,
        value,
        evaluations: evaluations.get(),
        converged,
    }
}
