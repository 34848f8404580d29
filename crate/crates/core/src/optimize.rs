//! Box-bounded Nelder-Mead simplex minimiser.
//!
//! Trial points leaving the box are mirrored back across the violated face.
//! Vertex evaluations that do not depend on each other (initial simplex,
//! shrink steps) run in parallel.

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Self {
        Self {
            lower: vec![lower; n],
            upper: vec![upper; n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Mirrors each coordinate back into `[lower, upper]`.
    pub fn reflect(&self, x: &mut [f64]) {
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            for _ in 0..4 {
                if *v < lo {
                    *v = 2.0 * lo - *v;
                } else if *v > hi {
                    *v = 2.0 * hi - *v;
                } else {
                    break;
                }
            }
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Offset of the initial vertices from the start point along each axis.
    pub initial_step: f64,
    /// Converged once every vertex lies within this distance (max norm) of the best one.
    pub spread_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.25,
            spread_tol: 1e-3,
            max_evals: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn spread(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Minimises `f` inside `bounds`, restarting from the best vertex until a
/// restart no longer improves the value. Restarts recover from simplices that
/// collapsed against a face of the box.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &Bounds, opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut best = simplex_search(&f, x0, bounds, opts, opts.max_evals);
    for _ in 0..8 {
        if !best.converged || best.evaluations >= opts.max_evals {
            break;
        }
        let next = simplex_search(&f, &best.x, bounds, opts, opts.max_evals - best.evaluations);
        let improved = next.value < best.value - 1e-12 * best.value.abs().max(1e-300);
        let evaluations = best.evaluations + next.evaluations;
        let iterations = best.iterations + next.iterations;
        if improved {
            best = Minimum {
                evaluations,
                iterations,
                ..next
            };
        } else {
            best.evaluations = evaluations;
            best.iterations = iterations;
            best.converged = next.converged || best.converged;
            break;
        }
    }
    best
}

fn simplex_search<F>(f: &F, x0: &[f64], bounds: &Bounds, opts: &NelderMeadOptions, budget: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut start = x0.to_vec();
    bounds.reflect(&mut start);

    let mut points = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        p[i] += opts.initial_step;
        if p[i] > bounds.upper[i] {
            p[i] = start[i] - opts.initial_step;
        }
        bounds.reflect(&mut p);
        points.push(p);
    }
    let values: Vec<f64> = points.par_iter().map(|p| sanitize(f(p))).collect();
    let mut evals = points.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = points.into_iter().zip(values).collect();
    let mut iterations = 0;

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));

    loop {
        order(&mut simplex);
        if spread(&simplex) < opts.spread_tol {
            let (x, value) = simplex.swap_remove(0);
            return Minimum {
                x,
                value,
                evaluations: evals,
                iterations,
                converged: true,
            };
        }
        if evals >= budget {
            let (x, value) = simplex.swap_remove(0);
            return Minimum {
                x,
                value,
                evaluations: evals,
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
            bounds.reflect(&mut p);
            p
        };
        let mut eval = |p: &[f64]| {
            evals += 1;
            sanitize(f(p))
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
        let (xc, fc) = if fr < worst.1 {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].0.clone();
        let shrunk: Vec<Vec<f64>> = simplex[1..]
            .iter()
            .map(|(x, _)| {
                let mut p: Vec<f64> = x.iter().zip(&best).map(|(v, b)| b + 0.5 * (v - b)).collect();
                bounds.reflect(&mut p);
                p
            })
            .collect();
        let vals: Vec<f64> = shrunk.par_iter().map(|p| sanitize(f(p))).collect();
        evals += shrunk.len();
        for (slot, (p, v)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(vals)) {
            *slot = (p, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            initial_step: 0.5,
            spread_tol: 1e-8,
            max_evals: 5000,
        };
        let m = minimize(f, &[-1.2, 1.0], &Bounds::uniform(2, -5.0, 5.0), &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn bound_constrained_minimum_sits_on_face() {
        // unconstrained minimum at (3, -2), box [-1, 1]^2
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2);
        let b = Bounds::uniform(2, -1.0, 1.0);
        let m = minimize(f, &[0.0, 0.0], &b, &NelderMeadOptions::default());
        assert!(b.contains(&m.x));
        assert!((m.x[0] - 1.0).abs() < 1e-2 && (m.x[1] + 1.0).abs() < 1e-2, "{:?}", m.x);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let opts = NelderMeadOptions {
            max_evals: 10,
            spread_tol: 1e-12,
            ..Default::default()
        };
        let m = minimize(f, &[1.0, 1.0, 1.0], &Bounds::uniform(3, -2.0, 2.0), &opts);
        assert!(!m.converged);
        assert!(m.evaluations >= 10);
    }

    #[test]
    fn nan_is_rejected_point() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] + 0.2).powi(2) };
        let m = minimize(f, &[0.0], &Bounds::uniform(1, -1.0, 1.0), &NelderMeadOptions::default());
        assert!((m.x[0] + 0.2).abs() < 1e-3);
    }

    #[test]
    fn reflection() {
        let b = Bounds::uniform(1, 0.0, 1.0);
        let mut x = [1.25];
        b.reflect(&mut x);
        assert!((x[0] - 0.75).abs() < 1e-15);
        let mut x = [-0.1];
        b.reflect(&mut x);
        assert!((x[0] - 0.1).abs() < 1e-15);
        let mut x = [17.0];
        b.reflect(&mut x);
        assert!(b.contains(&x));
    }
}
