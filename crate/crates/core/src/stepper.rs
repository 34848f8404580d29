//! IMEX-DIRK Runge-Kutta time integration.
//!
//! A split system `u' = H(u) + G(u)` is advanced with
//!
//! ```text
//! u(i)  = u_n + dt sum_{k<i} Ã[i][k] H(u(k)) + dt sum_{k<=i} A[i][k] G(u(k))
//! u_n+1 = u_n + dt sum_i w̃[i] H(u(i))      + dt sum_i w[i] G(u(i))
//! ```
//!
//! where `H` is treated explicitly and `G` (stiff) implicitly. Implicit stage
//! derivatives are recovered from the stage solve as `(u(i) - rhs) / (dt A[i][i])`
//! instead of re-evaluating `G`, which avoids amplifying roundoff when `G` is
//! very stiff.

use crate::error::{invalid, Result};
use crate::pde::{inner_advection_coeff, outer_advection_coeff, FrontState};

/// Vector-space operations needed by the stepper.
pub trait ImexState: Clone {
    /// `self += alpha * x`
    fn axpy(&mut self, alpha: f64, x: &Self);
}

impl ImexState for f64 {
    fn axpy(&mut self, alpha: f64, x: &Self) {
        *self += alpha * x;
    }
}

impl ImexState for Vec<f64> {
    fn axpy(&mut self, alpha: f64, x: &Self) {
        for (a, b) in self.iter_mut().zip(x) {
            *a += alpha * b;
        }
    }
}

/// Right-hand side split into a non-stiff explicit part and a stiff implicit part.
pub trait SplitSystem<S: ImexState> {
    /// Explicit term `H(t, u)`.
    fn explicit(&mut self, t: f64, u: &S) -> Result<S>;
    /// Implicit term `G(t, u)`; only called for stages without an implicit solve.
    fn implicit(&mut self, t: f64, u: &S) -> Result<S>;
    /// Solves `u - coeff G(t, u) = rhs` for `u`.
    fn solve_implicit(&mut self, t: f64, coeff: f64, rhs: &S) -> Result<S>;
    /// Enforces algebraic constraints (boundary conditions) on a stage value.
    fn project(&mut self, _t: f64, _u: &mut S) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImexTableau {
    pub a_implicit: Vec<Vec<f64>>,
    pub a_explicit: Vec<Vec<f64>>,
    pub w_implicit: Vec<f64>,
    pub w_explicit: Vec<f64>,
    pub order: u32,
}

impl ImexTableau {
    /// Implicit-explicit midpoint (1, 2, 2): one implicit stage with
    /// coefficient 1/2 on top of the two-stage explicit midpoint rule.
    pub fn midpoint() -> Self {
        Self {
            a_implicit: vec![vec![0.0, 0.0], vec![0.0, 0.5]],
            a_explicit: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            w_implicit: vec![0.0, 1.0],
            w_explicit: vec![0.0, 1.0],
            order: 2,
        }
    }

    /// Forward/backward Euler pair, used as a first-order reference.
    pub fn euler() -> Self {
        Self {
            a_implicit: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
            a_explicit: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            w_implicit: vec![0.0, 1.0],
            w_explicit: vec![1.0, 0.0],
            order: 1,
        }
    }

    pub fn stages(&self) -> usize {
        self.w_explicit.len()
    }

    pub fn validate(&self) -> Result<()> {
        let nu = self.stages();
        let square = |m: &Vec<Vec<f64>>| m.len() == nu && m.iter().all(|r| r.len() == nu);
        if !square(&self.a_implicit) || !square(&self.a_explicit) || self.w_implicit.len() != nu {
            return Err(invalid("tableau", "inconsistent stage counts"));
        }
        for i in 0..nu {
            for j in 0..nu {
                if j >= i && self.a_explicit[i][j] != 0.0 {
                    return Err(invalid("tableau", format!("explicit entry ({i},{j}) must be zero")));
                }
                if j > i && self.a_implicit[i][j] != 0.0 {
                    return Err(invalid("tableau", format!("implicit entry ({i},{j}) must be zero")));
                }
            }
        }
        for (name, w) in [("implicit", &self.w_implicit), ("explicit", &self.w_explicit)] {
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-14 {
                return Err(invalid("tableau", format!("{name} weights sum to {s}, not 1")));
            }
        }
        Ok(())
    }

    fn c_explicit(&self, i: usize) -> f64 {
        self.a_explicit[i].iter().sum()
    }

    fn c_implicit(&self, i: usize) -> f64 {
        self.a_implicit[i].iter().sum()
    }

    fn explicit_needed(&self, k: usize) -> bool {
        self.w_explicit[k] != 0.0 || (k + 1..self.stages()).any(|i| self.a_explicit[i][k] != 0.0)
    }

    fn implicit_needed(&self, k: usize) -> bool {
        self.w_implicit[k] != 0.0 || (k + 1..self.stages()).any(|i| self.a_implicit[i][k] != 0.0)
    }
}

/// Advances `u` from `t` to `t + dt` with the given tableau.
pub fn imex_step<S, Sys>(tableau: &ImexTableau, system: &mut Sys, t: f64, dt: f64, u: &S) -> Result<S>
where
    S: ImexState,
    Sys: SplitSystem<S>,
{
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let nu = tableau.stages();
    let mut h_stages: Vec<Option<S>> = Vec::with_capacity(nu);
    let mut g_stages: Vec<Option<S>> = Vec::with_capacity(nu);

    for i in 0..nu {
        let mut rhs = u.clone();
        for k in 0..i {
            let ae = tableau.a_explicit[i][k];
            if ae != 0.0 {
                if let Some(h) = &h_stages[k] {
                    rhs.axpy(dt * ae, h);
                }
            }
            let ai = tableau.a_implicit[i][k];
            if ai != 0.0 {
                if let Some(g) = &g_stages[k] {
                    rhs.axpy(dt * ai, g);
                }
            }
        }
        let t_imp = t + tableau.c_implicit(i) * dt;
        let t_exp = t + tableau.c_explicit(i) * dt;
        let diag = tableau.a_implicit[i][i];
        let (stage, g) = if diag != 0.0 {
            let coeff = dt * diag;
            let mut stage = system.solve_implicit(t_imp, coeff, &rhs)?;
            let g = tableau.implicit_needed(i).then(|| {
                let mut g = stage.clone();
                g.axpy(-1.0, &rhs);
                scale(&mut g, 1.0 / coeff);
                g
            });
            system.project(t_imp, &mut stage)?;
            (stage, g)
        } else {
            let mut stage = rhs;
            if i > 0 {
                system.project(t_imp, &mut stage)?;
            }
            let g = if tableau.implicit_needed(i) {
                Some(system.implicit(t_imp, &stage)?)
            } else {
                None
            };
            (stage, g)
        };
        let h = if tableau.explicit_needed(i) {
            Some(system.explicit(t_exp, &stage)?)
        } else {
            None
        };
        h_stages.push(h);
        g_stages.push(g);
    }

    let mut next = u.clone();
    for i in 0..nu {
        if let (Some(h), w) = (&h_stages[i], tableau.w_explicit[i]) {
            if w != 0.0 {
                next.axpy(dt * w, h);
            }
        }
        if let (Some(g), w) = (&g_stages[i], tableau.w_implicit[i]) {
            if w != 0.0 {
                next.axpy(dt * w, g);
            }
        }
    }
    system.project(t + dt, &mut next)?;
    Ok(next)
}

fn scale<S: ImexState>(x: &mut S, alpha: f64) {
    // x <- alpha x, expressed through axpy
    let copy = x.clone();
    x.axpy(alpha - 1.0, &copy);
}

/// One step of the IMEX midpoint (1, 2, 2) scheme.
pub fn imex_midpoint_step<S, Sys>(system: &mut Sys, t: f64, dt: f64, u: &S) -> Result<S>
where
    S: ImexState,
    Sys: SplitSystem<S>,
{
    imex_step(&ImexTableau::midpoint(), system, t, dt, u)
}

/// Step-size control parameters (non-dimensional time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub cfl_target: f64,
    pub dt_max: f64,
}

/// Largest stable step for the explicit advection: `cfl * dz / max|c|`,
/// taken over both layers and capped at `dt_max`. Diffusion is implicit and
/// does not restrict the step.
pub fn select_dt(fs: &FrontState, omega_p: f64, n_z: usize, n_y: usize, ctl: &StepControl) -> Result<f64> {
    let mut dt = ctl.dt_max;
    let dz = 1.0 / n_z as f64;
    let dy = 1.0 / n_y as f64;
    // Both coefficients are affine in the mapped coordinate, so the extremes sit at the ends.
    let outer = outer_advection_coeff(0.0, fs)?
        .abs()
        .max(outer_advection_coeff(1.0, fs)?.abs());
    let inner = inner_advection_coeff(0.0, fs, omega_p)?
        .abs()
        .max(inner_advection_coeff(1.0, fs, omega_p)?.abs());
    if outer > 0.0 {
        dt = dt.min(ctl.cfl_target * dz / outer);
    }
    if inner > 0.0 {
        dt = dt.min(ctl.cfl_target * dy / inner);
    }
    Ok(dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// u' = lambda u, a fraction `theta` of it treated implicitly.
    struct Linear {
        lambda: f64,
        theta: f64,
    }

    impl SplitSystem<f64> for Linear {
        fn explicit(&mut self, _t: f64, u: &f64) -> Result<f64> {
            Ok((1.0 - self.theta) * self.lambda * u)
        }
        fn implicit(&mut self, _t: f64, u: &f64) -> Result<f64> {
            Ok(self.theta * self.lambda * u)
        }
        fn solve_implicit(&mut self, _t: f64, coeff: f64, rhs: &f64) -> Result<f64> {
            Ok(rhs / (1.0 - coeff * self.theta * self.lambda))
        }
    }

    struct Zero;
    impl SplitSystem<Vec<f64>> for Zero {
        fn explicit(&mut self, _t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
            Ok(vec![0.0; u.len()])
        }
        fn implicit(&mut self, _t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
            Ok(vec![0.0; u.len()])
        }
        fn solve_implicit(&mut self, _t: f64, _c: f64, rhs: &Vec<f64>) -> Result<Vec<f64>> {
            Ok(rhs.clone())
        }
    }

    fn integrate(tab: &ImexTableau, dt: f64, t_end: f64) -> f64 {
        integrate_split(tab, dt, t_end, 0.5)
    }

    fn integrate_split(tab: &ImexTableau, dt: f64, t_end: f64, theta: f64) -> f64 {
        let mut sys = Linear { lambda: -1.0, theta };
        let steps = (t_end / dt).round() as usize;
        let mut u = 1.0;
        for n in 0..steps {
            u = imex_step(tab, &mut sys, n as f64 * dt, dt, &u).unwrap();
        }
        u
    }

    #[test]
    fn tableaus_are_valid() {
        ImexTableau::midpoint().validate().unwrap();
        ImexTableau::euler().validate().unwrap();
        let mut bad = ImexTableau::midpoint();
        bad.a_explicit[1][1] = 0.3;
        assert!(bad.validate().is_err());
        let mut bad = ImexTableau::midpoint();
        bad.a_implicit[0][1] = 0.3;
        assert!(bad.validate().is_err());
        let mut bad = ImexTableau::midpoint();
        bad.w_explicit = vec![0.5, 0.6];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn midpoint_stage_algebra() {
        // u* = (1 + z/4)/(1 - z/4), u1 = 1 + z u*
        let z = -0.1;
        let u1 = integrate(&ImexTableau::midpoint(), 0.1, 0.1);
        let expected = 1.0 + z * (1.0 + z / 4.0) / (1.0 - z / 4.0);
        assert!((u1 - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_leaves_state() {
        let u = vec![1.0, 2.0, 3.0];
        let v = imex_midpoint_step(&mut Zero, 0.0, 0.3, &u).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn second_order_on_linear_decay() {
        let exact = (-1.0f64).exp();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| (integrate(&ImexTableau::midpoint(), dt, 1.0) - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!(p > 1.9, "observed order {p}");
        }
        let e1: Vec<f64> = [0.1, 0.05]
            .iter()
            // an even split cancels the leading Euler errors, so skew it
            .map(|&dt| (integrate_split(&ImexTableau::euler(), dt, 1.0, 0.8) - exact).abs())
            .collect();
        let p = (e1[0] / e1[1]).log2();
        assert!((p - 1.0).abs() < 0.15, "euler order {p}");
    }

    #[test]
    fn rejects_non_positive_dt() {
        assert!(imex_midpoint_step(&mut Linear { lambda: -1.0, theta: 0.5 }, 0.0, 0.0, &1.0).is_err());
    }

    #[test]
    fn step_selection() {
        let ctl = StepControl {
            cfl_target: 0.5,
            dt_max: 1.0,
        };
        let still = FrontState {
            a: 2.0,
            beta: 1.0,
            gamma: 0.0,
            ..FrontState::default()
        };
        assert_eq!(select_dt(&still, 0.5, 100, 100, &ctl).unwrap(), 1.0);

        // outer coefficient z (gamma_dot - beta_dot)/(beta - gamma) = -1 at z = 1
        let moving = FrontState {
            gamma_dot: -1.0,
            ..still
        };
        let dt = select_dt(&moving, 0.5, 100, 100, &ctl).unwrap();
        assert!((dt - 5e-3).abs() < 1e-15);

        // halving the layer width doubles the coefficient and halves dt
        let thin = FrontState {
            gamma: 0.5,
            ..moving
        };
        let dt_thin = select_dt(&thin, 0.5, 100, 100, &ctl).unwrap();
        assert!((dt_thin - dt / 2.0).abs() < 1e-15);
    }
}
