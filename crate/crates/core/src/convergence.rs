//! Observed orders of accuracy of the discretisation.

use crate::error::Result;
use crate::pde::{advection_term, diffusion_term, implicit_diffusion_solve, AdvectionScheme, FarBoundary};
use crate::simulation::{run, GridConfig, SimulationConfig};
use crate::stepper::{imex_midpoint_step, SplitSystem};

/// Errors on a refinement sequence and the observed orders between neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    /// `(h, error)` from coarse to fine.
    pub rows: Vec<(f64, f64)>,
    /// `log2(e_k / e_k+1)` for a halving sequence.
    pub orders: Vec<f64>,
}

impl OrderStudy {
    fn from_rows(rows: Vec<(f64, f64)>) -> Self {
        let orders = rows
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
            .collect();
        Self { rows, orders }
    }

    /// Order on the finest pair.
    pub fn observed(&self) -> f64 {
        self.orders.last().copied().unwrap_or(f64::NAN)
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `u' = lambda u` with the right-hand side split evenly.
struct ScalarDecay {
    lambda: f64,
}

impl SplitSystem<f64> for ScalarDecay {
    fn explicit(&mut self, _t: f64, u: &f64) -> Result<f64> {
        Ok(0.5 * self.lambda * u)
    }
    fn implicit(&mut self, _t: f64, u: &f64) -> Result<f64> {
        Ok(0.5 * self.lambda * u)
    }
    fn solve_implicit(&mut self, _t: f64, coeff: f64, rhs: &f64) -> Result<f64> {
        Ok(rhs / (1.0 - 0.5 * coeff * self.lambda))
    }
}

/// Global error at `t = 1` of the midpoint IMEX scheme on `u' = -u`, `u(0) = 1`.
pub fn scalar_temporal_study(dts: &[f64]) -> Result<OrderStudy> {
    let exact = (-1.0f64).exp();
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut sys = ScalarDecay { lambda: -1.0 };
        let steps = (1.0 / dt).round() as usize;
        let mut u = 1.0;
        for n in 0..steps {
            u = imex_midpoint_step(&mut sys, n as f64 * dt, dt, &u)?;
        }
        rows.push((dt, (u - exact).abs()));
    }
    Ok(OrderStudy::from_rows(rows))
}

/// `u_t = kappa u_zz - c u_z` on `[0, 1]` with homogeneous Dirichlet ends.
struct AdvectionDiffusion {
    kappa: f64,
    speed: Vec<f64>,
    h: f64,
    scheme: AdvectionScheme,
}

impl SplitSystem<Vec<f64>> for AdvectionDiffusion {
    fn explicit(&mut self, _t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
        advection_term(u, &self.speed, self.h, self.scheme)
    }
    fn implicit(&mut self, _t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(diffusion_term(u, self.kappa, self.h))
    }
    fn solve_implicit(&mut self, _t: f64, coeff: f64, rhs: &Vec<f64>) -> Result<Vec<f64>> {
        implicit_diffusion_solve(rhs, coeff * self.kappa, 0.0, FarBoundary::Dirichlet(0.0))
    }
}

/// Parameters of the manufactured advection-diffusion problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub kappa: f64,
    pub speed: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for ManufacturedCase {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            speed: 1.0,
            t_end: 0.2,
            dt: 2e-5,
        }
    }
}

impl ManufacturedCase {
    /// `exp(-(kappa pi² + c² / 4 kappa) t) exp(c z / 2 kappa) sin(pi z)`
    pub fn exact(&self, z: f64, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let k = self.speed / (2.0 * self.kappa);
        let rate = self.kappa * pi * pi + self.speed * self.speed / (4.0 * self.kappa);
        (-rate * t).exp() * (k * z).exp() * (pi * z).sin()
    }
}

/// Max-norm error relative to the peak of the exact solution, per grid size.
pub fn spatial_order_study(case: &ManufacturedCase, scheme: AdvectionScheme, sizes: &[usize]) -> Result<OrderStudy> {
    let mut rows = Vec::with_capacity(sizes.len());
    let steps = (case.t_end / case.dt).round() as usize;
    for &n in sizes {
        let h = 1.0 / n as f64;
        let mut sys = AdvectionDiffusion {
            kappa: case.kappa,
            speed: vec![case.speed; n + 1],
            h,
            scheme,
        };
        let mut u: Vec<f64> = (0..=n).map(|i| case.exact(i as f64 * h, 0.0)).collect();
        for s in 0..steps {
            u = imex_midpoint_step(&mut sys, s as f64 * case.dt, case.dt, &u)?;
        }
        let t = steps as f64 * case.dt;
        let (mut err, mut peak) = (0.0f64, 0.0f64);
        for (i, v) in u.iter().enumerate() {
            let e = case.exact(i as f64 * h, t);
            err = err.max((v - e).abs());
            peak = peak.max(e.abs());
        }
        rows.push((h, err / peak));
    }
    Ok(OrderStudy::from_rows(rows))
}

/// Total thickness at the horizon before and after one refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConvergence {
    pub coarse_total: f64,
    pub fine_total: f64,
}

impl SelfConvergence {
    pub fn relative_change(&self) -> f64 {
        ((self.fine_total - self.coarse_total) / self.coarse_total).abs()
    }
}

/// Reruns `config` with both grids doubled and `dt_max` halved.
pub fn self_convergence(config: &SimulationConfig) -> Result<SelfConvergence> {
    let coarse = run(config)?;
    let fine_cfg = SimulationConfig {
        grid: GridConfig {
            n_z: config.grid.n_z * 2,
            n_y: config.grid.n_y * 2,
            dt_max: config.grid.dt_max / 2.0,
            ..config.grid
        },
        ..config.clone()
    };
    let fine = run(&fine_cfg)?;
    Ok(SelfConvergence {
        coarse_total: coarse.last().total,
        fine_total: fine.last().total,
    })
}

pub const TEMPORAL_DTS: [f64; 3] = [0.1, 0.05, 0.025];
pub const SPATIAL_SIZES: [usize; 4] = [20, 40, 80, 160];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub temporal: OrderStudy,
    pub scheme: AdvectionScheme,
    pub spatial: OrderStudy,
    pub self_convergence: Option<SelfConvergence>,
}

/// Scalar temporal study, manufactured spatial study with `scheme`, and
/// optionally the full-model self-convergence check on `config`.
pub fn battery(scheme: AdvectionScheme, config: Option<&SimulationConfig>) -> Result<ConvergenceReport> {
    Ok(ConvergenceReport {
        temporal: scalar_temporal_study(&TEMPORAL_DTS)?,
        scheme,
        spatial: spatial_order_study(&ManufacturedCase::default(), scheme, &SPATIAL_SIZES)?,
        self_convergence: config.map(self_convergence).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_solution_satisfies_equation() {
        let case = ManufacturedCase::default();
        let (z, t, e) = (0.37, 0.05, 1e-4);
        let u = |z, t| case.exact(z, t);
        let ut = (u(z, t + e) - u(z, t - e)) / (2.0 * e);
        let uz = (u(z + e, t) - u(z - e, t)) / (2.0 * e);
        let uzz = (u(z + e, t) - 2.0 * u(z, t) + u(z - e, t)) / (e * e);
        let r = ut - (case.kappa * uzz - case.speed * uz);
        assert!(r.abs() < 1e-5 * u(z, t).abs().max(1.0), "residual {r}");
        assert_eq!(case.exact(0.0, 0.3), 0.0);
        assert!(case.exact(1.0, 0.3).abs() < 1e-12);
    }

    /// S diffusing through a frozen unit-width brochantite layer.
    struct FrozenOuter {
        fs: crate::pde::FrontState,
        dhat: crate::pde::Diffusivities,
        n: usize,
    }

    impl FrozenOuter {
        fn fields(&self, s: &[f64]) -> crate::pde::LayerFields {
            let mut f = crate::pde::LayerFields::zeros(self.n, self.n);
            f.s.copy_from_slice(s);
            f
        }
    }

    impl SplitSystem<Vec<f64>> for FrozenOuter {
        fn explicit(&mut self, _t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
            let [s, ..] = crate::pde::outer_split_rhs(&self.fields(u), &self.fs, &self.dhat, AdvectionScheme::Upwind)?;
            Ok(s.explicit)
        }
        fn implicit(&mut self, _t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
            let [s, ..] = crate::pde::outer_split_rhs(&self.fields(u), &self.fs, &self.dhat, AdvectionScheme::Upwind)?;
            Ok(s.implicit)
        }
        fn solve_implicit(&mut self, _t: f64, coeff: f64, rhs: &Vec<f64>) -> Result<Vec<f64>> {
            implicit_diffusion_solve(rhs, coeff * self.dhat.d_s, 0.0, FarBoundary::Dirichlet(0.0))
        }
    }

    #[test]
    fn fourier_mode_decays_at_analytic_rate() {
        let pi = std::f64::consts::PI;
        let dhat = crate::pde::Diffusivities {
            d_g: 1.0,
            d_s: 0.5,
            d_o: 1.0,
            d_w: 1.0,
        };
        let fs = crate::pde::FrontState {
            a: 2.0,
            b: 1.0,
            beta: 1.0,
            gamma: 0.0,
            ..Default::default()
        };
        let t_end = 0.2;
        let err = |n: usize, dt: f64| {
            let mut sys = FrozenOuter { fs, dhat, n };
            let mut u: Vec<f64> = (0..=n).map(|i| (pi * i as f64 / n as f64).sin()).collect();
            let steps = (t_end / dt).round() as usize;
            for k in 0..steps {
                u = imex_midpoint_step(&mut sys, k as f64 * dt, dt, &u).unwrap();
            }
            let amp = (-pi * pi * dhat.d_s * t_end).exp();
            (0..=n)
                .map(|i| (u[i] - amp * (pi * i as f64 / n as f64).sin()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(20, 0.01), err(40, 0.005));
        assert!(e1 < 5e-3, "{e1}");
        let p = (e1 / e2).log2();
        assert!(p > 1.8, "order {p}");
    }

    #[test]
    fn temporal_order_is_two() {
        let s = scalar_temporal_study(&TEMPORAL_DTS).unwrap();
        assert!(s.min_order() >= 1.9, "{:?}", s.orders);
    }

    #[test]
    fn spatial_orders() {
        let case = ManufacturedCase::default();
        let up = spatial_order_study(&case, AdvectionScheme::Upwind, &SPATIAL_SIZES).unwrap();
        assert!((up.observed() - 1.0).abs() < 0.2, "{:?}", up);
        let cen = spatial_order_study(&case, AdvectionScheme::Central, &SPATIAL_SIZES).unwrap();
        assert!((cen.observed() - 2.0).abs() < 0.2, "{:?}", cen);
    }
}
