//! Front-fixed, non-dimensional transport equations of the two layers.
//!
//! The brochantite layer `gamma <= x <= beta` is mapped onto `z in [0, 1]`
//! (`z = 0` at the air side) and carries SO₂ `S`, water `W` and oxygen `O`.
//! The cuprite layer `beta <= x <= a` is mapped onto `y in [0, 1]` (`y = 0`
//! at the brochantite side) and carries oxygen `G`. Every concentration obeys
//!
//! ```text
//! u_tau = kappa u_zz - c(z) u_z
//! ```
//!
//! with `kappa = D / width^2` and an advection speed `c` produced by the moving
//! fronts and the mapping. Diffusion is the stiff (implicit) part and
//! advection the explicit part.

use crate::error::{PatinaError, Result};
use crate::materials::{MaterialTable, SwellingRatios};
use crate::tridiag::solve_tridiagonal;

/// Reference scales of the non-dimensionalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    /// Reference length, cm.
    pub lambda: f64,
    /// Reference time, s.
    pub t_r: f64,
    /// SO₂ reference concentration, g/cm³.
    pub s_r: f64,
    /// Water reference concentration, g/cm³.
    pub w_r: f64,
    /// Oxygen reference concentration, g/cm³; shared by both layers so the
    /// interface condition is a plain copy.
    pub o_r: f64,
}

impl Scales {
    pub fn g_r(&self) -> f64 {
        self.o_r
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("t_r", self.t_r),
            ("S_r", self.s_r),
            ("W_r", self.w_r),
            ("O_r", self.o_r),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::error::invalid(name, format!("scale must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Converts a dimensional diffusivity (cm²/s) to `t_r D / lambda²`.
    pub fn hat_diffusivity(&self, d: f64) -> f64 {
        self.t_r / (self.lambda * self.lambda) * d
    }

    /// Reference time in hours.
    pub fn t_r_hours(&self) -> f64 {
        self.t_r / 3600.0
    }
}

/// Diffusivities of oxygen in cuprite (`d_g`) and SO₂, oxygen and water in
/// brochantite. Dimensional (cm²/s) unless produced by [`Diffusivities::hatted`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusivities {
    pub d_g: f64,
    pub d_s: f64,
    pub d_o: f64,
    pub d_w: f64,
}

impl Diffusivities {
    /// Values calibrated against the laboratory chamber campaign.
    pub const fn calibrated() -> Self {
        Self {
            d_g: 9.9e-9,
            d_s: 3.96e-5,
            d_o: 9.9e-6,
            d_w: 3.96e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("D_g", self.d_g), ("D_s", self.d_s), ("D_o", self.d_o), ("D_w", self.d_w)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn hatted(&self, scales: &Scales) -> Self {
        Self {
            d_g: scales.hat_diffusivity(self.d_g),
            d_s: scales.hat_diffusivity(self.d_s),
            d_o: scales.hat_diffusivity(self.d_o),
            d_w: scales.hat_diffusivity(self.d_w),
        }
    }
}

/// Positions of the three interfaces and their velocities.
///
/// `a` and `b` are the consumed thicknesses of copper and cuprite. The
/// physical interfaces follow from swelling: `beta = b - omega_p a` and
/// `gamma = -(omega_p a + omega_b b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrontState {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a_dot: f64,
    pub b_dot: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
}

impl FrontState {
    pub fn from_consumption(a: f64, b: f64, sw: &SwellingRatios) -> Self {
        Self {
            a,
            b,
            beta: b - sw.omega_p * a,
            gamma: -(sw.omega_p * a + sw.omega_b * b),
            ..Self::default()
        }
    }

    /// Sets `a_dot`, `b_dot` and the interface velocities implied by them.
    pub fn with_rates(mut self, a_dot: f64, b_dot: f64, sw: &SwellingRatios) -> Self {
        self.a_dot = a_dot;
        self.b_dot = b_dot;
        self.beta_dot = b_dot - sw.omega_p * a_dot;
        self.gamma_dot = -(sw.omega_p * a_dot + sw.omega_b * b_dot);
        self
    }

    pub fn outer_width(&self) -> f64 {
        self.beta - self.gamma
    }

    pub fn inner_width(&self) -> f64 {
        self.a - self.beta
    }

    /// Strict ordering `gamma < beta < a`.
    pub fn check_ordering(&self) -> Result<()> {
        if self.gamma < self.beta && self.beta < self.a {
            Ok(())
        } else {
            Err(PatinaError::FrontOrdering {
                a: self.a,
                beta: self.beta,
                gamma: self.gamma,
            })
        }
    }

    /// Multiplies positions by `len` and velocities by `len / time`.
    pub fn scaled(&self, len: f64, time: f64) -> Self {
        let v = len / time;
        Self {
            a: self.a * len,
            b: self.b * len,
            beta: self.beta * len,
            gamma: self.gamma * len,
            a_dot: self.a_dot * v,
            b_dot: self.b_dot * v,
            beta_dot: self.beta_dot * v,
            gamma_dot: self.gamma_dot * v,
        }
    }
}

/// Concentration profiles on the two unit grids.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFields {
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
}

impl LayerFields {
    pub fn zeros(n_z: usize, n_y: usize) -> Self {
        Self {
            s: vec![0.0; n_z + 1],
            w: vec![0.0; n_z + 1],
            o: vec![0.0; n_z + 1],
            g: vec![0.0; n_y + 1],
        }
    }

    /// Number of outer intervals.
    pub fn n_z(&self) -> usize {
        self.s.len() - 1
    }

    /// Number of inner intervals.
    pub fn n_y(&self) -> usize {
        self.g.len() - 1
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.s.len();
        for len in [self.w.len(), self.o.len()] {
            if len != n {
                return Err(PatinaError::GridMismatch { expected: n, got: len });
            }
        }
        if n < 5 || self.g.len() < 5 {
            return Err(PatinaError::GridMismatch {
                expected: 5,
                got: n.min(self.g.len()),
            });
        }
        Ok(())
    }

    pub fn min_value(&self) -> f64 {
        self.s
            .iter()
            .chain(&self.w)
            .chain(&self.o)
            .chain(&self.g)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn axpy(&mut self, alpha: f64, x: &LayerFields) {
        for (u, v) in [
            (&mut self.s, &x.s),
            (&mut self.w, &x.w),
            (&mut self.o, &x.o),
            (&mut self.g, &x.g),
        ] {
            for (p, q) in u.iter_mut().zip(v) {
                *p += alpha * q;
            }
        }
    }
}

/// Non-dimensional constants of the front and boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StefanConstants {
    /// SO₂ flux to cuprite consumption rate at `beta`.
    pub omega_s: f64,
    /// Oxygen flux to copper consumption rate at `a`.
    pub omega_g: f64,
    /// Water consumed per unit cuprite consumption at `beta`.
    pub gamma_w: f64,
    /// Oxygen consumed per unit cuprite consumption at `beta`.
    pub gamma_o: f64,
}

impl StefanConstants {
    /// `dhat` must already be non-dimensional.
    pub fn new(mat: &MaterialTable, scales: &Scales, dhat: &Diffusivities) -> Self {
        Self {
            omega_s: 2.0 * mat.n_b * dhat.d_s * (mat.m_p / mat.m_s) * (scales.s_r / mat.rho_p),
            omega_g: 4.0 * mat.n_p * dhat.d_g * (mat.m_c / mat.m_g()) * (scales.g_r() / mat.rho_c),
            gamma_w: 1.5 / mat.n_b * (mat.m_w / mat.m_p) * (mat.rho_p / scales.w_r),
            gamma_o: 0.75 / mat.n_b * (mat.m_o / mat.m_p) * (mat.rho_p / scales.o_r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionScheme {
    /// First-order upwinding on the sign of the local speed.
    #[default]
    Upwind,
    /// Second-order central differences.
    Central,
}

/// Mapping term of the outer coordinate: `[z (gamma_dot - beta_dot) - gamma_dot] / (beta - gamma)`.
pub fn rescale_coeff_q(z: f64, fs: &FrontState) -> Result<f64> {
    let width = fs.outer_width();
    if width == 0.0 {
        return Err(PatinaError::DegenerateLayer {
            layer: "brochantite",
            width,
        });
    }
    Ok((z * (fs.gamma_dot - fs.beta_dot) - fs.gamma_dot) / width)
}

/// Mapping term of the inner coordinate: `[y (beta_dot - a_dot) - beta_dot] / (a - beta)`.
pub fn rescale_coeff_f(y: f64, fs: &FrontState) -> Result<f64> {
    let width = fs.inner_width();
    if width == 0.0 {
        return Err(PatinaError::DegenerateLayer { layer: "cuprite", width });
    }
    Ok((y * (fs.beta_dot - fs.a_dot) - fs.beta_dot) / width)
}

/// Outer advection speed `gamma_dot / (beta - gamma) + q(z)`.
pub fn outer_advection_coeff(z: f64, fs: &FrontState) -> Result<f64> {
    Ok(fs.gamma_dot / fs.outer_width() + rescale_coeff_q(z, fs)?)
}

/// Inner advection speed `-(omega_p a_dot / (a - beta) - f(y))`.
pub fn inner_advection_coeff(y: f64, fs: &FrontState, omega_p: f64) -> Result<f64> {
    let f = rescale_coeff_f(y, fs)?;
    Ok(-(omega_p * fs.a_dot / fs.inner_width() - f))
}

/// `-c u_z` at interior nodes, zero at the two end nodes.
pub fn advection_term(u: &[f64], speed: &[f64], h: f64, scheme: AdvectionScheme) -> Result<Vec<f64>> {
    if speed.len() != u.len() {
        return Err(PatinaError::GridMismatch {
            expected: u.len(),
            got: speed.len(),
        });
    }
    let n = u.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let c = speed[i];
        let du = match scheme {
            AdvectionScheme::Upwind if c > 0.0 => (u[i] - u[i - 1]) / h,
            AdvectionScheme::Upwind => (u[i + 1] - u[i]) / h,
            AdvectionScheme::Central => (u[i + 1] - u[i - 1]) / (2.0 * h),
        };
        out[i] = -c * du;
    }
    Ok(out)
}

/// `kappa u_zz` at interior nodes, zero at the two end nodes.
pub fn diffusion_term(u: &[f64], kappa: f64, h: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    let k = kappa / (h * h);
    for i in 1..n - 1 {
        out[i] = k * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
    }
    out
}

/// Second-order one-sided derivative at the last node.
pub fn end_gradient(u: &[f64], h: f64) -> f64 {
    let n = u.len() - 1;
    (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h)
}

fn node_speeds(n: usize, mut coeff: impl FnMut(f64) -> Result<f64>) -> Result<Vec<f64>> {
    let h = 1.0 / n as f64;
    (0..=n).map(|i| coeff(i as f64 * h)).collect()
}

/// Explicit (advective) and implicit (diffusive) parts of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRhs {
    pub explicit: Vec<f64>,
    pub implicit: Vec<f64>,
}

/// Split right-hand sides of `S`, `W` and `O` in the brochantite layer.
pub fn outer_split_rhs(
    fields: &LayerFields,
    fs: &FrontState,
    dhat: &Diffusivities,
    scheme: AdvectionScheme,
) -> Result<[SplitRhs; 3]> {
    fields.check_shape()?;
    let width = fs.outer_width();
    if !(width > 0.0) {
        return Err(PatinaError::DegenerateLayer {
            layer: "brochantite",
            width,
        });
    }
    let n = fields.n_z();
    let h = 1.0 / n as f64;
    let speed = node_speeds(n, |z| outer_advection_coeff(z, fs))?;
    let w2 = width * width;
    let split = |u: &[f64], d: f64| -> Result<SplitRhs> {
        Ok(SplitRhs {
            explicit: advection_term(u, &speed, h, scheme)?,
            implicit: diffusion_term(u, d / w2, h),
        })
    };
    Ok([split(&fields.s, dhat.d_s)?, split(&fields.w, dhat.d_w)?, split(&fields.o, dhat.d_o)?])
}

/// Split right-hand side of `G` in the cuprite layer.
pub fn inner_split_rhs(
    fields: &LayerFields,
    fs: &FrontState,
    dhat: &Diffusivities,
    omega_p: f64,
    scheme: AdvectionScheme,
) -> Result<SplitRhs> {
    fields.check_shape()?;
    let width = fs.inner_width();
    if !(width > 0.0) {
        return Err(PatinaError::DegenerateLayer { layer: "cuprite", width });
    }
    let n = fields.n_y();
    let h = 1.0 / n as f64;
    let speed = node_speeds(n, |y| inner_advection_coeff(y, fs, omega_p))?;
    Ok(SplitRhs {
        explicit: advection_term(&fields.g, &speed, h, scheme)?,
        implicit: diffusion_term(&fields.g, dhat.d_g / (width * width), h),
    })
}

/// Non-dimensional air-side values `S_a / S_r`, `W_a / W_r`, `O_a / O_r`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryValues {
    pub s: f64,
    pub w: f64,
    pub o: f64,
}

/// Linear Robin condition at `z = 1`: `u_z = slope u + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinCondition {
    pub slope: f64,
    pub offset: f64,
}

impl RobinCondition {
    /// `(D / width) u_z = (gamma_dot - b_dot) u - sink b_dot`.
    pub fn consumption(d: f64, width: f64, fs: &FrontState, sink: f64) -> Self {
        let k = width / d;
        Self {
            slope: k * (fs.gamma_dot - fs.b_dot),
            offset: -k * sink * fs.b_dot,
        }
    }

    /// Boundary value from the two neighbouring nodes through the one-sided
    /// stencil `(3 u_N - 4 u_N-1 + u_N-2) / 2h = slope u_N + offset`, clamped at 0.
    pub fn solve_boundary(&self, u1: f64, u2: f64, h: f64, species: &'static str, fs: &FrontState) -> Result<f64> {
        let coefficient = 3.0 / (2.0 * h) - self.slope;
        if coefficient.abs() < 1e-300 || !coefficient.is_finite() {
            return Err(PatinaError::SingularRobin {
                species,
                coefficient,
                dz: h,
                gamma_dot: fs.gamma_dot,
                b_dot: fs.b_dot,
            });
        }
        let value = ((4.0 * u1 - u2) / (2.0 * h) + self.offset) / coefficient;
        Ok(value.max(0.0))
    }
}

/// Sets every boundary node of the brochantite layer.
pub fn apply_outer_bcs(
    fields: &mut LayerFields,
    fs: &FrontState,
    dhat: &Diffusivities,
    boundary: &BoundaryValues,
    sc: &StefanConstants,
) -> Result<()> {
    let n = fields.n_z();
    let h = 1.0 / n as f64;
    let width = fs.outer_width();
    fields.s[0] = boundary.s;
    fields.s[n] = 0.0;
    fields.w[0] = boundary.w;
    fields.o[0] = boundary.o;
    let rw = RobinCondition::consumption(dhat.d_w, width, fs, sc.gamma_w);
    fields.w[n] = rw.solve_boundary(fields.w[n - 1], fields.w[n - 2], h, "water", fs)?;
    let ro = RobinCondition::consumption(dhat.d_o, width, fs, sc.gamma_o);
    fields.o[n] = ro.solve_boundary(fields.o[n - 1], fields.o[n - 2], h, "oxygen", fs)?;
    Ok(())
}

/// Interface copy `G(0) = O(1)` and full consumption `G(1) = 0`.
pub fn apply_inner_bcs(fields: &mut LayerFields) {
    let n_z = fields.n_z();
    let n_y = fields.n_y();
    fields.g[0] = fields.o[n_z];
    fields.g[n_y] = 0.0;
}

/// Front velocities with the number of clamped (negative) consumption rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontVelocities {
    pub a_dot: f64,
    pub b_dot: f64,
    pub gamma_dot: f64,
    pub beta_dot: f64,
    pub clamped: u32,
}

/// Consumption rates from the Stefan conditions at `beta` (SO₂) and `a` (oxygen).
pub fn front_velocities(
    fields: &LayerFields,
    fs: &FrontState,
    sc: &StefanConstants,
    sw: &SwellingRatios,
) -> Result<FrontVelocities> {
    let outer = fs.outer_width();
    let inner = fs.inner_width();
    if !(outer > 0.0) {
        return Err(PatinaError::DegenerateLayer {
            layer: "brochantite",
            width: outer,
        });
    }
    if !(inner > 0.0) {
        return Err(PatinaError::DegenerateLayer {
            layer: "cuprite",
            width: inner,
        });
    }
    let dz = 1.0 / fields.n_z() as f64;
    let dy = 1.0 / fields.n_y() as f64;
    let mut b_dot = -sc.omega_s / outer * end_gradient(&fields.s, dz);
    let mut a_dot = -sc.omega_g / inner * end_gradient(&fields.g, dy);
    let mut clamped = 0;
    if b_dot < 0.0 {
        b_dot = 0.0;
        clamped += 1;
    }
    if a_dot < 0.0 {
        a_dot = 0.0;
        clamped += 1;
    }
    Ok(FrontVelocities {
        a_dot,
        b_dot,
        gamma_dot: -(sw.omega_p * a_dot + sw.omega_b * b_dot),
        beta_dot: b_dot - sw.omega_p * a_dot,
        clamped,
    })
}

/// Boundary treatment of the implicit diffusion solve at the far end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarBoundary {
    Dirichlet(f64),
    Robin(RobinCondition),
}

/// Solves `u - coeff kappa u_zz = rhs` on a uniform unit grid with a
/// Dirichlet value at node 0 and the given condition at the last node.
///
/// The three-point Robin row is reduced to tridiagonal form by eliminating
/// `u_N-2` with the neighbouring interior row. A negative Robin solution is
/// clamped to zero.
pub fn implicit_diffusion_solve(rhs: &[f64], coeff_kappa: f64, left: f64, right: FarBoundary) -> Result<Vec<f64>> {
    let n = rhs.len() - 1;
    let h = 1.0 / n as f64;
    let r = coeff_kappa / (h * h);
    if r == 0.0 {
        let mut u = rhs.to_vec();
        u[0] = left;
        u[n] = match right {
            FarBoundary::Dirichlet(v) => v,
            FarBoundary::Robin(rc) => {
                let c = 3.0 / (2.0 * h) - rc.slope;
                (((4.0 * u[n - 1] - u[n - 2]) / (2.0 * h) + rc.offset) / c).max(0.0)
            }
        };
        return Ok(u);
    }
    let mut sub = vec![-r; n + 1];
    let mut diag = vec![1.0 + 2.0 * r; n + 1];
    let mut sup = vec![-r; n + 1];
    let mut b = rhs.to_vec();
    sub[0] = 0.0;
    diag[0] = 1.0;
    sup[0] = 0.0;
    b[0] = left;
    match right {
        FarBoundary::Dirichlet(v) => {
            sub[n] = 0.0;
            diag[n] = 1.0;
            b[n] = v;
        }
        FarBoundary::Robin(rc) => {
            // 2h * [stencil row + (1 / (2h r)) * row N-1]
            sub[n] = -2.0 + 1.0 / r;
            diag[n] = 2.0 - 2.0 * h * rc.slope;
            b[n] = 2.0 * h * rc.offset + rhs[n - 1] / r;
        }
    }
    sup[n] = 0.0;
    let mut u = solve_tridiagonal(&sub, &diag, &sup, &b)?;
    if u[n] < 0.0 {
        u[n] = 0.0;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::materials::swelling_ratios;
    use proptest::prelude::*;

    fn fronts(a: f64, beta: f64, gamma: f64) -> FrontState {
        FrontState {
            a,
            beta,
            gamma,
            ..FrontState::default()
        }
    }

    #[test]
    fn q_examples() {
        let fs = fronts(2.0, 1.0, 0.0);
        for z in [0.0, 0.3, 1.0] {
            assert_eq!(rescale_coeff_q(z, &fs).unwrap(), 0.0);
        }
        let fs = FrontState {
            gamma_dot: -1.0,
            ..fs
        };
        assert_eq!(rescale_coeff_q(0.0, &fs).unwrap(), 1.0);
        assert!(rescale_coeff_q(0.5, &fronts(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn f_examples() {
        let fs = fronts(1.0, 0.0, -1.0);
        assert_eq!(rescale_coeff_f(0.5, &fs).unwrap(), 0.0);
        let fs = FrontState { a_dot: 1.0, ..fs };
        assert_eq!(rescale_coeff_f(1.0, &fs).unwrap(), -1.0);
        assert!(rescale_coeff_f(0.5, &fronts(1.0, 1.0, 0.0)).is_err());
    }

    fn arb_fronts() -> impl Strategy<Value = FrontState> {
        (0.1f64..10.0, 0.01f64..5.0, 0.01f64..5.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(
            |(a, hp, hb, ad, bd, gd)| FrontState {
                a,
                beta: a - hp,
                gamma: a - hp - hb,
                a_dot: ad,
                beta_dot: bd,
                gamma_dot: gd,
                ..FrontState::default()
            },
        )
    }

    proptest! {
        #[test]
        fn q_identity(fs in arb_fronts(), z in 0.0f64..1.0) {
            let w = fs.beta - fs.gamma;
            let lhs = rescale_coeff_q(z, &fs).unwrap() + fs.gamma_dot / w;
            let rhs = z * (fs.gamma_dot - fs.beta_dot) / w;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            let c = outer_advection_coeff(z, &fs).unwrap();
            prop_assert!((c - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn f_identity(fs in arb_fronts(), y in 0.0f64..1.0, wp in 0.1f64..2.0) {
            let w = fs.a - fs.beta;
            let lhs = wp * fs.a_dot / w - rescale_coeff_f(y, &fs).unwrap();
            let rhs = (wp * fs.a_dot - y * (fs.beta_dot - fs.a_dot) + fs.beta_dot) / w;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn velocity_identity(
            s_vals in proptest::collection::vec(0.0f64..2.0, 11),
            g_vals in proptest::collection::vec(0.0f64..2.0, 11),
            a in 0.5f64..3.0,
            b_frac in 0.45f64..0.9,
        ) {
            let sw = swelling_ratios(&MaterialTable::reference()).unwrap();
            let b = b_frac * (1.0 + sw.omega_p) * a;
            let fs = FrontState::from_consumption(a, b, &sw);
            let mut fields = LayerFields::zeros(10, 10);
            fields.s.copy_from_slice(&s_vals);
            fields.g.copy_from_slice(&g_vals);
            fields.s[10] = 0.0;
            fields.g[10] = 0.0;
            let sc = StefanConstants { omega_s: 1.3, omega_g: 0.7, gamma_w: 1.0, gamma_o: 1.0 };
            let v = front_velocities(&fields, &fs, &sc, &sw).unwrap();
            let r = v.gamma_dot + sw.omega_p * v.a_dot + sw.omega_b * v.b_dot;
            prop_assert!(r.abs() <= 1e-12 * (1.0 + v.b_dot.abs() + v.a_dot.abs()));
            prop_assert!(v.a_dot >= 0.0 && v.b_dot >= 0.0);
        }

        #[test]
        fn implicit_solve_keeps_positivity(
            rhs in proptest::collection::vec(0.0f64..1.0, 21),
            kappa in 1e-4f64..1e8,
            left in 0.0f64..1.0,
        ) {
            let u = implicit_diffusion_solve(&rhs, kappa, left, FarBoundary::Dirichlet(0.0)).unwrap();
            prop_assert!(u.iter().all(|&x| x >= -1e-15));
        }
    }

    #[test]
    fn split_of_constant_and_linear_fields() {
        let mut fields = LayerFields::zeros(20, 20);
        fields.s.iter_mut().for_each(|x| *x = 0.7);
        fields.w.iter_mut().enumerate().for_each(|(i, x)| *x = 1.0 - i as f64 / 20.0);
        fields.o.iter_mut().for_each(|x| *x = 0.3);
        fields.g.iter_mut().for_each(|x| *x = 0.2);
        let fs = FrontState {
            a_dot: 0.4,
            b_dot: 0.3,
            beta_dot: 0.1,
            gamma_dot: -0.6,
            ..fronts(2.0, 1.0, -0.5)
        };
        let d = Diffusivities {
            d_g: 1.0,
            d_s: 1.0,
            d_o: 1.0,
            d_w: 1.0,
        };
        let [s, w, o] = outer_split_rhs(&fields, &fs, &d, AdvectionScheme::Upwind).unwrap();
        assert!(s.explicit.iter().chain(&s.implicit).all(|&x| x == 0.0));
        assert!(o.explicit.iter().chain(&o.implicit).all(|&x| x == 0.0));
        assert!(w.implicit.iter().all(|&x| x.abs() < 1e-12));
        let g = inner_split_rhs(&fields, &fs, &d, 0.677, AdvectionScheme::Upwind).unwrap();
        assert!(g.explicit.iter().chain(&g.implicit).all(|&x| x == 0.0));

        // linear G with stationary fronts
        let still = fronts(2.0, 1.0, -0.5);
        fields.g.iter_mut().enumerate().for_each(|(i, x)| *x = 0.2 * (1.0 - i as f64 / 20.0));
        let g = inner_split_rhs(&fields, &still, &d, 0.677, AdvectionScheme::Upwind).unwrap();
        assert!(g.implicit.iter().all(|&x| x.abs() < 1e-12));
        assert!(g.explicit.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn split_rejects_bad_grids() {
        let mut fields = LayerFields::zeros(20, 20);
        fields.w.pop();
        let d = Diffusivities::calibrated();
        assert!(outer_split_rhs(&fields, &fronts(2.0, 1.0, 0.0), &d, AdvectionScheme::Upwind).is_err());
    }

    #[test]
    fn manufactured_sine_second_derivative() {
        let pi = std::f64::consts::PI;
        let mut prev_err = f64::INFINITY;
        for n in [20usize, 40, 80] {
            let mut fields = LayerFields::zeros(n, n);
            for i in 0..=n {
                let z = i as f64 / n as f64;
                fields.s[i] = (pi * z).sin();
                fields.g[i] = (pi * z).sin();
            }
            let d = Diffusivities {
                d_g: 1.0,
                d_s: 1.0,
                d_o: 1.0,
                d_w: 1.0,
            };
            let fs = fronts(2.0, 1.0, 0.0);
            let [s, _, _] = outer_split_rhs(&fields, &fs, &d, AdvectionScheme::Upwind).unwrap();
            let g = inner_split_rhs(&fields, &fs, &d, 0.677, AdvectionScheme::Upwind).unwrap();
            let err = (s.implicit[n / 2] + pi * pi).abs();
            assert!((g.implicit[n / 2] + pi * pi).abs() < 1e-1);
            assert!(err < pi.powi(4) / 12.0 / (n * n) as f64 * 1.01);
            // second order: error drops ~4x per refinement
            assert!(err < prev_err / 3.5);
            prev_err = err;
        }
    }

    #[test]
    fn end_gradient_exact_for_quadratics() {
        let n = 7;
        let u: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).powi(2)).collect();
        assert_relative_eq!(end_gradient(&u, 1.0 / n as f64), 2.0, max_relative = 1e-12);
    }

    fn unit_fixture(n: usize) -> (LayerFields, FrontState, Diffusivities, StefanConstants) {
        let d = Diffusivities {
            d_g: 1.0,
            d_s: 1.0,
            d_o: 1.0,
            d_w: 1.0,
        };
        let sc = StefanConstants {
            omega_s: 1.0,
            omega_g: 1.0,
            gamma_w: 2.0,
            gamma_o: 3.0,
        };
        (LayerFields::zeros(n, n), fronts(2.0, 1.0, 0.0), d, sc)
    }

    #[test]
    fn outer_bcs_homogeneous_robin() {
        let (mut fields, fs, d, sc) = unit_fixture(10);
        for i in 0..=10 {
            fields.w[i] = 1.0 + 0.1 * (i as f64).sin();
            fields.o[i] = 0.5 + 0.05 * i as f64;
        }
        let bv = BoundaryValues { s: 1.0, w: 0.9, o: 0.4 };
        apply_outer_bcs(&mut fields, &fs, &d, &bv, &sc).unwrap();
        assert_eq!(fields.s[0], 1.0);
        assert_eq!(fields.s[10], 0.0);
        assert_eq!(fields.w[0], 0.9);
        assert_eq!(fields.o[0], 0.4);
        assert_relative_eq!(fields.w[10], (4.0 * fields.w[9] - fields.w[8]) / 3.0, max_relative = 1e-14);
        assert_relative_eq!(fields.o[10], (4.0 * fields.o[9] - fields.o[8]) / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn outer_bcs_uniform_field_with_motion() {
        // Hand solution: u_N (3/2h - k v_rel) = (4 - 1) u / 2h - k G v
        let (mut fields, fs, d, sc) = unit_fixture(10);
        let v = 0.05;
        let fs = FrontState {
            gamma_dot: v,
            b_dot: v,
            ..fs
        };
        fields.w.iter_mut().for_each(|x| *x = 1.0);
        let bv = BoundaryValues { s: 0.0, w: 1.0, o: 0.0 };
        apply_outer_bcs(&mut fields, &fs, &d, &bv, &sc).unwrap();
        let h = 0.1;
        let expected = (3.0 / (2.0 * h) - 1.0 * sc.gamma_w * v) / (3.0 / (2.0 * h));
        assert_relative_eq!(fields.w[10], expected, max_relative = 1e-14);
        assert_relative_eq!(fields.w[10], 1.0 - 2.0 * v * h / 1.5, max_relative = 1e-14);
    }

    #[test]
    fn singular_robin_is_reported() {
        let rc = RobinCondition {
            slope: 15.0,
            offset: 0.0,
        };
        let err = rc
            .solve_boundary(1.0, 1.0, 0.1, "water", &FrontState::default())
            .unwrap_err();
        assert!(matches!(err, PatinaError::SingularRobin { species: "water", .. }));
    }

    #[test]
    fn velocity_examples() {
        let sw = swelling_ratios(&MaterialTable::reference()).unwrap();
        let (mut fields, fs, _, sc) = unit_fixture(10);
        let v = front_velocities(&fields, &fs, &sc, &sw).unwrap();
        assert_eq!((v.a_dot, v.b_dot, v.gamma_dot, v.beta_dot), (0.0, 0.0, 0.0, 0.0));

        for i in 0..=10 {
            fields.s[i] = 1.0 - i as f64 / 10.0;
        }
        let v = front_velocities(&fields, &fs, &sc, &sw).unwrap();
        assert_relative_eq!(v.b_dot, 1.0, max_relative = 1e-12);
        assert_eq!(v.a_dot, 0.0);
        assert_relative_eq!(v.gamma_dot, -sw.omega_b, max_relative = 1e-12);

        // a gradient of the wrong sign is clamped
        for i in 0..=10 {
            fields.g[i] = i as f64 / 10.0;
        }
        let v = front_velocities(&fields, &fs, &sc, &sw).unwrap();
        assert_eq!(v.a_dot, 0.0);
        assert_eq!(v.clamped, 1);
    }

    #[test]
    fn positive_interior_gives_positive_rates() {
        let sw = swelling_ratios(&MaterialTable::reference()).unwrap();
        let (mut fields, fs, _, sc) = unit_fixture(16);
        for i in 0..=16 {
            let z = i as f64 / 16.0;
            fields.s[i] = (1.0 - z) * (1.0 + z);
            fields.g[i] = (std::f64::consts::PI * z).sin().max(0.0) + (1.0 - z);
        }
        fields.g[16] = 0.0;
        let v = front_velocities(&fields, &fs, &sc, &sw).unwrap();
        assert!(v.a_dot > 0.0 && v.b_dot > 0.0);
    }

    #[test]
    fn implicit_solve_robin_matches_condition() {
        let n = 20;
        let rhs: Vec<f64> = (0..=n).map(|i| 1.0 - 0.3 * i as f64 / n as f64).collect();
        let rc = RobinCondition {
            slope: -0.4,
            offset: -0.1,
        };
        let u = implicit_diffusion_solve(&rhs, 0.05, 1.0, FarBoundary::Robin(rc)).unwrap();
        let h = 1.0 / n as f64;
        let grad = end_gradient(&u, h);
        assert_relative_eq!(grad, rc.slope * u[n] + rc.offset, max_relative = 1e-10);
        // interior rows satisfy the backward-Euler equation
        let r = 0.05 / (h * h);
        for i in 1..n {
            let res = u[i] - r * (u[i + 1] - 2.0 * u[i] + u[i - 1]) - rhs[i];
            assert!(res.abs() < 1e-12);
        }
        assert_eq!(u[0], 1.0);
    }

    #[test]
    fn stefan_constants_formulae() {
        let mat = MaterialTable::reference();
        let scales = Scales {
            lambda: 1e-4,
            t_r: 3600.0,
            s_r: 4.987e-7,
            w_r: 5.1e-5,
            o_r: 2.6e-4,
        };
        let dhat = Diffusivities::calibrated().hatted(&scales);
        let sc = StefanConstants::new(&mat, &scales, &dhat);
        assert_relative_eq!(
            sc.omega_s,
            2.0 * dhat.d_s * (143.09 / 64.07) * (4.987e-7 / 6.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            sc.omega_g,
            4.0 * dhat.d_g * (63.55 / 32.0) * (2.6e-4 / 8.94),
            max_relative = 1e-14
        );
        assert_relative_eq!(sc.gamma_w, 1.5 * (18.015 / 143.09) * (6.0 / 5.1e-5), max_relative = 1e-14);
        assert_relative_eq!(sc.gamma_o, 0.75 * (32.0 / 143.09) * (6.0 / 2.6e-4), max_relative = 1e-14);
    }
}
