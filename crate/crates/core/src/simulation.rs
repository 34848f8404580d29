//! Full corrosion runs: seeding, the coupled time loop and dimensional output.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::environment::{ChamberSettings, Forcing};
use crate::error::{invalid, PatinaError, Result};
use crate::materials::{layer_thicknesses, mole_balance, swelling_ratios, MaterialTable, MoleReport, SwellingRatios};
use crate::pde::{
    apply_inner_bcs, apply_outer_bcs, front_velocities, implicit_diffusion_solve, inner_split_rhs, outer_split_rhs,
    AdvectionScheme, BoundaryValues, Diffusivities, FarBoundary, FrontState, LayerFields, RobinCondition, Scales,
    StefanConstants,
};
use crate::stepper::{imex_step, select_dt, ImexState, ImexTableau, SplitSystem, StepControl};

pub fn nondimensionalize(value: f64, scale: f64) -> Result<f64> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(invalid("scale", format!("must be non-zero and finite, got {scale}")));
    }
    Ok(value / scale)
}

pub fn redimensionalize(value: f64, scale: f64) -> Result<f64> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(invalid("scale", format!("must be non-zero and finite, got {scale}")));
    }
    Ok(value * scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_z: usize,
    pub n_y: usize,
    /// Largest step, in units of the reference time.
    pub dt_max: f64,
    pub cfl_target: f64,
    pub advection: AdvectionScheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_z: 100,
            n_y: 100,
            dt_max: 0.1,
            cfl_target: 0.5,
            advection: AdvectionScheme::Upwind,
        }
    }
}

/// Initial consumed thicknesses, non-dimensional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seeds {
    pub a0: f64,
    pub b0: f64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { a0: 1e-2, b0: 8e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scales: Scales,
    pub diffusivities: Diffusivities,
    pub materials: MaterialTable,
    /// Replaces the swelling ratios derived from `materials` when set.
    pub swelling_override: Option<SwellingRatios>,
    pub forcing: Arc<Forcing>,
    pub grid: GridConfig,
    pub seeds: Seeds,
    pub horizon_hours: f64,
    /// Record every `stride` steps; the final step is always recorded.
    pub stride: usize,
}

/// Scales that put chamber boundary data at order one.
pub fn default_scales() -> Scales {
    let chamber = ChamberSettings::default()
        .concentrations()
        .expect("default chamber settings are valid");
    Scales {
        lambda: 1e-4,
        t_r: 3600.0,
        s_r: chamber.so2,
        w_r: crate::environment::saturated_vapor_density(40.0) * 1e-6,
        o_r: crate::environment::AMBIENT_OXYGEN,
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scales: default_scales(),
            diffusivities: Diffusivities::calibrated(),
            materials: MaterialTable::reference(),
            swelling_override: None,
            forcing: Arc::new(
                Forcing::chamber(&ChamberSettings::default()).expect("default chamber settings are valid"),
            ),
            grid: GridConfig::default(),
            seeds: Seeds::default(),
            horizon_hours: 40.0,
            stride: 10,
        }
    }
}

impl SimulationConfig {
    pub fn swelling(&self) -> Result<SwellingRatios> {
        match self.swelling_override {
            Some(sw) => Ok(sw),
            None => swelling_ratios(&self.materials),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_hours > 0.0 && self.horizon_hours.is_finite()) {
            return Err(invalid("horizon", "horizon must be positive"));
        }
        self.scales.validate()?;
        self.diffusivities.validate()?;
        self.materials.validate()?;
        self.forcing.validate()?;
        if self.grid.n_z < 4 || self.grid.n_y < 4 {
            return Err(invalid("grid", "at least 4 intervals per layer are required"));
        }
        if !(self.grid.dt_max > 0.0) || !(self.grid.cfl_target > 0.0) {
            return Err(invalid("grid", "dt_max and cfl must be positive"));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        let sw = self.swelling()?;
        let Seeds { a0, b0 } = self.seeds;
        if !(a0 > 0.0) {
            return Err(invalid("seeds", format!("a0 must be positive, got {a0}")));
        }
        let fs = FrontState::from_consumption(a0, b0, &sw);
        if !(fs.beta > 0.0) {
            return Err(invalid(
                "seeds",
                format!("b0 must exceed omega_p * a0 so that beta(0) > 0 (beta(0) = {:e})", fs.beta),
            ));
        }
        fs.check_ordering()
    }

    fn boundary_values(&self, hours: f64) -> BoundaryValues {
        let c = self.forcing.at(hours);
        BoundaryValues {
            s: c.so2 / self.scales.s_r,
            w: c.water / self.scales.w_r,
            o: c.oxygen / self.scales.o_r,
        }
    }
}

/// Fields plus the two consumed thicknesses: the integrated unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct PatinaState {
    pub fields: LayerFields,
    pub a: f64,
    pub b: f64,
}

impl ImexState for PatinaState {
    fn axpy(&mut self, alpha: f64, x: &Self) {
        self.fields.axpy(alpha, &x.fields);
        self.a += alpha * x.a;
        self.b += alpha * x.b;
    }
}

/// Seeds the fronts and builds consistent initial profiles.
pub fn initialize(config: &SimulationConfig) -> Result<(LayerFields, FrontState)> {
    config.validate()?;
    let sw = config.swelling()?;
    let fs = FrontState::from_consumption(config.seeds.a0, config.seeds.b0, &sw);
    let bv = config.boundary_values(0.0);
    let (n_z, n_y) = (config.grid.n_z, config.grid.n_y);
    let mut fields = LayerFields::zeros(n_z, n_y);
    for i in 0..=n_z {
        let z = i as f64 / n_z as f64;
        fields.s[i] = bv.s * (1.0 - z);
    }
    fields.w.iter_mut().for_each(|x| *x = bv.w);
    fields.o.iter_mut().for_each(|x| *x = bv.o);
    for i in 0..=n_y {
        let y = i as f64 / n_y as f64;
        fields.g[i] = bv.o * (1.0 - y);
    }
    Ok((fields, fs))
}

/// Counters of positivity repairs applied during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampCounters {
    /// Negative consumption rates set to zero.
    pub velocity: u64,
    /// Negative concentrations set to zero.
    pub concentration: u64,
}

/// The coupled two-layer model as an IMEX split system in non-dimensional time.
pub struct CorrosionModel<'a> {
    config: &'a SimulationConfig,
    dhat: Diffusivities,
    sc: StefanConstants,
    sw: SwellingRatios,
    scheme: AdvectionScheme,
    pub clamps: ClampCounters,
}

impl<'a> CorrosionModel<'a> {
    pub fn new(config: &'a SimulationConfig) -> Result<Self> {
        let dhat = config.diffusivities.hatted(&config.scales);
        Ok(Self {
            config,
            dhat,
            sc: StefanConstants::new(&config.materials, &config.scales, &dhat),
            sw: config.swelling()?,
            scheme: config.grid.advection,
            clamps: ClampCounters::default(),
        })
    }

    pub fn stefan_constants(&self) -> &StefanConstants {
        &self.sc
    }

    pub fn swelling(&self) -> &SwellingRatios {
        &self.sw
    }

    fn hours(&self, tau: f64) -> f64 {
        tau * self.config.scales.t_r_hours()
    }

    /// Front positions with velocities evaluated on `state`.
    pub fn fronts(&mut self, state: &PatinaState) -> Result<FrontState> {
        let fs = FrontState::from_consumption(state.a, state.b, &self.sw);
        let v = front_velocities(&state.fields, &fs, &self.sc, &self.sw)?;
        self.clamps.velocity += v.clamped as u64;
        Ok(fs.with_rates(v.a_dot, v.b_dot, &self.sw))
    }
}

impl SplitSystem<PatinaState> for CorrosionModel<'_> {
    fn explicit(&mut self, _t: f64, u: &PatinaState) -> Result<PatinaState> {
        let fs = self.fronts(u)?;
        let [s, w, o] = outer_split_rhs(&u.fields, &fs, &self.dhat, self.scheme)?;
        let g = inner_split_rhs(&u.fields, &fs, &self.dhat, self.sw.omega_p, self.scheme)?;
        Ok(PatinaState {
            fields: LayerFields {
                s: s.explicit,
                w: w.explicit,
                o: o.explicit,
                g: g.explicit,
            },
            a: fs.a_dot,
            b: fs.b_dot,
        })
    }

    fn implicit(&mut self, _t: f64, u: &PatinaState) -> Result<PatinaState> {
        let fs = FrontState::from_consumption(u.a, u.b, &self.sw);
        let [s, w, o] = outer_split_rhs(&u.fields, &fs, &self.dhat, self.scheme)?;
        let g = inner_split_rhs(&u.fields, &fs, &self.dhat, self.sw.omega_p, self.scheme)?;
        Ok(PatinaState {
            fields: LayerFields {
                s: s.implicit,
                w: w.implicit,
                o: o.implicit,
                g: g.implicit,
            },
            a: 0.0,
            b: 0.0,
        })
    }

    fn solve_implicit(&mut self, t: f64, coeff: f64, rhs: &PatinaState) -> Result<PatinaState> {
        // Geometry and Robin data come from the explicit predictor in `rhs`.
        let fs = self.fronts(rhs)?;
        let outer = fs.outer_width();
        let inner = fs.inner_width();
        let bv = self.config.boundary_values(self.hours(t));
        let ko = coeff / (outer * outer);
        let s = implicit_diffusion_solve(&rhs.fields.s, ko * self.dhat.d_s, bv.s, FarBoundary::Dirichlet(0.0))?;
        let w = implicit_diffusion_solve(
            &rhs.fields.w,
            ko * self.dhat.d_w,
            bv.w,
            FarBoundary::Robin(RobinCondition::consumption(self.dhat.d_w, outer, &fs, self.sc.gamma_w)),
        )?;
        let o = implicit_diffusion_solve(
            &rhs.fields.o,
            ko * self.dhat.d_o,
            bv.o,
            FarBoundary::Robin(RobinCondition::consumption(self.dhat.d_o, outer, &fs, self.sc.gamma_o)),
        )?;
        let interface = o[o.len() - 1];
        let g = implicit_diffusion_solve(
            &rhs.fields.g,
            coeff / (inner * inner) * self.dhat.d_g,
            interface,
            FarBoundary::Dirichlet(0.0),
        )?;
        Ok(PatinaState {
            fields: LayerFields { s, w, o, g },
            a: rhs.a,
            b: rhs.b,
        })
    }

    fn project(&mut self, t: f64, u: &mut PatinaState) -> Result<()> {
        for field in [&mut u.fields.s, &mut u.fields.w, &mut u.fields.o, &mut u.fields.g] {
            let n = field.len() - 1;
            for x in field[1..n].iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                    self.clamps.concentration += 1;
                }
            }
        }
        let bv = self.config.boundary_values(self.hours(t));
        let n = u.fields.n_z();
        u.fields.s[0] = bv.s;
        u.fields.s[n] = 0.0;
        let n_y = u.fields.n_y();
        u.fields.g[n_y] = 0.0;
        let fs = self.fronts(u)?;
        apply_outer_bcs(&mut u.fields, &fs, &self.dhat, &bv, &self.sc)?;
        apply_inner_bcs(&mut u.fields);
        Ok(())
    }
}

/// One output row, dimensional (hours and centimetres).
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t_hours: f64,
    pub step: usize,
    /// Dimensional fronts; velocities in cm/h.
    pub fronts: FrontState,
    pub h_p: f64,
    pub h_b: f64,
    pub total: f64,
    pub min_concentration: f64,
    pub clamps: ClampCounters,
    pub moles: MoleReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub records: Vec<Record>,
    pub swelling: SwellingRatios,
    pub steps: usize,
    pub final_fields: LayerFields,
}

pub const OUTPUT_CSV_HEADER: &str = "t_hours,a_cm,b_cm,beta_cm,gamma_cm,h_p_cm,h_b_cm,total_cm";

/// Six significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    format!("{x:.5e}")
}

impl SimulationOutput {
    pub fn last(&self) -> &Record {
        self.records.last().expect("a run always has at least one record")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 100);
        out.push_str(OUTPUT_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let f = &r.fronts;
            let row = [f.a, f.b, f.beta, f.gamma, r.h_p, r.h_b, r.total];
            let _ = write!(out, "{}", format_number(r.t_hours));
            for v in row {
                let _ = write!(out, ",{}", format_number(v));
            }
            out.push('\n');
        }
        out
    }

    /// Checks the kinematic and positivity invariants on every record:
    /// strict front ordering, monotone consumption, the swelling identities
    /// (relative tolerance `1e-12`) and non-negative concentrations.
    pub fn check_invariants(&self) -> Result<()> {
        let sw = self.swelling;
        let fail = |r: &Record, what: String| {
            Err(PatinaError::Data(format!("invariant violated at t = {} h: {what}", r.t_hours)))
        };
        let mut prev: Option<&Record> = None;
        for r in &self.records {
            let f = &r.fronts;
            if !(f.gamma < f.beta && f.beta < f.a) {
                return fail(r, format!("ordering gamma={:e} beta={:e} a={:e}", f.gamma, f.beta, f.a));
            }
            let beta_scale = f.b.abs().max((sw.omega_p * f.a).abs());
            if (f.beta - (f.b - sw.omega_p * f.a)).abs() > 1e-12 * beta_scale {
                return fail(r, "beta != b - omega_p a".into());
            }
            let terms = [f.gamma_dot, sw.omega_p * f.a_dot, sw.omega_b * f.b_dot];
            let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            if terms.iter().sum::<f64>().abs() > 1e-12 * scale {
                return fail(r, "gamma_dot + omega_p a_dot + omega_b b_dot != 0".into());
            }
            if r.min_concentration < 0.0 {
                return fail(r, format!("negative concentration {:e}", r.min_concentration));
            }
            if let Some(p) = prev {
                if f.a < p.fronts.a || f.b < p.fronts.b {
                    return fail(r, "consumption decreased".into());
                }
                if f.gamma > p.fronts.gamma {
                    return fail(r, "outer surface receded".into());
                }
            }
            prev = Some(r);
        }
        Ok(())
    }

    /// Total thickness at `t_hours` by linear interpolation between records.
    pub fn total_at(&self, t_hours: f64) -> Option<f64> {
        let recs = &self.records;
        let first = recs.first()?;
        let last = recs.last()?;
        if t_hours < first.t_hours || t_hours > last.t_hours + 1e-9 {
            return None;
        }
        if t_hours >= last.t_hours {
            return Some(last.total);
        }
        let hi = recs.partition_point(|r| r.t_hours <= t_hours);
        if hi == 0 {
            return Some(first.total);
        }
        let (p, q) = (&recs[hi - 1], &recs[hi]);
        let w = (t_hours - p.t_hours) / (q.t_hours - p.t_hours);
        Some(p.total + w * (q.total - p.total))
    }
}

fn make_record(
    config: &SimulationConfig,
    state: &PatinaState,
    fs: &FrontState,
    tau: f64,
    step: usize,
    clamps: ClampCounters,
) -> Result<Record> {
    let lambda = config.scales.lambda;
    let dim = fs.scaled(lambda, config.scales.t_r_hours());
    let th = layer_thicknesses(&dim)?;
    let moles = mole_balance(&dim, &config.materials)?;
    Ok(Record {
        t_hours: tau * config.scales.t_r_hours(),
        step,
        fronts: dim,
        h_p: th.h_p,
        h_b: th.h_b,
        total: th.total,
        min_concentration: state.fields.min_value(),
        clamps,
        moles,
    })
}

/// Runs the coupled model to the configured horizon.
pub fn run(config: &SimulationConfig) -> Result<SimulationOutput> {
    let (fields, fs0) = initialize(config)?;
    let mut model = CorrosionModel::new(config)?;
    let tableau = ImexTableau::midpoint();
    let ctl = StepControl {
        cfl_target: config.grid.cfl_target,
        dt_max: config.grid.dt_max,
    };
    let tau_end = config.horizon_hours / config.scales.t_r_hours();
    let mut state = PatinaState {
        fields,
        a: fs0.a,
        b: fs0.b,
    };
    let mut tau = 0.0;
    let mut step = 0usize;
    let fs = model.fronts(&state)?;
    let mut records = vec![make_record(config, &state, &fs, tau, step, model.clamps)?];
    let wrap = |step: usize, tau: f64, e: PatinaError| PatinaError::Solver {
        step,
        time_hours: tau * config.scales.t_r_hours(),
        source: Box::new(e),
    };

    while tau < tau_end * (1.0 - 1e-12) {
        let fs = model.fronts(&state).map_err(|e| wrap(step, tau, e))?;
        let mut dt = select_dt(&fs, model.sw.omega_p, config.grid.n_z, config.grid.n_y, &ctl)
            .map_err(|e| wrap(step, tau, e))?;
        if tau + dt > tau_end {
            dt = tau_end - tau;
        }
        state = imex_step(&tableau, &mut model, tau, dt, &state).map_err(|e| wrap(step, tau, e))?;
        tau += dt;
        step += 1;
        let fs = model.fronts(&state).map_err(|e| wrap(step, tau, e))?;
        fs.check_ordering().map_err(|e| wrap(step, tau, e))?;
        let done = tau >= tau_end * (1.0 - 1e-12);
        if step.is_multiple_of(config.stride) || done {
            records.push(make_record(config, &state, &fs, tau, step, model.clamps).map_err(|e| wrap(step, tau, e))?);
        }
    }
    Ok(SimulationOutput {
        records,
        swelling: model.sw,
        steps: step,
        final_fields: state.fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::BoundaryConcentrations;
    use approx::assert_relative_eq;

    #[test]
    fn scaling_round_trip_and_examples() {
        for x in [1.0, -3.5e-7, 42.0, 1e300] {
            let s = 3.7e-4;
            let y = redimensionalize(nondimensionalize(x, s).unwrap(), s).unwrap();
            assert_relative_eq!(y, x, max_relative = 1e-15);
        }
        assert_relative_eq!(nondimensionalize(3.1693e-4, 1e-4).unwrap(), 3.1693, max_relative = 1e-14);
        assert!(nondimensionalize(1.0, 0.0).is_err());
        assert!(redimensionalize(1.0, 0.0).is_err());
        let scales = default_scales();
        // t_r / lambda^2 = 3600 / 1e-8
        assert_relative_eq!(scales.hat_diffusivity(3.96e-5), 1.4256e7, max_relative = 1e-12);
    }

    #[test]
    fn default_seeds_geometry() {
        let config = SimulationConfig::default();
        let (fields, fs) = initialize(&config).unwrap();
        let sw = config.swelling().unwrap();
        assert_relative_eq!(fs.beta, 8e-3 - sw.omega_p * 1e-2, max_relative = 1e-14);
        assert!((fs.beta - 1.225e-3).abs() < 1e-6);
        assert!((fs.gamma + 1.7885e-2).abs() < 1e-5);
        fs.check_ordering().unwrap();
        assert_relative_eq!(fields.s[0], 1.0, max_relative = 1e-12);
        assert_eq!(fields.s[config.grid.n_z], 0.0);
        assert_eq!(fields.g[0], fields.o[config.grid.n_z]);
    }

    #[test]
    fn bad_seeds_rejected() {
        let config = SimulationConfig {
            seeds: Seeds { a0: 1e-2, b0: 1e-3 },
            ..SimulationConfig::default()
        };
        assert!(initialize(&config).is_err());
        let config = SimulationConfig {
            seeds: Seeds { a0: 0.0, b0: 1e-3 },
            ..SimulationConfig::default()
        };
        assert!(initialize(&config).is_err());
    }

    #[test]
    fn zero_forcing_keeps_seeds() {
        let config = SimulationConfig {
            forcing: Arc::new(Forcing::Constant(BoundaryConcentrations::default())),
            horizon_hours: 5.0,
            ..SimulationConfig::default()
        };
        let (fields, _) = initialize(&config).unwrap();
        assert!(fields.s.iter().all(|&x| x == 0.0));
        let out = run(&config).unwrap();
        let first = &out.records[0];
        for r in &out.records {
            assert_eq!(r.fronts.a, first.fronts.a);
            assert_eq!(r.fronts.gamma, first.fronts.gamma);
        }
        // dt = dt_max throughout
        assert_eq!(out.steps, 50);
    }

    #[test]
    fn horizon_must_be_positive() {
        let config = SimulationConfig {
            horizon_hours: 0.0,
            ..SimulationConfig::default()
        };
        let err = run(&config).unwrap_err();
        assert!(err.to_string().contains("horizon must be positive"));
    }

    #[test]
    fn csv_format() {
        let config = SimulationConfig {
            horizon_hours: 0.5,
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        let csv = out.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), OUTPUT_CSV_HEADER);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        assert_eq!(row[0], "0.00000e0");
        assert_eq!(format_number(1.26743e-3), "1.26743e-3");
    }

    #[test]
    fn short_chamber_run_grows() {
        let config = SimulationConfig {
            horizon_hours: 2.0,
            grid: GridConfig {
                n_z: 40,
                n_y: 40,
                ..GridConfig::default()
            },
            ..SimulationConfig::default()
        };
        let out = run(&config).unwrap();
        let first = &out.records[0];
        let last = out.last();
        assert!(last.total > first.total);
        assert!(last.fronts.a > first.fronts.a);
        assert!(last.fronts.b > first.fronts.b);
        assert!((last.t_hours - 2.0).abs() < 1e-12);
        out.check_invariants().unwrap();
        let mut broken = out.clone();
        broken.records[1].fronts.a = broken.records[0].fronts.a * 0.5;
        assert!(broken.check_invariants().is_err());
    }
}
