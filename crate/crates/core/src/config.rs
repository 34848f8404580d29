//! Plain-text run configuration.
//!
//! ```text
//! # comment
//! [diffusivities]
//! d_s = 3.96e-5
//! [forcing]
//! mode = cycle-schedule
//! ```
//!
//! Every key is optional; missing keys take the library defaults. Writing a
//! parsed config back with [`RunConfig::to_text`] materialises all values.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::calibration::{CalibrationSettings, Weighting};
use crate::environment::{actual_vapor_density, load_timeseries, BoundaryConcentrations, ChamberSettings, Forcing};
use crate::error::{invalid, io_error, PatinaError, Result};
use crate::materials::{swelling_ratios, MaterialTable, SwellingRatios};
use crate::pde::{AdvectionScheme, Diffusivities, Scales};
use crate::simulation::{default_scales, GridConfig, Seeds, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingMode {
    #[default]
    ConstantChamber,
    CycleSchedule,
    TimeSeries,
}

impl ForcingMode {
    pub fn name(&self) -> &'static str {
        match self {
            ForcingMode::ConstantChamber => "constant-chamber",
            ForcingMode::CycleSchedule => "cycle-schedule",
            ForcingMode::TimeSeries => "time-series",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "constant-chamber" | "chamber" => Some(ForcingMode::ConstantChamber),
            "cycle-schedule" | "cycles" => Some(ForcingMode::CycleSchedule),
            "time-series" | "timeseries" => Some(ForcingMode::TimeSeries),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    pub mode: ForcingMode,
    /// Wet-phase (or constant) chamber atmosphere.
    pub chamber: ChamberSettings,
    pub wet_hours: f64,
    pub dry_hours: f64,
    /// Room conditions during the dry phase; no SO₂.
    pub dry_temp_c: f64,
    pub dry_rh_percent: f64,
    /// Environment CSV for time-series mode.
    pub env: Option<PathBuf>,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self {
            mode: ForcingMode::ConstantChamber,
            chamber: ChamberSettings::default(),
            wet_hours: 8.0,
            dry_hours: 16.0,
            dry_temp_c: 25.0,
            dry_rh_percent: 50.0,
            env: None,
        }
    }
}

impl ForcingSpec {
    pub fn build(&self) -> Result<Forcing> {
        match self.mode {
            ForcingMode::ConstantChamber => Forcing::chamber(&self.chamber),
            ForcingMode::CycleSchedule => {
                let f = Forcing::Cycle {
                    wet: self.chamber.concentrations()?,
                    dry: BoundaryConcentrations {
                        so2: 0.0,
                        water: actual_vapor_density(self.dry_temp_c, self.dry_rh_percent)?,
                        oxygen: self.chamber.oxygen,
                    },
                    wet_hours: self.wet_hours,
                    dry_hours: self.dry_hours,
                };
                f.validate()?;
                Ok(f)
            }
            ForcingMode::TimeSeries => {
                let path = self
                    .env
                    .as_ref()
                    .ok_or_else(|| invalid("env", "time-series forcing needs an environment CSV"))?;
                load_timeseries(path, self.chamber.oxygen)
            }
        }
    }
}

/// Optional replacement or scaling of the derived swelling ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwellingSpec {
    pub omega_p: Option<f64>,
    pub omega_b: Option<f64>,
    pub omega_p_scale: f64,
    pub omega_b_scale: f64,
}

impl Default for SwellingSpec {
    fn default() -> Self {
        Self {
            omega_p: None,
            omega_b: None,
            omega_p_scale: 1.0,
            omega_b_scale: 1.0,
        }
    }
}

impl SwellingSpec {
    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }

    pub fn resolve(&self, mat: &MaterialTable) -> Result<Option<SwellingRatios>> {
        if self.is_default() {
            return Ok(None);
        }
        let derived = swelling_ratios(mat)?;
        Ok(Some(SwellingRatios {
            omega_p: self.omega_p.unwrap_or(derived.omega_p) * self.omega_p_scale,
            omega_b: self.omega_b.unwrap_or(derived.omega_b) * self.omega_b_scale,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scales: Scales,
    pub diffusivities: Diffusivities,
    pub materials: MaterialTable,
    pub swelling: SwellingSpec,
    pub grid: GridConfig,
    pub seeds: Seeds,
    pub forcing: ForcingSpec,
    pub horizon_hours: f64,
    pub stride: usize,
    pub calibration: CalibrationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimulationConfig::default();
        Self {
            scales: default_scales(),
            diffusivities: sim.diffusivities,
            materials: sim.materials,
            swelling: SwellingSpec::default(),
            grid: sim.grid,
            seeds: sim.seeds,
            forcing: ForcingSpec::default(),
            horizon_hours: sim.horizon_hours,
            stride: sim.stride,
            calibration: CalibrationSettings::default(),
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    /// Parses config text. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| PatinaError::Parse {
                path: origin.to_string(),
                line: idx + 1,
                reason,
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("malformed section header `{line}`")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(err(format!("`{key}` appears before any section")));
            }
            if !seen.insert(format!("{section}.{key}")) {
                return Err(err(format!("duplicate key `{key}` in [{section}]")));
            }
            cfg.set(&section, key, value, base_dir).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
        Self::parse(&text, &path.display().to_string(), path.parent())
    }

    fn set(&mut self, section: &str, key: &str, value: &str, base_dir: Option<&Path>) -> std::result::Result<(), String> {
        let num = || -> std::result::Result<f64, String> {
            value
                .parse::<f64>()
                .map_err(|_| format!("`{value}` is not a number (key `{key}`)"))
        };
        let count = || -> std::result::Result<usize, String> {
            value
                .parse::<usize>()
                .map_err(|_| format!("`{value}` is not a non-negative integer (key `{key}`)"))
        };
        let flag = || parse_bool(value).ok_or_else(|| format!("`{value}` is not a boolean (key `{key}`)"));
        let unknown = || Err(format!("unknown key `{key}` in [{section}]"));
        match section {
            "scales" => match key {
                "lambda_cm" => self.scales.lambda = num()?,
                "t_r_s" => self.scales.t_r = num()?,
                "s_r" => self.scales.s_r = num()?,
                "w_r" => self.scales.w_r = num()?,
                "o_r" => self.scales.o_r = num()?,
                _ => return unknown(),
            },
            "diffusivities" => match key {
                "d_g" => self.diffusivities.d_g = num()?,
                "d_s" => self.diffusivities.d_s = num()?,
                "d_o" => self.diffusivities.d_o = num()?,
                "d_w" => self.diffusivities.d_w = num()?,
                _ => return unknown(),
            },
            "grid" => match key {
                "n_z" => self.grid.n_z = count()?,
                "n_y" => self.grid.n_y = count()?,
                "dt_max" => self.grid.dt_max = num()?,
                "cfl" => self.grid.cfl_target = num()?,
                "advection" => {
                    self.grid.advection = match value {
                        "upwind" => AdvectionScheme::Upwind,
                        "central" => AdvectionScheme::Central,
                        _ => return Err(format!("advection must be `upwind` or `central`, got `{value}`")),
                    }
                }
                _ => return unknown(),
            },
            "seeds" => match key {
                "a0" => self.seeds.a0 = num()?,
                "b0" => self.seeds.b0 = num()?,
                _ => return unknown(),
            },
            "forcing" => match key {
                "mode" => {
                    self.forcing.mode = ForcingMode::parse(value).ok_or_else(|| {
                        format!("mode must be constant-chamber, cycle-schedule or time-series, got `{value}`")
                    })?
                }
                "so2_ppm" => self.forcing.chamber.so2_ppm = num()?,
                "temp_c" => self.forcing.chamber.temp_c = num()?,
                "rh_percent" => self.forcing.chamber.rh_percent = num()?,
                "pressure_pa" => self.forcing.chamber.pressure_pa = num()?,
                "oxygen" => self.forcing.chamber.oxygen = num()?,
                "wet_hours" => self.forcing.wet_hours = num()?,
                "dry_hours" => self.forcing.dry_hours = num()?,
                "dry_temp_c" => self.forcing.dry_temp_c = num()?,
                "dry_rh_percent" => self.forcing.dry_rh_percent = num()?,
                "env" => {
                    let p = PathBuf::from(value);
                    self.forcing.env = Some(match base_dir {
                        Some(dir) if p.is_relative() => dir.join(p),
                        _ => p,
                    });
                }
                _ => return unknown(),
            },
            "run" => match key {
                "horizon_hours" => self.horizon_hours = num()?,
                "stride" => self.stride = count()?,
                _ => return unknown(),
            },
            "materials" => {
                if !self.materials.set(key, num()?) {
                    return unknown();
                }
            }
            "swelling" => match key {
                "omega_p" => self.swelling.omega_p = Some(num()?),
                "omega_b" => self.swelling.omega_b = Some(num()?),
                "omega_p_scale" => self.swelling.omega_p_scale = num()?,
                "omega_b_scale" => self.swelling.omega_b_scale = num()?,
                _ => return unknown(),
            },
            "calibration" => match key {
                "lower" => self.calibration.lower = num()?,
                "upper" => self.calibration.upper = num()?,
                "tie_dw_ds" => self.calibration.tie_dw_ds = flag()?,
                "weighting" => {
                    self.calibration.weighting = match value {
                        "std" => Weighting::Std,
                        "raw" => Weighting::Raw,
                        _ => return Err(format!("weighting must be `std` or `raw`, got `{value}`")),
                    }
                }
                "max_evals" => self.calibration.max_evals = count()?,
                "spread_tol" => self.calibration.spread_tol = num()?,
                "initial_step" => self.calibration.initial_step = num()?,
                "warm_start" => self.calibration.warm_start = flag()?,
                _ => return unknown(),
            },
            _ => return unknown(),
        }
        Ok(())
    }

    /// Builds the simulator input, loading any environment file.
    pub fn simulation(&self) -> Result<SimulationConfig> {
        let config = SimulationConfig {
            scales: self.scales,
            diffusivities: self.diffusivities,
            materials: self.materials,
            swelling_override: self.swelling.resolve(&self.materials)?,
            forcing: Arc::new(self.forcing.build()?),
            grid: self.grid,
            seeds: self.seeds,
            horizon_hours: self.horizon_hours,
            stride: self.stride,
        };
        config.validate()?;
        Ok(config)
    }

    /// All settings, defaults included, in the input format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, rows: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in rows {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        let e = |x: f64| format!("{x:e}");
        let s = &self.scales;
        section(
            "scales",
            vec![
                ("lambda_cm", e(s.lambda)),
                ("t_r_s", e(s.t_r)),
                ("s_r", e(s.s_r)),
                ("w_r", e(s.w_r)),
                ("o_r", e(s.o_r)),
            ],
        );
        let d = &self.diffusivities;
        section(
            "diffusivities",
            vec![("d_g", e(d.d_g)), ("d_s", e(d.d_s)), ("d_o", e(d.d_o)), ("d_w", e(d.d_w))],
        );
        let g = &self.grid;
        section(
            "grid",
            vec![
                ("n_z", g.n_z.to_string()),
                ("n_y", g.n_y.to_string()),
                ("dt_max", e(g.dt_max)),
                ("cfl", e(g.cfl_target)),
                (
                    "advection",
                    match g.advection {
                        AdvectionScheme::Upwind => "upwind",
                        AdvectionScheme::Central => "central",
                    }
                    .to_string(),
                ),
            ],
        );
        section("seeds", vec![("a0", e(self.seeds.a0)), ("b0", e(self.seeds.b0))]);
        let f = &self.forcing;
        let mut rows = vec![
            ("mode", f.mode.name().to_string()),
            ("so2_ppm", e(f.chamber.so2_ppm)),
            ("temp_c", e(f.chamber.temp_c)),
            ("rh_percent", e(f.chamber.rh_percent)),
            ("pressure_pa", e(f.chamber.pressure_pa)),
            ("oxygen", e(f.chamber.oxygen)),
            ("wet_hours", e(f.wet_hours)),
            ("dry_hours", e(f.dry_hours)),
            ("dry_temp_c", e(f.dry_temp_c)),
            ("dry_rh_percent", e(f.dry_rh_percent)),
        ];
        if let Some(p) = &f.env {
            rows.push(("env", p.display().to_string()));
        }
        section("forcing", rows);
        section(
            "run",
            vec![("horizon_hours", e(self.horizon_hours)), ("stride", self.stride.to_string())],
        );
        section(
            "materials",
            self.materials.entries().iter().map(|(k, v)| (*k, e(*v))).collect(),
        );
        let sw = &self.swelling;
        let mut rows = Vec::new();
        if let Some(v) = sw.omega_p {
            rows.push(("omega_p", e(v)));
        }
        if let Some(v) = sw.omega_b {
            rows.push(("omega_b", e(v)));
        }
        rows.push(("omega_p_scale", e(sw.omega_p_scale)));
        rows.push(("omega_b_scale", e(sw.omega_b_scale)));
        section("swelling", rows);
        let c = &self.calibration;
        section(
            "calibration",
            vec![
                ("lower", e(c.lower)),
                ("upper", e(c.upper)),
                ("tie_dw_ds", c.tie_dw_ds.to_string()),
                (
                    "weighting",
                    match c.weighting {
                        Weighting::Std => "std",
                        Weighting::Raw => "raw",
                    }
                    .to_string(),
                ),
                ("max_evals", c.max_evals.to_string()),
                ("spread_tol", e(c.spread_tol)),
                ("initial_step", e(c.initial_step)),
                ("warm_start", c.warm_start.to_string()),
            ],
        );
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

pub const SECTIONS: [&str; 9] = [
    "scales",
    "diffusivities",
    "grid",
    "seeds",
    "forcing",
    "run",
    "materials",
    "swelling",
    "calibration",
];
