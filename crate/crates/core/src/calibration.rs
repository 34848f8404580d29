//! Least-squares fitting of the diffusivities to measured patina thickness.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::{debug, warn};

use crate::error::{invalid, io_error, PatinaError, Result};
use crate::optimize::{minimize, Bounds, NelderMeadOptions};
use crate::pde::Diffusivities;
use crate::simulation::{run, SimulationConfig};

pub const MEASUREMENT_CSV_HEADER: [&str; 3] = ["time_hours", "thickness_cm", "std_cm"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessMeasurement {
    /// Hours since exposure started.
    pub time: f64,
    /// Mean total thickness, cm.
    pub mean: f64,
    /// Standard deviation, cm.
    pub std: f64,
}

impl ThicknessMeasurement {
    pub fn validate(&self) -> Result<()> {
        if !(self.time > 0.0 && self.time.is_finite()) {
            return Err(invalid("time", format!("must be positive, got {}", self.time)));
        }
        if !(self.mean > 0.0 && self.mean.is_finite()) {
            return Err(invalid("thickness", format!("must be positive, got {}", self.mean)));
        }
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(invalid("std", format!("must be non-negative, got {}", self.std)));
        }
        Ok(())
    }

    /// Residual weight: the standard deviation, or the mean when no spread is given.
    pub fn weight(&self, weighting: Weighting) -> f64 {
        match weighting {
            Weighting::Std if self.std > 0.0 => self.std,
            Weighting::Std => self.mean,
            Weighting::Raw => 1.0,
        }
    }
}

/// Residual weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Std,
    /// Plain squared error in cm².
    Raw,
}

pub fn read_measurements<R: Read>(reader: R, origin: &str) -> Result<Vec<ThicknessMeasurement>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: usize, reason: String| PatinaError::Parse {
        path: origin.to_string(),
        line,
        reason,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != MEASUREMENT_CSV_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`", MEASUREMENT_CSV_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 3 {
            return Err(parse_err(line, format!("malformed row: expected 3 fields, got {}", rec.len())));
        }
        let mut vals = [0.0; 3];
        for (slot, (field, name)) in vals.iter_mut().zip(rec.iter().zip(MEASUREMENT_CSV_HEADER)) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("malformed row: bad {name} `{field}`")))?;
        }
        let m = ThicknessMeasurement {
            time: vals[0],
            mean: vals[1],
            std: vals[2],
        };
        m.validate().map_err(|e| parse_err(line, e.to_string()))?;
        out.push(m);
    }
    if out.is_empty() {
        return Err(PatinaError::Data(format!("{origin}: no measurements")));
    }
    Ok(out)
}

pub fn load_measurements(path: &Path) -> Result<Vec<ThicknessMeasurement>> {
    let file = File::open(path).map_err(|e| io_error(path, &e))?;
    read_measurements(file, &path.display().to_string())
}

/// Simulated total thickness at each measurement time, in input order.
pub fn predict(d: &Diffusivities, measurements: &[ThicknessMeasurement], config: &SimulationConfig) -> Result<Vec<f64>> {
    if measurements.is_empty() {
        return Err(PatinaError::Data("no measurements".into()));
    }
    for m in measurements {
        m.validate()?;
    }
    let horizon = measurements.iter().map(|m| m.time).fold(0.0, f64::max);
    let cfg = SimulationConfig {
        diffusivities: *d,
        horizon_hours: horizon,
        stride: 1,
        ..config.clone()
    };
    let out = run(&cfg)?;
    measurements
        .iter()
        .map(|m| {
            out.total_at(m.time)
                .ok_or_else(|| PatinaError::Data(format!("no prediction at t = {} h", m.time)))
        })
        .collect()
}

/// Weighted sum of squared misfits for given predictions.
pub fn misfit(predicted: &[f64], measurements: &[ThicknessMeasurement], weighting: Weighting) -> f64 {
    // summed in time order so that the value does not depend on input order
    let mut terms: Vec<(f64, f64)> = predicted
        .iter()
        .zip(measurements)
        .map(|(p, m)| (m.time, ((p - m.mean) / m.weight(weighting)).powi(2)))
        .collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    terms.iter().map(|t| t.1).sum()
}

/// Runs the simulator once; a failed run scores infinity.
pub fn residual(
    d: &Diffusivities,
    measurements: &[ThicknessMeasurement],
    config: &SimulationConfig,
    weighting: Weighting,
) -> f64 {
    match predict(d, measurements, config) {
        Ok(p) => misfit(&p, measurements, weighting),
        Err(e) => {
            debug!("residual evaluation rejected at {d:?}: {e}");
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    /// Box bounds on every diffusivity, cm²/s.
    pub lower: f64,
    pub upper: f64,
    /// Fit D_w = D_s as one parameter.
    pub tie_dw_ds: bool,
    pub weighting: Weighting,
    pub max_evals: usize,
    /// Simplex spread in log10 units at which the search stops.
    pub spread_tol: f64,
    /// Initial simplex edge in log10 units.
    pub initial_step: f64,
    /// Before the simplex search, rescale all diffusivities by one common
    /// factor chosen by a golden-section search.
    pub warm_start: bool,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            lower: 1e-10,
            upper: 1e-3,
            tie_dw_ds: true,
            weighting: Weighting::Std,
            max_evals: 1500,
            spread_tol: 1e-3,
            initial_step: 0.3,
            warm_start: true,
        }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.upper > self.lower && self.upper.is_finite()) {
            return Err(invalid(
                "bounds",
                format!("need 0 < lower < upper, got [{}, {}]", self.lower, self.upper),
            ));
        }
        if self.max_evals == 0 {
            return Err(invalid("max_evals", "must be at least 1"));
        }
        if !(self.spread_tol > 0.0) || !(self.initial_step > 0.0) {
            return Err(invalid("calibration", "spread_tol and initial_step must be positive"));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        if self.tie_dw_ds {
            3
        } else {
            4
        }
    }

    fn encode(&self, d: &Diffusivities) -> Vec<f64> {
        let mut x = vec![d.d_g.log10(), d.d_s.log10(), d.d_o.log10()];
        if !self.tie_dw_ds {
            x.push(d.d_w.log10());
        }
        x
    }

    fn decode(&self, x: &[f64]) -> Diffusivities {
        let p = |v: f64| 10f64.powf(v).clamp(self.lower, self.upper);
        let d_s = p(x[1]);
        Diffusivities {
            d_g: p(x[0]),
            d_s,
            d_o: p(x[2]),
            d_w: if self.tie_dw_ds { d_s } else { p(x[3]) },
        }
    }
}

/// Golden-section search for the common log10 shift `s` minimising
/// `f(x0 + s)`, restricted so that every coordinate stays inside `bounds`.
fn common_shift<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], bounds: &Bounds, tol: f64) -> (f64, usize) {
    let lo = x0
        .iter()
        .zip(&bounds.lower)
        .map(|(x, l)| l - x)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(-3.0);
    let hi = x0
        .iter()
        .zip(&bounds.upper)
        .map(|(x, u)| u - x)
        .fold(f64::INFINITY, f64::min)
        .min(3.0);
    let eval = |s: f64| {
        let x: Vec<f64> = x0.iter().map(|v| v + s).collect();
        let v = f(&x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    let mut evals = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d);
        }
        evals += 1;
    }
    let f0 = eval(0.0);
    evals += 1;
    let (s, fs) = if fc <= fd { (c, fc) } else { (d, fd) };
    if fs < f0 {
        (s, evals)
    } else {
        (0.0, evals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFit {
    pub time: f64,
    pub measured: f64,
    pub std: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub diffusivities: Diffusivities,
    pub residual: f64,
    pub points: Vec<PointFit>,
    pub evaluations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

pub const CALIBRATION_CSV_HEADER: &str = "time_hours,measured_cm,std_cm,predicted_cm";

impl CalibrationResult {
    pub fn to_csv(&self) -> String {
        use crate::simulation::format_number as f;
        let mut out = String::new();
        let d = &self.diffusivities;
        out.push_str(&format!(
            "# d_g={} d_s={} d_o={} d_w={} residual={} evaluations={} converged={}\n",
            f(d.d_g),
            f(d.d_s),
            f(d.d_o),
            f(d.d_w),
            f(self.residual),
            self.evaluations,
            self.converged
        ));
        out.push_str(CALIBRATION_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", f(p.time), f(p.measured), f(p.std), f(p.predicted)));
        }
        out
    }
}

/// Nelder-Mead fit in log10 space starting from `initial`.
pub fn calibrate(
    initial: &Diffusivities,
    measurements: &[ThicknessMeasurement],
    config: &SimulationConfig,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    settings.validate()?;
    if measurements.is_empty() {
        return Err(PatinaError::Data("no measurements".into()));
    }
    for m in measurements {
        m.validate()?;
    }
    initial.validate()?;
    let inside = |v: f64| v >= settings.lower && v <= settings.upper;
    if ![initial.d_g, initial.d_s, initial.d_o, initial.d_w].into_iter().all(inside) {
        return Err(invalid("initial", "initial diffusivities must lie within the bounds"));
    }
    if measurements.len() < settings.parameter_count() {
        warn!(
            "under-determined fit: {} measurements for {} parameters",
            measurements.len(),
            settings.parameter_count()
        );
    }
    config.validate()?;

    let n = settings.parameter_count();
    let bounds = Bounds::uniform(n, settings.lower.log10(), settings.upper.log10());
    let opts = NelderMeadOptions {
        initial_step: settings.initial_step,
        spread_tol: settings.spread_tol,
        max_evals: settings.max_evals,
    };
    let objective = |x: &[f64]| residual(&settings.decode(x), measurements, config, settings.weighting);
    let mut start = settings.encode(initial);
    let mut warm_evals = 0;
    if settings.warm_start {
        let (shift, evals) = common_shift(&objective, &start, &bounds, settings.spread_tol);
        start.iter_mut().for_each(|v| *v += shift);
        warm_evals = evals;
        debug!("warm start shifted log10 D by {shift:.4} using {evals} runs");
    }
    let opts = NelderMeadOptions {
        max_evals: settings.max_evals.saturating_sub(warm_evals).max(1),
        ..opts
    };
    let mut found = minimize(objective, &start, &bounds, &opts);
    found.evaluations += warm_evals;
    let best = settings.decode(&found.x);
    let predicted = predict(&best, measurements, config)?;
    let points = measurements
        .iter()
        .zip(&predicted)
        .map(|(m, &p)| PointFit {
            time: m.time,
            measured: m.mean,
            std: m.std,
            predicted: p,
        })
        .collect();
    Ok(CalibrationResult {
        diffusivities: best,
        residual: misfit(&predicted, measurements, settings.weighting),
        points,
        evaluations: found.evaluations,
        converged: found.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(time: f64, mean: f64, std: f64) -> ThicknessMeasurement {
        ThicknessMeasurement { time, mean, std }
    }

    #[test]
    fn misfit_definition() {
        let ms = [m(8.0, 1.0, 0.5), m(24.0, 2.0, 0.0)];
        assert_eq!(misfit(&[1.0, 2.0], &ms, Weighting::Std), 0.0);
        assert_eq!(misfit(&[1.5], &ms[..1], Weighting::Std), 1.0);
        // zero std falls back to the mean
        assert_eq!(misfit(&[1.0, 3.0], &ms, Weighting::Std), 0.25);
        assert_eq!(misfit(&[1.0, 3.0], &ms, Weighting::Raw), 1.0);
    }

    #[test]
    fn misfit_ignores_order() {
        let ms = [m(8.0, 1.0, 0.3), m(24.0, 2.0, 0.7), m(40.0, 2.5, 0.1)];
        let p = [1.1, 1.7, 2.9];
        let a = misfit(&p, &ms, Weighting::Std);
        let b = misfit(&[p[2], p[0], p[1]], &[ms[2], ms[0], ms[1]], Weighting::Std);
        assert_eq!(a, b);
    }

    #[test]
    fn parses_shipped_layout() {
        let text = "# comment\ntime_hours,thickness_cm,std_cm\n8,5.4418e-4,1.7331e-4\n24, 9.2672e-4 ,1.8473e-4\n";
        let ms = read_measurements(text.as_bytes(), "t.csv").unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[1], m(24.0, 9.2672e-4, 1.8473e-4));
    }

    #[test]
    fn rejects_bad_files() {
        let empty = "time_hours,thickness_cm,std_cm\n";
        assert!(matches!(read_measurements(empty.as_bytes(), "e"), Err(PatinaError::Data(_))));
        let header = "t,x,s\n1,1,1\n";
        assert!(read_measurements(header.as_bytes(), "h").is_err());
        let neg = "time_hours,thickness_cm,std_cm\n1,-1,0\n";
        let err = read_measurements(neg.as_bytes(), "n").unwrap_err();
        assert!(matches!(err, PatinaError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn decode_respects_tie_and_bounds() {
        let s = CalibrationSettings::default();
        let d = s.decode(&[-8.0, -5.0, -20.0]);
        assert_eq!(d.d_w, d.d_s);
        assert_eq!(d.d_o, 1e-10);
        let free = CalibrationSettings {
            tie_dw_ds: false,
            ..s
        };
        let x = free.encode(&Diffusivities::calibrated());
        assert_eq!(x.len(), 4);
        let back = free.decode(&x);
        let c = Diffusivities::calibrated();
        for (a, b) in [(back.d_g, c.d_g), (back.d_s, c.d_s), (back.d_o, c.d_o), (back.d_w, c.d_w)] {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_settings_rejected() {
        let ms = [m(1.0, 1e-4, 1e-5)];
        let config = SimulationConfig::default();
        let s = CalibrationSettings {
            lower: 1e-3,
            upper: 1e-4,
            ..Default::default()
        };
        assert!(calibrate(&Diffusivities::calibrated(), &ms, &config, &s).is_err());
        let s = CalibrationSettings {
            lower: 1e-8,
            ..Default::default()
        };
        assert!(calibrate(&Diffusivities::calibrated(), &ms, &config, &s).is_err());
        assert!(calibrate(&Diffusivities::calibrated(), &[], &config, &CalibrationSettings::default()).is_err());
    }
}
