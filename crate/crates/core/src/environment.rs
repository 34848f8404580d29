//! Boundary concentrations of SO₂, water vapour and oxygen at the outer
//! patina surface, from a chamber program or a monitoring time series.

use std::io::Read;
use std::path::Path;

use crate::error::{invalid, io_error, PatinaError, Result};
use crate::materials::MaterialTable;

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;
pub const STANDARD_PRESSURE_PA: f64 = 101_325.0;
/// Ambient O₂ mass concentration near 40 °C, g/cm³.
pub const AMBIENT_OXYGEN: f64 = 2.6e-4;

pub const ENV_CSV_HEADER: [&str; 4] = ["time_hours", "so2_ugm3", "temp_c", "rh_percent"];

/// Saturated water-vapour density in g/m³ from the cubic fit, valid on 0–45 °C.
pub fn saturated_vapor_density(temp_c: f64) -> f64 {
    if !(0.0..=45.0).contains(&temp_c) {
        log::warn!("saturated vapour density fit used outside 0-45 C (T = {temp_c})");
    }
    let t = temp_c;
    5.018 + 0.32321 * t + 8.1847e-3 * t * t + 3.1243e-4 * t * t * t
}

/// Actual vapour density in g/cm³.
pub fn actual_vapor_density(temp_c: f64, rh_percent: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&rh_percent) {
        return Err(invalid(
            "relative humidity",
            format!("must lie in [0, 100] %, got {rh_percent}"),
        ));
    }
    Ok(rh_percent / 100.0 * saturated_vapor_density(temp_c) * 1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum So2Amount {
    /// Volume mixing ratio in parts per million.
    Ppm(f64),
    /// Mass concentration in µg/m³.
    MicrogramsPerCubicMetre(f64),
}

/// SO₂ mass concentration in g/cm³. Mixing ratios go through the ideal gas law.
pub fn so2_concentration(amount: So2Amount, temp_c: f64, pressure_pa: f64) -> Result<f64> {
    match amount {
        So2Amount::Ppm(x) => {
            if !(x >= 0.0) {
                return Err(invalid("SO2", format!("must be non-negative, got {x} ppm")));
            }
            if !(temp_c > -273.15) {
                return Err(invalid("temperature", format!("below absolute zero: {temp_c}")));
            }
            let m_s = MaterialTable::reference().m_s;
            // g/m³ -> g/cm³
            let g_per_m3 = x * 1e-6 * pressure_pa * m_s / (GAS_CONSTANT * (temp_c + 273.15));
            Ok(g_per_m3 * 1e-6)
        }
        So2Amount::MicrogramsPerCubicMetre(c) => {
            if !(c >= 0.0) {
                return Err(invalid("SO2", format!("must be non-negative, got {c} ug/m3")));
            }
            Ok(c * 1e-12)
        }
    }
}

/// One monitoring record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSample {
    pub time: f64,
    pub so2_ambient: f64,
    pub temperature: f64,
    pub relative_humidity: f64,
}

/// SO₂, water vapour and oxygen mass concentrations, g/cm³.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryConcentrations {
    pub so2: f64,
    pub water: f64,
    pub oxygen: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSample {
    pub time: f64,
    pub values: BoundaryConcentrations,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// Fixed chamber atmosphere.
    Constant(BoundaryConcentrations),
    /// Repeating wet/dry program starting with the wet phase at t = 0.
    Cycle {
        wet: BoundaryConcentrations,
        dry: BoundaryConcentrations,
        wet_hours: f64,
        dry_hours: f64,
    },
    /// Piecewise-linear interpolation of samples, held constant past either end.
    TimeSeries(Vec<ForcingSample>),
}

/// Chamber program defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamberSettings {
    pub so2_ppm: f64,
    pub temp_c: f64,
    pub rh_percent: f64,
    pub pressure_pa: f64,
    pub oxygen: f64,
}

impl Default for ChamberSettings {
    fn default() -> Self {
        Self {
            so2_ppm: 200.0,
            temp_c: 40.0,
            rh_percent: 100.0,
            pressure_pa: STANDARD_PRESSURE_PA,
            oxygen: AMBIENT_OXYGEN,
        }
    }
}

impl ChamberSettings {
    pub fn concentrations(&self) -> Result<BoundaryConcentrations> {
        Ok(BoundaryConcentrations {
            so2: so2_concentration(So2Amount::Ppm(self.so2_ppm), self.temp_c, self.pressure_pa)?,
            water: actual_vapor_density(self.temp_c, self.rh_percent)?,
            oxygen: self.oxygen,
        })
    }
}

/// Room conditions during the dry phase: no SO₂, 25 °C and 50 % RH.
pub fn default_dry_phase(oxygen: f64) -> BoundaryConcentrations {
    BoundaryConcentrations {
        so2: 0.0,
        water: actual_vapor_density(25.0, 50.0).unwrap_or(0.0),
        oxygen,
    }
}

fn check_non_negative(v: &BoundaryConcentrations, what: &str) -> Result<()> {
    for (name, x) in [("so2", v.so2), ("water", v.water), ("oxygen", v.oxygen)] {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(PatinaError::Data(format!(
                "{what}: {name} concentration must be non-negative, got {x}"
            )));
        }
    }
    Ok(())
}

impl Forcing {
    pub fn chamber(settings: &ChamberSettings) -> Result<Self> {
        Ok(Forcing::Constant(settings.concentrations()?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Forcing::Constant(v) => check_non_negative(v, "chamber"),
            Forcing::Cycle {
                wet,
                dry,
                wet_hours,
                dry_hours,
            } => {
                if !(*wet_hours > 0.0) {
                    return Err(invalid("wet_hours", format!("must be positive, got {wet_hours}")));
                }
                if !(*dry_hours >= 0.0) {
                    return Err(invalid("dry_hours", format!("must be non-negative, got {dry_hours}")));
                }
                check_non_negative(wet, "wet phase")?;
                check_non_negative(dry, "dry phase")
            }
            Forcing::TimeSeries(samples) => {
                if samples.is_empty() {
                    return Err(PatinaError::Data("no samples".into()));
                }
                for (i, s) in samples.iter().enumerate() {
                    check_non_negative(&s.values, &format!("sample {i}"))?;
                    if i > 0 && !(s.time > samples[i - 1].time) {
                        return Err(PatinaError::Data(format!("non-monotone time at sample {i}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Boundary concentrations at `t` hours.
    pub fn at(&self, t: f64) -> BoundaryConcentrations {
        match self {
            Forcing::Constant(v) => *v,
            Forcing::Cycle {
                wet,
                dry,
                wet_hours,
                dry_hours,
            } => {
                let period = wet_hours + dry_hours;
                if t.rem_euclid(period) < *wet_hours {
                    *wet
                } else {
                    *dry
                }
            }
            Forcing::TimeSeries(samples) => interpolate(samples, t),
        }
    }

    /// Last sample time for a series; `None` for periodic or constant programs.
    pub fn span_hours(&self) -> Option<f64> {
        match self {
            Forcing::TimeSeries(s) => s.last().map(|x| x.time),
            _ => None,
        }
    }
}

/// Convenience alias matching the operation name used by the solver.
pub fn forcing_at(forcing: &Forcing, t: f64) -> BoundaryConcentrations {
    forcing.at(t)
}

fn interpolate(samples: &[ForcingSample], t: f64) -> BoundaryConcentrations {
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return BoundaryConcentrations::default(),
    };
    if t <= first.time {
        return first.values;
    }
    if t >= last.time {
        return last.values;
    }
    // index of the first sample strictly after t
    let hi = samples.partition_point(|s| s.time <= t);
    let (p, q) = (&samples[hi - 1], &samples[hi]);
    let w = (t - p.time) / (q.time - p.time);
    let lerp = |x: f64, y: f64| x + w * (y - x);
    BoundaryConcentrations {
        so2: lerp(p.values.so2, q.values.so2),
        water: lerp(p.values.water, q.values.water),
        oxygen: lerp(p.values.oxygen, q.values.oxygen),
    }
}

/// Reads an environment CSV (`time_hours,so2_ugm3,temp_c,rh_percent`).
pub fn read_env_samples<R: Read>(reader: R, origin: &str) -> Result<Vec<EnvSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: usize, reason: String| PatinaError::Parse {
        path: origin.to_string(),
        line,
        reason,
    };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ENV_CSV_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`", ENV_CSV_HEADER.join(",")),
        ));
    }
    let mut out: Vec<EnvSample> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 4 {
            return Err(parse_err(line, format!("malformed row: expected 4 fields, got {}", rec.len())));
        }
        let mut vals = [0.0; 4];
        for (slot, (field, name)) in vals.iter_mut().zip(rec.iter().zip(ENV_CSV_HEADER)) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("malformed row: bad {name} `{field}`")))?;
        }
        let sample = EnvSample {
            time: vals[0],
            so2_ambient: vals[1],
            temperature: vals[2],
            relative_humidity: vals[3],
        };
        if !(0.0..=100.0).contains(&sample.relative_humidity) {
            return Err(parse_err(
                line,
                format!("relative humidity {} out of range [0, 100]", sample.relative_humidity),
            ));
        }
        if sample.so2_ambient < 0.0 {
            return Err(parse_err(line, format!("negative SO2 {}", sample.so2_ambient)));
        }
        if let Some(prev) = out.last() {
            if !(sample.time > prev.time) {
                return Err(parse_err(line, "non-monotone time".into()));
            }
        }
        out.push(sample);
    }
    if out.is_empty() {
        return Err(PatinaError::Data(format!("{origin}: no samples")));
    }
    Ok(out)
}

/// Converts monitoring records into a time-series forcing.
pub fn forcing_from_samples(samples: &[EnvSample], oxygen: f64) -> Result<Forcing> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        out.push(ForcingSample {
            time: s.time,
            values: BoundaryConcentrations {
                so2: so2_concentration(
                    So2Amount::MicrogramsPerCubicMetre(s.so2_ambient),
                    s.temperature,
                    STANDARD_PRESSURE_PA,
                )?,
                water: actual_vapor_density(s.temperature, s.relative_humidity)?,
                oxygen,
            },
        });
    }
    let f = Forcing::TimeSeries(out);
    f.validate()?;
    Ok(f)
}

pub fn load_timeseries(path: &Path, oxygen: f64) -> Result<Forcing> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, &e))?;
    let samples = read_env_samples(file, &path.display().to_string())?;
    forcing_from_samples(&samples, oxygen)
}
