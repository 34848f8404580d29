//! Material constants, swelling ratios and the stoichiometric mole balance.
//!
//! Cuprite forms from copper as `2 Cu + 1/2 O2 -> Cu2O` and brochantite from
//! cuprite as `2 Cu2O + SO2 + 3 H2O + 3/2 O2 -> Cu4(OH)6SO4`. Both conversions
//! swell: a consumed thickness `a` of copper becomes `(1 + omega_p) a` of
//! cuprite, and a consumed thickness `b` of cuprite becomes `(1 + omega_b) b`
//! of brochantite.

use std::path::Path;

use crate::error::{invalid, io_error, PatinaError, Result};
use crate::pde::FrontState;

/// Densities (g/cm³), molar masses (g/mol) and layer porosities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialTable {
    pub rho_c: f64,
    pub rho_p: f64,
    pub rho_b: f64,
    pub rho_s: f64,
    pub m_c: f64,
    pub m_p: f64,
    pub m_b: f64,
    pub m_s: f64,
    pub m_w: f64,
    pub m_o: f64,
    /// Porosity of the brochantite layer.
    pub n_b: f64,
    /// Porosity of the cuprite layer.
    pub n_p: f64,
}

impl Default for MaterialTable {
    fn default() -> Self {
        Self::reference()
    }
}

impl MaterialTable {
    /// Laboratory reference values for copper, cuprite, brochantite and SO₂.
    /// Porosities default to 1 since the calibrated diffusivities absorb them.
    pub const fn reference() -> Self {
        Self {
            rho_c: 8.94,
            rho_p: 6.00,
            rho_b: 3.97,
            rho_s: 1.46,
            m_c: 63.55,
            m_p: 143.09,
            m_b: 452.3,
            m_s: 64.07,
            m_w: 18.015,
            m_o: 32.00,
            n_b: 1.0,
            n_p: 1.0,
        }
    }

    /// Molar density of copper, mol/cm³.
    pub fn mu_c(&self) -> f64 {
        self.rho_c / self.m_c
    }

    /// Molar density of cuprite, mol/cm³.
    pub fn mu_p(&self) -> f64 {
        self.rho_p / self.m_p
    }

    /// Molar density of brochantite, mol/cm³.
    pub fn mu_b(&self) -> f64 {
        self.rho_b / self.m_b
    }

    /// Molar mass of the oxygen reaching the copper front (same species as `m_o`).
    pub fn m_g(&self) -> f64 {
        self.m_o
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_c", self.rho_c),
            ("rho_p", self.rho_p),
            ("rho_b", self.rho_b),
            ("rho_s", self.rho_s),
            ("M_c", self.m_c),
            ("M_p", self.m_p),
            ("M_b", self.m_b),
            ("M_s", self.m_s),
            ("M_w", self.m_w),
            ("M_o", self.m_o),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        for (name, value) in [("n_b", self.n_b), ("n_p", self.n_p)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(invalid(name, format!("porosity must lie in (0, 1], got {value}")));
            }
        }
        Ok(())
    }

    /// Parses `key = value` override lines on top of `self`. Blank lines and
    /// lines starting with `#` are skipped; unknown keys are rejected.
    pub fn with_overrides(mut self, text: &str, origin: &str) -> Result<Self> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| PatinaError::Parse {
                path: origin.to_string(),
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{}` is not a number", value.trim())))?;
            if !self.set(key, value) {
                return Err(parse_err(format!("unknown material key `{key}`")));
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn from_override_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
        Self::reference().with_overrides(&text, &path.display().to_string())
    }

    /// Sets a field by its override-file key. Returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "rho_c" => &mut self.rho_c,
            "M_c" => &mut self.m_c,
            "rho_p" => &mut self.rho_p,
            "M_p" => &mut self.m_p,
            "rho_b" => &mut self.rho_b,
            "M_b" => &mut self.m_b,
            "rho_s" => &mut self.rho_s,
            "M_s" => &mut self.m_s,
            "M_w" => &mut self.m_w,
            "M_o" => &mut self.m_o,
            "n_b" => &mut self.n_b,
            "n_p" => &mut self.n_p,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// All fields in override-file order, for writing resolved configs.
    pub fn entries(&self) -> [(&'static str, f64); 12] {
        [
            ("rho_c", self.rho_c),
            ("M_c", self.m_c),
            ("rho_p", self.rho_p),
            ("M_p", self.m_p),
            ("rho_b", self.rho_b),
            ("M_b", self.m_b),
            ("rho_s", self.rho_s),
            ("M_s", self.m_s),
            ("M_w", self.m_w),
            ("M_o", self.m_o),
            ("n_b", self.n_b),
            ("n_p", self.n_p),
        ]
    }
}

/// Volume expansion ratios of the two conversions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwellingRatios {
    pub omega_p: f64,
    pub omega_b: f64,
}

/// `omega_p = mu_c / (2 mu_p) - 1`, `omega_b = mu_p / (2 mu_b) - 1`.
pub fn swelling_ratios(mat: &MaterialTable) -> Result<SwellingRatios> {
    mat.validate()?;
    Ok(SwellingRatios {
        omega_p: mat.mu_c() / (2.0 * mat.mu_p()) - 1.0,
        omega_b: mat.mu_p() / (2.0 * mat.mu_b()) - 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerThicknesses {
    /// Remaining cuprite, `a - beta`.
    pub h_p: f64,
    /// Brochantite, `beta - gamma`.
    pub h_b: f64,
    /// Whole patina, `a - gamma`.
    pub total: f64,
}

/// Layer thicknesses in the same length unit as `fs`.
pub fn layer_thicknesses(fs: &FrontState) -> Result<LayerThicknesses> {
    if !(fs.gamma <= fs.beta && fs.beta <= fs.a) {
        return Err(PatinaError::FrontOrdering {
            a: fs.a,
            beta: fs.beta,
            gamma: fs.gamma,
        });
    }
    Ok(LayerThicknesses {
        h_p: fs.a - fs.beta,
        h_b: fs.beta - fs.gamma,
        total: fs.a - fs.gamma,
    })
}

/// Per-unit-area mole counts (mol/cm²) of the two conversions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoleReport {
    pub copper_wasted: f64,
    pub cuprite_formed: f64,
    pub cuprite_wasted: f64,
    pub brochantite_formed: f64,
}

impl MoleReport {
    /// Copper moles consumed per cuprite mole formed; 2 by stoichiometry.
    pub fn copper_ratio(&self) -> Option<f64> {
        (self.cuprite_formed > 0.0).then(|| self.copper_wasted / self.cuprite_formed)
    }

    /// Cuprite moles consumed per brochantite mole formed; 2 by stoichiometry.
    pub fn cuprite_ratio(&self) -> Option<f64> {
        (self.brochantite_formed > 0.0).then(|| self.cuprite_wasted / self.brochantite_formed)
    }

    /// Amounts converted after `start`, e.g. excluding the initial seed layers.
    pub fn growth_since(&self, start: &MoleReport) -> MoleReport {
        MoleReport {
            copper_wasted: self.copper_wasted - start.copper_wasted,
            cuprite_formed: self.cuprite_formed - start.cuprite_formed,
            cuprite_wasted: self.cuprite_wasted - start.cuprite_wasted,
            brochantite_formed: self.brochantite_formed - start.brochantite_formed,
        }
    }
}

/// Mole balance of a front state given in centimetres.
///
/// The formed amounts are read off the geometry (`a - beta + b` of cuprite was
/// produced in total, `beta - gamma` of brochantite is present), so a solver
/// whose fronts drift away from the swelling kinematics shows ratios away
/// from 2.
pub fn mole_balance(fs: &FrontState, mat: &MaterialTable) -> Result<MoleReport> {
    if fs.a < 0.0 || fs.b < 0.0 {
        return Err(invalid(
            "front state",
            format!("consumptions must be non-negative, got a={:e}, b={:e}", fs.a, fs.b),
        ));
    }
    let th = layer_thicknesses(fs)?;
    Ok(MoleReport {
        copper_wasted: fs.a * mat.mu_c(),
        cuprite_formed: (th.h_p + fs.b) * mat.mu_p(),
        cuprite_wasted: fs.b * mat.mu_p(),
        brochantite_formed: th.h_b * mat.mu_b(),
    })
}
