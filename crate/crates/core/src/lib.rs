//! Simulation and calibration of SO₂-driven copper corrosion.
//!
//! Copper is oxidised to a cuprite layer, which the SO₂ diffusing through the
//! outer brochantite layer converts to brochantite. Both conversions are
//! instantaneous, so the patina is bounded by two moving reaction fronts plus
//! the swelling outer surface.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod convergence;
pub mod environment;
pub mod error;
pub mod materials;
pub mod optimize;
pub mod pde;
pub mod simulation;
pub mod stepper;
pub mod tridiag;

pub use calibration::{calibrate, CalibrationResult, CalibrationSettings, ThicknessMeasurement, Weighting};
pub use config::RunConfig;
pub use environment::{BoundaryConcentrations, ChamberSettings, Forcing};
pub use error::{PatinaError, Result};
pub use materials::{MaterialTable, MoleReport, SwellingRatios};
pub use pde::{AdvectionScheme, Diffusivities, FrontState, LayerFields, Scales};
pub use simulation::{run, SimulationConfig, SimulationOutput};
