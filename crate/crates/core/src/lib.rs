//! Timed coloured Petri net simulation of a buck converter with its embedded
//! controller, plus a plain forward-Euler reference integrator.

pub mod buck;
pub mod controller;
pub mod error;
pub mod kernel;
pub mod oracle;
pub mod system;
pub mod trace;

pub use buck::{CircuitParams, ConverterState};
pub use controller::{ControlConfig, ControlMode, SensedPair};
pub use error::ModelError;
pub use kernel::{KernelError, ModelTime, Net};
pub use trace::TraceRecord;
