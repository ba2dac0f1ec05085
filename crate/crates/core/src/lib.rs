//! Semi-classical spin dynamics with colour-noise baths.
//!
//! All quantities are unit-free: time in inverse Larmor frequencies, fields
//! in units of the external field, spins normalised to unit length.

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod model;
pub mod noise;
pub mod spectral;

pub use coupling::{power_spectrum, PowerSpectrum, SpectrumKind};
pub use dynamics::{integrate, IntegratorConfig, Trajectory};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{Bath, LorentzianParams, OhmicParams, SpinSystem, UnitFrame, Vec3};
