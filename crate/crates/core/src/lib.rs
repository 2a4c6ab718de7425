//! Pointer-state dynamics of a quantum particle under a stochastic
//! momentum-kick environment: the deterministic nonlinear soliton flow, its
//! stochastic unraveling, the reduced coefficient process and the
//! independent reference models used to check them.

pub mod analysis;
pub mod coefficients;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod oracles;
pub mod rng;
pub mod stats;
pub mod unraveling;

pub use error::{Error, Result};
pub use grid::{ComplexField, RealField, SpatialGrid};
pub use kernel::{MomentumKernel, SimulationParams};
