//! Semi-implicit all-Mach-number finite-volume solver for the 2-D compressible Euler equations.

pub mod benchmarks;
pub mod config;
pub mod convergence;
pub mod conservative;
pub mod elliptic;
pub mod error;
pub mod integrator;
pub mod nonstiff;
pub mod probes;
pub mod reconstruction;
pub mod snapshot;
pub mod state;
pub mod stiff;

pub use config::{DtOverride, Order, SolverConfig};
pub use error::{Result, SolverError};
