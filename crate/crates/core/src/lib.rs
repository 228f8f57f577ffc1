//! Quasi-velocity, quasi-momentum and Lie algebroid mechanics with time
//! averaging and virial-identity checks.

pub mod algebroid;
pub mod algebroid_hamiltonian;
pub mod algebroid_lagrangian;
pub mod averaging;
pub mod dynamics;
pub mod error;
pub mod frames;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod scenario;
pub mod tq;
pub mod tstarq;

pub use averaging::{integrate, time_average, AverageMode, AverageResult, IntegratorSettings, Trajectory, VirialReport};
pub use dynamics::{Dynamics, Formalism, System, VirialFunction, VirialKind};
pub use error::{Error, Result};
pub use jet::PhaseState;
pub use models::{build, ModelDescriptor, Params};
