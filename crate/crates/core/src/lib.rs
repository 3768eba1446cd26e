//! Simulation engine for multi-bath quantum collision models.
//!
//! The crate covers the linear algebra on small qubit registers
//! ([`tensor`]), thermal states and diagnostics ([`metrics`]), the collision
//! models themselves ([`collision`]), a GKSL reference integrator
//! ([`lindblad`]), the discretised BLP non-Markovianity measure ([`blp`])
//! and two-point-measurement quantum trajectories ([`trajectories`]).

pub mod blp;
pub mod collision;
pub mod error;
pub mod lindblad;
pub mod metrics;
pub mod tensor;
pub mod trajectories;

pub use collision::{ModelConfig, Setting};
pub use error::{Error, Result};
pub use tensor::{ComplexMatrix, DensityMatrix, QubitRegister, C64};
