//! Joint optimization of robot body-plans and controllers.
//!
//! Body-plans are generated by CPPNs evolved with NEAT and decoded over a
//! voxel matrix; each body-plan's Elman controller is learned by NIP-ES, a
//! novelty-driven CMA-ES with population-doubling restarts. Learned
//! controllers are stored in an external archive keyed by robot type
//! `(sensors, wheels, joints)` and seed later learners of the same type.
//! A deterministic 2D arena simulator provides the navigation task.

pub mod cppn;
pub mod num;
pub mod textio;

pub use num::Real;

/// Scalar used by the experiment pipeline. The numeric kernels are generic
/// over [`Real`]; everything above them is pinned to `f64`.
pub type Scalar = f64;
pub mod morphogen;
pub mod controller;
pub mod arena;
pub mod geometry;
