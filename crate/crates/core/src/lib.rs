//! Linearized discrete-velocity kinetic models on axis-aligned boxes:
//! structural-stability decomposition, weighted Lyapunov certificates,
//! boundary feedback laws and an upwind solver to check decay numerically.

pub mod boundary;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod solver;
pub mod stability;

pub use boundary::{
    check_admissible, Admissibility, BoundaryWeights, BoxDomain, ControlLaw, Face, TraceKind,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use lyapunov::{AlphaChoice, DecayConstants, LyapunovCertificate};
pub use model::{build_coplanar, CollisionChannel, DiscreteVelocityModel, SteadyState};
pub use solver::{Grid, Parallelism, Record, SimulationState, Solver};
pub use stability::{decompose, StabilityDecomposition};
