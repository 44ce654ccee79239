//! Data-driven computational mechanics on raw stress–strain datasets.
//!
//! The solver alternates a global step, which returns the nearest state
//! satisfying equilibrium and compatibility, with a local step that maps each
//! integration point back onto the data: to the nearest sample (DMDD) or onto
//! the convex hull of its `k` nearest samples (LCDD).
//!
//! All numerical code is generic over [`Real`]; the `*64` aliases below fix
//! the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod datagen;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod meshfree;
pub mod phase_space;
pub mod problem;
pub mod projection;
pub mod scalar;
pub mod study;

pub use assembly::{BeamSpec, Discretization, GlobalSolver, TrussSpec};
pub use datagen::{MaterialDataset, NoiseSpec, PlaneStressNoise};
pub use driver::{incremental_load, rms_state, rms_truss, run, Init, Mode, SolveReport, SolverConfig};
pub use error::{Error, Result};
pub use phase_space::{LocalState, Metric};
pub use problem::{DatasetSpec, ProblemSpec};
pub use projection::{convex_project, nnls, ProjectionResult, SolverParams};
pub use scalar::Real;
pub use study::{convergence_study, StudySpec, StudyTable, Variant};

pub type LocalState64 = LocalState<f64>;
pub type Metric64 = Metric<f64>;
pub type MaterialDataset64 = MaterialDataset<f64>;
pub type Discretization64 = Discretization<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverParams64 = SolverParams<f64>;
pub type SolveReport64 = SolveReport<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type StudySpec64 = StudySpec<f64>;
pub type TrussSpec64 = TrussSpec<f64>;
pub type BeamSpec64 = BeamSpec<f64>;
