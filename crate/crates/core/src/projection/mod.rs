//! Local data search: non-negative least squares, k-nearest neighbours, and
//! the convex-hull reconstruction built from them.

mod convex;
pub mod nnls;
mod search;

pub use convex::{convex_project, ProjectionResult, SolverParams};
pub use nnls::nnls;
pub use search::{knn, nearest_point, DataSearch, Neighborhood};
