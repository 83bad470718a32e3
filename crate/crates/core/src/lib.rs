//! Elephant random walks on bipartite periodic lattices.
//!
//! A walk alternates between two vertex classes; at each step it recalls a
//! uniformly chosen past step and repeats or perturbs it according to two
//! memory parameters. The crate simulates such walks in O(m) per step,
//! computes their second moments exactly, and checks the limit theorems by
//! Monte Carlo.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod exact_moments;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod special;
pub mod urn_algebra;
pub mod validate;

pub use error::{Error, Result};
pub use lattice::{MemoryParams, Regime, RegimeKind, StepSet};
