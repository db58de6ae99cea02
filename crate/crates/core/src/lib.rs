//! Prolongation of linear first-order Jacobian constraints.
//!
//! Given a subspace `V` of `m x n` matrices, the maps `F` with `DF(x) in V`
//! everywhere are governed by the chain of symmetric tensors `M_k(V)` whose
//! slot contractions all land in `V`. This crate computes that chain, the
//! polynomial solution space it spans, certified witnesses for the two ways
//! the chain can fail to terminate, and the tangent-space versions of the
//! same invariants for nonlinear constraint families.

pub mod config;
pub mod error;
pub mod linalg;
pub mod manifolds;
pub mod matspace;
pub mod obstruct;
pub mod polyspace;
pub mod prolong;
pub mod symtensor;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use matspace::MatrixSubspace;
pub use prolong::{chain, mk_direct, mk_step, ChainReport, DeltaStatus, HomSolutionSpace};
pub use symtensor::{HomPoly, MultiIndex, PolyMap};
