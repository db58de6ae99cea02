//! Every numerical threshold used by the library, in one place.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Singular values below `rank_rel * max(1, sigma_1)` count as zero.
    pub rank_rel: f64,
    /// Gram-Schmidt drops a generator whose residual is below this fraction of its norm.
    pub gram_schmidt_drop: f64,
    /// Orthonormality check on stored bases.
    pub orthonormal: f64,
    /// Membership of a matrix in a subspace (Frobenius distance).
    pub membership: f64,
    /// Maximum principal angle under which two subspaces are considered equal.
    pub subspace_equal: f64,
    /// Rank-one search: accept a candidate whose sigma_2 / sigma_1 falls below this.
    pub rank_one_gate: f64,
    /// Norm check on a rank-one witness.
    pub unit_norm: f64,
    /// Complex-pair certificate residuals.
    pub certificate: f64,
    /// A point is on a constraint set when the defining residual is below this.
    pub constraint_set: f64,
    /// Central difference step for gradient checks.
    pub fd_step: f64,
    /// Central difference step for defining-function jacobians.
    pub tangent_fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: 1e-9,
            gram_schmidt_drop: 1e-10,
            orthonormal: 1e-10,
            membership: 1e-8,
            subspace_equal: 1e-8,
            rank_one_gate: 1e-7,
            unit_norm: 1e-10,
            certificate: 1e-7,
            constraint_set: 1e-9,
            fd_step: 1e-5,
            tangent_fd_step: 1e-6,
        }
    }
}

/// Default degree cap for prolongation chains.
pub const DEFAULT_K_MAX: usize = 8;
/// Default restart count for the obstruction searches.
pub const DEFAULT_RESTARTS: usize = 64;
/// Default truncation degree for augmented jet spaces.
pub const DEFAULT_JET_DEGREE: usize = 6;
