//! Subspaces of `L(R^n, R^m)` with Frobenius-orthonormal bases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg;

/// Linear subspace `V` of `m x n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSubspace {
    n: usize,
    m: usize,
    basis: Vec<DMatrix<f64>>,
}

impl MatrixSubspace {
    /// Span of `generators`, orthonormalized with the default drop threshold.
    pub fn new(n: usize, m: usize, generators: &[DMatrix<f64>]) -> Result<Self> {
        Self::with_drop_tolerance(n, m, generators, Tolerances::default().gram_schmidt_drop)
    }

    pub fn with_drop_tolerance(
        n: usize,
        m: usize,
        generators: &[DMatrix<f64>],
        drop_rel: f64,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::ZeroDimension);
        }
        for g in generators {
            if g.shape() != (m, n) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{m}x{n}"),
                    got: format!("{}x{}", g.nrows(), g.ncols()),
                });
            }
        }
        let vecs: Vec<DVector<f64>> = generators.iter().map(linalg::flatten_row_major).collect();
        let basis = linalg::gram_schmidt(&vecs, drop_rel)
            .into_iter()
            .map(|v| linalg::unflatten_row_major(v.as_slice(), m, n))
            .collect();
        Ok(Self { n, m, basis })
    }

    /// Subspace spanned by the columns of an `mn x d` matrix of row-major
    /// flattened matrices.
    pub fn from_flat_columns(n: usize, m: usize, cols: &DMatrix<f64>) -> Result<Self> {
        let gens: Vec<DMatrix<f64>> = cols
            .column_iter()
            .map(|c| linalg::unflatten_row_major(c.as_slice(), m, n))
            .collect();
        Self::new(n, m, &gens)
    }

    pub fn zero(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, &[])
    }

    pub fn full(n: usize, m: usize) -> Result<Self> {
        let gens: Vec<DMatrix<f64>> = (0..m * n)
            .map(|i| {
                let mut e = DMatrix::zeros(m, n);
                e[(i / n, i % n)] = 1.0;
                e
            })
            .collect();
        Self::new(n, m, &gens)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    /// Basis as the columns of an `mn x dim` matrix (row-major flattening).
    pub fn stacked(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.m * self.n, self.dim());
        for (j, b) in self.basis.iter().enumerate() {
            s.set_column(j, &linalg::flatten_row_major(b));
        }
        s
    }

    /// Orthonormal basis of the Frobenius-orthogonal complement, stacked.
    pub fn complement_stacked(&self) -> DMatrix<f64> {
        linalg::orth_complement(
            &self.stacked(),
            self.m * self.n,
            Tolerances::default().rank_rel,
        )
    }

    fn check_shape(&self, a: &DMatrix<f64>) -> Result<()> {
        if a.shape() != (self.m, self.n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.m, self.n),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        Ok(())
    }

    /// `sum_i c_i * basis_i`.
    pub fn combine(&self, c: &[f64]) -> DMatrix<f64> {
        self.basis
            .iter()
            .zip(c)
            .fold(DMatrix::zeros(self.m, self.n), |acc, (b, &ci)| acc + b * ci)
    }

    /// Frobenius coordinates of the orthogonal projection.
    pub fn coordinates(&self, a: &DMatrix<f64>) -> Vec<f64> {
        self.basis.iter().map(|b| b.dot(a)).collect()
    }

    pub fn project(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(a)?;
        Ok(self.combine(&self.coordinates(a)))
    }

    /// Frobenius norm of `a - proj_V(a)`.
    pub fn distance(&self, a: &DMatrix<f64>) -> Result<f64> {
        Ok((a - self.project(a)?).norm())
    }

    pub fn contains(&self, a: &DMatrix<f64>, tol: f64) -> Result<bool> {
        Ok(self.distance(a)? <= tol)
    }

    /// `span{P B Q}` over the basis, re-orthonormalized.
    pub fn conjugate(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        if p.shape() != (self.m, self.m) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.m, self.m),
                got: format!("{}x{}", p.nrows(), p.ncols()),
            });
        }
        if q.shape() != (self.n, self.n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.n, self.n),
                got: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        check_invertible(p)?;
        check_invertible(q)?;
        let gens: Vec<DMatrix<f64>> = self.basis.iter().map(|b| p * b * q).collect();
        Self::new(self.n, self.m, &gens)
    }

    /// Largest principal angle to `other` (pi/2 when dimensions differ).
    pub fn max_principal_angle(&self, other: &MatrixSubspace) -> f64 {
        if self.n != other.n || self.m != other.m || self.dim() != other.dim() {
            return std::f64::consts::FRAC_PI_2;
        }
        linalg::max_principal_angle(&self.stacked(), &other.stacked())
    }

    pub fn principal_angles(&self, other: &MatrixSubspace) -> Vec<f64> {
        linalg::principal_angles(&self.stacked(), &other.stacked())
    }

    pub fn approx_eq(&self, other: &MatrixSubspace, angle_tol: f64) -> bool {
        self.dim() == other.dim() && self.max_principal_angle(other) <= angle_tol
    }

    /// Maximum deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }

    pub fn to_json(&self) -> SubspaceJson {
        SubspaceJson {
            n: self.n,
            m: self.m,
            generators: self.basis.iter().map(linalg::matrix_to_rows).collect(),
        }
    }
}

/// Rejects singular or numerically singular square matrices.
pub fn check_invertible(a: &DMatrix<f64>) -> Result<()> {
    let s = linalg::singular_values(a);
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Singular { cond });
    }
    Ok(())
}

/// Subspace file form: `{ "n", "m", "generators": [[row-major m x n]] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub n: usize,
    pub m: usize,
    pub generators: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<&SubspaceJson> for MatrixSubspace {
    type Error = Error;

    fn try_from(j: &SubspaceJson) -> Result<Self> {
        let mut gens = Vec::with_capacity(j.generators.len());
        for g in &j.generators {
            let mat = linalg::matrix_from_rows(g).ok_or_else(|| Error::ShapeMismatch {
                expected: format!("{}x{}", j.m, j.n),
                got: "ragged rows".into(),
            })?;
            gens.push(mat);
        }
        MatrixSubspace::new(j.n, j.m, &gens)
    }
}

/// Elementary constructions used throughout tests and builtin families.
pub mod named {
    use super::*;

    pub fn identity(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    /// `[[0, -1], [1, 0]]`.
    pub fn j2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    /// Embed a small block in the top-left corner of an `m x n` zero matrix.
    pub fn pad(block: &DMatrix<f64>, m: usize, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m, n);
        out.view_mut((0, 0), block.shape()).copy_from(block);
        out
    }

    /// Skew-symmetric `n x n` matrices.
    pub fn skew(n: usize) -> Result<MatrixSubspace> {
        let mut gens = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut e = DMatrix::zeros(n, n);
                e[(i, j)] = 1.0;
                e[(j, i)] = -1.0;
                gens.push(e);
            }
        }
        MatrixSubspace::new(n, n, &gens)
    }

    /// `{ lambda I + A : A skew }`.
    pub fn conformal(n: usize) -> Result<MatrixSubspace> {
        let mut gens = vec![DMatrix::identity(n, n)];
        gens.extend(skew(n)?.basis().iter().cloned());
        MatrixSubspace::new(n, n, &gens)
    }

    /// `span{I_2, J_2}` padded into `L(R^n, R^m)`.
    pub fn complex_plane(m: usize, n: usize) -> Result<MatrixSubspace> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidArgument(
                "complex plane needs m >= 2 and n >= 2".into(),
            ));
        }
        let gens = [pad(&DMatrix::identity(2, 2), m, n), pad(&j2(), m, n)];
        MatrixSubspace::new(n, m, &gens)
    }

    /// Product of quaternions in `(1, i, j, k)` coordinates.
    pub fn quaternion_product(p: &[f64; 4], q: &[f64; 4]) -> [f64; 4] {
        [
            p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
            p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
            p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
            p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
        ]
    }

    /// Matrix of `x -> x * q` on `R^4 = H`.
    pub fn right_multiplication(q: &[f64; 4]) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(4, 4);
        for col in 0..4 {
            let mut e = [0.0; 4];
            e[col] = 1.0;
            let img = quaternion_product(&e, q);
            for row in 0..4 {
                r[(row, col)] = img[row];
            }
        }
        r
    }

    /// Right multiplications by quaternions, a 4-dimensional subspace of `L(H)`.
    pub fn quaternion_right() -> Result<MatrixSubspace> {
        let gens: Vec<DMatrix<f64>> = (0..4)
            .map(|i| {
                let mut q = [0.0; 4];
                q[i] = 1.0;
                right_multiplication(&q)
            })
            .collect();
        MatrixSubspace::new(4, 4, &gens)
    }
}
