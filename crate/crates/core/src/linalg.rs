//! Dense helpers shared by the subspace, prolongation and obstruction code.
//!
//! Vectors in `R^N` are `DVector<f64>`; a subspace of `R^N` is an `N x d`
//! matrix with orthonormal columns. Matrices in `L(R^n, R^m)` are flattened
//! row-major whenever they are treated as vectors.

use nalgebra::{DMatrix, DVector};

/// Thin SVD with singular values sorted in descending order.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> SortedSvd {
    let (r, c) = a.shape();
    let p = r.min(c);
    if p == 0 {
        return SortedSvd {
            u: DMatrix::zeros(r, 0),
            s: Vec::new(),
            v: DMatrix::zeros(c, 0),
        };
    }
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("left singular vectors requested");
    let vt = dec.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .partial_cmp(&dec.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut su = DMatrix::zeros(r, p);
    let mut sv = DMatrix::zeros(c, p);
    let mut s = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv.set_column(dst, &vt.row(src).transpose());
        s.push(dec.singular_values[src]);
    }
    SortedSvd { u: su, s, v: sv }
}

/// Singular values only, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn rank_threshold(s: &[f64], rel: f64) -> f64 {
    rel * s.first().copied().unwrap_or(0.0).max(1.0)
}

pub fn numerical_rank(s: &[f64], rel: f64) -> usize {
    let thr = rank_threshold(s, rel);
    s.iter().filter(|&&x| x > thr).count()
}

/// Orthonormal basis (columns) of the right nullspace of `a`.
///
/// Wide inputs are padded with zero rows so the thin SVD yields a complete
/// set of right singular vectors.
pub fn nullspace(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let padded;
    let a = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let dec = svd(a);
    let rank = numerical_rank(&dec.s, rel);
    dec.v.columns(rank, c - rank).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `basis` inside `R^ambient`.
pub fn orth_complement(basis: &DMatrix<f64>, ambient: usize, rel: f64) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::identity(ambient, ambient);
    }
    nullspace(&basis.transpose(), rel)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// A vector is dropped when its residual falls below `drop_rel` times its
/// original norm (or when it is exactly zero).
pub fn gram_schmidt(vectors: &[DVector<f64>], drop_rel: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let norm0 = v.norm();
        if norm0 == 0.0 || !norm0.is_finite() {
            continue;
        }
        let mut r = v.clone();
        for _pass in 0..2 {
            for q in &out {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let norm = r.norm();
        if norm < drop_rel * norm0 {
            continue;
        }
        out.push(r / norm);
    }
    out
}

pub fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal columns. Unequal dimensions give 1.
pub fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // residual of b after projection onto a
    let resid = b - a * (a.transpose() * b);
    let s = singular_values(&resid);
    s.first().copied().unwrap_or(0.0).min(1.0)
}

/// Largest principal angle in radians.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_principal_sine(a, b).asin()
}

/// Principal angles (ascending) between two column-orthonormal subspaces,
/// computed from the product of the basis stacks.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let s = singular_values(&(a.transpose() * b));
    s.into_iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect()
}

pub fn flatten_row_major(m: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = m.shape();
    DVector::from_iterator(r * c, (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])))
}

pub fn unflatten_row_major(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Complete an orthonormal column set to an orthonormal basis of `R^n`.
pub fn complete_basis(cols: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let n = cols.nrows();
    let comp = orth_complement(cols, n, rel);
    let mut out = DMatrix::zeros(n, cols.ncols() + comp.ncols());
    out.columns_mut(0, cols.ncols()).copy_from(cols);
    out.columns_mut(cols.ncols(), comp.ncols()).copy_from(&comp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = nullspace(&a, 1e-9);
        assert_eq!(ns.ncols(), 2);
        assert!((a * &ns).norm() < 1e-14);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn nullspace_of_empty_constraints_is_everything() {
        let a = DMatrix::zeros(0, 4);
        assert_eq!(nullspace(&a, 1e-9).ncols(), 4);
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let v = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        ];
        let q = gram_schmidt(&v, 1e-10);
        assert_eq!(q.len(), 2);
        assert!(q[0].dot(&q[1]).abs() < 1e-15);
    }

    #[test]
    fn principal_sine_detects_rotation() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let t: f64 = 0.3;
        let b = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        assert!((max_principal_angle(&a, &b) - t).abs() < 1e-12);
        assert!((principal_angles(&a, &b)[0] - t).abs() < 1e-12);
    }

    #[test]
    fn row_major_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = flatten_row_major(&m);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unflatten_row_major(v.as_slice(), 2, 3), m);
    }
}
