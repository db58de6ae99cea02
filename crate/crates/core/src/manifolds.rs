//! Nonlinear constraint families `M_x ⊂ L(R^n, R^m)` given by defining
//! functions, their tangent spaces `V_{x,A}`, sampled constancy of alpha,
//! and truncated jet spaces for constraints that also involve `F` itself.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matspace::{named, MatrixSubspace};
use crate::obstruct::{classify_delta, ClassifyOptions, SearchOptions};
use crate::prolong::DeltaJson;
use crate::symtensor::{hom_dim, HomPoly, MonomialBasis, PolyMap};

/// A constraint set `M_x = { A : phi(x, A) = 0 }` with a sampler.
///
/// Implementors supply the residual; the Jacobian in `A` falls back to
/// central differences. Columns of the Jacobian follow the row-major
/// flattening of `A`.
pub trait DefiningFunction: Sync {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn residual(&self, x: &[f64], a: &DMatrix<f64>) -> DVector<f64>;

    fn jacobian(&self, _x: &[f64], _a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Rank of the Jacobian at regular points (the codimension of `M_x`).
    fn expected_rank(&self) -> usize;

    /// Extra conditions beyond `phi = 0` (e.g. orientation).
    fn admissible(&self, _x: &[f64], _a: &DMatrix<f64>) -> bool {
        true
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DMatrix<f64>;

    /// A canonical point on the constraint set.
    fn base_point(&self) -> DMatrix<f64>;
}

/// Central-difference Jacobian of `phi(x, .)` at `a`.
pub fn fd_jacobian<F: DefiningFunction + ?Sized>(
    f: &F,
    x: &[f64],
    a: &DMatrix<f64>,
    step: f64,
) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let rows = f.residual(x, a).len();
    let mut jac = DMatrix::zeros(rows, m * n);
    for p in 0..m {
        for q in 0..n {
            let mut plus = a.clone();
            let mut minus = a.clone();
            plus[(p, q)] += step;
            minus[(p, q)] -= step;
            let d = (f.residual(x, &plus) - f.residual(x, &minus)) / (2.0 * step);
            jac.set_column(p * n + q, &d);
        }
    }
    jac
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `A A^T = (|A|_F^2 / n) I`, `det A > 0`.
    Conformal,
    /// `A A^T = I`.
    Isometry,
    /// Right multiplications on the quaternions.
    Quaternion,
    /// `span{I_2, J_2}`.
    Holomorphic,
    CustomLinear,
}

/// One of the builtin constraint families.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFamily {
    kind: FamilyKind,
    name: String,
    n: usize,
    m: usize,
    /// For linear families: the subspace and its orthonormal complement.
    linear: Option<(MatrixSubspace, DMatrix<f64>)>,
}

impl ConstraintFamily {
    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// The linear family `M_x = V`.
    pub fn custom_linear(v: MatrixSubspace) -> Self {
        Self::linear_family(FamilyKind::CustomLinear, "custom-linear", v)
    }

    fn linear_family(kind: FamilyKind, name: &str, v: MatrixSubspace) -> Self {
        let comp = v.complement_stacked();
        Self {
            kind,
            name: name.into(),
            n: v.n(),
            m: v.m(),
            linear: Some((v, comp)),
        }
    }

    pub fn subspace(&self) -> Option<&MatrixSubspace> {
        self.linear.as_ref().map(|(v, _)| v)
    }

    fn quadratic_entries(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut e: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        if self.kind == FamilyKind::Conformal {
            // the trace of the output vanishes identically
            e.retain(|&(i, j)| !(i == n - 1 && j == n - 1));
        }
        e
    }
}

/// Looks up a named family. `custom-linear` needs a subspace and is built
/// with [`ConstraintFamily::custom_linear`].
pub fn builtin_family(name: &str, n: usize) -> Result<ConstraintFamily> {
    let invalid = |msg: &str| Err(Error::InvalidArgument(msg.into()));
    match name {
        "conformal" | "isometry" => {
            if n == 0 {
                return Err(Error::ZeroDimension);
            }
            if name == "conformal" && n < 2 {
                return invalid("conformal family needs n >= 2");
            }
            Ok(ConstraintFamily {
                kind: if name == "conformal" {
                    FamilyKind::Conformal
                } else {
                    FamilyKind::Isometry
                },
                name: name.into(),
                n,
                m: n,
                linear: None,
            })
        }
        "quaternion" => {
            if n != 4 {
                return invalid("quaternion family requires n = m = 4");
            }
            Ok(ConstraintFamily::linear_family(
                FamilyKind::Quaternion,
                name,
                named::quaternion_right()?,
            ))
        }
        "holomorphic" => {
            if n != 2 {
                return invalid("holomorphic family requires n = m = 2");
            }
            Ok(ConstraintFamily::linear_family(
                FamilyKind::Holomorphic,
                name,
                named::complex_plane(2, 2)?,
            ))
        }
        "custom-linear" => invalid("custom-linear family needs an explicit subspace"),
        other => Err(Error::UnknownFamily(other.into())),
    }
}

fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    if q.determinant() < 0.0 {
        let col = -q.column(0);
        q.set_column(0, &col);
    }
    q
}

impl DefiningFunction for ConstraintFamily {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.n
    }

    fn m(&self) -> usize {
        self.m
    }

    fn residual(&self, _x: &[f64], a: &DMatrix<f64>) -> DVector<f64> {
        if let Some((_, comp)) = &self.linear {
            return comp.transpose() * linalg::flatten_row_major(a);
        }
        let gram = a * a.transpose();
        let shift = match self.kind {
            FamilyKind::Conformal => a.norm_squared() / self.n as f64,
            _ => 1.0,
        };
        let entries = self.quadratic_entries();
        DVector::from_iterator(
            entries.len(),
            entries
                .iter()
                .map(|&(i, j)| gram[(i, j)] - if i == j { shift } else { 0.0 }),
        )
    }

    fn jacobian(&self, _x: &[f64], a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        if let Some((_, comp)) = &self.linear {
            return Some(comp.transpose());
        }
        let n = self.n;
        let entries = self.quadratic_entries();
        let mut jac = DMatrix::zeros(entries.len(), n * n);
        for (row, &(i, j)) in entries.iter().enumerate() {
            for q in 0..n {
                // d(A A^T)_{ij} / dA_{pq} = delta_ip A_jq + delta_jp A_iq
                jac[(row, i * n + q)] += a[(j, q)];
                jac[(row, j * n + q)] += a[(i, q)];
                if self.kind == FamilyKind::Conformal && i == j {
                    for p in 0..n {
                        jac[(row, p * n + q)] -= 2.0 * a[(p, q)] / n as f64;
                    }
                }
            }
        }
        Some(jac)
    }

    fn expected_rank(&self) -> usize {
        match &self.linear {
            Some((v, _)) => self.m * self.n - v.dim(),
            None => self.quadratic_entries().len(),
        }
    }

    fn admissible(&self, _x: &[f64], a: &DMatrix<f64>) -> bool {
        match self.kind {
            FamilyKind::Conformal => a.determinant() > 0.0,
            _ => true,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        match (&self.kind, &self.linear) {
            (_, Some((v, _))) => {
                let c: Vec<f64> = (0..v.dim())
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                v.combine(&c)
            }
            (FamilyKind::Conformal, None) => {
                let scale = rng.random_range(0.5..2.0);
                random_rotation(rng, self.n) * scale
            }
            _ => random_rotation(rng, self.n),
        }
    }

    fn base_point(&self) -> DMatrix<f64> {
        match &self.linear {
            Some(_) => DMatrix::zeros(self.m, self.n),
            None => DMatrix::identity(self.n, self.n),
        }
    }
}

/// `V_{x,A} = T_A(M_x) - A` as the nullspace of the defining Jacobian.
pub fn tangent_space_at<F: DefiningFunction + ?Sized>(
    family: &F,
    x: &[f64],
    a: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<MatrixSubspace> {
    let (m, n) = (family.m(), family.n());
    if a.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{m}x{n}"),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let residual = family.residual(x, a).norm();
    if residual > tol.constraint_set || !family.admissible(x, a) {
        return Err(Error::OffConstraintSet { residual });
    }
    let jac = family
        .jacobian(x, a)
        .unwrap_or_else(|| fd_jacobian(family, x, a, tol.tangent_fd_step));
    let s = linalg::singular_values(&jac);
    let rank = linalg::numerical_rank(&s, tol.rank_rel);
    if rank < family.expected_rank() {
        return Err(Error::DegeneratePoint {
            rank,
            expected: family.expected_rank(),
        });
    }
    let ns = linalg::nullspace(&jac, tol.rank_rel);
    MatrixSubspace::from_flat_columns(n, m, &ns)
}

/// [`tangent_space_at`] at the origin of `Omega` (the builtin families do
/// not depend on the base point).
pub fn tangent_space<F: DefiningFunction + ?Sized>(
    family: &F,
    a: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<MatrixSubspace> {
    let x = vec![0.0; family.n()];
    tangent_space_at(family, &x, a, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldReport {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub tangent_dims: Vec<usize>,
    pub alpha_per_sample: Vec<Vec<usize>>,
    /// All sampled alpha sequences are identical.
    pub constant: bool,
    /// Constant alpha and a terminating chain at every sample.
    pub hypothesis_holds: bool,
    /// The common alpha, i.e. the rectifiability dimension, when the
    /// hypothesis holds.
    pub k: Option<usize>,
    pub delta_statuses: Vec<DeltaJson>,
}

/// Samples the constraint set and runs the linear analysis on each tangent
/// space.
pub fn sample_analysis<F: DefiningFunction + ?Sized>(
    family: &F,
    sample_count: usize,
    k_max: usize,
    seed: u64,
    search: &SearchOptions,
    tol: &Tolerances,
) -> Result<ManifoldReport> {
    if sample_count < 2 {
        return Err(Error::InvalidArgument(
            "sample_count must be at least 2".into(),
        ));
    }
    let per_sample: Vec<Result<(usize, Vec<usize>, DeltaJson)>> = (0..sample_count)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let a = family.sample(&mut rng);
            let v = tangent_space(family, &a, tol)?;
            let opts = ClassifyOptions {
                k_max,
                search: SearchOptions {
                    seed: seed.wrapping_add(s as u64),
                    ..*search
                },
                cross_check: false,
            };
            let report = classify_delta(&v, &opts, tol)?;
            Ok((v.dim(), report.chain.alpha.clone(), report.delta.to_json()))
        })
        .collect();
    let mut tangent_dims = Vec::with_capacity(sample_count);
    let mut alpha_per_sample = Vec::with_capacity(sample_count);
    let mut delta_statuses = Vec::with_capacity(sample_count);
    for r in per_sample {
        let (d, alpha, delta) = r?;
        tangent_dims.push(d);
        alpha_per_sample.push(alpha);
        delta_statuses.push(delta);
    }
    let constant = alpha_per_sample.windows(2).all(|w| w[0] == w[1]);
    let finite = delta_statuses.iter().all(|d| d.status == "finite");
    let hypothesis_holds = constant && finite;
    Ok(ManifoldReport {
        family: family.name().into(),
        n: family.n(),
        m: family.m(),
        samples: sample_count,
        tangent_dims,
        k: hypothesis_holds.then(|| alpha_per_sample[0].iter().sum()),
        alpha_per_sample,
        constant,
        hypothesis_holds,
        delta_statuses,
    })
}

/// Subspace of `L(R^n, R^m) ⊕ R^m`, vectors laid out as the row-major
/// matrix part followed by the vector part.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSubspace {
    n: usize,
    m: usize,
    basis: Vec<DVector<f64>>,
}

impl AugmentedSubspace {
    pub fn new(n: usize, m: usize, generators: &[(DMatrix<f64>, DVector<f64>)]) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut flat = Vec::with_capacity(generators.len());
        for (a, y) in generators {
            if a.shape() != (m, n) || y.len() != m {
                return Err(Error::ShapeMismatch {
                    expected: format!("({m}x{n}, {m})"),
                    got: format!("({}x{}, {})", a.nrows(), a.ncols(), y.len()),
                });
            }
            let mut v = DVector::zeros(m * n + m);
            v.rows_mut(0, m * n)
                .copy_from(&linalg::flatten_row_major(a));
            v.rows_mut(m * n, m).copy_from(y);
            flat.push(v);
        }
        let basis = linalg::gram_schmidt(&flat, Tolerances::default().gram_schmidt_drop);
        Ok(Self { n, m, basis })
    }

    /// `V ⊕ R^m`: a constraint on the derivative only.
    pub fn from_linear(v: &MatrixSubspace) -> Result<Self> {
        let (n, m) = (v.n(), v.m());
        let mut gens: Vec<(DMatrix<f64>, DVector<f64>)> = v
            .basis()
            .iter()
            .map(|b| (b.clone(), DVector::zeros(m)))
            .collect();
        for a in 0..m {
            let mut e = DVector::zeros(m);
            e[a] = 1.0;
            gens.push((DMatrix::zeros(m, n), e));
        }
        Self::new(n, m, &gens)
    }

    pub fn full(n: usize, m: usize) -> Result<Self> {
        Self::from_linear(&MatrixSubspace::full(n, m)?)
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

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    /// Projection onto the matrix factor.
    pub fn matrix_projection(&self) -> Result<MatrixSubspace> {
        let mn = self.m * self.n;
        let gens: Vec<DMatrix<f64>> = self
            .basis
            .iter()
            .map(|v| linalg::unflatten_row_major(&v.as_slice()[..mn], self.m, self.n))
            .collect();
        MatrixSubspace::new(self.n, self.m, &gens)
    }

    fn complement(&self) -> DMatrix<f64> {
        let stacked = linalg::columns_to_matrix(self.m * self.n + self.m, &self.basis);
        linalg::orth_complement(
            &stacked,
            self.m * self.n + self.m,
            Tolerances::default().rank_rel,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedGeneratorJson {
    pub matrix: Vec<Vec<f64>>,
    pub vector: Vec<f64>,
}

/// `{ "n", "m", "generators": [ { "matrix": [[...]], "vector": [...] } ] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedJson {
    pub n: usize,
    pub m: usize,
    pub generators: Vec<AugmentedGeneratorJson>,
}

impl TryFrom<&AugmentedJson> for AugmentedSubspace {
    type Error = Error;

    fn try_from(j: &AugmentedJson) -> Result<Self> {
        let mut gens = Vec::with_capacity(j.generators.len());
        for g in &j.generators {
            let a = linalg::matrix_from_rows(&g.matrix).ok_or_else(|| Error::ShapeMismatch {
                expected: format!("{}x{}", j.m, j.n),
                got: "ragged rows".into(),
            })?;
            gens.push((a, DVector::from_vec(g.vector.clone())));
        }
        AugmentedSubspace::new(j.n, j.m, &gens)
    }
}

/// Truncated solution set of `u(0) = 0`, `Du(0) = A`,
/// `(Du(xi), u(xi)) in V_aug` for polynomial `u` of degree `<= D`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetSpace {
    pub degree: usize,
    pub consistent: bool,
    /// Dimension of the linear part (absent when inconsistent).
    pub dimension: Option<usize>,
    /// Least-squares residual of the affine system.
    pub residual: f64,
    pub particular: Option<PolyMap>,
    /// Directions of the linear part, degrees `2..=D`.
    pub basis: Vec<PolyMap>,
}

/// Builds and solves the degree-by-degree system for the truncated jet
/// space. The identity is imposed in degrees `0..D`: in degree `j` it
/// couples `D u_{j+1}` with `u_j`, and degree `D` would involve the
/// truncated `u_{D+1}`.
pub fn augmented_jet_space(
    v_aug: &AugmentedSubspace,
    a: &DMatrix<f64>,
    degree: usize,
    tol: &Tolerances,
) -> Result<JetSpace> {
    let (n, m) = (v_aug.n, v_aug.m);
    if a.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{m}x{n}"),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if degree == 0 {
        return Err(Error::InvalidArgument(
            "jet degree must be at least 1".into(),
        ));
    }
    let comp = v_aug.complement();
    let mn = m * n;
    let bases: Vec<MonomialBasis> = (0..=degree)
        .map(|k| MonomialBasis::new(n, k))
        .collect::<Result<_>>()?;
    // unknown offsets for degrees 2..=D
    let mut offsets = vec![usize::MAX; degree + 1];
    let mut unknowns = 0;
    for (k, off) in offsets.iter_mut().enumerate().skip(2) {
        *off = unknowns;
        unknowns += hom_dim(n, m, k);
    }
    let linear = HomPoly::linear(a)?;

    let rows: usize = (0..degree).map(|j| bases[j].len() * comp.ncols()).sum();
    let mut g: DMatrix<f64> = DMatrix::zeros(rows, unknowns);
    let mut rhs: DVector<f64> = DVector::zeros(rows);
    let mut row = 0;
    for j in 0..degree {
        let lower = &bases[j];
        let upper = &bases[j + 1];
        for gamma in lower.monomials() {
            for w in comp.column_iter() {
                // derivative part: coef of xi^gamma in d_i u_{j+1, a}
                for out in 0..m {
                    for i in 0..n {
                        let weight = w[out * n + i];
                        if weight == 0.0 {
                            continue;
                        }
                        let raised = gamma.raised(i);
                        let idx = upper.index_of(&raised).expect("degree j+1");
                        let factor = weight * (gamma.exponents()[i] + 1) as f64;
                        if j + 1 == 1 {
                            rhs[row] -= factor * linear.coeffs()[out * upper.len() + idx];
                        } else {
                            g[(row, offsets[j + 1] + out * upper.len() + idx)] += factor;
                        }
                    }
                }
                // value part: coef of xi^gamma in u_{j, a}
                if j >= 1 {
                    let idx = lower.index_of(gamma).expect("degree j");
                    for out in 0..m {
                        let weight = w[mn + out];
                        if weight == 0.0 {
                            continue;
                        }
                        if j == 1 {
                            rhs[row] -= weight * linear.coeffs()[out * lower.len() + idx];
                        } else {
                            g[(row, offsets[j] + out * lower.len() + idx)] += weight;
                        }
                    }
                }
                row += 1;
            }
        }
    }

    let scale = rhs.norm().max(1.0);
    let (particular_vec, residual) = if unknowns == 0 {
        (DVector::zeros(0), rhs.norm())
    } else {
        let dec = linalg::svd(&g);
        let thr = linalg::rank_threshold(&dec.s, tol.rank_rel);
        let ut_b = dec.u.transpose() * &rhs;
        let mut y = DVector::zeros(unknowns);
        for (i, &s) in dec.s.iter().enumerate() {
            if s > thr {
                y += dec.v.column(i) * (ut_b[i] / s);
            }
        }
        let r = (&g * &y - &rhs).norm();
        (y, r)
    };
    let consistent = residual <= tol.membership * scale;

    let to_poly = |y: &DVector<f64>, with_linear: bool| -> Result<PolyMap> {
        let mut parts = Vec::new();
        if with_linear {
            parts.push(linear.clone());
        }
        for (k, &off) in offsets.iter().enumerate().skip(2) {
            let len = hom_dim(n, m, k);
            let c: Vec<f64> = y.rows(off, len).iter().copied().collect();
            if c.iter().any(|&x| x != 0.0) {
                parts.push(HomPoly::from_coeffs(n, m, k, c)?);
            }
        }
        PolyMap::from_components(n, m, parts)
    };

    if !consistent {
        return Ok(JetSpace {
            degree,
            consistent,
            dimension: None,
            residual,
            particular: None,
            basis: Vec::new(),
        });
    }
    let null = if unknowns == 0 {
        DMatrix::zeros(0, 0)
    } else {
        linalg::nullspace(&g, tol.rank_rel)
    };
    let basis = null
        .column_iter()
        .map(|c| to_poly(&c.into_owned(), false))
        .collect::<Result<Vec<_>>>()?;
    Ok(JetSpace {
        degree,
        consistent,
        dimension: Some(null.ncols()),
        residual,
        particular: Some(to_poly(&particular_vec, true)?),
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn isometry_tangent_at_identity_is_skew() {
        let f = builtin_family("isometry", 3).unwrap();
        let v = tangent_space(&f, &DMatrix::identity(3, 3), &tol()).unwrap();
        assert!(v.approx_eq(&named::skew(3).unwrap(), 1e-10));
    }

    #[test]
    fn conformal_tangent_at_identity() {
        let f = builtin_family("conformal", 3).unwrap();
        let v = tangent_space(&f, &DMatrix::identity(3, 3), &tol()).unwrap();
        assert!(v.approx_eq(&named::conformal(3).unwrap(), 1e-10));
    }

    #[test]
    fn holomorphic_family_is_the_complex_plane() {
        let f = builtin_family("holomorphic", 2).unwrap();
        let v = tangent_space(&f, &named::identity(2), &tol()).unwrap();
        assert_eq!(v.dim(), 2);
        assert!(v.approx_eq(&named::complex_plane(2, 2).unwrap(), 1e-10));
    }

    #[test]
    fn family_errors() {
        assert!(matches!(
            builtin_family("nope", 3),
            Err(Error::UnknownFamily(_))
        ));
        assert!(builtin_family("quaternion", 3).is_err());
        assert!(builtin_family("holomorphic", 3).is_err());
        assert!(builtin_family("custom-linear", 3).is_err());
    }

    #[test]
    fn off_set_and_orientation_rejected() {
        let f = builtin_family("isometry", 2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            tangent_space(&f, &a, &tol()),
            Err(Error::OffConstraintSet { .. })
        ));
        let c = builtin_family("conformal", 2).unwrap();
        let reflect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(tangent_space(&c, &reflect, &tol()).is_err());
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for name in ["conformal", "isometry"] {
            let f = builtin_family(name, 3).unwrap();
            let a = f.sample(&mut rng);
            let x = [0.0; 3];
            let exact = f.jacobian(&x, &a).unwrap();
            let approx = fd_jacobian(&f, &x, &a, 1e-6);
            assert!((exact - approx).norm() < 1e-8, "{name}");
        }
    }

    #[test]
    fn conformal_tangent_is_translated_by_rotation() {
        let f = builtin_family("conformal", 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random_rotation(&mut rng, 3);
        let v = tangent_space(&f, &r, &tol()).unwrap();
        assert_eq!(v.dim(), 4);
        let moved: Vec<DMatrix<f64>> = named::conformal(3)
            .unwrap()
            .basis()
            .iter()
            .map(|b| b * &r)
            .collect();
        let expected = MatrixSubspace::new(3, 3, &moved).unwrap();
        assert!(v.approx_eq(&expected, 1e-8));
    }

    /// Custom defining function without an analytic Jacobian.
    struct UnitRows;

    impl DefiningFunction for UnitRows {
        fn name(&self) -> &str {
            "unit-rows"
        }
        fn n(&self) -> usize {
            2
        }
        fn m(&self) -> usize {
            1
        }
        fn residual(&self, _x: &[f64], a: &DMatrix<f64>) -> DVector<f64> {
            DVector::from_vec(vec![a.norm_squared() - 1.0])
        }
        fn expected_rank(&self) -> usize {
            1
        }
        fn sample(&self, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            DMatrix::from_row_slice(1, 2, &[t.cos(), t.sin()])
        }
        fn base_point(&self) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
        }
    }

    #[test]
    fn user_defined_family_uses_differences() {
        let v = tangent_space(&UnitRows, &UnitRows.base_point(), &tol()).unwrap();
        assert_eq!(v.dim(), 1);
        let e2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(v.distance(&e2).unwrap() < 1e-8);
    }

    #[test]
    fn full_augmented_space_only_fixes_low_orders() {
        let (n, m) = (2, 2);
        let v = AugmentedSubspace::full(n, m).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        for d in 1..=4 {
            let jet = augmented_jet_space(&v, &a, d, &tol()).unwrap();
            let expected: usize = (2..=d).map(|j| hom_dim(n, m, j)).sum();
            assert_eq!(jet.dimension, Some(expected));
        }
    }

    /// Nullity of the scalar recursion 2 (j+1) c_{j+1} - c_j = 0, j < D,
    /// with c_0 = 0 and c_1 = a fixed, assembled independently.
    fn scalar_oracle(a: f64, d: usize) -> Option<usize> {
        // unknowns c_2..c_D
        let unknowns = d - 1;
        let mut g: DMatrix<f64> = DMatrix::zeros(d, unknowns);
        let mut rhs: DVector<f64> = DVector::zeros(d);
        for j in 0..d {
            // 2 (j+1) c_{j+1}
            match j + 1 {
                1 => rhs[j] -= 2.0 * a,
                k => g[(j, k - 2)] += 2.0 * k as f64,
            }
            // - c_j
            match j {
                0 => {}
                1 => rhs[j] += a,
                k => g[(j, k - 2)] -= 1.0,
            }
        }
        let pinv = g.clone().pseudo_inverse(1e-12).unwrap();
        let y = &pinv * &rhs;
        if (&g * y - &rhs).norm() > 1e-9 {
            return None;
        }
        Some(unknowns - linalg::numerical_rank(&linalg::singular_values(&g), 1e-9))
    }

    #[test]
    fn exponential_constraint_has_no_nonzero_jet() {
        let gens = [(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
        )];
        let v = AugmentedSubspace::new(1, 1, &gens).unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::from_element(1, 1, 0.0);
        let d = 6;
        assert_eq!(scalar_oracle(1.0, d), None);
        assert_eq!(scalar_oracle(0.0, d), Some(0));
        let j1 = augmented_jet_space(&v, &one, d, &tol()).unwrap();
        assert!(!j1.consistent);
        assert_eq!(j1.dimension, None);
        let j0 = augmented_jet_space(&v, &zero, d, &tol()).unwrap();
        assert_eq!(j0.dimension, Some(0));
    }

    #[test]
    fn conformal_jets_match_the_dimension_formula() {
        let v0 = named::conformal(3).unwrap();
        let aug = AugmentedSubspace::from_linear(&v0).unwrap();
        let a = v0.combine(&[0.4, -1.0, 0.3, 2.0]);
        let jet = augmented_jet_space(&aug, &a, 3, &tol()).unwrap();
        assert_eq!(jet.dimension, Some(10 - 3 - 4));
        // A outside V is inconsistent at degree zero
        let outside = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(
            !augmented_jet_space(&aug, &outside, 3, &tol())
                .unwrap()
                .consistent
        );
    }

    #[test]
    fn augmented_json_round_trip() {
        let v = AugmentedSubspace::from_linear(&named::skew(2).unwrap()).unwrap();
        assert_eq!(v.dim(), 3);
        assert!(v
            .matrix_projection()
            .unwrap()
            .approx_eq(&named::skew(2).unwrap(), 1e-12));
        let j = AugmentedJson {
            n: 2,
            m: 2,
            generators: vec![AugmentedGeneratorJson {
                matrix: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
                vector: vec![0.0, 0.0],
            }],
        };
        assert_eq!(AugmentedSubspace::try_from(&j).unwrap().dim(), 1);
    }
}
