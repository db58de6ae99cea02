//! Polynomial solution spaces `P(V)`, `P*(V)` and sampled verification of
//! `DF(x) in V`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matspace::MatrixSubspace;
use crate::prolong::{ChainReport, DeltaStatus};
use crate::symtensor::{hom_dim, HomPoly, PolyJson, PolyMap};

/// Linearly independent polynomial maps spanning a solution space.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    n: usize,
    m: usize,
    elements: Vec<PolyMap>,
    /// Degree of each element when it is homogeneous.
    degrees: Vec<Option<usize>>,
}

impl PolyBasis {
    pub fn new(n: usize, m: usize, elements: Vec<PolyMap>) -> Result<Self> {
        if elements.iter().any(|e| e.n() != n || e.m() != m) {
            return Err(Error::ShapeMismatch {
                expected: format!("R^{n} -> R^{m}"),
                got: "mixed shapes".into(),
            });
        }
        let degrees = elements
            .iter()
            .map(|e| match e.components() {
                [only] => Some(only.degree()),
                _ => None,
            })
            .collect();
        Ok(Self {
            n,
            m,
            elements,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[PolyMap] {
        &self.elements
    }

    pub fn degrees(&self) -> &[Option<usize>] {
        &self.degrees
    }

    /// Highest degree present in any element.
    pub fn max_degree(&self) -> usize {
        self.elements
            .iter()
            .filter_map(PolyMap::max_degree)
            .max()
            .unwrap_or(0)
    }

    /// Coefficients of every element over degrees `0..=max_degree`, one
    /// column per element.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let top = self.max_degree();
        let offsets: Vec<usize> = (0..=top)
            .scan(0, |acc, k| {
                let o = *acc;
                *acc += hom_dim(self.n, self.m, k);
                Some(o)
            })
            .collect();
        let rows: usize = (0..=top).map(|k| hom_dim(self.n, self.m, k)).sum();
        let mut out = DMatrix::zeros(rows, self.elements.len());
        for (j, e) in self.elements.iter().enumerate() {
            for c in e.components() {
                let o = offsets[c.degree()];
                for (i, &v) in c.coeffs().iter().enumerate() {
                    out[(o + i, j)] = v;
                }
            }
        }
        out
    }

    /// Numerical rank of the coefficient matrix.
    pub fn rank(&self, tol: &Tolerances) -> usize {
        linalg::numerical_rank(
            &linalg::singular_values(&self.coefficient_matrix()),
            tol.rank_rel,
        )
    }

    pub fn to_json(&self) -> PolyBasisJson {
        PolyBasisJson {
            n: self.n,
            m: self.m,
            degrees: self.degrees.clone(),
            elements: self.elements.iter().map(PolyJson::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyBasisJson {
    pub n: usize,
    pub m: usize,
    pub degrees: Vec<Option<usize>>,
    pub elements: Vec<PolyJson>,
}

/// Basis of `P(V)`: the homogeneous bases of a terminated chain, graded.
pub fn solution_basis(report: &ChainReport) -> Result<PolyBasis> {
    if !matches!(report.delta, DeltaStatus::Finite(_)) {
        return Err(Error::NonFiniteDelta);
    }
    let elements = report
        .spaces
        .iter()
        .flat_map(|s| s.polys().into_iter().map(PolyMap::homogeneous))
        .collect();
    PolyBasis::new(report.n, report.m, elements)
}

/// Basis of the elements of `span(basis)` whose degree-one part vanishes.
pub fn reduced_basis(basis: &PolyBasis, tol: &Tolerances) -> Result<PolyBasis> {
    let (n, m) = (basis.n, basis.m);
    let lin_dim = hom_dim(n, m, 1);
    let mut linear = DMatrix::zeros(lin_dim, basis.len());
    for (j, e) in basis.elements.iter().enumerate() {
        if let Some(c) = e.component(1) {
            linear.set_column(j, &c.coeff_vector());
        }
    }
    let combos = linalg::nullspace(&linear, tol.rank_rel);
    let mut out = Vec::with_capacity(combos.ncols());
    for col in combos.column_iter() {
        let mut parts: Vec<HomPoly> = Vec::new();
        for (e, &w) in basis.elements.iter().zip(col.iter()) {
            if w == 0.0 {
                continue;
            }
            for c in e.components() {
                if c.degree() == 1 {
                    continue;
                }
                match parts.iter_mut().find(|p| p.degree() == c.degree()) {
                    Some(p) => p.add_scaled(w, c)?,
                    None => parts.push(c.scale(w)),
                }
            }
        }
        // the combination kills the linear part up to rounding; drop it exactly
        parts.retain(|p| p.coeffs().iter().any(|&x| x != 0.0));
        out.push(PolyMap::from_components(n, m, parts)?);
    }
    PolyBasis::new(n, m, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub max_residual: f64,
    pub samples: usize,
    pub radius: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Uniform sample from the closed ball of radius `r` in `R^n`.
pub fn sample_ball(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    let g: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = g.norm();
    let radial = r * rng.random::<f64>().powf(1.0 / n as f64);
    if norm == 0.0 {
        return vec![0.0; n];
    }
    (g * (radial / norm)).iter().copied().collect()
}

/// Checks `distance(DF(x), V) <= tol` at `samples` points of the ball.
pub fn verify_membership(
    f: &PolyMap,
    v: &MatrixSubspace,
    samples: usize,
    radius: f64,
    tol: f64,
    seed: u64,
) -> Result<VerificationReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if f.n() != v.n() || f.m() != v.m() {
        return Err(Error::ShapeMismatch {
            expected: format!("R^{} -> R^{}", v.n(), v.m()),
            got: format!("R^{} -> R^{}", f.n(), f.m()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_ball(&mut rng, f.n(), radius);
        worst = worst.max(v.distance(&f.jacobian(&x)?)?);
    }
    Ok(VerificationReport {
        max_residual: worst,
        samples,
        radius,
        tol,
        pass: worst <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matspace::named;
    use crate::prolong::chain;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn conformal_basis_and_reduction() {
        let v = named::conformal(3).unwrap();
        let report = chain(&v, 8, &tol()).unwrap();
        let b = solution_basis(&report).unwrap();
        assert_eq!(b.len(), 10);
        let count = |d| b.degrees().iter().filter(|&&x| x == Some(d)).count();
        assert_eq!((count(0), count(1), count(2)), (3, 4, 3));
        let r = reduced_basis(&b, &tol()).unwrap();
        assert_eq!(r.len(), 6);
        assert_eq!(r.rank(&tol()), 6);
        assert!(r.elements().iter().all(|e| e.component(1).is_none()));
    }

    #[test]
    fn quaternion_basis_is_affine() {
        let v = named::quaternion_right().unwrap();
        let b = solution_basis(&chain(&v, 8, &tol()).unwrap()).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.max_degree() <= 1);
        assert_eq!(reduced_basis(&b, &tol()).unwrap().len(), 4);
    }

    #[test]
    fn zero_space_gives_constants() {
        let v = MatrixSubspace::zero(3, 2).unwrap();
        let b = solution_basis(&chain(&v, 8, &tol()).unwrap()).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.degrees().iter().all(|&d| d == Some(0)));
        let r = reduced_basis(&b, &tol()).unwrap();
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn non_finite_chain_rejected() {
        let v = named::complex_plane(2, 2).unwrap();
        let report = chain(&v, 3, &tol()).unwrap();
        assert_eq!(solution_basis(&report), Err(Error::NonFiniteDelta));
    }

    #[test]
    fn membership_examples() {
        let skew = named::skew(3).unwrap();
        let sq =
            PolyMap::homogeneous(HomPoly::from_terms(3, 3, 2, &[(0, vec![2, 0, 0], 1.0)]).unwrap());
        let r = verify_membership(&sq, &skew, 50, 1.0, 1e-9, 1).unwrap();
        assert!(!r.pass);
        let c = PolyMap::homogeneous(HomPoly::constant(&[1.0, 2.0, 3.0], 3).unwrap());
        assert!(verify_membership(&c, &skew, 50, 1.0, 1e-9, 1).unwrap().pass);
        assert!(verify_membership(&c, &skew, 5, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x = sample_ball(&mut rng, 3, 2.0);
            assert!(x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 2.0 + 1e-12);
        }
    }
}
