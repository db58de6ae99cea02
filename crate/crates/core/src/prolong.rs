//! Prolongation chain `M_0(V), M_1(V), ...` and the invariants alpha, delta.
//!
//! `M_k(V)` is held as an orthonormal basis of degree-`k` coefficient
//! vectors (see [`crate::symtensor`] for the layout). Two constructions are
//! provided: [`mk_direct`] imposes the slot condition for every filling of
//! the first `k-1` slots, [`mk_step`] uses the recursion through the
//! previous degree. The chain uses the recursion; the direct form is kept as
//! an independent check.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matspace::MatrixSubspace;
use crate::obstruct::{ObstructionWitness, WitnessJson};
use crate::symtensor::{self, hom_dim, HomPoly, MonomialBasis, PolyJson, PolyMap};

/// `M_k(V)` as a subspace of degree-`k` coefficient space.
#[derive(Debug, Clone, PartialEq)]
pub struct HomSolutionSpace {
    n: usize,
    m: usize,
    k: usize,
    basis: DMatrix<f64>,
}

impl HomSolutionSpace {
    pub fn new(n: usize, m: usize, k: usize, basis: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != hom_dim(n, m, k) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", hom_dim(n, m, k)),
                got: format!("{}", basis.nrows()),
            });
        }
        Ok(Self { n, m, k, basis })
    }

    /// All constants `R^m`.
    pub fn constants(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            k: 0,
            basis: DMatrix::identity(m, m),
        }
    }

    pub fn zero(n: usize, m: usize, k: usize) -> Self {
        Self {
            n,
            m,
            k,
            basis: DMatrix::zeros(hom_dim(n, m, k), 0),
        }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    /// Orthonormal coefficient vectors as columns.
    pub fn basis_matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn polys(&self) -> Vec<HomPoly> {
        self.basis
            .column_iter()
            .map(|c| {
                HomPoly::from_coeffs(self.n, self.m, self.k, c.iter().copied().collect())
                    .expect("basis rows match hom_dim")
            })
            .collect()
    }

    /// Coefficient-space distance of `p` from this space.
    pub fn distance(&self, p: &HomPoly) -> Result<f64> {
        if p.degree() != self.k {
            return Err(Error::DegreeMismatch {
                expected: self.k,
                got: p.degree(),
            });
        }
        let c = p.coeff_vector();
        let proj = &self.basis * (self.basis.transpose() * &c);
        Ok((c - proj).norm())
    }

    /// Largest principal angle to `other`; pi/2 when the dimensions differ.
    pub fn max_principal_angle(&self, other: &HomSolutionSpace) -> f64 {
        if self.k != other.k || self.dim() != other.dim() {
            return std::f64::consts::FRAC_PI_2;
        }
        linalg::max_principal_angle(&self.basis, &other.basis)
    }

    /// Worst `distance(slot_matrix(p, beta), V)` over basis elements and slots.
    pub fn max_slot_residual(&self, v: &MatrixSubspace) -> Result<f64> {
        if self.k == 0 {
            return Ok(0.0);
        }
        let slots = MonomialBasis::new(self.n, self.k - 1)?;
        let mut worst: f64 = 0.0;
        for p in self.polys() {
            for beta in slots.monomials() {
                worst = worst.max(v.distance(&p.slot_matrix(beta)?)?);
            }
        }
        Ok(worst)
    }
}

fn check_dims(v: &MatrixSubspace, n: usize, m: usize) -> Result<()> {
    if v.n() != n || v.m() != m {
        return Err(Error::ShapeMismatch {
            expected: format!("L(R^{n}, R^{m})"),
            got: format!("L(R^{}, R^{})", v.n(), v.m()),
        });
    }
    Ok(())
}

fn stack_rows(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// `M_k(V)` from the slot condition over every `beta` with `|beta| = k-1`.
pub fn mk_direct(v: &MatrixSubspace, k: usize, tol: &Tolerances) -> Result<HomSolutionSpace> {
    let (n, m) = (v.n(), v.m());
    if k == 0 {
        return Ok(HomSolutionSpace::constants(n, m));
    }
    let complement = v.complement_stacked();
    let cols = hom_dim(n, m, k);
    if complement.ncols() == 0 {
        return HomSolutionSpace::new(n, m, k, DMatrix::identity(cols, cols));
    }
    let ct = complement.transpose();
    let blocks: Vec<DMatrix<f64>> = symtensor::monomial_basis(n, k - 1)?
        .iter()
        .map(|beta| Ok(&ct * symtensor::slot_operator(n, m, k, beta)?))
        .collect::<Result<_>>()?;
    let constraints = stack_rows(&blocks, cols);
    HomSolutionSpace::new(n, m, k, linalg::nullspace(&constraints, tol.rank_rel))
}

/// `M_k(V)` from `M_{k-1}(V)`: all `p` whose partial derivatives lie in
/// `prev`. From the constants the step imposes membership in `V` itself.
pub fn mk_step(
    v: &MatrixSubspace,
    prev: &HomSolutionSpace,
    tol: &Tolerances,
) -> Result<HomSolutionSpace> {
    let (n, m) = (v.n(), v.m());
    check_dims(v, prev.n, prev.m)?;
    if prev.k == 0 {
        if prev.dim() != m {
            return Err(Error::InvalidArgument(
                "degree-0 predecessor must be the full constant space".into(),
            ));
        }
        return mk_direct(v, 1, tol);
    }
    let k = prev.k + 1;
    if prev.is_zero() {
        return Ok(HomSolutionSpace::zero(n, m, k));
    }
    let complement = linalg::orth_complement(&prev.basis, hom_dim(n, m, prev.k), tol.rank_rel);
    let cols = hom_dim(n, m, k);
    if complement.ncols() == 0 {
        return HomSolutionSpace::new(n, m, k, DMatrix::identity(cols, cols));
    }
    let ct = complement.transpose();
    let blocks: Vec<DMatrix<f64>> = (0..n)
        .map(|i| Ok(&ct * symtensor::derivative_operator(n, m, k, i)?))
        .collect::<Result<_>>()?;
    let constraints = stack_rows(&blocks, cols);
    HomSolutionSpace::new(n, m, k, linalg::nullspace(&constraints, tol.rank_rel))
}

/// Status of `delta(V) = sup{k : M_k != 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaStatus {
    /// `M_d != 0` and `M_{d+1} = 0` were both computed.
    Finite(usize),
    /// The chain was still nonzero at the degree cap.
    LowerBound(usize),
    /// A verified obstruction witness proves `delta = infinity`.
    InfiniteCertified(Box<ObstructionWitness>),
}

impl DeltaStatus {
    pub fn is_finite(&self) -> bool {
        matches!(self, DeltaStatus::Finite(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            DeltaStatus::Finite(_) => "finite",
            DeltaStatus::LowerBound(_) => "lower_bound",
            DeltaStatus::InfiniteCertified(_) => "infinite_certified",
        }
    }

    pub fn to_json(&self) -> DeltaJson {
        match self {
            DeltaStatus::Finite(d) => DeltaJson {
                status: self.label().into(),
                value: Some(*d),
                witness: None,
            },
            DeltaStatus::LowerBound(k) => DeltaJson {
                status: self.label().into(),
                value: Some(*k),
                witness: None,
            },
            DeltaStatus::InfiniteCertified(w) => DeltaJson {
                status: self.label().into(),
                value: None,
                witness: Some(w.to_json()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaJson {
    pub status: String,
    pub value: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
}

/// Result of [`chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub n: usize,
    pub m: usize,
    pub dim_v: usize,
    /// `alpha_0, alpha_1, ...` including the terminating zero when finite.
    pub alpha: Vec<usize>,
    /// Sum of `alpha`; exact only when `delta` is finite.
    pub alpha_total: usize,
    pub delta: DeltaStatus,
    pub spaces: Vec<HomSolutionSpace>,
}

impl ChainReport {
    pub fn alpha_total_exact(&self) -> bool {
        self.delta.is_finite()
    }

    pub fn to_json(&self) -> ChainReportJson {
        ChainReportJson {
            subspace: SubspaceDescriptor {
                n: self.n,
                m: self.m,
                dim: self.dim_v,
            },
            alpha: self.alpha.clone(),
            delta: self.delta.to_json(),
            alpha_total: self.alpha_total,
            alpha_total_is_lower_bound: !self.alpha_total_exact(),
            bases: self
                .spaces
                .iter()
                .map(|s| {
                    s.polys()
                        .into_iter()
                        .map(|p| PolyJson::from(&PolyMap::homogeneous(p)))
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceDescriptor {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReportJson {
    pub subspace: SubspaceDescriptor,
    pub alpha: Vec<usize>,
    pub delta: DeltaJson,
    pub alpha_total: usize,
    pub alpha_total_is_lower_bound: bool,
    pub bases: Vec<Vec<PolyJson>>,
}

/// Runs [`mk_step`] from the constants until the chain dies or `k_max`.
///
/// Never reports infinity on its own; see [`crate::obstruct::classify_delta`].
pub fn chain(v: &MatrixSubspace, k_max: usize, tol: &Tolerances) -> Result<ChainReport> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let mut spaces = vec![HomSolutionSpace::constants(v.n(), v.m())];
    let mut delta = DeltaStatus::LowerBound(k_max);
    for k in 1..=k_max {
        let next = mk_step(v, spaces.last().expect("nonempty"), tol)?;
        let dead = next.is_zero();
        spaces.push(next);
        if dead {
            delta = DeltaStatus::Finite(k - 1);
            break;
        }
    }
    let alpha: Vec<usize> = spaces.iter().map(HomSolutionSpace::dim).collect();
    Ok(ChainReport {
        n: v.n(),
        m: v.m(),
        dim_v: v.dim(),
        alpha_total: alpha.iter().sum(),
        alpha,
        delta,
        spaces,
    })
}
