//! Homogeneous vector-valued polynomials in monomial coordinates.
//!
//! A symmetric `k`-tensor `T` with values in `R^m` is stored through its
//! polynomial `p(x) = T(x, ..., x)`. Contraction of the last slot becomes a
//! scaled directional derivative and slot matrices are mixed partials.
//!
//! Coefficients of a [`HomPoly`] are laid out output-major: the coefficient of
//! `x^beta` in component `a` sits at `a * C(n+k-1, k) + index(beta)` where
//! `index` follows the canonical order of [`monomial_basis`].

use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial `x^beta`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `beta!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }

    pub fn raised(&self, i: usize) -> Self {
        let mut e = self.0.clone();
        e[i] += 1;
        MultiIndex(e)
    }

    pub fn lowered(&self, i: usize) -> Option<Self> {
        if self.0[i] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[i] -= 1;
        Some(MultiIndex(e))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    /// Graded, then larger leading exponents first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// All exponent vectors of degree `k` in `n` variables, in canonical order.
pub fn monomial_basis(n: usize, k: usize) -> Result<Vec<MultiIndex>> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut out = Vec::with_capacity(binomial(n + k - 1, k));
    let mut cur = vec![0u32; n];
    fill(&mut cur, 0, k as u32, &mut out);
    Ok(out)
}

fn fill(cur: &mut Vec<u32>, pos: usize, rest: u32, out: &mut Vec<MultiIndex>) {
    let n = cur.len();
    if pos == n - 1 {
        cur[pos] = rest;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for e in (0..=rest).rev() {
        cur[pos] = e;
        fill(cur, pos + 1, rest - e, out);
    }
}

/// `m * C(n+k-1, k)`, the dimension of `Sym^k(R^n; R^m)`.
pub fn hom_dim(n: usize, m: usize, k: usize) -> usize {
    if n == 0 {
        return 0;
    }
    m * binomial(n + k - 1, k)
}

/// Monomials of one degree with a reverse lookup table.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    n: usize,
    k: usize,
    monomials: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl MonomialBasis {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let monomials = monomial_basis(n, k)?;
        let lookup = monomials
            .iter()
            .enumerate()
            .map(|(i, b)| (b.clone(), i))
            .collect();
        Ok(Self {
            n,
            k,
            monomials,
            lookup,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index_of(&self, beta: &MultiIndex) -> Option<usize> {
        self.lookup.get(beta).copied()
    }
}

/// Homogeneous polynomial map `R^n -> R^m` of degree `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomPoly {
    n: usize,
    m: usize,
    k: usize,
    coeffs: Vec<f64>,
}

impl HomPoly {
    pub fn zero(n: usize, m: usize, k: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            n,
            m,
            k,
            coeffs: vec![0.0; hom_dim(n, m, k)],
        })
    }

    /// Wrap an output-major coefficient vector.
    pub fn from_coeffs(n: usize, m: usize, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::ZeroDimension);
        }
        let expected = hom_dim(n, m, k);
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} coefficients"),
                got: format!("{}", coeffs.len()),
            });
        }
        Ok(Self { n, m, k, coeffs })
    }

    /// Build from `(output, exponents, value)` terms; repeated terms add up.
    pub fn from_terms(
        n: usize,
        m: usize,
        k: usize,
        terms: &[(usize, Vec<u32>, f64)],
    ) -> Result<Self> {
        let mut p = Self::zero(n, m, k)?;
        let basis = MonomialBasis::new(n, k)?;
        for (a, exps, c) in terms {
            let beta = MultiIndex(exps.clone());
            if beta.dim() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} exponents"),
                    got: format!("{}", beta.dim()),
                });
            }
            if beta.degree() != k {
                return Err(Error::DegreeMismatch {
                    expected: k,
                    got: beta.degree(),
                });
            }
            if *a >= m {
                return Err(Error::IndexOutOfRange { index: *a, dim: m });
            }
            let idx = basis.index_of(&beta).expect("degree checked");
            p.coeffs[a * basis.len() + idx] += c;
        }
        Ok(p)
    }

    /// The linear map `x -> A x` as a degree-one polynomial.
    pub fn linear(a: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        let mut p = Self::zero(n, m, 1)?;
        for r in 0..m {
            for j in 0..n {
                p.coeffs[r * n + j] = a[(r, j)];
            }
        }
        Ok(p)
    }

    pub fn constant(v: &[f64], n: usize) -> Result<Self> {
        Self::from_coeffs(n, v.len(), 0, v.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coeffs)
    }

    pub fn coeff(&self, a: usize, beta: &MultiIndex) -> f64 {
        if beta.degree() != self.k || beta.dim() != self.n || a >= self.m {
            return 0.0;
        }
        let basis = MonomialBasis::new(self.n, self.k).expect("n >= 1");
        let idx = basis.index_of(beta).expect("degree checked");
        self.coeffs[a * basis.len() + idx]
    }

    /// Nonzero terms as `(output, exponents, value)` in storage order.
    pub fn terms(&self) -> Vec<(usize, MultiIndex, f64)> {
        let basis = MonomialBasis::new(self.n, self.k).expect("n >= 1");
        let len = basis.len();
        let mut out = Vec::new();
        for a in 0..self.m {
            for (i, beta) in basis.monomials().iter().enumerate() {
                let c = self.coeffs[a * len + i];
                if c != 0.0 {
                    out.push((a, beta.clone(), c));
                }
            }
        }
        out
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * t).collect(),
            ..self.clone()
        }
    }

    pub fn add_scaled(&mut self, t: f64, other: &HomPoly) -> Result<()> {
        self.check_same_space(other)?;
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += t * o;
        }
        Ok(())
    }

    fn check_same_space(&self, other: &HomPoly) -> Result<()> {
        if self.k != other.k {
            return Err(Error::DegreeMismatch {
                expected: self.k,
                got: other.k,
            });
        }
        if self.n != other.n || self.m != other.m {
            return Err(Error::ShapeMismatch {
                expected: format!("R^{} -> R^{}", self.n, self.m),
                got: format!("R^{} -> R^{}", other.n, other.m),
            });
        }
        Ok(())
    }

    /// Partial derivative along coordinate `i` (0-based).
    pub fn derive(&self, i: usize) -> Result<HomPoly> {
        if self.k == 0 {
            return Err(Error::ConstantPolynomial);
        }
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.n,
            });
        }
        let src = MonomialBasis::new(self.n, self.k)?;
        let dst = MonomialBasis::new(self.n, self.k - 1)?;
        let mut out = HomPoly::zero(self.n, self.m, self.k - 1)?;
        for a in 0..self.m {
            for (idx, beta) in src.monomials().iter().enumerate() {
                let c = self.coeffs[a * src.len() + idx];
                if c == 0.0 {
                    continue;
                }
                if let Some(lower) = beta.lowered(i) {
                    let j = dst.index_of(&lower).expect("degree k-1");
                    out.coeffs[a * dst.len() + j] += c * beta.0[i] as f64;
                }
            }
        }
        Ok(out)
    }

    /// Fill the last tensor slot with `x`: `(1/k) * sum_i x_i d_i p`.
    pub fn contract(&self, x: &[f64]) -> Result<HomPoly> {
        if self.k == 0 {
            return Err(Error::ConstantPolynomial);
        }
        if x.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.n),
                got: format!("{}", x.len()),
            });
        }
        let mut out = HomPoly::zero(self.n, self.m, self.k - 1)?;
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                out.add_scaled(xi / self.k as f64, &self.derive(i)?)?;
            }
        }
        Ok(out)
    }

    /// Matrix of `x -> T(e_beta, x)` where the first `k-1` slots are filled
    /// with basis vectors according to `beta`.
    pub fn slot_matrix(&self, beta: &MultiIndex) -> Result<DMatrix<f64>> {
        if self.k == 0 {
            return Err(Error::ConstantPolynomial);
        }
        if beta.degree() + 1 != self.k {
            return Err(Error::DegreeMismatch {
                expected: self.k - 1,
                got: beta.degree(),
            });
        }
        if beta.dim() != self.n {
            return Err(Error::ShapeMismatch {
                expected: format!("{} exponents", self.n),
                got: format!("{}", beta.dim()),
            });
        }
        let basis = MonomialBasis::new(self.n, self.k)?;
        let kf = factorial(self.k);
        let mut out = DMatrix::zeros(self.m, self.n);
        for j in 0..self.n {
            let gamma = beta.raised(j);
            let idx = basis.index_of(&gamma).expect("degree k");
            let w = gamma.factorial() / kf;
            for a in 0..self.m {
                out[(a, j)] = self.coeffs[a * basis.len() + idx] * w;
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, x: &[f64]) -> DVector<f64> {
        let basis = MonomialBasis::new(self.n, self.k).expect("n >= 1");
        let mono: Vec<f64> = basis.monomials().iter().map(|b| b.eval(x)).collect();
        let len = basis.len();
        DVector::from_fn(self.m, |a, _| {
            mono.iter()
                .enumerate()
                .map(|(i, v)| self.coeffs[a * len + i] * v)
                .sum()
        })
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.n);
        if self.k == 0 {
            return out;
        }
        let basis = MonomialBasis::new(self.n, self.k).expect("n >= 1");
        let len = basis.len();
        for (idx, beta) in basis.monomials().iter().enumerate() {
            for j in 0..self.n {
                let Some(lower) = beta.lowered(j) else {
                    continue;
                };
                let d = beta.0[j] as f64 * lower.eval(x);
                if d == 0.0 {
                    continue;
                }
                for a in 0..self.m {
                    out[(a, j)] += self.coeffs[a * len + idx] * d;
                }
            }
        }
        out
    }
}

/// Matrix of `derive(., i)` from degree `k` to degree `k-1` coefficients.
pub fn derivative_operator(n: usize, m: usize, k: usize, i: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::ConstantPolynomial);
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let src = MonomialBasis::new(n, k)?;
    let dst = MonomialBasis::new(n, k - 1)?;
    let mut d = DMatrix::zeros(m * dst.len(), m * src.len());
    for (idx, beta) in src.monomials().iter().enumerate() {
        if let Some(lower) = beta.lowered(i) {
            let j = dst.index_of(&lower).expect("degree k-1");
            for a in 0..m {
                d[(a * dst.len() + j, a * src.len() + idx)] = beta.0[i] as f64;
            }
        }
    }
    Ok(d)
}

/// Matrix sending degree-`k` coefficients to the row-major flattened
/// `slot_matrix(p, beta)`.
pub fn slot_operator(n: usize, m: usize, k: usize, beta: &MultiIndex) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::ConstantPolynomial);
    }
    if beta.degree() + 1 != k {
        return Err(Error::DegreeMismatch {
            expected: k - 1,
            got: beta.degree(),
        });
    }
    let basis = MonomialBasis::new(n, k)?;
    let kf = factorial(k);
    let mut s = DMatrix::zeros(m * n, m * basis.len());
    for j in 0..n {
        let gamma = beta.raised(j);
        let idx = basis.index_of(&gamma).expect("degree k");
        let w = gamma.factorial() / kf;
        for a in 0..m {
            s[(a * n + j, a * basis.len() + idx)] = w;
        }
    }
    Ok(s)
}

/// Graded polynomial map: a sum of homogeneous components of distinct degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    n: usize,
    m: usize,
    components: Vec<HomPoly>,
}

impl PolyMap {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            n,
            m,
            components: Vec::new(),
        })
    }

    pub fn from_components(n: usize, m: usize, parts: Vec<HomPoly>) -> Result<Self> {
        let mut p = Self::new(n, m)?;
        for h in parts {
            p.add_component(h)?;
        }
        Ok(p)
    }

    pub fn homogeneous(p: HomPoly) -> Self {
        Self {
            n: p.n,
            m: p.m,
            components: vec![p],
        }
    }

    /// Adds `h` to the component of its degree, creating it if absent.
    pub fn add_component(&mut self, h: HomPoly) -> Result<()> {
        if h.n != self.n || h.m != self.m {
            return Err(Error::ShapeMismatch {
                expected: format!("R^{} -> R^{}", self.n, self.m),
                got: format!("R^{} -> R^{}", h.n, h.m),
            });
        }
        match self.components.binary_search_by_key(&h.k, |c| c.k) {
            Ok(pos) => self.components[pos].add_scaled(1.0, &h)?,
            Err(pos) => self.components.insert(pos, h),
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> &[HomPoly] {
        &self.components
    }

    pub fn component(&self, k: usize) -> Option<&HomPoly> {
        self.components.iter().find(|c| c.k == k)
    }

    pub fn component_mut(&mut self, k: usize) -> Option<&mut HomPoly> {
        self.components.iter_mut().find(|c| c.k == k)
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.components.last().map(|c| c.k)
    }

    pub fn evaluate(&self, x: &[f64]) -> DVector<f64> {
        self.components
            .iter()
            .fold(DVector::zeros(self.m), |acc, c| acc + c.evaluate(x))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.n),
                got: format!("{}", x.len()),
            });
        }
        Ok(self
            .components
            .iter()
            .fold(DMatrix::zeros(self.m, self.n), |acc, c| acc + c.jacobian(x)))
    }
}

/// Free-function form of [`PolyMap::jacobian`].
pub fn jacobian(f: &PolyMap, x: &[f64]) -> Result<DMatrix<f64>> {
    f.jacobian(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub degree: usize,
    /// 0-based output component.
    pub output: usize,
    pub exponents: Vec<u32>,
    pub value: f64,
}

type Term = (usize, Vec<u32>, f64);

/// Polynomial file form: `{ "n", "m", "terms": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub n: usize,
    pub m: usize,
    pub terms: Vec<TermJson>,
}

impl From<&PolyMap> for PolyJson {
    fn from(p: &PolyMap) -> Self {
        let terms = p
            .components
            .iter()
            .flat_map(|c| {
                c.terms().into_iter().map(move |(a, beta, v)| TermJson {
                    degree: c.k,
                    output: a,
                    exponents: beta.0,
                    value: v,
                })
            })
            .collect();
        PolyJson {
            n: p.n,
            m: p.m,
            terms,
        }
    }
}

impl TryFrom<&PolyJson> for PolyMap {
    type Error = Error;

    fn try_from(j: &PolyJson) -> Result<Self> {
        let mut p = PolyMap::new(j.n, j.m)?;
        let mut by_degree: Vec<(usize, Vec<Term>)> = Vec::new();
        for t in &j.terms {
            let exp_deg: usize = t.exponents.iter().map(|&e| e as usize).sum();
            if exp_deg != t.degree {
                return Err(Error::DegreeMismatch {
                    expected: t.degree,
                    got: exp_deg,
                });
            }
            match by_degree.iter_mut().find(|(d, _)| *d == t.degree) {
                Some((_, v)) => v.push((t.output, t.exponents.clone(), t.value)),
                None => by_degree.push((t.degree, vec![(t.output, t.exponents.clone(), t.value)])),
            }
        }
        for (d, terms) in by_degree {
            p.add_component(HomPoly::from_terms(j.n, j.m, d, &terms)?)?;
        }
        Ok(p)
    }
}
