//! Witnesses for `delta(V) = infinity`.
//!
//! Two kinds of elements force an infinite-dimensional solution space: a
//! rank-one operator `w psi^T` in `V` (giving `x -> f(psi(x)) w`), and a
//! plane `P W Q` with `W = span{I_2, J_2}` padded (giving holomorphic maps in
//! two coordinates). Both searches are seeded multi-start simplex descents
//! followed by a local polish; a candidate is only returned after its
//! certificate checks out. Absence of a witness is inconclusive.

mod simplex;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Tolerances, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matspace::{named, MatrixSubspace};
use crate::prolong::{self, ChainReport, DeltaStatus};

pub use simplex::{minimize, SimplexOptions, SimplexResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Objective evaluations per restart.
    pub max_evals: usize,
    /// Best restarts handed to the polish/certify stage.
    pub polish_candidates: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            max_evals: 4000,
            polish_candidates: 8,
        }
    }
}

impl SearchOptions {
    pub fn with_seed(seed: u64, restarts: usize) -> Self {
        Self {
            seed,
            restarts,
            ..Self::default()
        }
    }
}

/// Outcome of one detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<W> {
    pub witness: Option<W>,
    /// Smallest objective value seen over all restarts.
    pub best_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneWitness {
    /// Unit covector in `(R^n)^*`.
    pub psi: DVector<f64>,
    /// Unit vector in `R^m`.
    pub w: DVector<f64>,
    /// `distance(w psi^T, V)`.
    pub residual: f64,
}

impl RankOneWitness {
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.w * self.psi.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexResiduals {
    /// `sigma_3 / sigma_1` of `A` (0 when `min(m, n) = 2`).
    pub rank_a: f64,
    pub rank_b: f64,
    /// Sine of the largest principal angle between the column spaces.
    pub colspace_gap: f64,
    pub rowspace_gap: f64,
    /// `||(B~ A~^-1)^2 + I||_F`.
    pub j_residual: f64,
    pub distance_a: f64,
    pub distance_b: f64,
    /// Largest principal angle between `span{A, B}` and `P W Q`.
    pub reconstruction_angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPairWitness {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub residuals: ComplexResiduals,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObstructionWitness {
    RankOne(RankOneWitness),
    ComplexPair(ComplexPairWitness),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessJson {
    RankOne {
        psi: Vec<f64>,
        w: Vec<f64>,
        residual: f64,
    },
    ComplexPair {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        residuals: ComplexResiduals,
    },
}

impl ObstructionWitness {
    pub fn to_json(&self) -> WitnessJson {
        match self {
            ObstructionWitness::RankOne(r) => WitnessJson::RankOne {
                psi: r.psi.iter().copied().collect(),
                w: r.w.iter().copied().collect(),
                residual: r.residual,
            },
            ObstructionWitness::ComplexPair(c) => WitnessJson::ComplexPair {
                a: linalg::matrix_to_rows(&c.a),
                b: linalg::matrix_to_rows(&c.b),
                p: linalg::matrix_to_rows(&c.p),
                q: linalg::matrix_to_rows(&c.q),
                residuals: c.residuals,
            },
        }
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Runs `restarts` independent simplex descents and returns them sorted by
/// value, ties broken by restart index.
fn multistart<F>(dim: usize, opts: &SearchOptions, f: F) -> Vec<SimplexResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let simplex = SimplexOptions {
        max_evals: opts.max_evals,
        ..SimplexOptions::default()
    };
    let mut runs: Vec<(usize, SimplexResult)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(opts.seed, r);
            let x0 = gaussian(&mut rng, dim);
            (r, minimize(&f, &x0, &simplex))
        })
        .collect();
    runs.sort_by(|a, b| {
        a.1.value
            .partial_cmp(&b.1.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    runs.into_iter().map(|(_, r)| r).collect()
}

fn sv_ratio(a: &DMatrix<f64>, idx: usize) -> f64 {
    let s = linalg::singular_values(a);
    match (s.first(), s.get(idx)) {
        (Some(&s0), _) if s0 <= 0.0 => 1.0,
        (Some(&s0), Some(&si)) => si / s0,
        _ => 0.0,
    }
}

/// Flip signs so the largest-magnitude entry of `w` is positive.
fn canonical_sign(psi: &mut DVector<f64>, w: &mut DVector<f64>) {
    let lead = w
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        *psi = -psi.clone();
        *w = -w.clone();
    }
}

fn rank_one_polish(v: &MatrixSubspace, start: &DMatrix<f64>) -> DMatrix<f64> {
    // alternating projections between V and the rank-one matrices
    let mut x = start.clone();
    for _ in 0..2000 {
        let dec = linalg::svd(&x);
        if dec.s.is_empty() || dec.s[0] == 0.0 {
            break;
        }
        let r1 = dec.u.column(0) * dec.v.column(0).transpose() * dec.s[0];
        let next = v.project(&r1).expect("shape");
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        let gap = (&next - &r1).norm() / norm;
        x = next / norm;
        if gap < 1e-15 {
            break;
        }
    }
    x
}

/// Search for a rank-one operator in `V`.
pub fn find_rank_one(
    v: &MatrixSubspace,
    opts: &SearchOptions,
    tol: &Tolerances,
) -> Result<SearchOutcome<RankOneWitness>> {
    if v.dim() == 0 {
        return Err(Error::InvalidArgument(
            "rank-one search needs dim V >= 1".into(),
        ));
    }
    let objective = |c: &[f64]| sv_ratio(&v.combine(c), 1);
    let runs = multistart(v.dim(), opts, objective);
    let best_objective = runs.first().map_or(f64::INFINITY, |r| r.value);

    for run in runs.iter().take(opts.polish_candidates.max(1)) {
        let start = v.combine(&run.x);
        if start.norm() == 0.0 {
            continue;
        }
        let x = rank_one_polish(v, &(&start / start.norm()));
        if sv_ratio(&x, 1) > tol.rank_one_gate {
            continue;
        }
        let dec = linalg::svd(&x);
        let mut psi: DVector<f64> = dec.v.column(0).into_owned();
        let mut w: DVector<f64> = dec.u.column(0).into_owned();
        canonical_sign(&mut psi, &mut w);
        let residual = v.distance(&(&w * psi.transpose()))?;
        let witness = RankOneWitness { psi, w, residual };
        if verify_rank_one(v, &witness, tol) {
            return Ok(SearchOutcome {
                witness: Some(witness),
                best_objective: best_objective.min(sv_ratio(&x, 1)),
            });
        }
    }
    Ok(SearchOutcome {
        witness: None,
        best_objective,
    })
}

/// `||psi (x) w||_F = 1` and `psi (x) w` lies in `V`.
pub fn verify_rank_one(v: &MatrixSubspace, witness: &RankOneWitness, tol: &Tolerances) -> bool {
    if witness.psi.len() != v.n() || witness.w.len() != v.m() {
        return false;
    }
    let norm = witness.psi.norm() * witness.w.norm();
    if (norm - 1.0).abs() > tol.unit_norm {
        return false;
    }
    match v.distance(&witness.matrix()) {
        Ok(d) => d <= tol.membership,
        Err(_) => false,
    }
}

/// Top-`r` left and right singular vectors.
fn top_spaces(a: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let dec = linalg::svd(a);
    let r = r.min(dec.s.len());
    (
        dec.u.columns(0, r).into_owned(),
        dec.v.columns(0, r).into_owned(),
        dec.s,
    )
}

fn subspace_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (b - a * (a.transpose() * b)).norm()
}

fn complex_penalty(v: &MatrixSubspace, x: &[f64]) -> f64 {
    const BAD: f64 = 1e6;
    let d = v.dim();
    let a = v.combine(&x[..d]);
    let na = a.norm();
    if na < 1e-150 {
        return BAD;
    }
    let a = a / na;
    let b = v.combine(&x[d..]) / na;
    let (ua, ra, sa) = top_spaces(&a, 2);
    let (ub, rb, sb) = top_spaces(&b, 2);
    if sa.len() < 2 || sb.first().copied().unwrap_or(0.0) <= 0.0 || sa[1] <= 1e-12 * sa[0] {
        return BAD;
    }
    let third = |s: &[f64]| s.get(2).map_or(0.0, |x| x / s[0]);
    let at = ua.transpose() * &a * &ra;
    let bt = ua.transpose() * &b * &ra;
    let Some(ainv) = at.try_inverse() else {
        return BAD;
    };
    let mt = bt * ainv;
    let jres = (&mt * &mt + DMatrix::identity(2, 2)).norm();
    third(&sa).powi(2)
        + third(&sb).powi(2)
        + subspace_gap(&ua, &ub).powi(2)
        + subspace_gap(&ra, &rb).powi(2)
        + jres.powi(2)
}

/// Block coordinate descent on
/// `sum_{X in S} ||(I - U U^T) X||^2 + ||X (I - R R^T)||^2`
/// over 2-planes `S` of `V` and 2-frames `U`, `R`. Returns an orthonormal
/// basis of the final `S` (as coefficient vectors) and its frames.
fn complex_polish(
    v: &MatrixSubspace,
    start: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (m, n, d) = (v.m(), v.n(), v.dim());
    let (mut u, mut r, _) = top_spaces(start, 2);
    let mut plane = DMatrix::zeros(d, 2);
    let mut last = f64::INFINITY;
    for _ in 0..500 {
        let pu = DMatrix::identity(m, m) - &u * u.transpose();
        let pr = DMatrix::identity(n, n) - &r * r.transpose();
        let mut g = DMatrix::zeros(2 * m * n, d);
        for (i, b) in v.basis().iter().enumerate() {
            let left = linalg::flatten_row_major(&(&pu * b));
            let right = linalg::flatten_row_major(&(b * &pr));
            g.view_mut((0, i), (m * n, 1)).copy_from(&left);
            g.view_mut((m * n, i), (m * n, 1)).copy_from(&right);
        }
        let dec = linalg::svd(&g);
        // d <= m n < 2 m n, so the thin SVD has d right singular vectors
        plane = dec.v.columns(d - 2, 2).into_owned();
        let obj = dec.s[d - 2].powi(2) + dec.s[d - 1].powi(2);

        let x1 = v.combine(plane.column(0).as_slice());
        let x2 = v.combine(plane.column(1).as_slice());
        let mut side = DMatrix::zeros(m, 2 * n);
        side.columns_mut(0, n).copy_from(&x1);
        side.columns_mut(n, n).copy_from(&x2);
        u = top_spaces(&side, 2).0;
        let mut tall = DMatrix::zeros(n, 2 * m);
        tall.columns_mut(0, m).copy_from(&x1.transpose());
        tall.columns_mut(m, m).copy_from(&x2.transpose());
        r = top_spaces(&tall, 2).0;

        if obj < 1e-30 || (last - obj).abs() <= 1e-3 * last.max(1e-300) && obj < 1e-20 {
            break;
        }
        last = obj;
    }
    (plane, u, r)
}

/// Inside a polished plane, pick `A` and rescale `B` so `(B~ A~^-1)^2 = -I`.
fn normalize_pair(
    v: &MatrixSubspace,
    plane: &DMatrix<f64>,
    seed_a: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    // A = projection of the search candidate onto the plane
    let coords = v.coordinates(seed_a);
    let c = DVector::from_vec(coords);
    let mut ca = plane * (plane.transpose() * &c);
    if ca.norm() < 1e-12 {
        ca = plane.column(0).into_owned();
    }
    ca /= ca.norm();
    // the other plane direction, orthogonal to ca
    let r0 = plane.column(0) - &ca * ca.dot(&plane.column(0));
    let r1 = plane.column(1) - &ca * ca.dot(&plane.column(1));
    let mut cb = if r0.norm() >= r1.norm() { r0 } else { r1 };
    cb /= cb.norm();

    let a = v.combine(ca.as_slice());
    let b = v.combine(cb.as_slice());
    let (ua, ra, _) = top_spaces(&a, 2);
    let at = ua.transpose() * &a * &ra;
    let bt = ua.transpose() * &b * &ra;
    let mt = bt * at.try_inverse()?;
    let t = mt.trace();
    let det = mt.determinant();
    let half = t / 2.0;
    let disc = det - half * half;
    if disc <= 0.0 {
        return None;
    }
    let scale = disc.sqrt();
    let b = (b - &a * half) / scale;
    let na = a.norm();
    Some((&a / na, b / na))
}

/// Search for a plane `P W Q` inside `V`.
pub fn find_complex_pair(
    v: &MatrixSubspace,
    opts: &SearchOptions,
    tol: &Tolerances,
) -> Result<SearchOutcome<ComplexPairWitness>> {
    if v.dim() < 2 || v.n() < 2 || v.m() < 2 {
        return Err(Error::InvalidArgument(
            "complex-pair search needs dim V >= 2, n >= 2, m >= 2".into(),
        ));
    }
    let d = v.dim();
    let runs = multistart(2 * d, opts, |x| complex_penalty(v, x));
    let best_objective = runs.first().map_or(f64::INFINITY, |r| r.value);

    for run in runs.iter().take(opts.polish_candidates.max(1)) {
        let a0 = v.combine(&run.x[..d]);
        if a0.norm() == 0.0 {
            continue;
        }
        let (plane, _, _) = complex_polish(v, &a0);
        let Some((a, b)) = normalize_pair(v, &plane, &a0) else {
            continue;
        };
        let check = verify_complex_pair(v, &a, &b, tol);
        if let (true, Some(p), Some(q)) = (check.certified, check.p, check.q) {
            return Ok(SearchOutcome {
                witness: Some(ComplexPairWitness {
                    a,
                    b,
                    p,
                    q,
                    residuals: check.residuals,
                }),
                best_objective,
            });
        }
    }
    Ok(SearchOutcome {
        witness: None,
        best_objective,
    })
}

/// Result of [`verify_complex_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPairCheck {
    pub certified: bool,
    pub residuals: ComplexResiduals,
    /// Reconstructed conjugators with `span{A, B} = P W Q` (when they exist).
    pub p: Option<DMatrix<f64>>,
    pub q: Option<DMatrix<f64>>,
}

/// Checks the certificate conditions for `(A, B)` and rebuilds `P`, `Q`.
pub fn verify_complex_pair(
    v: &MatrixSubspace,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: &Tolerances,
) -> ComplexPairCheck {
    let (m, n) = (v.m(), v.n());
    let mut res = ComplexResiduals {
        rank_a: f64::INFINITY,
        rank_b: f64::INFINITY,
        colspace_gap: f64::INFINITY,
        rowspace_gap: f64::INFINITY,
        j_residual: f64::INFINITY,
        distance_a: f64::INFINITY,
        distance_b: f64::INFINITY,
        reconstruction_angle: f64::INFINITY,
    };
    let fail = |res| ComplexPairCheck {
        certified: false,
        residuals: res,
        p: None,
        q: None,
    };
    if a.shape() != (m, n) || b.shape() != (m, n) || m < 2 || n < 2 {
        return fail(res);
    }
    res.distance_a = v.distance(a).unwrap_or(f64::INFINITY);
    res.distance_b = v.distance(b).unwrap_or(f64::INFINITY);

    let (ua, ra, sa) = top_spaces(a, 2);
    let (ub, rb, sb) = top_spaces(b, 2);
    let third = |s: &[f64]| {
        if s.first().copied().unwrap_or(0.0) <= 0.0 {
            f64::INFINITY
        } else {
            s.get(2).map_or(0.0, |x| x / s[0])
        }
    };
    res.rank_a = third(&sa);
    res.rank_b = third(&sb);
    let second_ok = |s: &[f64]| s.len() >= 2 && s[0] > 0.0 && s[1] / s[0] > tol.certificate;
    if !second_ok(&sa) || !second_ok(&sb) {
        return fail(res);
    }
    res.colspace_gap = linalg::max_principal_sine(&ua, &ub);
    res.rowspace_gap = linalg::max_principal_sine(&ra, &rb);

    let at = ua.transpose() * a * &ra;
    let bt = ua.transpose() * b * &ra;
    let Some(ainv) = at.clone().try_inverse() else {
        return fail(res);
    };
    let mt = &bt * ainv;
    res.j_residual = (&mt * &mt + DMatrix::identity(2, 2)).norm();

    // M = S J S^-1 with S = [e1, M e1]; then A = (U S) I (S^-1 A~ R^T) and
    // B = (U S) J (S^-1 A~ R^T).
    let s = DMatrix::from_columns(&[DVector::from_vec(vec![1.0, 0.0]), mt.column(0).into_owned()]);
    let reconstructed = s.clone().try_inverse().map(|sinv| {
        let full_u = linalg::complete_basis(&ua, tol.rank_rel);
        let full_r = linalg::complete_basis(&ra, tol.rank_rel);
        let mut p = full_u.clone();
        p.columns_mut(0, 2).copy_from(&(&ua * &s));
        let mut q = full_r.transpose();
        q.rows_mut(0, 2).copy_from(&(sinv * &at * ra.transpose()));
        (p, q)
    });
    let Some((p, q)) = reconstructed else {
        return fail(res);
    };
    let w = named::complex_plane(m, n).expect("m, n >= 2");
    let pair = MatrixSubspace::new(n, m, &[a.clone(), b.clone()]);
    let conj = w.conjugate(&p, &q);
    res.reconstruction_angle = match (pair, conj) {
        (Ok(pair), Ok(conj)) if pair.dim() == 2 && conj.dim() == 2 => {
            pair.max_principal_angle(&conj)
        }
        _ => f64::INFINITY,
    };

    let c = tol.certificate;
    let certified = res.rank_a <= c
        && res.rank_b <= c
        && res.colspace_gap <= c
        && res.rowspace_gap <= c
        && res.j_residual <= c
        && res.distance_a <= tol.membership
        && res.distance_b <= tol.membership
        && res.reconstruction_angle <= c;
    ComplexPairCheck {
        certified,
        residuals: res,
        p: certified.then_some(p),
        q: certified.then_some(q),
    }
}

/// What one detector did during classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSummary {
    /// `certified`, `inconclusive`, `not_applicable` or `skipped`.
    pub status: String,
    pub best_objective: Option<f64>,
}

impl DetectorSummary {
    fn from_outcome<W>(o: &SearchOutcome<W>) -> Self {
        Self {
            status: if o.witness.is_some() {
                "certified"
            } else {
                "inconclusive"
            }
            .into(),
            best_objective: Some(o.best_objective),
        }
    }

    fn status(s: &str) -> Self {
        Self {
            status: s.into(),
            best_objective: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub k_max: usize,
    pub search: SearchOptions,
    /// Also run the detectors when the chain terminates, to catch tolerance
    /// misconfiguration.
    pub cross_check: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            k_max: crate::config::DEFAULT_K_MAX,
            search: SearchOptions::default(),
            cross_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyReport {
    pub chain: ChainReport,
    pub delta: DeltaStatus,
    pub rank_one: DetectorSummary,
    pub complex_pair: DetectorSummary,
    /// Every certified witness found, rank-one first.
    pub witnesses: Vec<ObstructionWitness>,
}

/// Decide `delta(V)` as far as the chain and the detectors allow.
///
/// A terminating chain is reported as `Finite`; otherwise a certified witness
/// upgrades the cap to `InfiniteCertified`. A certified witness next to a
/// terminating chain is a contradiction and returned as an error.
pub fn classify_delta(
    v: &MatrixSubspace,
    opts: &ClassifyOptions,
    tol: &Tolerances,
) -> Result<ClassifyReport> {
    let chain = prolong::chain(v, opts.k_max, tol)?;
    let finite = chain.delta.is_finite();
    let run = !finite || opts.cross_check;

    let mut witnesses = Vec::new();
    let rank_one = if !run {
        DetectorSummary::status("skipped")
    } else if v.dim() == 0 {
        DetectorSummary::status("not_applicable")
    } else {
        let o = find_rank_one(v, &opts.search, tol)?;
        let s = DetectorSummary::from_outcome(&o);
        if let Some(w) = o.witness {
            witnesses.push(ObstructionWitness::RankOne(w));
        }
        s
    };
    let complex_pair = if !run {
        DetectorSummary::status("skipped")
    } else if v.dim() < 2 || v.n() < 2 || v.m() < 2 {
        DetectorSummary::status("not_applicable")
    } else {
        let o = find_complex_pair(v, &opts.search, tol)?;
        let s = DetectorSummary::from_outcome(&o);
        if let Some(w) = o.witness {
            witnesses.push(ObstructionWitness::ComplexPair(w));
        }
        s
    };

    let delta = match (&chain.delta, witnesses.first()) {
        (DeltaStatus::Finite(d), Some(w)) => {
            let kind = match w {
                ObstructionWitness::RankOne(_) => "rank-one",
                ObstructionWitness::ComplexPair(_) => "complex-pair",
            };
            return Err(Error::Inconsistent(format!(
                "chain terminates at degree {d} but a {kind} witness was certified"
            )));
        }
        (DeltaStatus::Finite(d), None) => DeltaStatus::Finite(*d),
        (_, Some(w)) => DeltaStatus::InfiniteCertified(Box::new(w.clone())),
        (other, None) => other.clone(),
    };
    Ok(ClassifyReport {
        chain,
        delta,
        rank_one,
        complex_pair,
        witnesses,
    })
}
