//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use prolong_core::linalg;
use prolong_core::manifolds::{
    augmented_jet_space, builtin_family, sample_analysis, AugmentedSubspace,
};
use prolong_core::matspace::named;
use prolong_core::obstruct::{
    classify_delta, find_rank_one, verify_complex_pair, ClassifyOptions, ObstructionWitness,
    SearchOptions,
};
use prolong_core::polyspace::{solution_basis, verify_membership};
use prolong_core::prolong::{chain, mk_direct, mk_step, DeltaStatus, HomSolutionSpace};
use prolong_core::symtensor::{hom_dim, HomPoly, PolyMap};
use prolong_core::{MatrixSubspace, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn conformal_chain() -> Check {
    let mut worst = Duration::ZERO;
    for n in 3..=5 {
        let v = named::conformal(n).map_err(err)?;
        let (report, dt) = timed(|| chain(&v, 8, &tol()));
        let report = report.map_err(err)?;
        let expected = vec![n, 1 + n * (n - 1) / 2, n, 0];
        ensure(report.alpha == expected, || {
            format!("n={n}: alpha {:?}", report.alpha)
        })?;
        ensure(report.alpha_total == (n + 1) * (n + 2) / 2, || {
            format!("n={n}: total {}", report.alpha_total)
        })?;
        ensure(report.delta == DeltaStatus::Finite(2), || {
            format!("n={n}: delta {}", report.delta.label())
        })?;
        ensure(dt < Duration::from_secs(2), || format!("n={n}: {dt:?}"))?;
        worst = worst.max(dt);
    }
    Ok(format!("alpha_total 10/15/21, delta 2, slowest {worst:?}"))
}

fn isometry_chain() -> Check {
    let mut worst = Duration::ZERO;
    for n in 2..=5 {
        let v = named::skew(n).map_err(err)?;
        let (report, dt) = timed(|| chain(&v, 8, &tol()));
        let report = report.map_err(err)?;
        ensure(report.alpha_total == n * (n + 1) / 2, || {
            format!("n={n}: total {}", report.alpha_total)
        })?;
        ensure(report.delta == DeltaStatus::Finite(1), || {
            format!("n={n}: delta {}", report.delta.label())
        })?;
        ensure(dt < Duration::from_secs(1), || format!("n={n}: {dt:?}"))?;
        worst = worst.max(dt);
    }
    Ok(format!("alpha_total 3/6/10/15, delta 1, slowest {worst:?}"))
}

fn quaternion_rigidity() -> Check {
    let v = named::quaternion_right().map_err(err)?;
    let report = chain(&v, 8, &tol()).map_err(err)?;
    ensure(report.alpha == vec![4, 4, 0], || {
        format!("alpha {:?}", report.alpha)
    })?;
    ensure(report.delta == DeltaStatus::Finite(1), || "delta".into())?;
    let basis = solution_basis(&report).map_err(err)?;
    ensure(basis.max_degree() <= 1, || {
        format!("degree {}", basis.max_degree())
    })?;
    let linear: Vec<DMatrix<f64>> = basis
        .elements()
        .iter()
        .filter_map(|e| e.component(1))
        .map(|c| c.jacobian(&[0.0; 4]))
        .collect();
    let span = MatrixSubspace::new(4, 4, &linear).map_err(err)?;
    ensure(span.dim() == 4 && span.approx_eq(&v, 1e-10), || {
        "linear parts".into()
    })?;
    Ok("alpha (4,4,0), delta 1, affine solutions spanning right multiplications".into())
}

/// Random matrix with condition number at most `cap`.
fn conditioned(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> DMatrix<f64> {
    loop {
        let g = DMatrix::identity(n, n) + gaussian(rng, n, n) * 0.4;
        let s = linalg::singular_values(&g);
        if s[0] / s[n - 1] <= cap {
            return g;
        }
    }
}

fn holomorphic_obstruction() -> Check {
    let mut cases = vec![("W".to_string(), named::complex_plane(2, 2).map_err(err)?)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [3usize, 4] {
        let base = named::complex_plane(3, n).map_err(err)?;
        for i in 0..10 {
            let p = conditioned(&mut rng, 3, 10.0);
            let q = conditioned(&mut rng, n, 10.0);
            let v = base.conjugate(&p, &q).map_err(err)?;
            cases.push((format!("L(R^{n},R^3)#{i}"), v));
        }
    }
    let mut worst = Duration::ZERO;
    let mut worst_res: f64 = 0.0;
    for (i, (label, v)) in cases.iter().enumerate() {
        let opts = ClassifyOptions {
            k_max: 4,
            search: SearchOptions::with_seed(i as u64, 64),
            cross_check: true,
        };
        let (report, dt) = timed(|| classify_delta(v, &opts, &tol()));
        let report = report.map_err(|e| format!("{label}: {e}"))?;
        ensure(dt <= Duration::from_secs(60), || format!("{label}: {dt:?}"))?;
        worst = worst.max(dt);
        let DeltaStatus::InfiniteCertified(w) = &report.delta else {
            return Err(format!("{label}: delta {}", report.delta.label()));
        };
        // these planes contain no rank-one element, so the certificate must
        // be the complex pair
        let ObstructionWitness::ComplexPair(c) = w.as_ref() else {
            return Err(format!("{label}: unexpected rank-one witness"));
        };
        let check = verify_complex_pair(v, &c.a, &c.b, &tol());
        let r = check.residuals;
        let largest = [
            r.rank_a,
            r.rank_b,
            r.colspace_gap,
            r.rowspace_gap,
            r.j_residual,
            r.reconstruction_angle,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        ensure(check.certified && largest <= 1e-7, || {
            format!("{label}: residual {largest:e}")
        })?;
        worst_res = worst_res.max(largest);
    }
    Ok(format!(
        "{} instances certified, max residual {worst_res:.1e}, slowest {worst:?}",
        cases.len()
    ))
}

fn rank_one_obstruction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let w = gaussian(&mut rng, 3, 1);
        let psi = gaussian(&mut rng, 1, 3);
        let gens = vec![
            &w * &psi,
            gaussian(&mut rng, 3, 3),
            gaussian(&mut rng, 3, 3),
        ];
        let v = MatrixSubspace::new(3, 3, &gens).map_err(err)?;
        let out = find_rank_one(&v, &SearchOptions::with_seed(i, 64), &tol()).map_err(err)?;
        let wit = out
            .witness
            .ok_or_else(|| format!("instance {i}: no witness"))?;
        let d = v.distance(&wit.matrix()).map_err(err)?;
        ensure(d <= 1e-8, || format!("instance {i}: distance {d:e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("10/10 certified, max distance {worst:.1e}"))
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = [2, 3][rng.random_range(0..2)];
        let m = [2, 3][rng.random_range(0..2)];
        let d = rng.random_range(1..=3);
        let gens: Vec<_> = (0..d).map(|_| gaussian(&mut rng, m, n)).collect();
        let v = MatrixSubspace::new(n, m, &gens).map_err(err)?;
        let mut prev = HomSolutionSpace::constants(n, m);
        for k in 1..=4 {
            let step = mk_step(&v, &prev, &tol()).map_err(err)?;
            let direct = mk_direct(&v, k, &tol()).map_err(err)?;
            ensure(step.dim() == direct.dim(), || {
                format!("case {i}, k={k}: dims {} vs {}", step.dim(), direct.dim())
            })?;
            if step.dim() > 0 {
                let angle = step.max_principal_angle(&direct);
                ensure(angle <= 1e-8, || {
                    format!("case {i}, k={k}: angle {angle:e}")
                })?;
                worst = worst.max(angle);
            }
            prev = step;
        }
    }
    Ok(format!("20 subspaces, degrees 1..4, max angle {worst:.1e}"))
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let parts = (0..=3)
            .map(|k| {
                let c = (0..hom_dim(n, m, k))
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                HomPoly::from_coeffs(n, m, k, c)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let f = PolyMap::from_components(n, m, parts).map_err(err)?;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = f.jacobian(&x).map_err(err)?;
        let mut approx = DMatrix::zeros(m, n);
        for j in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            approx.set_column(j, &((f.evaluate(&xp) - f.evaluate(&xm)) / (2.0 * h)));
        }
        let rel = (&exact - &approx).norm() / exact.norm().max(f64::MIN_POSITIVE);
        ensure(rel <= 1e-6, || format!("map {i}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("50 cubic maps, max relative error {worst:.1e}"))
}

fn solution_verification() -> Check {
    let v = named::conformal(3).map_err(err)?;
    let basis = solution_basis(&chain(&v, 8, &tol()).map_err(err)?).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (i, f) in basis.elements().iter().enumerate() {
        let r = verify_membership(f, &v, 100, 1.0, 1e-9, i as u64).map_err(err)?;
        ensure(r.pass, || {
            format!("element {i}: residual {:e}", r.max_residual)
        })?;
        worst = worst.max(r.max_residual);
    }
    Ok(format!(
        "{} basis maps pass, max residual {worst:.1e}",
        basis.len()
    ))
}

fn hypothesis_check() -> Check {
    let search = SearchOptions::with_seed(0, 16);
    let conf = builtin_family("conformal", 3).map_err(err)?;
    let r = sample_analysis(&conf, 20, 8, 3, &search, &tol()).map_err(err)?;
    let total: usize = r.alpha_per_sample[0].iter().sum();
    ensure(r.constant && total == 10 && r.k == Some(10), || {
        format!("conformal: constant {} k {:?}", r.constant, r.k)
    })?;
    let iso = builtin_family("isometry", 3).map_err(err)?;
    let r = sample_analysis(&iso, 20, 8, 3, &search, &tol()).map_err(err)?;
    ensure(r.k == Some(6), || format!("isometry: k {:?}", r.k))?;
    Ok("conformal constant alpha 10, k = 10; isometry k = 6".into())
}

fn jet_dimension() -> Check {
    let v = named::conformal(3).map_err(err)?;
    let alpha = chain(&v, 8, &tol()).map_err(err)?.alpha_total;
    let aug = AugmentedSubspace::from_linear(&v).map_err(err)?;
    let a = v.combine(&[1.0, 0.3, -0.7, 0.2]);
    let jet = augmented_jet_space(&aug, &a, 3, &tol()).map_err(err)?;
    let expected = alpha - 3 - v.dim();
    ensure(jet.dimension == Some(expected) && expected == 3, || {
        format!("dimension {:?}", jet.dimension)
    })?;
    Ok(format!("dimension {expected} = {alpha} - 3 - {}", v.dim()))
}

fn semicontinuity() -> Check {
    let v = named::conformal(3).map_err(err)?;
    let base = chain(&v, 6, &tol()).map_err(err)?.alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..20 {
        let gens: Vec<_> = v
            .basis()
            .iter()
            .map(|b| b + gaussian(&mut rng, 3, 3) * 1e-3)
            .collect();
        let w = MatrixSubspace::new(3, 3, &gens).map_err(err)?;
        let alpha = chain(&w, 6, &tol()).map_err(err)?.alpha;
        for (l, &cap) in base.iter().enumerate().take(4) {
            let got = alpha.get(l).copied().unwrap_or(0);
            ensure(got <= cap, || {
                format!("perturbation {i}: alpha_{l} {got} > {cap}")
            })?;
        }
    }
    Ok("20 perturbations, alpha_l never increases for l <= 3".into())
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_prolong"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let d = dir.path();
    let conf = run_cli(
        d,
        &[
            "manifold",
            "--family",
            "conformal",
            "--dim",
            "3",
            "--emit-tangent",
        ],
    )?;
    std::fs::write(d.join("conformal3.json"), &conf).map_err(err)?;
    let files = [
        (
            "w_pad.json",
            r#"{"n":3,"m":3,"generators":[[[1,0,0],[0,1,0],[0,0,0]],[[0,-1,0],[1,0,0],[0,0,0]]]}"#,
        ),
        (
            "poly.json",
            r#"{"n":3,"m":3,"terms":[{"degree":2,"output":0,"exponents":[2,0,0],"value":1.0}]}"#,
        ),
        (
            "aug.json",
            r#"{"n":1,"m":1,"generators":[{"matrix":[[1.0]],"vector":[2.0]}]}"#,
        ),
        ("a.json", "[[0.0]]"),
    ];
    for (name, text) in files {
        std::fs::write(d.join(name), text).map_err(err)?;
    }
    let runs: [&[&str]; 8] = [
        &["chain", "--input", "conformal3.json", "--kmax", "8"],
        &[
            "detect",
            "--input",
            "w_pad.json",
            "--seed",
            "42",
            "--restarts",
            "64",
        ],
        &[
            "classify",
            "--input",
            "w_pad.json",
            "--kmax",
            "4",
            "--seed",
            "42",
        ],
        &["polysolve", "--input", "conformal3.json", "--kmax", "8"],
        &[
            "manifold",
            "--family",
            "conformal",
            "--dim",
            "3",
            "--samples",
            "4",
            "--kmax",
            "8",
            "--seed",
            "5",
        ],
        &[
            "verify",
            "--input",
            "conformal3.json",
            "--poly",
            "poly.json",
            "--samples",
            "50",
            "--radius",
            "1",
            "--tol",
            "1e-9",
            "--seed",
            "3",
        ],
        &[
            "jet",
            "--input-augmented",
            "aug.json",
            "--matrix",
            "a.json",
            "--degree",
            "6",
        ],
        &["chain", "--input", "conformal3.json", "--format", "table"],
    ];
    for args in runs {
        let first = run_cli(d, args)?;
        let second = run_cli(d, args)?;
        ensure(first == second && !first.is_empty(), || {
            format!("{args:?} differs between runs")
        })?;
    }
    Ok(format!(
        "{} invocations byte-identical across repeated runs",
        runs.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 12] = [
        ("conformal chain", conformal_chain),
        ("isometry chain", isometry_chain),
        ("quaternion rigidity", quaternion_rigidity),
        ("holomorphic obstruction", holomorphic_obstruction),
        ("rank-one obstruction", rank_one_obstruction),
        ("oracle equivalence", oracle_equivalence),
        ("gradient check", gradient_check),
        ("solution verification", solution_verification),
        ("constant-alpha hypothesis", hypothesis_check),
        ("jet dimension formula", jet_dimension),
        ("semicontinuity probe", semicontinuity),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
