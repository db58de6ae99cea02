use nalgebra::DMatrix;
use prolong_core::manifolds::{
    augmented_jet_space, builtin_family, sample_analysis, AugmentedSubspace,
};
use prolong_core::matspace::named;
use prolong_core::obstruct::SearchOptions;
use prolong_core::polyspace::{reduced_basis, solution_basis, verify_membership};
use prolong_core::prolong::{chain, DeltaStatus};
use prolong_core::symtensor::{HomPoly, PolyMap};
use prolong_core::Tolerances;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_cubic(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PolyMap {
    let parts = (0..=3)
        .map(|k| {
            let len = prolong_core::symtensor::hom_dim(n, m, k);
            let c = (0..len)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            HomPoly::from_coeffs(n, m, k, c).unwrap()
        })
        .collect();
    PolyMap::from_components(n, m, parts).unwrap()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let h = 1e-5;
    for i in 0..50 {
        let (n, m) = (1 + i % 4, 1 + (i / 4) % 3);
        let f = random_cubic(&mut rng, n, m);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = f.jacobian(&x).unwrap();
        let mut approx = DMatrix::zeros(m, n);
        for j in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            approx.set_column(j, &((f.evaluate(&xp) - f.evaluate(&xm)) / (2.0 * h)));
        }
        let rel = (&exact - &approx).norm() / exact.norm().max(1.0);
        assert!(rel <= 1e-6, "relative error {rel}");
    }
}

#[test]
fn conformal_solutions_satisfy_the_constraint() {
    let tol = Tolerances::default();
    let v = named::conformal(3).unwrap();
    let basis = solution_basis(&chain(&v, 8, &tol).unwrap()).unwrap();
    assert_eq!(basis.len(), 10);
    for (i, f) in basis.elements().iter().enumerate() {
        let r = verify_membership(f, &v, 100, 1.0, 1e-9, i as u64).unwrap();
        assert!(r.pass, "element {i}: {}", r.max_residual);
    }
    let reduced = reduced_basis(&basis, &tol).unwrap();
    for f in reduced.elements() {
        assert!(verify_membership(f, &v, 50, 1.0, 1e-9, 0).unwrap().pass);
    }
}

#[test]
fn quaternion_solutions_are_affine() {
    let tol = Tolerances::default();
    let v = named::quaternion_right().unwrap();
    let report = chain(&v, 8, &tol).unwrap();
    assert_eq!(report.alpha, vec![4, 4, 0]);
    let basis = solution_basis(&report).unwrap();
    assert!(basis.max_degree() <= 1);
    let linear: Vec<DMatrix<f64>> = basis
        .elements()
        .iter()
        .filter_map(|e| e.component(1))
        .map(|c| c.jacobian(&[0.0; 4]))
        .collect();
    let span = prolong_core::MatrixSubspace::new(4, 4, &linear).unwrap();
    assert!(span.approx_eq(&v, 1e-10));
}

#[test]
fn sampled_families_have_constant_alpha() {
    let tol = Tolerances::default();
    let search = SearchOptions::with_seed(0, 8);
    let conf = builtin_family("conformal", 3).unwrap();
    let r = sample_analysis(&conf, 20, 8, 1, &search, &tol).unwrap();
    assert!(r.constant && r.hypothesis_holds);
    assert_eq!(r.k, Some(10));
    let iso = builtin_family("isometry", 3).unwrap();
    assert_eq!(
        sample_analysis(&iso, 5, 8, 1, &search, &tol).unwrap().k,
        Some(6)
    );
    let quat = builtin_family("quaternion", 4).unwrap();
    assert_eq!(
        sample_analysis(&quat, 3, 8, 1, &search, &tol).unwrap().k,
        Some(8)
    );
}

#[test]
fn holomorphic_family_is_obstructed_everywhere() {
    let tol = Tolerances::default();
    let hol = builtin_family("holomorphic", 2).unwrap();
    let r = sample_analysis(&hol, 3, 4, 2, &SearchOptions::with_seed(0, 32), &tol).unwrap();
    assert!(!r.hypothesis_holds);
    assert_eq!(r.k, None);
    assert!(r
        .delta_statuses
        .iter()
        .all(|d| d.status == "infinite_certified"));
}

#[test]
fn jet_dimension_formula() {
    let tol = Tolerances::default();
    let v = named::conformal(3).unwrap();
    let alpha: usize = chain(&v, 8, &tol).unwrap().alpha_total;
    let aug = AugmentedSubspace::from_linear(&v).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..3 {
        let c: Vec<f64> = (0..4)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let a = v.combine(&c);
        let jet = augmented_jet_space(&aug, &a, 3, &tol).unwrap();
        assert_eq!(jet.dimension, Some(alpha - 3 - v.dim()));
    }
    assert!(matches!(
        chain(&named::complex_plane(2, 2).unwrap(), 3, &tol)
            .unwrap()
            .delta,
        DeltaStatus::LowerBound(3)
    ));
}
