use kyfan_tilt::linalg::rel_err;
use kyfan_tilt::phik::phi_dir_deriv;
use kyfan_tilt::spectral::bmap;
use kyfan_tilt::secder::{
    critical_cone_membership, d2_nuclear, d2_psi_explicit, d2_psi_general, d2_spectral, d2_zero_set_membership,
    ConeCase,
};
use kyfan_tilt::subgrad::subdiff_membership;
use kyfan_tilt::testgen::{self, SpectrumOptions};
use kyfan_tilt::Tolerances;

const CASES: [ConeCase; 3] = [ConeCase::InteriorGroup, ConeCase::ZeroGroupStrict, ConeCase::ZeroGroupTight];

#[test]
fn general_and_explicit_agree_on_every_case() {
    let tol = Tolerances::default();
    let opts = SpectrumOptions::default();
    let mut r = testgen::rng(11, 0);
    let mut seen = [0usize; 3];
    for _ in 0..150 {
        let inst = testgen::random_instance(&mut r, 5, 7, &opts);
        let cert = subdiff_membership(&inst.x, &inst.gamma, inst.kappa, &tol).unwrap().expect("member");
        assert_eq!(ConeCase::of(&cert), inst.case);
        seen[CASES.iter().position(|c| *c == inst.case).unwrap()] += 1;
        let g = testgen::cone_direction(&mut r, &inst);
        let e = d2_psi_explicit(&cert, &g, &tol).finite().expect("in cone");
        let q = d2_psi_general(&inst.x, &inst.gamma, &g, inst.kappa, &tol).unwrap().finite().expect("in cone");
        assert!(rel_err(e, q) <= 1e-9, "explicit {e} general {q} case {:?}", inst.case);
        assert!(e >= -1e-9);
    }
    assert!(seen.iter().all(|&k| k > 10));
}

#[test]
fn specializations_match() {
    let tol = Tolerances::default();
    let opts = SpectrumOptions::default();
    let mut r = testgen::rng(12, 0);
    for i in 0..80 {
        let n = 1 + i % 5;
        let m = n + i % 3;
        for kappa in [1, n] {
            let case = CASES[i % 3];
            let Some(inst) = testgen::subgrad_instance(&mut r, n, m, kappa, case, &opts) else { continue };
            let cert = subdiff_membership(&inst.x, &inst.gamma, kappa, &tol).unwrap().unwrap();
            let g = testgen::cone_direction(&mut r, &inst);
            let e = d2_psi_explicit(&cert, &g, &tol).finite().unwrap();
            let s = if kappa == 1 {
                d2_spectral(&inst.x, &inst.gamma, &g, &tol).unwrap()
            } else {
                d2_nuclear(&inst.x, &inst.gamma, &g, &tol).unwrap()
            };
            assert!(rel_err(e, s.finite().unwrap()) <= 1e-9);
        }
    }
}

#[test]
fn finite_iff_in_cone_under_perturbation() {
    let tol = Tolerances::default();
    let opts = SpectrumOptions::default();
    let mut r = testgen::rng(13, 0);
    for _ in 0..200 {
        let inst = testgen::random_instance(&mut r, 5, 7, &opts);
        let cert = subdiff_membership(&inst.x, &inst.gamma, inst.kappa, &tol).unwrap().unwrap();
        let mut g = testgen::cone_direction(&mut r, &inst);
        g += testgen::gaussian(&mut r, inst.n(), inst.m()) * 1e-3;
        let cone = critical_cone_membership(&cert, &g, &tol).member;
        let v = d2_psi_explicit(&cert, &g, &tol);
        let q = d2_psi_general(&inst.x, &inst.gamma, &g, inst.kappa, &tol).unwrap();
        assert_eq!(cone, v.value.is_finite());
        assert_eq!(cone, q.value.is_finite());
        let gap = phi_dir_deriv(&bmap(inst.x.as_mat()), &bmap(&g), inst.kappa).unwrap() - inst.gamma.dot(&g);
        assert!(gap >= -1e-9);
        assert_eq!(cone, gap <= 1e-10 * (1.0 + g.norm()), "gap {gap:.3e} case {:?}", inst.case);
    }
}

#[test]
fn zero_set_matches_value() {
    let tol = Tolerances::default();
    let opts = SpectrumOptions::default();
    let mut r = testgen::rng(14, 0);
    for i in 0..200 {
        let inst = testgen::random_instance(&mut r, 5, 7, &opts);
        let cert = subdiff_membership(&inst.x, &inst.gamma, inst.kappa, &tol).unwrap().unwrap();
        let mut g = testgen::zero_set_direction(&mut r, &inst);
        if i % 2 == 1 {
            g += testgen::cone_preserving_perturbation(&mut r, &inst);
        }
        let v = d2_psi_explicit(&cert, &g, &tol).finite().expect("in cone");
        let zero = d2_zero_set_membership(&cert, &g, &tol);
        assert_eq!(zero, v <= 1e-9, "value {v} zero-set {zero} case {:?} even {}", inst.case, i % 2 == 0);
        if i % 2 == 0 {
            assert!(zero);
        }
    }
}
