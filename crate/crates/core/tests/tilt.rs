use kyfan_tilt::linalg::Mat;
use kyfan_tilt::oracle::{tilt_probe, ProbeConfig};
use kyfan_tilt::par::Exec;
use kyfan_tilt::spectral::RectMatrix;
use kyfan_tilt::tilt::{analyze_tilt, build_upsilon, ProblemSpec, Theta, TiltOptions, TiltStatus};
use kyfan_tilt::testgen::{self, Engineered};
use kyfan_tilt::subgrad::subdiff_membership;
use kyfan_tilt::Tolerances;

#[test]
fn engineered_verdicts_match_construction_and_probe() {
    let tol = Tolerances::default();
    let mut r = testgen::rng(21, 0);
    let kinds = [
        Engineered::PositiveDefinite,
        Engineered::Transverse,
        Engineered::DiagonalAlpha,
        Engineered::SymmetricAlpha,
        Engineered::GammaC,
    ];
    for kind in kinds {
        for _ in 0..2 {
            let p = testgen::engineered(&mut r, kind, 4, 5);
            let (_, _, v) = analyze_tilt(&p.spec, &tol, &TiltOptions::default()).unwrap();
            assert_eq!(v.status, kind.expected(), "{kind:?}: {v:?}");
            if let Some(w) = &v.witness {
                assert!(w.hessian_residual <= 1e-8 && w.hull_residual <= 1e-8 && w.margin.is_none_or(|m| m >= -1e-8));
            }
            let probe = tilt_probe(&p.spec, &ProbeConfig::default(), Exec::Parallel).unwrap();
            assert_eq!(probe.consistent_with, kind.expected(), "{kind:?} modulus {}", probe.modulus);
        }
    }
}

#[test]
fn identity_hessian_is_stable() {
    let x = RectMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let gamma = Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let q = Mat::identity(6, 6);
    let l = -&gamma - x.as_mat();
    let spec = ProblemSpec::new(x, 1.0, 1, Theta::Quadratic { q, l }).unwrap();
    let (_, _, v) = analyze_tilt(&spec, &Tolerances::default(), &TiltOptions::default()).unwrap();
    assert_eq!(v.status, TiltStatus::Stable);
    assert_eq!(v.kernel_dim, 0);
}

#[test]
fn affine_theta_at_zero_with_small_gamma_is_stable() {
    let x = RectMatrix::zeros(2, 3).unwrap();
    let gamma = Mat::from_row_slice(2, 3, &[0.3, 0.0, 0.0, 0.0, 0.2, 0.0]);
    let spec = ProblemSpec::new(x, 1.0, 1, Theta::Quadratic { q: Mat::zeros(6, 6), l: -gamma }).unwrap();
    let tol = Tolerances::default();
    let cert = spec.certificate(&tol).unwrap();
    let ups = build_upsilon(&cert);
    assert_eq!(ups.hull_dim(), 0);
    let (_, _, v) = analyze_tilt(&spec, &tol, &TiltOptions::default()).unwrap();
    assert_eq!(v.status, TiltStatus::Stable);
    let probe = tilt_probe(&spec, &ProbeConfig::default(), Exec::Parallel).unwrap();
    assert_eq!(probe.consistent_with, TiltStatus::Stable);
}

#[test]
fn full_rank_nuclear_hull_is_symmetric_block() {
    let x = RectMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let gamma = Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let spec = ProblemSpec::new(x, 1.0, 2, Theta::Quadratic { q: Mat::identity(6, 6), l: -&gamma - Mat::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0]) }).unwrap();
    let cert = spec.certificate(&Tolerances::default()).unwrap();
    let ups = build_upsilon(&cert);
    assert!(ups.exact);
    assert_eq!(ups.hull_dim(), 3);
}

#[test]
fn spectral_norm_without_unit_block_has_active_constraint() {
    let x = RectMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let gamma = Mat::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.4]);
    let spec = ProblemSpec::new(x.clone(), 1.0, 1, Theta::Quadratic { q: Mat::identity(4, 4), l: -&gamma - x.as_mat() }).unwrap();
    let cert = spec.certificate(&Tolerances::default()).unwrap();
    assert!(cert.beta1.is_empty());
    let gamma = Mat::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.0]);
    let x = RectMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let _ = (x, gamma);
    let ups = build_upsilon(&cert);
    assert!(ups.exact);
}

#[test]
fn tight_zero_group_gap_is_never_reported_stable() {
    let x = RectMatrix::zeros(2, 2).unwrap();
    let gamma = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let w = kyfan_tilt::linalg::vec_rm(&Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5.0]));
    let w = &w / w.norm();
    let q = Mat::identity(4, 4) - &w * w.transpose();
    let spec = ProblemSpec::new(x, 1.0, 1, Theta::Quadratic { q, l: -&gamma }).unwrap();
    let (_, ups, v) = analyze_tilt(&spec, &Tolerances::default(), &TiltOptions::default()).unwrap();
    assert!(!ups.exact);
    assert_eq!(v.status, TiltStatus::Inconclusive);
    let tol = Tolerances::default();
    for s in [1e-2, 1e-4] {
        let v = spec.gradient(&(Mat::identity(2, 2) * s)) + &gamma;
        for t in [0.0, 0.4 * s] {
            let x = Mat::identity(2, 2) * s + Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5.0]) * t;
            let g = &v - spec.gradient(&x);
            assert!((&g - &gamma).norm() < 1e-12);
            assert!(subdiff_membership(&RectMatrix::new(x).unwrap(), &g, 1, &tol).unwrap().is_some());
        }
    }
}
