//! Second subderivative of Ψκ: critical cone tests, the frame-based general formula,
//! the explicit block formula, its nuclear/spectral specializations and the zero set.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inner, lambda_max, lambda_min, skew, spectral_norm, sym, Mat};
use crate::spectral::{bmap, build_frame, group_singular, svd_ordered, RectMatrix};
use crate::subgrad::{subdiff_check, SubgradCase, SubgradCertificate, SubgradCheck};
use crate::tol::Tolerances;
use crate::value::SecondSubderivValue;

/// The three critical-cone regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeCase {
    InteriorGroup,
    ZeroGroupStrict,
    ZeroGroupTight,
}

impl ConeCase {
    pub fn of(cert: &SubgradCertificate) -> Self {
        match (cert.case, cert.tight) {
            (SubgradCase::InteriorGroup, _) => ConeCase::InteriorGroup,
            (SubgradCase::ZeroGroup, true) => ConeCase::ZeroGroupTight,
            (SubgradCase::ZeroGroup, false) => ConeCase::ZeroGroupStrict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalConeCert {
    pub member: bool,
    pub varpi: Option<f64>,
    /// Feasible interval for ϖ from the sandwich bounds (infinite ends are vacuous).
    pub varpi_interval: Option<(f64, f64)>,
    pub case: ConeCase,
    pub residuals: Vec<(String, f64)>,
}

fn sub(a: &Mat, rows: Range<usize>, cols: Range<usize>) -> Mat {
    a.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
}

fn nsq(a: &Mat, rows: Range<usize>, cols: Range<usize>) -> f64 {
    let mut acc = 0.0;
    for i in rows {
        for j in cols.clone() {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc
}

/// ϖ and its residual for the sandwich `lo ≤ ϖ ≤ hi`, with ϖ pinned when `pinned` is given.
fn sandwich(lo: f64, hi: f64, pinned: Option<f64>) -> (f64, f64) {
    match pinned {
        Some(w) => (w, (lo - w).max(w - hi).max(0.0)),
        None => {
            let w = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => 0.0,
            };
            (w, (lo - hi).max(0.0))
        }
    }
}

/// Mean of the diagonal and the distance to a scalar multiple of the identity.
fn scalar_part(a: &Mat) -> Option<(f64, f64)> {
    let k = a.nrows();
    if k == 0 {
        return None;
    }
    let w = a.trace() / k as f64;
    Some((w, (a - Mat::identity(k, k) * w).norm()))
}

/// Critical cone membership `dΨκ(X)(G) = ⟨Γ, G⟩`, decided from the block structure of `UᵀGV`.
pub fn critical_cone_membership(cert: &SubgradCertificate, g: &Mat, tol: &Tolerances) -> CriticalConeCert {
    let case = ConeCase::of(cert);
    let k = cert.pair.rotate_in(g);
    let m = cert.m();
    let (b1, bp, b0) = (cert.beta1.clone(), cert.beta_plus.clone(), cert.beta0.clone());
    let ctol = tol.cone * (1.0 + g.norm());
    let mut residuals = Vec::new();
    let (varpi, interval) = match case {
        ConeCase::InteriorGroup => {
            let beta = cert.beta.clone();
            let a = sym(&sub(&k, beta.clone(), beta.clone()));
            let shift = |r: &Range<usize>| r.start - beta.start..r.end - beta.start;
            let (r1, rp, r0) = (shift(&b1), shift(&bp), shift(&b0));
            let off = nsq(&a, r1.clone(), rp.clone()) + nsq(&a, r1.clone(), r0.clone()) + nsq(&a, rp.clone(), r0.clone());
            residuals.push(("off_class_blocks".into(), off.sqrt()));
            let plus = scalar_part(&sub(&a, rp.clone(), rp.clone()));
            if let Some((_, dev)) = plus {
                residuals.push(("beta_plus_scalar".into(), dev));
            }
            let lo = lambda_max(&sub(&a, r0.clone(), r0.clone()));
            let hi = lambda_min(&sub(&a, r1.clone(), r1.clone()));
            let (w, viol) = sandwich(lo, hi, plus.map(|p| p.0));
            residuals.push(("varpi_sandwich".into(), viol));
            (Some(w), Some((lo, hi)))
        }
        ConeCase::ZeroGroupStrict => {
            let beta = cert.beta.clone();
            let c11 = sub(&k, b1.clone(), b1.clone());
            residuals.push(("beta1_symmetry".into(), skew(&c11).norm()));
            residuals.push(("beta1_psd".into(), (-lambda_min(&sym(&c11))).max(0.0)));
            let total = nsq(&k, beta.clone(), beta.start..m) - nsq(&k, b1.clone(), b1.clone());
            residuals.push(("zero_pattern".into(), total.max(0.0).sqrt()));
            (None, None)
        }
        ConeCase::ZeroGroupTight => {
            let beta = cert.beta.clone();
            let c11 = sub(&k, b1.clone(), b1.clone());
            residuals.push(("beta1_symmetry".into(), skew(&c11).norm()));
            let mut zero = nsq(&k, b1.clone(), b1.end..m);
            zero += nsq(&k, bp.clone(), beta.start..bp.start) + nsq(&k, bp.clone(), bp.end..m);
            zero += nsq(&k, b0.clone(), beta.start..b0.start);
            residuals.push(("zero_pattern".into(), zero.sqrt()));
            let plus = scalar_part(&sub(&k, bp.clone(), bp.clone()));
            if let Some((_, dev)) = plus {
                residuals.push(("beta_plus_scalar".into(), dev));
            }
            let de = sub(&k, b0.clone(), b0.start..m);
            let lo = if b0.is_empty() { 0.0 } else { spectral_norm(&de) };
            let hi = lambda_min(&sym(&c11));
            let (w, viol) = sandwich(lo, hi, plus.map(|p| p.0));
            residuals.push(("varpi_sandwich".into(), viol));
            (Some(w), Some((lo, hi)))
        }
    };
    let member = residuals.iter().all(|(_, r)| *r <= ctol);
    CriticalConeCert { member, varpi, varpi_interval: interval, case, residuals }
}

/// Closed-form second subderivative using the certificate's simultaneous pair.
pub fn d2_psi_explicit(cert: &SubgradCertificate, g: &Mat, tol: &Tolerances) -> SecondSubderivValue {
    if !critical_cone_membership(cert, g, tol).member {
        return SecondSubderivValue::infinite();
    }
    let n = cert.n();
    let k1 = cert.pair.u.transpose() * g * cert.pair.v1();
    let kc = cert.pair.u.transpose() * g * cert.pair.vc();
    let s = sym(&k1);
    let t = skew(&k1);
    let c = 0..kc.ncols();
    let gr = &cert.grouping;
    let r = gr.r;
    let nu = |l: usize| gr.nu_of(l);
    let grp = |l: usize| gr.group(l);
    let zetas: Vec<(f64, Range<usize>)> = cert.zeta.iter().copied().zip(cert.beta_j.iter().cloned()).collect();
    let beta0 = cert.beta0.clone();
    let mut terms: Vec<(String, f64)> = Vec::new();

    if cert.case == SubgradCase::InteriorGroup {
        let top = gr.s;
        let (mut s_upper_lower, mut s_upper_beta, mut s_beta_lower) = (0.0, 0.0, 0.0);
        let (mut t_upper, mut t_beta, mut c_beta, mut c_upper, mut s_upper_beta0) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for l in 0..r {
            for lp in r + 1..=top {
                s_upper_lower += 2.0 * nsq(&s, grp(l), grp(lp)) / (nu(l) - nu(lp));
            }
            for (z, bj) in &zetas {
                s_upper_beta += 2.0 * (1.0 - z) * nsq(&s, grp(l), bj.clone()) / (nu(l) - nu(r));
            }
            for lp in 0..=top {
                t_upper += 2.0 * nsq(&t, grp(l), grp(lp)) / (nu(l) + nu(lp));
            }
            c_upper += nsq(&kc, grp(l), c.clone()) / nu(l);
            s_upper_beta0 += 2.0 * nsq(&s, grp(l), beta0.clone()) / (nu(l) - nu(r));
        }
        for (z, bj) in &zetas {
            for lp in r + 1..=top {
                s_beta_lower += 2.0 * z * nsq(&s, bj.clone(), grp(lp)) / (nu(r) - nu(lp));
            }
            for lp in 0..=top {
                t_beta += 2.0 * z * nsq(&t, bj.clone(), grp(lp)) / (nu(r) + nu(lp));
            }
            c_beta += z * nsq(&kc, bj.clone(), c.clone()) / nu(r);
        }
        terms.push(("S[a_l,a_l'] l<r<l'".into(), s_upper_lower));
        terms.push(("S[a_l,beta_j] (1-zeta)".into(), s_upper_beta));
        terms.push(("S[beta_j,a_l'] zeta".into(), s_beta_lower));
        terms.push(("T[a_l,a_l']".into(), t_upper));
        terms.push(("T[beta_j,a_l'] zeta".into(), t_beta));
        terms.push(("U_beta G V_c zeta".into(), c_beta));
        terms.push(("U_a G V_c".into(), c_upper));
        terms.push(("S[a_l,beta_0]".into(), s_upper_beta0));
    } else {
        let (mut s_beta, mut t_aa, mut s_beta0, mut c_upper, mut t_beta) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for l in 0..r {
            for (z, bj) in &zetas {
                s_beta += 2.0 * (1.0 - z) / nu(l) * nsq(&s, grp(l), bj.clone());
                t_beta += 2.0 * (1.0 + z) / nu(l) * nsq(&t, grp(l), bj.clone());
            }
            t_beta += 2.0 / nu(l) * nsq(&t, grp(l), beta0.clone());
            for lp in 0..r {
                t_aa += 2.0 * nsq(&t, grp(l), grp(lp)) / (nu(l) + nu(lp));
            }
            s_beta0 += 2.0 * nsq(&s, grp(l), beta0.clone()) / nu(l);
            c_upper += nsq(&kc, grp(l), c.clone()) / nu(l);
        }
        terms.push(("S[a_l,beta_j] (1-zeta)".into(), s_beta));
        terms.push(("T[a_l,a_l']".into(), t_aa));
        terms.push(("S[a_l,beta_0]".into(), s_beta0));
        terms.push(("U_a G V_c".into(), c_upper));
        terms.push(("T[a_l,beta_j] (1+zeta)".into(), t_beta));
    }
    debug_assert_eq!(s.nrows(), n);
    SecondSubderivValue::from_terms(terms)
}

fn certificate_for(x: &RectMatrix, gamma: &Mat, kappa: usize, tol: &Tolerances) -> Result<SubgradCertificate> {
    match subdiff_check(x, gamma, kappa, tol)? {
        SubgradCheck::Member(c) => Ok(*c),
        SubgradCheck::NotMember(why) => Err(Error::Precondition(format!("Gamma is not a subgradient: {why}"))),
    }
}

/// Frame-based formula: traces of `Ξ_{a_l}(X,G) = 2 P_lᵀ B(G)(ν_l I − B(X))† B(G) P_l`.
///
/// Uses the ordered SVD of `X` alone; the simultaneous pair is only used to decide the cone.
pub fn d2_psi_general(
    x: &RectMatrix,
    gamma: &Mat,
    g: &Mat,
    kappa: usize,
    tol: &Tolerances,
) -> Result<SecondSubderivValue> {
    let cert = certificate_for(x, gamma, kappa, tol)?;
    if !critical_cone_membership(&cert, g, tol).member {
        return Ok(SecondSubderivValue::infinite());
    }
    let pair = svd_ordered(x)?;
    let gr = group_singular(&pair, kappa, tol.group_tol(pair.sigma[0]))?;
    let frame = build_frame(&pair, &gr)?;
    let bg = bmap(g);
    let pt_bg = frame.p.transpose() * &bg * &frame.p;
    let eig = &frame.eigenvalues;
    let xnorm = pair.sigma[0];

    let xi = |l: usize| -> Mat {
        let nu = gr.nu[l];
        let cols = frame.group_cols(l);
        let cut = tol.pinv_rel * (nu.abs() + xnorm).max(1.0);
        let mut w = pt_bg.columns(cols.start, cols.len()).into_owned();
        for i in 0..w.nrows() {
            let d = nu - eig[i];
            let f = if cols.contains(&i) || d.abs() <= cut { 0.0 } else { 1.0 / d };
            w.row_mut(i).scale_mut(f);
        }
        let left = pt_bg.columns(cols.start, cols.len()).transpose();
        left * w * 2.0
    };

    let r = gr.r;
    let mut upper_uv = Mat::zeros(pair.n(), pair.m());
    let mut trace_sum = 0.0;
    for l in 0..r.min(gr.s) {
        trace_sum += xi(l).trace();
        let a = gr.groups[l].clone();
        upper_uv += pair.u.columns(a.start, a.len()) * pair.v.columns(a.start, a.len()).transpose();
    }
    let rest = gamma - upper_uv;
    let last = if r < gr.s {
        let a = gr.groups[r].clone();
        let proj = pair.u.columns(a.start, a.len()).transpose() * &rest * pair.v.columns(a.start, a.len());
        inner(&proj, &xi(r))
    } else {
        let na = gr.b.start;
        let ua = pair.u.columns(0, na);
        let va = pair.v.columns(0, na);
        let inv = Mat::from_diagonal(&pair.sigma.rows(0, na).map(|s| 1.0 / s));
        let curv = g * va * inv * ua.transpose() * g;
        -2.0 * inner(&rest, &curv)
    };
    Ok(SecondSubderivValue::from_terms(vec![
        ("trace Xi (l < r)".into(), trace_sum),
        ("active group".into(), last),
    ]))
}

/// Nuclear norm (κ = n) second subderivative.
pub fn d2_nuclear(x: &RectMatrix, gamma: &Mat, g: &Mat, tol: &Tolerances) -> Result<SecondSubderivValue> {
    let cert = certificate_for(x, gamma, x.rows(), tol)?;
    if !critical_cone_membership(&cert, g, tol).member {
        return Ok(SecondSubderivValue::infinite());
    }
    let k1 = cert.pair.u.transpose() * g * cert.pair.v1();
    let kc = cert.pair.u.transpose() * g * cert.pair.vc();
    let s = sym(&k1);
    let t = skew(&k1);
    let gr = &cert.grouping;
    let c = 0..kc.ncols();
    let mut t_aa = 0.0;
    let mut c_a = 0.0;
    for l in 0..gr.s {
        for lp in 0..gr.s {
            t_aa += 2.0 * nsq(&t, gr.groups[l].clone(), gr.groups[lp].clone()) / (gr.nu[l] + gr.nu[lp]);
        }
        c_a += nsq(&kc, gr.groups[l].clone(), c.clone()) / gr.nu[l];
    }
    let mut terms = vec![("T[a_l,a_l']".into(), t_aa), ("U_a G V_c".into(), c_a)];
    if !gr.b.is_empty() {
        let mut families: Vec<(f64, Range<usize>)> = cert.zeta.iter().copied().zip(cert.beta_j.iter().cloned()).collect();
        families.push((0.0, cert.beta0.clone()));
        let mut rank_def = 0.0;
        for l in 0..gr.s {
            for (z, bj) in &families {
                rank_def += 2.0 * (1.0 - z) / gr.nu[l] * nsq(&s, gr.groups[l].clone(), bj.clone());
                rank_def += 2.0 * (1.0 + z) / gr.nu[l] * nsq(&t, gr.groups[l].clone(), bj.clone());
            }
        }
        terms.push(("a_l x beta_j".into(), rank_def));
    }
    Ok(SecondSubderivValue::from_terms(terms))
}

/// Spectral norm (κ = 1) second subderivative.
pub fn d2_spectral(x: &RectMatrix, gamma: &Mat, g: &Mat, tol: &Tolerances) -> Result<SecondSubderivValue> {
    let cert = certificate_for(x, gamma, 1, tol)?;
    if !critical_cone_membership(&cert, g, tol).member {
        return Ok(SecondSubderivValue::infinite());
    }
    let gr = &cert.grouping;
    if gr.s == 0 {
        return Ok(SecondSubderivValue::from_terms(vec![("zero matrix".into(), 0.0)]));
    }
    let k1 = cert.pair.u.transpose() * g * cert.pair.v1();
    let kc = cert.pair.u.transpose() * g * cert.pair.vc();
    let s = sym(&k1);
    let t = skew(&k1);
    let nu1 = gr.nu[0];
    let (mut s_term, mut c_term, mut t_term) = (0.0, 0.0, 0.0);
    for (z, bj) in cert.zeta.iter().zip(&cert.beta_j) {
        for lp in 1..=gr.s {
            s_term += 2.0 * z * nsq(&s, bj.clone(), gr.group(lp)) / (nu1 - gr.nu_of(lp));
        }
        c_term += z / nu1 * nsq(&kc, bj.clone(), 0..kc.ncols());
        for lp in 0..=gr.s {
            t_term += 2.0 * z * nsq(&t, bj.clone(), gr.group(lp)) / (nu1 + gr.nu_of(lp));
        }
    }
    Ok(SecondSubderivValue::from_terms(vec![
        ("S[beta_j,a_l']".into(), s_term),
        ("U_beta G V_c".into(), c_term),
        ("T[beta_j,a_l']".into(), t_term),
    ]))
}

/// Block characterization of `d²Ψκ(X|Γ)(G) = 0` for `G` in the critical cone.
pub fn d2_zero_set_membership(cert: &SubgradCertificate, g: &Mat, tol: &Tolerances) -> bool {
    zero_set_residual(cert, g) <= tol.zero_set * (1.0 + g.norm())
}

/// Norm of all block defects in the zero-set conditions.
pub fn zero_set_residual(cert: &SubgradCertificate, g: &Mat) -> f64 {
    let k1 = cert.pair.u.transpose() * g * cert.pair.v1();
    let kc = cert.pair.u.transpose() * g * cert.pair.vc();
    let t = skew(&k1);
    let c = 0..kc.ncols();
    let (al, b1, bp, b0, ga) = (
        cert.alpha.clone(),
        cert.beta1.clone(),
        cert.beta_plus.clone(),
        cert.beta0.clone(),
        cert.gamma.clone(),
    );
    let both = |rows: &Range<usize>, cols: &Range<usize>| nsq(&k1, rows.clone(), cols.clone()) + nsq(&k1, cols.clone(), rows.clone());
    let mut acc = 0.0;
    match cert.case {
        SubgradCase::InteriorGroup => {
            let head = al.start..bp.end;
            acc += nsq(&t, head.clone(), head.clone());
            acc += nsq(&t, b1.clone(), b0.clone()) + nsq(&t, bp.clone(), b0.clone());
            acc += both(&al, &bp) + both(&al, &b0) + both(&al, &ga);
            acc += both(&b1, &ga) + both(&bp, &ga);
            acc += nsq(&kc, head, c);
        }
        SubgradCase::ZeroGroup => {
            acc += nsq(&t, al.clone(), al.clone());
            acc += nsq(&t, al.clone(), b1.clone());
            acc += nsq(&kc, al.clone(), c);
            acc += both(&al, &bp) + both(&al, &b0);
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subgrad::subdiff_membership;

    fn diag(n: usize, m: usize, d: &[f64]) -> RectMatrix {
        let mut x = Mat::zeros(n, m);
        for (i, v) in d.iter().enumerate() {
            x[(i, i)] = *v;
        }
        RectMatrix::new(x).unwrap()
    }

    fn e(n: usize, m: usize, i: usize, j: usize) -> Mat {
        let mut g = Mat::zeros(n, m);
        g[(i, j)] = 1.0;
        g
    }

    #[test]
    fn zero_direction() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let gm = diag(3, 3, &[1.0, 0.0, 0.0]);
        let cert = subdiff_membership(&x, &gm, 1, &tol).unwrap().unwrap();
        let z = Mat::zeros(3, 3);
        let cc = critical_cone_membership(&cert, &z, &tol);
        assert!(cc.member);
        assert_eq!(cc.varpi, Some(0.0));
        assert_eq!(d2_psi_explicit(&cert, &z, &tol).finite(), Some(0.0));
        assert_eq!(d2_psi_general(&x, &gm, &z, 1, &tol).unwrap().finite(), Some(0.0));
        assert!(d2_zero_set_membership(&cert, &z, &tol));
    }

    #[test]
    fn spectral_hand_value() {
        let tol = Tolerances::default();
        let x = diag(2, 2, &[3.0, 2.0]);
        let gm = diag(2, 2, &[1.0, 0.0]);
        let g = e(2, 2, 0, 1) + e(2, 2, 1, 0);
        let v = d2_spectral(&x, &gm, &g, &tol).unwrap().finite().unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let cert = subdiff_membership(&x, &gm, 1, &tol).unwrap().unwrap();
        assert!((d2_psi_explicit(&cert, &g, &tol).finite().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn general_hand_value() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let gm = diag(3, 3, &[1.0, 0.0, 0.0]);
        let g = e(3, 3, 0, 1) + e(3, 3, 1, 0);
        let v = d2_psi_general(&x, &gm, &g, 1, &tol).unwrap().finite().unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_regression_value() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let gm = diag(3, 3, &[1.0, 1.0, 0.0]);
        let g = e(3, 3, 0, 2) + e(3, 3, 2, 0);
        let cert = subdiff_membership(&x, &gm, 2, &tol).unwrap().unwrap();
        let v = d2_psi_explicit(&cert, &g, &tol).finite().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let w = d2_psi_general(&x, &gm, &g, 2, &tol).unwrap().finite().unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(!d2_zero_set_membership(&cert, &g, &tol));
    }

    #[test]
    fn nuclear_symmetric_direction_vanishes() {
        let tol = Tolerances::default();
        let x = diag(2, 3, &[3.0, 1.0]);
        let gm = diag(2, 3, &[1.0, 1.0]);
        let g = Mat::from_row_slice(2, 3, &[0.4, -1.0, 0.0, -1.0, 2.0, 0.0]);
        let v = d2_nuclear(&x, &gm, &g, &tol).unwrap().finite().unwrap();
        assert!(v.abs() < 1e-14);
        let mut gc = g.clone();
        gc[(0, 2)] = 1.5;
        let v = d2_nuclear(&x, &gm, &gc, &tol).unwrap().finite().unwrap();
        assert!((v - 1.5 * 1.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cone_rejects_and_value_is_infinite() {
        let tol = Tolerances::default();
        let x = diag(2, 2, &[1.0, 1.0]);
        let gm = diag(2, 2, &[0.5, 0.5]);
        let cert = subdiff_membership(&x, &gm, 1, &tol).unwrap().unwrap();
        let g = e(2, 2, 0, 0);
        assert!(!critical_cone_membership(&cert, &g, &tol).member);
        assert!(!d2_psi_explicit(&cert, &g, &tol).value.is_finite());
        assert!(critical_cone_membership(&cert, &Mat::identity(2, 2), &tol).member);
    }

    #[test]
    fn general_rejects_non_subgradient() {
        let tol = Tolerances::default();
        let x = diag(2, 2, &[3.0, 1.0]);
        let gm = diag(2, 2, &[0.5, 0.0]);
        assert!(d2_psi_general(&x, &gm, &Mat::zeros(2, 2), 1, &tol).is_err());
    }
}
