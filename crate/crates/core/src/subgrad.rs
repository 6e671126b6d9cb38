//! Ψκ, the Ky-Fan κ-norm: value, subdifferential membership with certificates,
//! simultaneous ordered SVDs and the multiplier set of the bordered embedding.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{block, sym, sym_eigen_desc, Mat, Vector};
use crate::phik::{capped_block_spectrum, OmegaSimplex};
use crate::spectral::{
    bmap_adjoint, build_frame, group_singular, svd_ordered, EmbeddingFrame, RectMatrix,
    SingularGrouping, SvdPair,
};
use crate::tol::Tolerances;

/// Whether κ falls inside a positive singular-value group or inside the zero group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubgradCase {
    InteriorGroup,
    ZeroGroup,
}

/// A pair jointly diagonalizing `X` and `Γ`, with `Γ`'s ordered singular values.
#[derive(Debug, Clone)]
pub struct SimultaneousSvd {
    pub pair: SvdPair,
    pub gamma_sigma: Vector,
}

/// Full certificate of `Γ ∈ ∂Ψκ(X)`. All index sets are 0-based contiguous ranges.
#[derive(Debug, Clone, Serialize)]
pub struct SubgradCertificate {
    pub case: SubgradCase,
    pub kappa: usize,
    pub kappa0: usize,
    pub kappa1: usize,
    pub alpha: Range<usize>,
    pub beta: Range<usize>,
    pub gamma: Range<usize>,
    pub beta1: Range<usize>,
    pub beta_plus: Range<usize>,
    pub beta0: Range<usize>,
    pub zeta: Vec<f64>,
    pub beta_j: Vec<Range<usize>>,
    /// `‖Γ‖_* = κ` within tolerance (only meaningful in the zero-group case).
    pub tight: bool,
    pub gamma_sigma: Vec<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub pair: SvdPair,
    #[serde(skip)]
    pub grouping: SingularGrouping,
    #[serde(skip)]
    pub gamma_mat: Mat,
}

impl SubgradCertificate {
    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn m(&self) -> usize {
        self.pair.m()
    }

    pub fn c(&self) -> Range<usize> {
        self.n()..self.m()
    }

    /// Frame of the embedding built from the certificate's simultaneous pair.
    pub fn frame(&self) -> Result<EmbeddingFrame> {
        build_frame(&self.pair, &self.grouping)
    }

    /// Same certificate with another simultaneous pair (e.g. a degenerate-block rotation).
    pub fn with_pair(&self, pair: SvdPair) -> Self {
        Self { pair, ..self.clone() }
    }
}

/// Outcome of a membership test: a certificate, or the first failed condition.
#[derive(Debug, Clone)]
pub enum SubgradCheck {
    Member(Box<SubgradCertificate>),
    NotMember(String),
}

impl SubgradCheck {
    pub fn certificate(self) -> Option<SubgradCertificate> {
        match self {
            SubgradCheck::Member(c) => Some(*c),
            SubgradCheck::NotMember(_) => None,
        }
    }
}

pub fn psi_value(x: &Mat, kappa: usize) -> f64 {
    crate::linalg::singular_values(x).iter().take(kappa).sum()
}

fn grouping_of(pair: &SvdPair, kappa: usize, tol: &Tolerances) -> Result<SingularGrouping> {
    group_singular(pair, kappa, tol.group_tol(pair.sigma.get(0).copied().unwrap_or(0.0)))
}

/// Search for `(U, V)` diagonalizing both `X` and `Γ` with nonincreasing singular values.
///
/// Starts from the ordered SVD of `X` and re-rotates inside each equal-σ(X) block.
pub fn simultaneous_svd(x: &RectMatrix, gamma: &Mat, tol: &Tolerances) -> Result<Option<SimultaneousSvd>> {
    if gamma.shape() != x.shape() {
        return Err(Error::Dimension("X and Gamma shapes differ".into()));
    }
    let base = svd_ordered(x)?;
    let grouping = grouping_of(&base, 1, tol)?;
    Ok(simultaneous_from(&base, &grouping, gamma, tol))
}

fn simultaneous_from(
    base: &SvdPair,
    grouping: &SingularGrouping,
    gamma: &Mat,
    tol: &Tolerances,
) -> Option<SimultaneousSvd> {
    let n = base.n();
    let m = base.m();
    let res_tol = tol.membership * gamma.norm().max(1.0);
    let k = base.rotate_in(gamma);
    let mut u = base.u.clone();
    let mut v = base.v.clone();
    let mut d = Vector::zeros(n);

    for g in &grouping.groups {
        let idx: Vec<usize> = g.clone().collect();
        let blk = block(&k, &idx, &idx);
        if (&blk - blk.transpose()).norm() > res_tol {
            return None;
        }
        let (vals, rot) = sym_eigen_desc(&blk);
        let ug = base.u.columns(g.start, g.len()) * &rot;
        let vg = base.v.columns(g.start, g.len()) * &rot;
        u.columns_mut(g.start, g.len()).copy_from(&ug);
        v.columns_mut(g.start, g.len()).copy_from(&vg);
        for (i, val) in g.clone().zip(vals.iter()) {
            d[i] = *val;
        }
    }

    let b = grouping.b.clone();
    if !b.is_empty() {
        let rows: Vec<usize> = b.clone().collect();
        let cols: Vec<usize> = (b.start..m).collect();
        let blk = block(&k, &rows, &cols);
        let inner = svd_ordered(&RectMatrix::new(blk).ok()?).ok()?;
        let ub = base.u.columns(b.start, b.len()) * &inner.u;
        let vb = base.v.columns(b.start, m - b.start) * &inner.v;
        u.columns_mut(b.start, b.len()).copy_from(&ub);
        v.columns_mut(b.start, m - b.start).copy_from(&vb);
        for (i, val) in b.clone().zip(inner.sigma.iter()) {
            d[i] = *val;
        }
    }

    let pair = SvdPair { u, v, sigma: base.sigma.clone() };
    let rotated = pair.rotate_in(gamma);
    let mut target = Mat::zeros(n, m);
    for i in 0..n {
        target[(i, i)] = d[i];
    }
    if (rotated - target).norm() > res_tol {
        return None;
    }
    for i in 0..n {
        if d[i] < -res_tol || (i > 0 && d[i] > d[i - 1] + res_tol) {
            return None;
        }
    }
    d.apply(|v| *v = v.max(0.0));
    Some(SimultaneousSvd { pair, gamma_sigma: d })
}

/// Membership `Γ ∈ ∂Ψκ(X)` returning a certificate, or the reason it fails.
pub fn subdiff_check(x: &RectMatrix, gamma: &Mat, kappa: usize, tol: &Tolerances) -> Result<SubgradCheck> {
    let n = x.rows();
    if kappa == 0 || kappa > n {
        return Err(Error::Precondition(format!("kappa must lie in 1..={n}, got {kappa}")));
    }
    if gamma.shape() != x.shape() {
        return Err(Error::Dimension("X and Gamma shapes differ".into()));
    }
    let base = svd_ordered(x)?;
    let grouping = grouping_of(&base, kappa, tol)?;
    let Some(sim) = simultaneous_from(&base, &grouping, gamma, tol) else {
        return Ok(SubgradCheck::NotMember("no simultaneous ordered SVD of X and Gamma".into()));
    };
    Ok(certify(sim, grouping, gamma.clone(), kappa, tol))
}

pub fn subdiff_membership(
    x: &RectMatrix,
    gamma: &Mat,
    kappa: usize,
    tol: &Tolerances,
) -> Result<Option<SubgradCertificate>> {
    Ok(subdiff_check(x, gamma, kappa, tol)?.certificate())
}

fn certify(
    sim: SimultaneousSvd,
    grouping: SingularGrouping,
    gamma_mat: Mat,
    kappa: usize,
    tol: &Tolerances,
) -> SubgradCheck {
    let n = sim.pair.n();
    let d = &sim.gamma_sigma;
    let ct = tol.sigma_class;
    let sum_tol = tol.sum_rel * kappa as f64;
    let zero_case = grouping.kappa_in_zero_group();
    let beta = grouping.group(grouping.r);
    let kappa0 = beta.start;
    let alpha = 0..kappa0;
    let gamma_set = if zero_case { n..n } else { beta.end..n };
    let case = if zero_case { SubgradCase::ZeroGroup } else { SubgradCase::InteriorGroup };

    if let Some(i) = alpha.clone().find(|&i| (d[i] - 1.0).abs() > ct) {
        return SubgradCheck::NotMember(format!("sigma_{}(Gamma) = {:.3e} should be 1", i + 1, d[i]));
    }
    if let Some(i) = gamma_set.clone().find(|&i| d[i].abs() > ct) {
        return SubgradCheck::NotMember(format!("sigma_{}(Gamma) = {:.3e} should be 0", i + 1, d[i]));
    }
    if let Some(i) = beta.clone().find(|&i| d[i] < -ct || d[i] > 1.0 + ct) {
        return SubgradCheck::NotMember(format!("sigma_{}(Gamma) = {:.3e} leaves [0,1]", i + 1, d[i]));
    }
    let beta_sum: f64 = beta.clone().map(|i| d[i]).sum();
    let room = (kappa - kappa0) as f64;
    if zero_case {
        if beta_sum > room + sum_tol {
            return SubgradCheck::NotMember(format!("sum over beta {beta_sum:.6e} exceeds {room}"));
        }
    } else if (beta_sum - room).abs() > sum_tol {
        return SubgradCheck::NotMember(format!("sum over beta {beta_sum:.6e} differs from {room}"));
    }

    let b1_end = beta.clone().find(|&i| d[i] < 1.0 - ct).unwrap_or(beta.end);
    let b0_start = beta.clone().find(|&i| d[i] <= ct).unwrap_or(beta.end).max(b1_end);
    let beta1 = beta.start..b1_end;
    let beta_plus = b1_end..b0_start;
    let beta0 = b0_start..beta.end;

    let mut warnings = Vec::new();
    for i in beta.clone() {
        let near_one = d[i] < 1.0 - ct && d[i] >= 1.0 - 10.0 * ct;
        let near_zero = d[i] > ct && d[i] <= 10.0 * ct;
        if near_one || near_zero {
            warnings.push(format!("sigma_{}(Gamma) = {:.9e} is near a class boundary", i + 1, d[i]));
        }
    }

    let mut zeta = Vec::new();
    let mut beta_j = Vec::new();
    if !beta1.is_empty() {
        zeta.push(1.0);
        beta_j.push(beta1.clone());
    }
    let mut start = beta_plus.start;
    while start < beta_plus.end {
        let mut end = start + 1;
        while end < beta_plus.end && d[end - 1] - d[end] <= ct {
            end += 1;
        }
        zeta.push(d.rows(start, end - start).mean());
        beta_j.push(start..end);
        start = end;
    }

    let tight = kappa0 as f64 + beta_sum >= kappa as f64 - sum_tol;
    SubgradCheck::Member(Box::new(SubgradCertificate {
        case,
        kappa,
        kappa0,
        kappa1: beta.end,
        alpha,
        beta,
        gamma: gamma_set,
        beta1,
        beta_plus,
        beta0,
        zeta,
        beta_j,
        tight,
        gamma_sigma: d.iter().copied().collect(),
        warnings,
        pair: sim.pair,
        grouping,
        gamma_mat,
    }))
}

/// An element of the multiplier set `Λ(X, Γ)`.
#[derive(Debug, Clone)]
pub struct MultiplierElement {
    pub m: Mat,
    pub xi: Vec<f64>,
    pub omega: OmegaSimplex,
}

impl MultiplierElement {
    pub fn m11(&self, n: usize) -> Mat {
        self.m.view((0, 0), (n, n)).into_owned()
    }

    pub fn m22(&self, n: usize) -> Mat {
        let p = self.m.nrows();
        self.m.view((n, n), (p - n, p - n)).into_owned()
    }
}

/// Assemble `M = Σ_{l<r} P_l P_lᵀ + P_r Diag(ξ) P_rᵀ` (or with `P₀` in the zero-group case).
pub fn multiplier_from_xi(
    cert: &SubgradCertificate,
    frame: &EmbeddingFrame,
    xi: &[f64],
    tol: &Tolerances,
) -> Result<MultiplierElement> {
    let g = &cert.grouping;
    let n = cert.n();
    let r = g.r;
    let mass = cert.kappa - cert.kappa0;
    let xtol = tol.membership.max(1e-12) * 10.0;
    let (cols, dim) = if g.kappa_in_zero_group() {
        (frame.p0_cols(), frame.p0_cols().len())
    } else {
        (frame.group_cols(r), g.groups[r].len())
    };
    let omega = OmegaSimplex::new(dim, mass)?;
    if !omega.contains(xi, xtol) {
        return Err(Error::InfeasibleXi(format!(
            "xi must have length {dim}, entries in [0,1] and sum {mass}"
        )));
    }

    let mut upper_uv = Mat::zeros(n, cert.m());
    let mut mm = Mat::zeros(n + cert.m(), n + cert.m());
    for l in 0..r {
        let pl = frame.p_group(l);
        mm += &pl * pl.transpose();
        let gl = g.groups[l].clone();
        upper_uv += cert.pair.u.columns(gl.start, gl.len()) * cert.pair.v.columns(gl.start, gl.len()).transpose();
    }
    let pr = frame.p.columns(cols.start, cols.len());
    let dx = Mat::from_diagonal(&Vector::from_row_slice(xi));
    mm += pr * dx * pr.transpose();

    let residual_target = &cert.gamma_mat - &upper_uv;
    let shown = if g.kappa_in_zero_group() {
        let nb = g.b.len();
        let nc = cert.m() - n;
        let mut dvec = Vector::zeros(nb);
        for k in 0..nb {
            dvec[k] = xi[k] - xi[nb + nc + k];
        }
        let ub = cert.pair.u.columns(g.b.start, nb);
        let vb = cert.pair.v.columns(g.b.start, nb);
        ub * Mat::from_diagonal(&dvec) * vb.transpose()
    } else {
        let ar = g.groups[r].clone();
        let ua = cert.pair.u.columns(ar.start, ar.len());
        let va = cert.pair.v.columns(ar.start, ar.len());
        ua * dx_of(xi) * va.transpose()
    };
    let scale = cert.gamma_mat.norm().max(1.0);
    if (shown - residual_target).norm() > xtol * scale {
        return Err(Error::InfeasibleXi("xi does not reproduce Gamma on the active block".into()));
    }
    if (bmap_adjoint(&mm, n) - &cert.gamma_mat).norm() > xtol * scale {
        return Err(Error::InfeasibleXi("B*(M) differs from Gamma".into()));
    }
    Ok(MultiplierElement { m: mm, xi: xi.to_vec(), omega })
}

fn dx_of(xi: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_row_slice(xi))
}

/// Membership `M ∈ Λ(X, Γ)`: bordered form with off-diagonal `Γ/2` and the frame identity.
pub fn multiplier_membership(
    x: &RectMatrix,
    gamma: &Mat,
    mm: &Mat,
    kappa: usize,
    tol: &Tolerances,
) -> Result<bool> {
    let (n, m) = x.shape();
    if mm.shape() != (n + m, n + m) || gamma.shape() != (n, m) {
        return Err(Error::Dimension("multiplier has the wrong size".into()));
    }
    let mtol = tol.membership * gamma.norm().max(1.0);
    if (mm - mm.transpose()).norm() > mtol {
        return Ok(false);
    }
    if (bmap_adjoint(mm, n) - gamma).norm() > 2.0 * mtol {
        return Ok(false);
    }
    let pair = svd_ordered(x)?;
    let g = grouping_of(&pair, kappa, tol)?;
    let frame = build_frame(&pair, &g)?;
    let mut rest = mm.clone();
    for l in 0..g.r {
        let pl = frame.p_group(l);
        rest -= &pl * pl.transpose();
    }
    let proj = frame.p.transpose() * rest * &frame.p;
    let cols = if g.kappa_in_zero_group() { frame.p0_cols() } else { frame.group_cols(g.r) };
    Ok(capped_block_spectrum(&proj, cols, kappa - g.kappa0(), mtol).is_some())
}

/// Euclidean projection of `v` onto `{0 ≤ y ≤ 1, Σy = k}` (or `Σy ≤ k` when `at_most`).
pub(crate) fn capped_simplex_projection(v: &[f64], k: f64, at_most: bool) -> Vec<f64> {
    let clamp = |shift: f64| -> Vec<f64> { v.iter().map(|x| (x - shift).clamp(0.0, 1.0)).collect() };
    let sum = |y: &[f64]| y.iter().sum::<f64>();
    if at_most && sum(&clamp(0.0)) <= k {
        return clamp(0.0);
    }
    let lo0 = v.iter().fold(f64::INFINITY, |a, &x| a.min(x)) - 1.0;
    let hi0 = v.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(&clamp(mid)) > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp(0.5 * (lo + hi))
}

/// Distance from `Γ` to `∂Ψκ(X)` in the Frobenius norm.
pub fn subdiff_distance(x: &RectMatrix, gamma: &Mat, kappa: usize, tol: &Tolerances) -> Result<f64> {
    let n = x.rows();
    if kappa == 0 || kappa > n {
        return Err(Error::Precondition(format!("kappa must lie in 1..={n}, got {kappa}")));
    }
    let pair = svd_ordered(x)?;
    let g = grouping_of(&pair, kappa, tol)?;
    let k = pair.rotate_in(gamma);
    let mut target = Mat::zeros(n, x.cols());
    let kappa0 = g.kappa0();
    for i in 0..kappa0 {
        target[(i, i)] = 1.0;
    }
    let room = (kappa - kappa0) as f64;
    let beta = g.group(g.r);
    if g.kappa_in_zero_group() {
        let rows: Vec<usize> = beta.clone().collect();
        let cols: Vec<usize> = (beta.start..x.cols()).collect();
        let blk = block(&k, &rows, &cols);
        let inner = svd_ordered(&RectMatrix::new(blk)?)?;
        let proj = capped_simplex_projection(inner.sigma.as_slice(), room, true);
        let y = inner.compose(&Vector::from_vec(proj));
        target.view_mut((beta.start, beta.start), (beta.len(), cols.len())).copy_from(&y);
    } else {
        let idx: Vec<usize> = beta.clone().collect();
        let blk = sym(&block(&k, &idx, &idx));
        let (vals, vecs) = sym_eigen_desc(&blk);
        let proj = capped_simplex_projection(vals.as_slice(), room, false);
        let y = &vecs * Mat::from_diagonal(&Vector::from_vec(proj)) * vecs.transpose();
        target.view_mut((beta.start, beta.start), (beta.len(), beta.len())).copy_from(&y);
    }
    Ok((k - target).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(n: usize, m: usize, d: &[f64]) -> RectMatrix {
        let mut x = Mat::zeros(n, m);
        for (i, v) in d.iter().enumerate() {
            x[(i, i)] = *v;
        }
        RectMatrix::new(x).unwrap()
    }

    fn rot2(t: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    #[test]
    fn psi_examples() {
        assert!((psi_value(&diag(3, 3, &[3.0, 2.0, 1.0]), 2) - 5.0).abs() < 1e-12);
        assert_eq!(psi_value(&Mat::zeros(2, 3), 1), 0.0);
    }

    #[test]
    fn simultaneous_identity_pair() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let g = diag(3, 3, &[1.0, 0.0, 0.0]);
        let sim = simultaneous_svd(&x, &g, &tol).unwrap().unwrap();
        assert_eq!(sim.gamma_sigma.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn simultaneous_block_rotation() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[2.0, 2.0, 0.0]);
        let mut u0 = Mat::identity(3, 3);
        u0.view_mut((0, 0), (2, 2)).copy_from(&rot2(0.7));
        let g = &u0 * diag(3, 3, &[1.0, 0.4, 0.0]).as_mat() * u0.transpose();
        let sim = simultaneous_svd(&x, &g, &tol).unwrap().unwrap();
        assert!((sim.gamma_sigma[0] - 1.0).abs() < 1e-12);
        assert!((sim.gamma_sigma[1] - 0.4).abs() < 1e-12);
        assert!((sim.pair.compose(&sim.gamma_sigma) - g).norm() < 1e-12);
        assert!((sim.pair.compose(&sim.pair.sigma) - x.as_mat()).norm() < 1e-12);
    }

    #[test]
    fn simultaneous_absent_for_coupling() {
        let tol = Tolerances::default();
        let x = diag(2, 2, &[3.0, 2.0]);
        let g = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(simultaneous_svd(&x, &g, &tol).unwrap().is_none());
    }

    #[test]
    fn membership_examples() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let e11 = diag(3, 3, &[1.0, 0.0, 0.0]);
        let cert = subdiff_membership(&x, &e11, 1, &tol).unwrap().unwrap();
        assert_eq!(cert.case, SubgradCase::InteriorGroup);
        assert_eq!((cert.alpha.clone(), cert.beta.clone()), (0..0, 0..1));
        assert!(subdiff_membership(&x, &(e11.as_mat() * 0.5), 1, &tol).unwrap().is_none());

        let z = RectMatrix::zeros(2, 3).unwrap();
        let inside = Mat::from_row_slice(2, 3, &[0.3, 0.1, 0.0, -0.2, 0.2, 0.1]);
        let cert = subdiff_membership(&z, &inside, 1, &tol).unwrap().unwrap();
        assert_eq!(cert.case, SubgradCase::ZeroGroup);
        assert!(!cert.tight);
        assert!(subdiff_membership(&z, &(inside * 3.0), 1, &tol).unwrap().is_none());
    }

    #[test]
    fn membership_classifies_beta() {
        let tol = Tolerances::default();
        let x = diag(3, 4, &[2.0, 2.0, 2.0]);
        let g = diag(3, 4, &[1.0, 0.5, 0.5]);
        let cert = subdiff_membership(&x, g.as_mat(), 2, &tol).unwrap().unwrap();
        assert_eq!(cert.beta1, 0..1);
        assert_eq!(cert.beta_plus, 1..3);
        assert!(cert.beta0.is_empty());
        assert_eq!(cert.zeta, vec![1.0, 0.5]);
        assert_eq!(cert.beta_j, vec![0..1, 1..3]);
    }

    #[test]
    fn multiplier_roundtrip_interior() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let g = diag(3, 3, &[1.0, 0.0, 0.0]);
        let cert = subdiff_membership(&x, g.as_mat(), 1, &tol).unwrap().unwrap();
        let frame = cert.frame().unwrap();
        let me = multiplier_from_xi(&cert, &frame, &[1.0], &tol).unwrap();
        assert!((bmap_adjoint(&me.m, 3) - g.as_mat()).norm() < 1e-12);
        assert!(multiplier_membership(&x, g.as_mat(), &me.m, 1, &tol).unwrap());
        assert!(multiplier_from_xi(&cert, &frame, &[0.5], &tol).is_err());
    }

    #[test]
    fn multiplier_roundtrip_zero_group() {
        let tol = Tolerances::default();
        let x = RectMatrix::zeros(1, 2).unwrap();
        let g = Mat::zeros(1, 2);
        let cert = subdiff_membership(&x, &g, 1, &tol).unwrap().unwrap();
        let frame = cert.frame().unwrap();
        for xi in [[0.5, 0.0, 0.5], [0.0, 1.0, 0.0]] {
            let me = multiplier_from_xi(&cert, &frame, &xi, &tol).unwrap();
            assert!(bmap_adjoint(&me.m, 1).norm() < 1e-12);
            assert!(multiplier_membership(&x, &g, &me.m, 1, &tol).unwrap());
        }
        assert!(multiplier_from_xi(&cert, &frame, &[1.0, 0.0, 0.0], &tol).is_err());
        assert!(multiplier_from_xi(&cert, &frame, &[0.5, 0.0, 0.0], &tol).is_err());
    }

    #[test]
    fn multiplier_rejects_wrong_border() {
        let tol = Tolerances::default();
        let x = diag(2, 2, &[3.0, 1.0]);
        let g = diag(2, 2, &[1.0, 0.0]);
        let cert = subdiff_membership(&x, g.as_mat(), 1, &tol).unwrap().unwrap();
        let me = multiplier_from_xi(&cert, &cert.frame().unwrap(), &[1.0], &tol).unwrap();
        let mut bad = me.m.clone();
        bad[(0, 3)] += 0.1;
        bad[(3, 0)] += 0.1;
        assert!(!multiplier_membership(&x, g.as_mat(), &bad, 1, &tol).unwrap());
    }

    #[test]
    fn distance_is_zero_on_members() {
        let tol = Tolerances::default();
        let x = diag(3, 3, &[3.0, 2.0, 1.0]);
        let g = diag(3, 3, &[1.0, 1.0, 0.0]);
        assert!(subdiff_distance(&x, g.as_mat(), 2, &tol).unwrap() < 1e-12);
        let off = diag(3, 3, &[1.0, 0.5, 0.0]);
        assert!((subdiff_distance(&x, off.as_mat(), 2, &tol).unwrap() - 0.5).abs() < 1e-9);
    }
}
