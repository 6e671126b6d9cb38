//! Tilt stability of `X̄` for `min ν·ϑ(X) + Ψκ(X)` through the kernel-intersection test
//! `Ker ∇²ϑ(X̄) ∩ Υ = {0}`.
//!
//! Υ is assembled in the coordinates `K = Ūᵀ G V̄` of a simultaneous ordered SVD of
//! `(X̄, Γ̄)`. Its linear hull is a coordinate subspace there, so the basis is orthonormal in
//! ambient coordinates as well. The eigen/singular-value sandwich on `(C, ϖ, D, E)` is kept as
//! a concave margin and enforced on witnesses.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    null_space, spectral_norm, sym, sym_eigen_desc, unvec_rm, vec_rm, Mat, Vector,
};
use crate::par::{map_indexed, Exec};
use crate::secder::ConeCase;
use crate::spectral::{MatrixJson, RectMatrix, SvdPair};
use crate::subgrad::{subdiff_check, subdiff_distance, SubgradCertificate, SubgradCheck};
use crate::testgen;
use crate::tol::Tolerances;

/// The smooth term ϑ.
#[derive(Debug, Clone)]
pub enum Theta {
    /// `½ vec(X)ᵀ Q vec(X) + ⟨L, X⟩`, row-major `vec`.
    Quadratic { q: Mat, l: Mat },
    /// `½ ‖A vec(X) − b‖²`, row-major `vec`.
    LeastSquares { a: Mat, b: Vector },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub xbar: RectMatrix,
    pub nu: f64,
    pub kappa: usize,
    pub theta: Theta,
    pub hessian_psd_radius: Option<f64>,
}

impl ProblemSpec {
    pub fn new(xbar: RectMatrix, nu: f64, kappa: usize, theta: Theta) -> Result<Self> {
        let spec = Self { xbar, nu, kappa, theta, hessian_psd_radius: None };
        spec.validate_shapes()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.xbar.rows()
    }

    pub fn m(&self) -> usize {
        self.xbar.cols()
    }

    fn validate_shapes(&self) -> Result<()> {
        let d = self.n() * self.m();
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::Precondition("nu must be positive".into()));
        }
        if self.kappa == 0 || self.kappa > self.n() {
            return Err(Error::Precondition(format!("kappa must lie in 1..={}", self.n())));
        }
        match &self.theta {
            Theta::Quadratic { q, l } => {
                if q.shape() != (d, d) {
                    return Err(Error::Dimension(format!("Q must be {d}x{d}")));
                }
                if l.shape() != (self.n(), self.m()) {
                    return Err(Error::Dimension("L must match X".into()));
                }
            }
            Theta::LeastSquares { a, b } => {
                if a.ncols() != d || a.nrows() != b.len() {
                    return Err(Error::Dimension(format!("A must be p x {d} with b of length p")));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Mat) -> f64 {
        let v = vec_rm(x);
        match &self.theta {
            Theta::Quadratic { q, l } => 0.5 * v.dot(&(q * &v)) + l.dot(x),
            Theta::LeastSquares { a, b } => 0.5 * (a * &v - b).norm_squared(),
        }
    }

    pub fn gradient(&self, x: &Mat) -> Mat {
        let v = vec_rm(x);
        let g = match &self.theta {
            Theta::Quadratic { q, l } => q * &v + vec_rm(l),
            Theta::LeastSquares { a, b } => a.transpose() * (a * &v - b),
        };
        unvec_rm(&g, self.n(), self.m())
    }

    /// `∇²ϑ` as an nm×nm matrix in row-major `vec` coordinates.
    pub fn hessian(&self) -> Mat {
        match &self.theta {
            Theta::Quadratic { q, .. } => sym(q),
            Theta::LeastSquares { a, .. } => a.transpose() * a,
        }
    }

    /// `Γ̄ = −ν ∇ϑ(X̄)`.
    pub fn gamma_bar(&self) -> Mat {
        self.gradient(self.xbar.as_mat()) * (-self.nu)
    }

    /// Symmetry and PSD of the Hessian at `X̄`; returns its largest eigenvalue.
    pub fn check_hessian(&self, tol: &Tolerances) -> Result<f64> {
        if let Theta::Quadratic { q, .. } = &self.theta {
            let asym = (q - q.transpose()).norm();
            if asym > tol.psd * (1.0 + q.norm()) {
                return Err(Error::NotSymmetric(asym));
            }
        }
        let h = self.hessian();
        let (vals, _) = sym_eigen_desc(&h);
        let top = vals.iter().copied().fold(0.0, f64::max);
        let bottom = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if bottom < -tol.psd * top.max(1.0) {
            return Err(Error::Precondition(format!("Hessian is not PSD: smallest eigenvalue {bottom:.3e}")));
        }
        Ok(top)
    }

    /// Certificate of `Γ̄ ∈ ∂Ψκ(X̄)`, or a not-a-subgradient error carrying the distance.
    pub fn certificate(&self, tol: &Tolerances) -> Result<SubgradCertificate> {
        let gamma = self.gamma_bar();
        match subdiff_check(&self.xbar, &gamma, self.kappa, tol)? {
            SubgradCheck::Member(c) => Ok(*c),
            SubgradCheck::NotMember(why) => {
                let dist = subdiff_distance(&self.xbar, &gamma, self.kappa, tol)?;
                Err(Error::NotSubgradient(format!("{why}; distance to the subdifferential {dist:.6e}")))
            }
        }
    }
}

/// Block sizes of the Υ template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockDims {
    pub alpha: usize,
    pub beta1: usize,
    pub beta_plus: usize,
    pub beta0: usize,
    pub gamma: usize,
    pub c: usize,
}

/// The inequality part of Υ, evaluated on `K = Ūᵀ G V̄`.
#[derive(Debug, Clone, Serialize)]
pub struct UpsilonConstraint {
    pub case: ConeCase,
    pub beta1: Range<usize>,
    pub beta_plus: Range<usize>,
    pub beta0: Range<usize>,
    pub cols: usize,
}

impl UpsilonConstraint {
    fn lower(&self, k: &Mat) -> Option<(f64, Mat)> {
        let b0 = &self.beta0;
        if b0.is_empty() {
            return None;
        }
        match self.case {
            ConeCase::InteriorGroup => {
                let d = sym(&k.view((b0.start, b0.start), (b0.len(), b0.len())).into_owned());
                let (vals, vecs) = sym_eigen_desc(&d);
                let u = vecs.column(0).into_owned();
                let mut g = Mat::zeros(k.nrows(), k.ncols());
                g.view_mut((b0.start, b0.start), (b0.len(), b0.len())).copy_from(&(&u * u.transpose()));
                Some((vals[0], g))
            }
            ConeCase::ZeroGroupTight => {
                let w = self.cols - b0.start;
                let de = k.view((b0.start, b0.start), (b0.len(), w)).into_owned();
                let (u, s, v) = crate::linalg::svd_full(&de).ok()?;
                let top = (0..s.len()).max_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap_or(0);
                let mut g = Mat::zeros(k.nrows(), k.ncols());
                let outer = u.column(top) * v.column(top).transpose();
                g.view_mut((b0.start, b0.start), (b0.len(), w)).copy_from(&outer);
                Some((s[top], g))
            }
            ConeCase::ZeroGroupStrict => None,
        }
    }

    fn upper(&self, k: &Mat) -> Option<(f64, Mat)> {
        let b1 = &self.beta1;
        if b1.is_empty() || self.case == ConeCase::ZeroGroupStrict {
            return None;
        }
        let c = sym(&k.view((b1.start, b1.start), (b1.len(), b1.len())).into_owned());
        let (vals, vecs) = sym_eigen_desc(&c);
        let last = b1.len() - 1;
        let u = vecs.column(last).into_owned();
        let mut g = Mat::zeros(k.nrows(), k.ncols());
        g.view_mut((b1.start, b1.start), (b1.len(), b1.len())).copy_from(&(&u * u.transpose()));
        Some((vals[last], g))
    }

    fn varpi(&self, k: &Mat) -> Option<(f64, Mat)> {
        let bp = &self.beta_plus;
        if bp.is_empty() || self.case == ConeCase::ZeroGroupStrict {
            return None;
        }
        let mean = bp.clone().map(|i| k[(i, i)]).sum::<f64>() / bp.len() as f64;
        let mut g = Mat::zeros(k.nrows(), k.ncols());
        for i in bp.clone() {
            g[(i, i)] = 1.0 / bp.len() as f64;
        }
        Some((mean, g))
    }

    /// Whether no inequality can ever bind.
    pub fn vacuous(&self) -> bool {
        if self.case == ConeCase::ZeroGroupStrict {
            return true;
        }
        let (b1, bp, b0) = (!self.beta1.is_empty(), !self.beta_plus.is_empty(), !self.beta0.is_empty());
        if bp {
            !b1 && !b0
        } else {
            !(b1 && b0)
        }
    }

    /// Concave, positively homogeneous margin with one supergradient; `+inf` when vacuous.
    pub fn margin_k(&self, k: &Mat) -> (f64, Mat) {
        let lo = self.lower(k);
        let up = self.upper(k);
        let vp = self.varpi(k);
        let mut terms: Vec<(f64, Mat)> = Vec::new();
        match vp {
            Some((w, gw)) => {
                if let Some((l, gl)) = &lo {
                    terms.push((w - l, &gw - gl));
                }
                if let Some((u, gu)) = &up {
                    terms.push((u - w, gu - &gw));
                }
            }
            None => {
                if let (Some((l, gl)), Some((u, gu))) = (&lo, &up) {
                    terms.push((u - l, gu - gl));
                }
            }
        }
        terms
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap_or((f64::INFINITY, Mat::zeros(k.nrows(), k.ncols())))
    }

    /// Entries pinned to zero when the constrained blocks are switched off.
    fn constrained_entries(&self, rows: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if self.vacuous() {
            return out;
        }
        for i in self.beta1.clone() {
            for j in self.beta1.clone() {
                out.push((i, j));
            }
        }
        for i in self.beta_plus.clone() {
            out.push((i, i));
        }
        let d_cols = match self.case {
            ConeCase::ZeroGroupTight => self.beta0.start..self.cols,
            _ => self.beta0.clone(),
        };
        for i in self.beta0.clone() {
            for j in d_cols.clone() {
                out.push((i, j));
            }
        }
        out.retain(|&(i, _)| i < rows);
        out
    }
}

/// Υ for one simultaneous pair: hull basis and inequality.
#[derive(Debug, Clone)]
pub struct UpsilonSpec {
    pub case: ConeCase,
    pub pair: SvdPair,
    pub block_dims: BlockDims,
    /// Orthonormal hull basis in `K` coordinates.
    pub hull_k: Vec<Mat>,
    pub constraint: UpsilonConstraint,
    pub exact: bool,
}

impl UpsilonSpec {
    pub fn hull_dim(&self) -> usize {
        self.hull_k.len()
    }

    /// Hull basis as row-major vectors of ambient matrices `Ū K V̄ᵀ`.
    pub fn hull_vectors(&self) -> Mat {
        let n = self.pair.n();
        let m = self.pair.m();
        let mut out = Mat::zeros(n * m, self.hull_k.len());
        for (j, k) in self.hull_k.iter().enumerate() {
            out.set_column(j, &vec_rm(&self.pair.rotate_out(k)));
        }
        out
    }

    /// Human-readable description of the inequality.
    pub fn constraint_text(&self) -> String {
        if self.exact {
            return "none".into();
        }
        let lower = match self.case {
            ConeCase::ZeroGroupTight => "sigma_1([D E])",
            _ => "lambda_1(S(D))",
        };
        let mut parts = Vec::new();
        if !self.constraint.beta0.is_empty() {
            parts.push(lower.to_string());
        }
        parts.push("varpi".to_string());
        if !self.constraint.beta1.is_empty() {
            parts.push("lambda_min(C)".to_string());
        }
        parts.join(" <= ")
    }

    /// Signed margin of an ambient direction (`+inf` when the inequality is vacuous).
    pub fn margin(&self, g: &Mat) -> f64 {
        self.constraint.margin_k(&self.pair.rotate_in(g)).0
    }

    /// Distance of an ambient direction from the hull.
    pub fn hull_residual(&self, g: &Mat) -> f64 {
        let k = self.pair.rotate_in(g);
        let mut proj = Mat::zeros(k.nrows(), k.ncols());
        for b in &self.hull_k {
            proj += b * b.dot(&k);
        }
        (k - proj).norm()
    }

    /// Membership in Υ up to tolerances scaled by `‖G‖`.
    pub fn contains(&self, g: &Mat, tol: &Tolerances) -> bool {
        let scale = g.norm().max(1e-300);
        self.hull_residual(g) <= tol.witness * scale && self.margin(g) >= -tol.margin * scale
    }
}

fn unit(n: usize, m: usize, entries: &[(usize, usize, f64)]) -> Mat {
    let mut k = Mat::zeros(n, m);
    for &(i, j, v) in entries {
        k[(i, j)] = v;
    }
    k
}

/// Build Υ from the certificate's simultaneous pair.
pub fn build_upsilon(cert: &SubgradCertificate) -> UpsilonSpec {
    build_upsilon_with_pair(cert, &cert.pair)
}

/// Build Υ for an explicit simultaneous pair (e.g. a degenerate-block rotation).
pub fn build_upsilon_with_pair(cert: &SubgradCertificate, pair: &SvdPair) -> UpsilonSpec {
    let case = ConeCase::of(cert);
    let (n, m) = (cert.n(), cert.m());
    let corner = 0..cert.beta1.end;
    let mut hull = Vec::new();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    for i in corner.clone() {
        hull.push(unit(n, m, &[(i, i, 1.0)]));
        for j in i + 1..corner.end {
            hull.push(unit(n, m, &[(i, j, r2), (j, i, r2)]));
        }
    }
    if case != ConeCase::ZeroGroupStrict && !cert.beta_plus.is_empty() {
        let w = 1.0 / (cert.beta_plus.len() as f64).sqrt();
        let entries: Vec<_> = cert.beta_plus.clone().map(|i| (i, i, w)).collect();
        hull.push(unit(n, m, &entries));
    }
    match case {
        ConeCase::InteriorGroup => {
            for i in cert.beta0.clone() {
                for j in cert.beta0.clone() {
                    hull.push(unit(n, m, &[(i, j, 1.0)]));
                }
            }
            for i in cert.beta0.start..n {
                for j in cert.gamma.start..m {
                    hull.push(unit(n, m, &[(i, j, 1.0)]));
                }
            }
        }
        ConeCase::ZeroGroupTight => {
            for i in cert.beta0.clone() {
                for j in cert.beta0.start..m {
                    hull.push(unit(n, m, &[(i, j, 1.0)]));
                }
            }
        }
        ConeCase::ZeroGroupStrict => {}
    }
    let constraint = UpsilonConstraint {
        case,
        beta1: cert.beta1.clone(),
        beta_plus: cert.beta_plus.clone(),
        beta0: cert.beta0.clone(),
        cols: m,
    };
    let exact = constraint.vacuous();
    UpsilonSpec {
        case,
        pair: pair.clone(),
        block_dims: BlockDims {
            alpha: cert.alpha.len(),
            beta1: cert.beta1.len(),
            beta_plus: cert.beta_plus.len(),
            beta0: cert.beta0.len(),
            gamma: cert.gamma.len(),
            c: m - n,
        },
        hull_k: hull,
        constraint,
        exact,
    }
}

/// Random re-rotation of a simultaneous pair inside blocks where both spectra repeat.
pub fn rotate_degenerate(cert: &SubgradCertificate, rng: &mut testgen::Rng64, tol: &Tolerances) -> SvdPair {
    let pair = &cert.pair;
    let (n, m) = (pair.n(), pair.m());
    let gt = cert.grouping.group_tol;
    let same = |i: usize, j: usize| {
        (pair.sigma[i] - pair.sigma[j]).abs() <= gt && (cert.gamma_sigma[i] - cert.gamma_sigma[j]).abs() <= tol.sigma_class
    };
    let mut u = pair.u.clone();
    let mut v = pair.v.clone();
    let mut start = 0;
    let mut tail_rotated = false;
    while start < n {
        let mut end = start + 1;
        while end < n && same(end - 1, end) && (pair.sigma[end] - pair.sigma[start]).abs() <= gt {
            end += 1;
        }
        let len = end - start;
        let both_zero = pair.sigma[start] <= gt && cert.gamma_sigma[start] <= tol.sigma_class;
        if both_zero {
            let q1 = testgen::orthogonal(rng, len);
            let wide = m - start;
            let q2 = testgen::orthogonal(rng, wide);
            let ub = u.columns(start, len) * q1;
            let vb = v.columns(start, wide) * q2;
            u.columns_mut(start, len).copy_from(&ub);
            v.columns_mut(start, wide).copy_from(&vb);
            tail_rotated = true;
            break;
        }
        let q = testgen::orthogonal(rng, len);
        let ub = u.columns(start, len) * &q;
        let vb = v.columns(start, len) * &q;
        u.columns_mut(start, len).copy_from(&ub);
        v.columns_mut(start, len).copy_from(&vb);
        start = end;
    }
    if !tail_rotated && m > n {
        let q = testgen::orthogonal(rng, m - n);
        let vc = v.columns(n, m - n) * q;
        v.columns_mut(n, m - n).copy_from(&vc);
    }
    SvdPair { u, v, sigma: pair.sigma.clone() }
}

/// Verdict of the kernel-intersection test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TiltStatus {
    Stable,
    Unstable,
    Inconclusive,
}

impl TiltStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            TiltStatus::Stable => 0,
            TiltStatus::Unstable => 1,
            TiltStatus::Inconclusive => 2,
        }
    }
}

/// A nonzero element of the kernel lying in the tested set.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub matrix: MatrixJson,
    pub hessian_residual: f64,
    pub hull_residual: f64,
    /// Inequality margin; absent when no inequality can bind.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchDiagnostics {
    pub starts: usize,
    pub steps: usize,
    pub best_margin: f64,
    pub best_start: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltVerdict {
    pub status: TiltStatus,
    pub kernel_dim: usize,
    pub hull_dim: usize,
    pub intersection_dim: usize,
    /// Smallest sine between hull directions and the kernel (Stable certificate).
    pub min_sine: Option<f64>,
    pub exact: bool,
    pub witness: Option<Witness>,
    pub search: Option<SearchDiagnostics>,
    pub notes: Vec<String>,
}

/// Options of the witness search and pair sampling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltOptions {
    pub seed: u64,
    pub starts: usize,
    pub steps: usize,
    pub rotation_samples: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TiltOptions {
    fn default() -> Self {
        Self { seed: 0, starts: 64, steps: 500, rotation_samples: 0, exec: Exec::default() }
    }
}

/// The inequality part of a set W tested against a kernel (vectors in ambient coordinates).
pub trait ConeConstraint: Sync {
    /// Concave, positively homogeneous margin; members have margin ≥ 0.
    fn margin(&self, w: &Vector) -> f64;
    /// A supergradient of the margin, zero if unavailable.
    fn supergradient(&self, w: &Vector) -> Vector {
        Vector::zeros(w.len())
    }
    /// Coordinates whose vanishing forces margin ≥ 0 (enables the exact free-subspace check).
    fn pinned(&self) -> Option<Mat> {
        None
    }
}

/// Adapter turning a membership predicate into a margin (0 or −1, no supergradient).
pub struct Predicate<F: Fn(&Vector) -> bool + Sync>(pub F);

impl<F: Fn(&Vector) -> bool + Sync> ConeConstraint for Predicate<F> {
    fn margin(&self, w: &Vector) -> f64 {
        if (self.0)(w) {
            0.0
        } else {
            -1.0
        }
    }
}

struct UpsilonMargin<'a> {
    ups: &'a UpsilonSpec,
}

impl ConeConstraint for UpsilonMargin<'_> {
    fn margin(&self, w: &Vector) -> f64 {
        let (n, m) = (self.ups.pair.n(), self.ups.pair.m());
        self.ups.margin(&unvec_rm(w, n, m))
    }

    fn supergradient(&self, w: &Vector) -> Vector {
        let (n, m) = (self.ups.pair.n(), self.ups.pair.m());
        let k = self.ups.pair.rotate_in(&unvec_rm(w, n, m));
        let (_, gk) = self.ups.constraint.margin_k(&k);
        vec_rm(&self.ups.pair.rotate_out(&gk))
    }

    fn pinned(&self) -> Option<Mat> {
        let (n, m) = (self.ups.pair.n(), self.ups.pair.m());
        let entries = self.ups.constraint.constrained_entries(n);
        let mut out = Mat::zeros(entries.len(), n * m);
        for (r, (i, j)) in entries.into_iter().enumerate() {
            let e = self.ups.pair.u.column(i) * self.ups.pair.v.column(j).transpose();
            out.set_row(r, &vec_rm(&e).transpose());
        }
        Some(out)
    }
}

fn kernel_basis(hessian: &Mat, tol: &Tolerances) -> Mat {
    let (vals, vecs) = sym_eigen_desc(hessian);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let cut = (tol.kernel_rel * top).max(tol.kernel_floor);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= cut).collect();
    crate::linalg::columns(&vecs, &keep)
}

/// `Ker H ∩ W = {0}` for a hull `L(W)` with orthonormal columns and an inequality part.
pub fn generic_kernel_test(
    hessian: &Mat,
    hull: &Mat,
    constraint: &dyn ConeConstraint,
    exact: bool,
    tol: &Tolerances,
    opts: &TiltOptions,
) -> TiltVerdict {
    let kernel = kernel_basis(hessian, tol);
    let mut verdict = TiltVerdict {
        status: TiltStatus::Stable,
        kernel_dim: kernel.ncols(),
        hull_dim: hull.ncols(),
        intersection_dim: 0,
        min_sine: None,
        exact,
        witness: None,
        search: None,
        notes: Vec::new(),
    };
    if kernel.ncols() == 0 || hull.ncols() == 0 {
        return verdict;
    }
    let off = hull - &kernel * (kernel.transpose() * hull);
    let sines = crate::linalg::singular_values(&off);
    let hd = hull.ncols();
    let mut sorted = sines.clone();
    sorted.resize(hd, 0.0);
    verdict.min_sine = sorted.last().copied();
    let ny = null_space(&off, tol.intersect);
    verdict.intersection_dim = ny.ncols();
    if ny.ncols() == 0 {
        return verdict;
    }
    let nbasis = hull * &ny;
    let make_witness = |w: &Vector, margin: Option<f64>| {
        let w = w / w.norm();
        let hres = (hessian * &w).norm();
        let hull_res = (&w - hull * (hull.transpose() * &w)).norm();
        let len = w.len();
        Witness {
            matrix: MatrixJson { rows: 1, cols: len, data: w.iter().copied().collect() },
            hessian_residual: hres,
            hull_residual: hull_res,
            margin,
        }
    };
    if exact {
        let w = nbasis.column(0).into_owned();
        verdict.status = TiltStatus::Unstable;
        verdict.witness = Some(make_witness(&w, None));
        return verdict;
    }

    if let Some(pinned) = constraint.pinned() {
        let free = null_space(&(&pinned * &nbasis), tol.intersect);
        if free.ncols() > 0 {
            let w = &nbasis * free.column(0);
            let margin = constraint.margin(&(&w / w.norm()));
            if margin >= -tol.margin {
                verdict.status = TiltStatus::Unstable;
                verdict.witness = Some(make_witness(&w, Some(margin)));
                verdict.notes.push("witness has all constrained blocks equal to zero".into());
                return verdict;
            }
        }
    }

    let k = nbasis.ncols();
    let results = map_indexed(opts.exec, opts.starts, |s| {
        let mut rng = testgen::rng(opts.seed, 1 + s as u64);
        let mut y = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        y /= y.norm().max(1e-300);
        let mut best = (f64::NEG_INFINITY, y.clone());
        for t in 0..opts.steps {
            let w = &nbasis * &y;
            let mg = constraint.margin(&w);
            if mg > best.0 {
                best = (mg, y.clone());
            }
            if mg >= tol.margin {
                break;
            }
            let g = nbasis.transpose() * constraint.supergradient(&w);
            let g = &g - &y * y.dot(&g);
            let gn = g.norm();
            if gn <= 1e-14 {
                y = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            } else {
                y += g * (0.5 / ((t + 1) as f64).sqrt() / gn);
            }
            y /= y.norm().max(1e-300);
        }
        best
    });
    let (best_start, (best_margin, best_y)) = results
        .into_iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .expect("at least one start");
    verdict.search = Some(SearchDiagnostics { starts: opts.starts, steps: opts.steps, best_margin, best_start });
    if best_margin >= -tol.margin {
        let w = &nbasis * &best_y;
        verdict.status = TiltStatus::Unstable;
        verdict.witness = Some(make_witness(&w, Some(best_margin)));
    } else {
        verdict.status = TiltStatus::Inconclusive;
        verdict.notes.push("hull meets the kernel but no element satisfying the inequality was found".into());
    }
    verdict
}

fn check_with(spec: &ProblemSpec, ups: &UpsilonSpec, tol: &Tolerances, opts: &TiltOptions) -> TiltVerdict {
    let h = spec.hessian();
    let hull = ups.hull_vectors();
    let mut v = generic_kernel_test(&h, &hull, &UpsilonMargin { ups }, ups.exact, tol, opts);
    if v.status == TiltStatus::Inconclusive && ups.case == ConeCase::ZeroGroupTight {
        v.notes.push("in the tight zero-group case limits from interior-group points can meet the kernel outside this set".into());
    }
    if let Some(w) = v.witness.as_mut() {
        w.matrix.rows = spec.n();
        w.matrix.cols = spec.m();
        if let Ok(g) = w.matrix.to_mat() {
            w.hull_residual = ups.hull_residual(&g);
            if !ups.exact {
                w.margin = Some(ups.margin(&g));
            }
        }
    }
    v
}

/// Tilt check against one Υ.
pub fn tilt_check(spec: &ProblemSpec, ups: &UpsilonSpec, tol: &Tolerances, opts: &TiltOptions) -> TiltVerdict {
    check_with(spec, ups, tol, opts)
}

/// Full pipeline: stationarity, Υ, verdict, and sampled pair rotations.
pub fn analyze_tilt(
    spec: &ProblemSpec,
    tol: &Tolerances,
    opts: &TiltOptions,
) -> Result<(SubgradCertificate, UpsilonSpec, TiltVerdict)> {
    spec.check_hessian(tol)?;
    let cert = spec.certificate(tol)?;
    let ups = build_upsilon(&cert);
    let mut verdict = check_with(spec, &ups, tol, opts);
    if opts.rotation_samples > 0 {
        let mut rng = testgen::rng(opts.seed, u64::MAX);
        let mut disagreements = 0;
        for _ in 0..opts.rotation_samples {
            let pair = rotate_degenerate(&cert, &mut rng, tol);
            let alt = build_upsilon_with_pair(&cert, &pair);
            let v = check_with(spec, &alt, tol, opts);
            if v.status != verdict.status {
                disagreements += 1;
            }
        }
        verdict.notes.push(format!("{} rotated pairs, {disagreements} disagreements", opts.rotation_samples));
        if disagreements > 0 {
            verdict.status = TiltStatus::Inconclusive;
            verdict.witness = None;
        }
    }
    Ok((cert, ups, verdict))
}

/// Subspace distance helper used in tests: largest principal-angle sine between two hulls.
pub fn hull_gap(a: &Mat, b: &Mat) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    let off = a - b * (b.transpose() * a);
    spectral_norm(&off)
}
