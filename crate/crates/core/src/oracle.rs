//! Brute-force validators: second-order epi-quotients, the Ky-Fan proximal map, a
//! ball-constrained solver for tilted problems, and an empirical tilt probe.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_desc, Mat, Vector};
use crate::par::{map_indexed, Exec};
use crate::spectral::{svd_ordered, RectMatrix};
use crate::subgrad::psi_value;
use crate::testgen;
use crate::tilt::{ProblemSpec, TiltStatus};

/// A convex function given by values, optionally with its proximal map.
pub trait ConvexEvaluator: Sync {
    fn value(&self, x: &Mat) -> f64;
    /// `argmin_y f(y) + ‖y − x‖²/(2t)` when available.
    fn prox(&self, _x: &Mat, _t: f64) -> Option<Mat> {
        None
    }
}

/// Ψκ with its exact proximal map.
pub struct KyFan(pub usize);

impl ConvexEvaluator for KyFan {
    fn value(&self, x: &Mat) -> f64 {
        psi_value(x, self.0)
    }

    fn prox(&self, x: &Mat, t: f64) -> Option<Mat> {
        kyfan_matrix_prox(x, t, self.0).ok()
    }
}

/// `½‖·‖²_F`.
pub struct HalfSquared;

impl ConvexEvaluator for HalfSquared {
    fn value(&self, x: &Mat) -> f64 {
        0.5 * x.norm_squared()
    }

    fn prox(&self, x: &Mat, t: f64) -> Option<Mat> {
        Some(x / (1.0 + t))
    }
}

/// Any value-only convex function.
pub struct ValueFn<F: Fn(&Mat) -> f64 + Sync>(pub F);

impl<F: Fn(&Mat) -> f64 + Sync> ConvexEvaluator for ValueFn<F> {
    fn value(&self, x: &Mat) -> f64 {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuotientConfig {
    pub tau_grid: Vec<f64>,
    pub ball_factor: f64,
    pub samples_per_tau: usize,
    pub seed: u64,
}

impl Default for QuotientConfig {
    fn default() -> Self {
        Self {
            tau_grid: (0..9).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect(),
            ball_factor: 2.0,
            samples_per_tau: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientEstimate {
    pub value: f64,
    pub per_tau: Vec<(f64, f64)>,
    pub diverging: bool,
    pub exact_inner: bool,
}

fn quotient(h: &dyn ConvexEvaluator, x: &Mat, v: &Mat, hx: f64, tau: f64, w: &Mat) -> f64 {
    let y = x + w * tau;
    (h.value(&y) - hx - tau * v.dot(w)) / (0.5 * tau * tau)
}

/// `min h(y) − ⟨v, y⟩` over `‖y − y0‖ ≤ r`, via the proximal path `μ ↦ prox_{h/μ}(y0 + v/μ)`.
fn ball_min_by_prox(h: &dyn ConvexEvaluator, v: &Mat, y0: &Mat, r: f64) -> Option<Mat> {
    let at = |mu: f64| h.prox(&(y0 + v / mu), 1.0 / mu);
    let far = |y: &Mat| (y - y0).norm() > r;
    let mut lo = (1e-8f64 / r.max(1e-300)).ln();
    let mut hi = (1e8f64 / r.max(1e-300)).ln();
    let y_lo = at(lo.exp())?;
    if !far(&y_lo) {
        return Some(y_lo);
    }
    let mut best = at(hi.exp())?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let y = at(mid.exp())?;
        if far(&y) {
            lo = mid;
        } else {
            hi = mid;
            best = y;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Some(best)
}

#[allow(clippy::too_many_arguments)]
fn min_over_ball(
    h: &dyn ConvexEvaluator,
    x: &Mat,
    v: &Mat,
    hx: f64,
    tau: f64,
    w: &Mat,
    cfg: &QuotientConfig,
    rng: &mut testgen::Rng64,
) -> (f64, bool) {
    let rho = cfg.ball_factor * tau;
    if h.prox(x, 1.0).is_some() {
        let y0 = x + w * tau;
        if let Some(y) = ball_min_by_prox(h, v, &y0, rho * tau) {
            let wp = (y - x) / tau;
            return (quotient(h, x, v, hx, tau, &wp), true);
        }
    }
    let (n, m) = w.shape();
    let mut best_z = Mat::zeros(n, m);
    let mut best = quotient(h, x, v, hx, tau, w);
    let radius = 2.0 * cfg.ball_factor;
    for _ in 0..cfg.samples_per_tau {
        let mut z = testgen::gaussian(rng, n, m);
        let r: f64 = rng.gen_range(0.0..1.0);
        z *= radius * r / z.norm().max(1e-300);
        let q = quotient(h, x, v, hx, tau, &(w + &z * (0.5 * tau)));
        if q < best {
            best = q;
            best_z = z;
        }
    }
    let mut step = radius / 4.0;
    for _ in 0..cfg.samples_per_tau {
        let mut z = &best_z + testgen::gaussian(rng, n, m) * (step / ((n * m) as f64).sqrt());
        let nz = z.norm();
        if nz > radius {
            z *= radius / nz;
        }
        let q = quotient(h, x, v, hx, tau, &(w + &z * (0.5 * tau)));
        if q < best {
            best = q;
            best_z = z;
            step *= 1.5;
        } else {
            step *= 0.9;
        }
    }
    (best, false)
}

/// Epi-quotient estimate of `d²h(x | v)(w)`.
pub fn d2_quotient_oracle(h: &dyn ConvexEvaluator, x: &Mat, v: &Mat, w: &Mat, cfg: &QuotientConfig) -> QuotientEstimate {
    let scale = w.norm();
    if scale == 0.0 || cfg.tau_grid.is_empty() {
        return QuotientEstimate { value: 0.0, per_tau: Vec::new(), diverging: false, exact_inner: true };
    }
    let wn = w / scale;
    let hx = h.value(x);
    let mut rng = testgen::rng(cfg.seed, 7);
    let mut per_tau = Vec::with_capacity(cfg.tau_grid.len());
    let mut exact = true;
    for &tau in &cfg.tau_grid {
        let (q, ex) = min_over_ball(h, x, v, hx, tau, &wn, cfg, &mut rng);
        exact &= ex;
        per_tau.push((tau, q * scale * scale));
    }
    let k = per_tau.len();
    let value = if k >= 2 {
        let (t1, q1) = per_tau[k - 2];
        let (t2, q2) = per_tau[k - 1];
        (t1 * q2 - t2 * q1) / (t1 - t2)
    } else {
        per_tau[0].1
    };
    let diverging = k >= 3 && {
        let (ta, qa) = per_tau[k - 3];
        let (tb, qb) = per_tau[k - 1];
        qb > 1.0 && qa > 0.0 && (qb / qa).ln() / (ta / tb).ln() > 0.5
    };
    QuotientEstimate { value, per_tau, diverging, exact_inner: exact }
}

/// Euclidean projection onto `{y : ‖y‖_∞ ≤ 1, ‖y‖₁ ≤ κ}`.
pub fn project_kyfan_dual_ball(y: &Vector, kappa: usize) -> Vector {
    let k = kappa as f64;
    let clip = |lambda: f64| y.map(|v| v.signum() * (v.abs() - lambda).clamp(0.0, 1.0));
    let mass = |p: &Vector| p.iter().map(|v| v.abs()).sum::<f64>();
    let p0 = clip(0.0);
    if mass(&p0) <= k {
        return p0;
    }
    let (mut lo, mut hi) = (0.0, y.amax());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(&clip(mid)) > k {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (mut ones, mut free_sum, mut free_cnt) = (0.0, 0.0, 0usize);
    for v in y.iter() {
        let a = v.abs() - lambda;
        if a >= 1.0 {
            ones += 1.0;
        } else if a > 0.0 {
            free_sum += v.abs();
            free_cnt += 1;
        }
    }
    let exact = if free_cnt > 0 { (free_sum + ones - k) / free_cnt as f64 } else { lambda };
    let refined = clip(exact);
    if (mass(&refined) - k).abs() <= (mass(&clip(lambda)) - k).abs() {
        refined
    } else {
        clip(lambda)
    }
}

/// `prox_{t·hκ}(x) = x − Π_{t·B}(x)` with `B = {‖y‖_∞ ≤ 1, ‖y‖₁ ≤ κ}`.
pub fn kyfan_vector_prox(x: &Vector, t: f64, kappa: usize) -> Vector {
    let p = project_kyfan_dual_ball(&(x / t), kappa) * t;
    x - p
}

/// `prox_{t·Ψκ}(X)` by spectral transfer of the vector prox.
pub fn kyfan_matrix_prox(x: &Mat, t: f64, kappa: usize) -> Result<Mat> {
    if !(t > 0.0) {
        return Err(Error::Precondition("prox parameter must be positive".into()));
    }
    let pair = svd_ordered(&RectMatrix::new(x.clone())?)?;
    let kap = kappa.min(pair.n());
    let p = kyfan_vector_prox(&pair.sigma, t, kap);
    Ok(pair.compose(&p))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub stop_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 20_000, stop_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct TiltedSolution {
    pub x: Mat,
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Minimize `ν·ϑ(X) − ⟨V, X⟩ + Ψκ(X)` over `‖X − X̄‖ ≤ δ` by three-operator splitting.
pub fn solve_tilted(spec: &ProblemSpec, v: &Mat, delta: f64, cfg: &SolverConfig) -> Result<TiltedSolution> {
    let sol = splitting(spec, v, delta, cfg)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence { iters: sol.iters, residual: sol.residual })
    }
}

fn splitting(spec: &ProblemSpec, v: &Mat, delta: f64, cfg: &SolverConfig) -> Result<TiltedSolution> {
    let xbar = spec.xbar.as_mat();
    let h = spec.hessian();
    let lip = spec.nu * sym_eigen_desc(&h).0.iter().copied().fold(0.0, f64::max);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let grad = |x: &Mat| spec.gradient(x) * spec.nu - v;
    let project = |y: Mat| {
        let d = &y - xbar;
        let nd = d.norm();
        if nd <= delta {
            y
        } else {
            xbar + d * (delta / nd)
        }
    };
    let mut z = xbar.clone();
    let mut residual = f64::INFINITY;
    let mut x = xbar.clone();
    for it in 0..cfg.max_iters {
        let xg = kyfan_matrix_prox(&z, step, spec.kappa)?;
        let xh = project(&xg * 2.0 - &z - grad(&xg) * step);
        let diff = &xh - &xg;
        residual = diff.norm() / step;
        z += &diff;
        x = xh;
        if residual <= cfg.stop_tol {
            return Ok(TiltedSolution { x, iters: it + 1, residual, converged: true });
        }
    }
    Ok(TiltedSolution { x, iters: cfg.max_iters, residual, converged: false })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub delta: f64,
    pub tilt_magnitudes: Vec<f64>,
    pub directions: usize,
    pub solver: SolverConfig,
    pub lipschitz_threshold: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            tilt_magnitudes: vec![1e-4, 1e-3, 1e-2],
            directions: 4,
            solver: SolverConfig::default(),
            lipschitz_threshold: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub tilt_id: usize,
    pub v_norm: f64,
    pub solution_displacement: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub consistent_with: TiltStatus,
    pub modulus: f64,
    pub threshold: f64,
    pub rows: Vec<ProbeRow>,
}

impl ProbeResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tilt_id,V_norm,solution_displacement,residual\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", r.tilt_id, r.v_norm, r.solution_displacement, r.residual));
        }
        out
    }
}

/// Solve over a grid of tilts and compare solution displacement with tilt displacement.
/// Solves that stall before `stop_tol` keep their last iterate; the residual column records it.
pub fn tilt_probe(spec: &ProblemSpec, cfg: &ProbeConfig, exec: Exec) -> Result<ProbeResult> {
    let (n, m) = (spec.n(), spec.m());
    let mut rng = testgen::rng(cfg.seed, 3);
    let mut tilts = vec![Mat::zeros(n, m)];
    for &mag in &cfg.tilt_magnitudes {
        for _ in 0..cfg.directions {
            let d = testgen::gaussian(&mut rng, n, m);
            let nd = d.norm();
            tilts.push(d * (mag / nd));
        }
    }
    let sols = map_indexed(exec, tilts.len(), |i| splitting(spec, &tilts[i], cfg.delta, &cfg.solver));
    let sols: Vec<TiltedSolution> = sols.into_iter().collect::<Result<_>>()?;
    let mut modulus: f64 = 0.0;
    for i in 0..tilts.len() {
        for j in i + 1..tilts.len() {
            let dv = (&tilts[i] - &tilts[j]).norm();
            if dv > 0.0 {
                modulus = modulus.max((&sols[i].x - &sols[j].x).norm() / dv);
            }
        }
    }
    let rows = tilts
        .iter()
        .zip(&sols)
        .enumerate()
        .map(|(i, (v, s))| ProbeRow {
            tilt_id: i,
            v_norm: v.norm(),
            solution_displacement: (&s.x - &sols[0].x).norm(),
            residual: s.residual,
        })
        .collect();
    let consistent_with = if modulus > cfg.lipschitz_threshold { TiltStatus::Unstable } else { TiltStatus::Stable };
    Ok(ProbeResult { consistent_with, modulus, threshold: cfg.lipschitz_threshold, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_inside_ball_is_zero() {
        let x = Vector::from_vec(vec![0.3, -0.2, 0.1]);
        assert!(kyfan_vector_prox(&x, 1.0, 2).norm() < 1e-15);
    }

    #[test]
    fn prox_with_full_kappa_soft_thresholds() {
        let x = Vector::from_vec(vec![2.0, -0.5, 1.5]);
        let p = kyfan_vector_prox(&x, 1.0, 3);
        assert!((p - Vector::from_vec(vec![1.0, 0.0, 0.5])).norm() < 1e-14);
    }

    #[test]
    fn matrix_prox_shrinks_top_value() {
        let x = Mat::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 1.0]);
        let p = kyfan_matrix_prox(&x, 1.0, 1).unwrap();
        assert!((p - Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn quotient_of_half_square() {
        let x = Mat::from_row_slice(1, 2, &[0.4, -1.0]);
        let w = Mat::from_row_slice(1, 2, &[1.0, 2.0]);
        let est = d2_quotient_oracle(&HalfSquared, &x, &x, &w, &QuotientConfig::default());
        assert!((est.value - 5.0).abs() / 5.0 < 1e-3);
        assert!(!est.diverging);
    }

    #[test]
    fn quotient_vanishes_along_active_block() {
        let x = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        let v = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let est = d2_quotient_oracle(&KyFan(1), &x, &v, &v, &QuotientConfig::default());
        assert!(est.value.abs() <= 1e-3);
    }

    #[test]
    fn quotient_diverges_outside_cone() {
        let x = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        let v = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let w = Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let est = d2_quotient_oracle(&KyFan(1), &x, &v, &w, &QuotientConfig::default());
        assert!(!est.diverging);
        let w = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        let est = d2_quotient_oracle(&KyFan(1), &Mat::zeros(2, 2), &(v * 0.5), &w, &QuotientConfig::default());
        assert!(est.diverging);
    }
}
