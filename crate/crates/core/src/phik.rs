//! Φκ(Z), the sum of the κ largest eigenvalues of a symmetric matrix: value,
//! subdifferential membership, directional derivative and second subderivative.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inner, sym_eigen_desc, top_eig_sum, Mat};
use crate::spectral::{eigen_grouped, EigenGrouping};
use crate::value::SecondSubderivValue;

const GROUP_REL: f64 = 1e-8;
const PINV_REL: f64 = 1e-10;
const COND_REL: f64 = 1e-8;

/// The capped simplex `{0 ≤ z ≤ 1, Σz = mass}` of dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaSimplex {
    pub dim: usize,
    pub mass: usize,
}

impl OmegaSimplex {
    pub fn new(dim: usize, mass: usize) -> Result<Self> {
        if mass > dim {
            return Err(Error::InfeasibleXi(format!("mass {mass} exceeds dimension {dim}")));
        }
        Ok(Self { dim, mass })
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        xi.len() == self.dim
            && xi.iter().all(|&z| z >= -tol && z <= 1.0 + tol)
            && (xi.iter().sum::<f64>() - self.mass as f64).abs() <= tol
    }
}

/// Certificate `S = Σ_{l<r} Q_l Q_lᵀ + Q_r Diag(ξ) Q_rᵀ` for some eigenbasis `Q` of `Z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSubgradCert {
    pub theta_blocks: Vec<Range<usize>>,
    pub r: usize,
    pub omega: OmegaSimplex,
    pub xi: Vec<f64>,
}

fn grouped(z: &Mat) -> Result<EigenGrouping> {
    let top = z.iter().fold(0.0f64, |a, v| a.max(v.abs())) * z.nrows().max(1) as f64;
    eigen_grouped(z, GROUP_REL * top.max(1.0))
}

fn kappa_group(eg: &EigenGrouping, kappa: usize) -> Result<usize> {
    let p = eg.lambda.len();
    if kappa == 0 || kappa > p {
        return Err(Error::Precondition(format!("kappa must lie in 1..={p}, got {kappa}")));
    }
    Ok(eg.group_of(kappa - 1))
}

fn projector(q: &Mat) -> Mat {
    q * q.transpose()
}

pub fn phi_value(z: &Mat, kappa: usize) -> f64 {
    top_eig_sum(z, kappa)
}

/// Test whether a projected residual `R = QᵀS̃Q` is supported on `block × block`
/// with a spectrum in the capped simplex of mass `mass`. Returns the spectrum on success.
pub(crate) fn capped_block_spectrum(
    r: &Mat,
    block: Range<usize>,
    mass: usize,
    tol: f64,
) -> Option<Vec<f64>> {
    let mut off = 0.0;
    for i in 0..r.nrows() {
        for j in 0..r.ncols() {
            if !(block.contains(&i) && block.contains(&j)) {
                off += r[(i, j)] * r[(i, j)];
            }
        }
    }
    if off.sqrt() > tol {
        return None;
    }
    let sub = r.view((block.start, block.start), (block.len(), block.len())).into_owned();
    if (&sub - sub.transpose()).norm() > tol {
        return None;
    }
    let (vals, _) = sym_eigen_desc(&sub);
    let xi: Vec<f64> = vals.iter().copied().collect();
    let omega = OmegaSimplex { dim: block.len(), mass };
    omega.contains(&xi, tol).then_some(xi)
}

/// Subdifferential membership for Φκ at `Z`, with a certificate on success.
pub fn phi_subdiff_membership(z: &Mat, s: &Mat, kappa: usize, tol: f64) -> Result<Option<PhiSubgradCert>> {
    let eg = grouped(z)?;
    let r = kappa_group(&eg, kappa)?;
    let mut s_tilde = s.clone();
    for l in 0..r {
        s_tilde -= projector(&eg.q_group(l));
    }
    let proj = eg.q.transpose() * &s_tilde * &eg.q;
    let mass = eg.l_of(kappa - 1);
    let block = eg.theta[r].clone();
    Ok(capped_block_spectrum(&proj, block, mass, tol).map(|xi| PhiSubgradCert {
        theta_blocks: eg.theta[..r].to_vec(),
        r,
        omega: OmegaSimplex { dim: xi.len(), mass },
        xi,
    }))
}

/// Directional derivative `Σ_{l<r} tr(Q_lᵀHQ_l) + Φ_{l_κ}(Q_rᵀHQ_r)`.
pub fn phi_dir_deriv(z: &Mat, h: &Mat, kappa: usize) -> Result<f64> {
    let eg = grouped(z)?;
    let r = kappa_group(&eg, kappa)?;
    let mut acc = 0.0;
    for l in 0..r {
        let q = eg.q_group(l);
        acc += (q.transpose() * h * &q).trace();
    }
    let q = eg.q_group(r);
    acc += top_eig_sum(&(q.transpose() * h * &q), eg.l_of(kappa - 1));
    Ok(acc)
}

/// `(μ I − Z)†` in the eigenbasis, annihilating the group `skip` exactly.
fn shifted_pinv(eg: &EigenGrouping, mu: f64, skip: Option<usize>, znorm: f64) -> Mat {
    let p = eg.lambda.len();
    let cut = PINV_REL * (mu.abs() + znorm).max(1.0);
    let mut out = Mat::zeros(p, p);
    for i in 0..p {
        if skip.is_some_and(|l| eg.theta[l].contains(&i)) {
            continue;
        }
        let d = mu - eg.lambda[i];
        if d.abs() > cut {
            let q = eg.q.column(i);
            out += (q * q.transpose()) / d;
        }
    }
    out
}

/// Second subderivative of Φκ at `Z` for `S ∈ ∂Φκ(Z)` in direction `H`.
///
/// Finite only where `Φ_{l_κ}(Q_rᵀHQ_r) = ⟨S̃, H⟩`; `+∞` elsewhere.
pub fn phi_second_subderiv(z: &Mat, s: &Mat, h: &Mat, kappa: usize) -> Result<SecondSubderivValue> {
    let scale = 1.0 + s.norm();
    if phi_subdiff_membership(z, s, kappa, 1e-8 * scale)?.is_none() {
        return Err(Error::Precondition("S is not a subgradient of Phi_kappa at Z".into()));
    }
    let eg = grouped(z)?;
    let r = kappa_group(&eg, kappa)?;
    let mut s_tilde = s.clone();
    for l in 0..r {
        s_tilde -= projector(&eg.q_group(l));
    }
    let qr = eg.q_group(r);
    let lhs = top_eig_sum(&(qr.transpose() * h * &qr), eg.l_of(kappa - 1));
    if (lhs - inner(&s_tilde, h)).abs() > COND_REL * (1.0 + h.norm()) {
        return Ok(SecondSubderivValue::infinite());
    }
    let znorm = eg.lambda.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut upper = 0.0;
    for l in 0..r {
        let q = eg.q_group(l);
        let pinv = shifted_pinv(&eg, eg.mu[l], Some(l), znorm);
        upper += (q.transpose() * h * pinv * h * &q).trace();
    }
    let pinv = shifted_pinv(&eg, eg.mu[r], Some(r), znorm);
    let active = inner(&s_tilde, &(h * pinv * h));
    Ok(SecondSubderivValue::from_terms(vec![
        ("upper_groups".into(), 2.0 * upper),
        ("active_group".into(), 2.0 * active),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    fn diag(d: &[f64]) -> Mat {
        Mat::from_diagonal(&Vector::from_row_slice(d))
    }

    #[test]
    fn value_examples() {
        assert_eq!(phi_value(&diag(&[3.0, 2.0, 1.0]), 2), 5.0);
        assert!((phi_value(&Mat::identity(4, 4), 3) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn membership_at_simple_top() {
        let z = diag(&[3.0, 2.0, 1.0]);
        assert!(phi_subdiff_membership(&z, &diag(&[1.0, 0.0, 0.0]), 1, 1e-9).unwrap().is_some());
        assert!(phi_subdiff_membership(&z, &diag(&[0.5, 0.0, 0.0]), 1, 1e-9).unwrap().is_none());
    }

    #[test]
    fn membership_at_identity() {
        let z = Mat::identity(3, 3);
        let good = diag(&[1.0, 0.6, 0.4]);
        let cert = phi_subdiff_membership(&z, &good, 2, 1e-9).unwrap().unwrap();
        assert_eq!(cert.omega.mass, 2);
        assert!(phi_subdiff_membership(&z, &diag(&[1.2, 0.4, 0.4]), 2, 1e-9).unwrap().is_none());
        assert!(phi_subdiff_membership(&z, &diag(&[1.0, 0.5, 0.4]), 2, 1e-9).unwrap().is_none());
    }

    #[test]
    fn dir_deriv_examples() {
        let z = diag(&[3.0, 2.0, 1.0]);
        let h = diag(&[0.7, -2.0, 5.0]);
        assert!((phi_dir_deriv(&z, &h, 1).unwrap() - 0.7).abs() < 1e-14);
        let h = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let top = sym_eigen_desc(&h).0[0];
        assert!((phi_dir_deriv(&Mat::zeros(2, 2), &h, 1).unwrap() - top).abs() < 1e-12);
    }

    #[test]
    fn second_subderiv_hand_value() {
        let z = diag(&[3.0, 2.0, 1.0]);
        let s = diag(&[1.0, 0.0, 0.0]);
        let mut h = Mat::zeros(3, 3);
        h[(0, 1)] = 1.0;
        h[(1, 0)] = 1.0;
        let v = phi_second_subderiv(&z, &s, &h, 1).unwrap();
        assert!((v.finite().unwrap() - 2.0).abs() < 1e-12);
        let zero = phi_second_subderiv(&z, &s, &Mat::zeros(3, 3), 1).unwrap();
        assert_eq!(zero.finite(), Some(0.0));
    }

    #[test]
    fn second_subderiv_fractional_multiplier() {
        let z = diag(&[1.0, 1.0, 0.0]);
        let s = diag(&[0.5, 0.5, 0.0]);
        let mut h = Mat::zeros(3, 3);
        h[(0, 2)] = 1.0;
        h[(2, 0)] = 1.0;
        let v = phi_second_subderiv(&z, &s, &h, 1).unwrap();
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-12);
        let off = diag(&[1.0, 0.0, 0.0]);
        assert!(!phi_second_subderiv(&z, &s, &off, 1).unwrap().value.is_finite());
    }

    #[test]
    fn second_subderiv_rejects_non_subgradient() {
        let z = diag(&[3.0, 2.0, 1.0]);
        assert!(phi_second_subderiv(&z, &diag(&[0.5, 0.0, 0.0]), &z, 1).is_err());
    }
}
