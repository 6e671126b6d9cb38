#![allow(dead_code)]

use kyfan_tilt::linalg::Vector;

/// Projection onto `{‖y‖∞ ≤ 1, ‖y‖₁ ≤ κ}` by enumerating every face.
///
/// Each coordinate is pinned at +1, pinned at −1, zero, or free; the ℓ1 constraint is active or not.
/// On a face with the ℓ1 constraint active, free coordinates are `zᵢ − λ·sign(zᵢ)` with λ fixed by the constraint.
pub fn project_by_faces(z: &Vector, kappa: usize) -> Vector {
    let k = z.len();
    let kap = kappa as f64;
    let mut best: Option<(f64, Vector)> = None;
    let mut code = vec![0u8; k];
    loop {
        for l1_active in [false, true] {
            let pm = code.iter().filter(|&&c| c < 2).count() as f64;
            let free: Vec<usize> = (0..k).filter(|&i| code[i] == 3).collect();
            let lambda = if l1_active && !free.is_empty() {
                let s: f64 = free.iter().map(|&i| z[i].abs()).sum();
                (s + pm - kap) / free.len() as f64
            } else {
                0.0
            };
            if lambda < 0.0 {
                continue;
            }
            let y = Vector::from_fn(k, |i, _| match code[i] {
                0 => 1.0,
                1 => -1.0,
                2 => 0.0,
                _ => z[i] - lambda * z[i].signum(),
            });
            let feasible = y.amax() <= 1.0 + 1e-12 && y.lp_norm(1) <= kap + 1e-12;
            if feasible {
                let d = (&y - z).norm();
                if best.as_ref().is_none_or(|(b, _)| d < *b) {
                    best = Some((d, y));
                }
            }
        }
        let mut i = 0;
        while i < k {
            code[i] += 1;
            if code[i] < 4 {
                break;
            }
            code[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    best.expect("origin is always a candidate").1
}

/// `x − t·Π(x/t)`, the proximal map of `t·hκ` through the face oracle.
pub fn prox_by_faces(x: &Vector, t: f64, kappa: usize) -> Vector {
    x - project_by_faces(&(x / t), kappa) * t
}
