//! Tolerance table. Every numeric decision in the crate reads its threshold from here.

use serde::{Deserialize, Serialize};

/// All tolerances, with defaults.
///
/// | name | default | meaning |
/// |------|---------|---------|
/// | `group_rel` | 1e-8 | singular/eigen value grouping, scaled by `max(1, σ₁)` |
/// | `orth` | 1e-10 | orthogonality checks on frames |
/// | `pinv_rel` | 1e-10 | pseudo-inverse cutoff, scaled by `max(1, |μ|+‖Z‖)` |
/// | `cond_rel` | 1e-8 | Φκ second-order condition, scaled by `1+‖H‖_F` |
/// | `sigma_class` | 1e-7 | classification of σ(Γ) into {1}, (0,1), {0} |
/// | `sum_rel` | 1e-7 | sum conditions, scaled by κ |
/// | `membership` | 1e-8 | simultaneous SVD and multiplier residuals |
/// | `cone` | 1e-8 | critical cone residuals, scaled by `1+‖G‖_F` |
/// | `zero_set` | 1e-9 | zero-set block residuals, scaled by `1+‖G‖_F` |
/// | `kernel_rel` | 1e-9 | Hessian kernel cutoff relative to `λ_max` |
/// | `kernel_floor` | 1e-12 | absolute floor for the kernel cutoff |
/// | `intersect` | 1e-8 | sine of principal angle treated as zero |
/// | `margin` | 1e-8 | cone-constraint margin accepted for witnesses |
/// | `witness` | 1e-8 | witness residual bounds |
/// | `psd` | 1e-9 | Hessian PSD check, relative to `max(1, λ_max)` |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub group_rel: f64,
    pub orth: f64,
    pub pinv_rel: f64,
    pub cond_rel: f64,
    pub sigma_class: f64,
    pub sum_rel: f64,
    pub membership: f64,
    pub cone: f64,
    pub zero_set: f64,
    pub kernel_rel: f64,
    pub kernel_floor: f64,
    pub intersect: f64,
    pub margin: f64,
    pub witness: f64,
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            group_rel: 1e-8,
            orth: 1e-10,
            pinv_rel: 1e-10,
            cond_rel: 1e-8,
            sigma_class: 1e-7,
            sum_rel: 1e-7,
            membership: 1e-8,
            cone: 1e-8,
            zero_set: 1e-9,
            kernel_rel: 1e-9,
            kernel_floor: 1e-12,
            intersect: 1e-8,
            margin: 1e-8,
            witness: 1e-8,
            psd: 1e-9,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 15] = [
        "group_rel",
        "orth",
        "pinv_rel",
        "cond_rel",
        "sigma_class",
        "sum_rel",
        "membership",
        "cone",
        "zero_set",
        "kernel_rel",
        "kernel_floor",
        "intersect",
        "margin",
        "witness",
        "psd",
    ];

    /// Set a tolerance by name. Returns `false` for unknown names or non-positive values.
    pub fn set(&mut self, name: &str, value: f64) -> bool {
        if !(value.is_finite() && value > 0.0) {
            return false;
        }
        let slot = match name {
            "group_rel" => &mut self.group_rel,
            "orth" => &mut self.orth,
            "pinv_rel" => &mut self.pinv_rel,
            "cond_rel" => &mut self.cond_rel,
            "sigma_class" => &mut self.sigma_class,
            "sum_rel" => &mut self.sum_rel,
            "membership" => &mut self.membership,
            "cone" => &mut self.cone,
            "zero_set" => &mut self.zero_set,
            "kernel_rel" => &mut self.kernel_rel,
            "kernel_floor" => &mut self.kernel_floor,
            "intersect" => &mut self.intersect,
            "margin" => &mut self.margin,
            "witness" => &mut self.witness,
            "psd" => &mut self.psd,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Absolute grouping tolerance for a spectrum whose largest magnitude is `top`.
    pub fn group_tol(&self, top: f64) -> f64 {
        self.group_rel * top.abs().max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_by_name() {
        let mut t = Tolerances::default();
        for name in Tolerances::NAMES {
            assert!(t.set(name, 0.5), "{name}");
        }
        assert_eq!(t.cone, 0.5);
        assert!(!t.set("nope", 1.0));
        assert!(!t.set("cone", -1.0));
    }
}
