//! Seeded cross-validation suites behind `oracle-validate`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{rel_err, Mat};
use crate::oracle::{d2_quotient_oracle, kyfan_matrix_prox, kyfan_vector_prox, project_kyfan_dual_ball, KyFan, QuotientConfig};
use crate::par::{map_indexed, Exec};
use crate::secder::{d2_nuclear, d2_psi_explicit, d2_psi_general, d2_spectral};
use crate::spectral::RectMatrix;
use crate::subgrad::{psi_value, subdiff_membership};
use crate::testgen::{self, SpectrumOptions};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Formulas,
    Subgrad,
    Prox,
    Quotient,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Formulas, Suite::Subgrad, Suite::Prox, Suite::Quotient];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Formulas => "formulas",
            Suite::Subgrad => "subgrad",
            Suite::Prox => "prox",
            Suite::Quotient => "quotient",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub instances: usize,
    pub checks: usize,
    pub failures: usize,
    pub max_error: f64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub count: usize,
    pub suites: Vec<SuiteSummary>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {} count {}", self.seed, self.count);
        let _ = writeln!(out, "{:<10} {:>9} {:>8} {:>9} {:>12}  status", "suite", "instances", "checks", "failures", "max_error");
        for s in &self.suites {
            let status = if s.failures == 0 { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:<10} {:>9} {:>8} {:>9} {:>12.3e}  {status}",
                s.suite.name(),
                s.instances,
                s.checks,
                s.failures,
                s.max_error
            );
            if let Some(f) = &s.first_failure {
                let _ = writeln!(out, "  first failure: {f}");
            }
        }
        out
    }
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: usize,
    max_error: f64,
    first_failure: Option<String>,
}

impl Tally {
    /// Record an error measure against its bound.
    fn check(&mut self, what: &str, err: f64, bound: f64) {
        self.checks += 1;
        if err.is_finite() {
            self.max_error = self.max_error.max(err);
        }
        if !(err <= bound) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(format!("{what}: {err:.3e} > {bound:.1e}"));
            }
        }
    }

    fn flag(&mut self, what: &str, ok: bool) {
        self.check(what, if ok { 0.0 } else { 1.0 }, 0.5);
    }

    fn merge(mut self, other: Tally, index: usize) -> Tally {
        self.checks += other.checks;
        self.failures += other.failures;
        self.max_error = self.max_error.max(other.max_error);
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure.map(|f| format!("instance {index}: {f}"));
        }
        self
    }
}

fn formulas(seed: u64, i: usize, tol: &Tolerances) -> Tally {
    let mut t = Tally::default();
    let mut r = testgen::rng(seed, i as u64);
    let inst = testgen::random_instance(&mut r, 5, 7, &SpectrumOptions::default());
    let Some(cert) = subdiff_membership(&inst.x, &inst.gamma, inst.kappa, tol).ok().flatten() else {
        t.flag("generated pair is a member", false);
        return t;
    };
    let g = testgen::cone_direction(&mut r, &inst);
    let e = d2_psi_explicit(&cert, &g, tol).finite();
    let q = d2_psi_general(&inst.x, &inst.gamma, &g, inst.kappa, tol).ok().and_then(|v| v.finite());
    let (Some(e), Some(q)) = (e, q) else {
        t.flag("cone direction has a finite value", false);
        return t;
    };
    t.check("explicit vs general", rel_err(e, q), 1e-9);
    t.check("nonnegativity", (-e).max(0.0), 1e-9);
    for s in [0.5, 2.0, 10.0] {
        let es = d2_psi_explicit(&cert, &(&g * s), tol).finite().unwrap_or(f64::INFINITY);
        t.check("homogeneity", rel_err(es, s * s * e), 1e-9);
    }
    let special = if inst.kappa == 1 {
        d2_spectral(&inst.x, &inst.gamma, &g, tol).ok()
    } else if inst.kappa == inst.n() {
        d2_nuclear(&inst.x, &inst.gamma, &g, tol).ok()
    } else {
        None
    };
    if let Some(s) = special {
        t.check("specialization", rel_err(s.finite().unwrap_or(f64::INFINITY), e), 1e-9);
    }
    t
}

fn subgrad(seed: u64, i: usize, tol: &Tolerances) -> Tally {
    let mut t = Tally::default();
    let mut r = testgen::rng(seed, i as u64);
    let inst = testgen::random_instance(&mut r, 5, 7, &SpectrumOptions::default());
    let member = subdiff_membership(&inst.x, &inst.gamma, inst.kappa, tol).ok().flatten().is_some();
    t.flag("generated pair is a member", member);
    let x = inst.x.as_mat();
    let px = psi_value(x, inst.kappa);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let y = x + testgen::gaussian(&mut r, inst.n(), inst.m()) * r.gen_range(0.01..2.0);
        let slack = psi_value(&y, inst.kappa) - px - inst.gamma.dot(&(&y - x));
        worst = worst.max(-slack);
    }
    t.check("convexity inequality", worst, 1e-9);
    t
}

fn prox(seed: u64, i: usize, tol: &Tolerances) -> Tally {
    let mut t = Tally::default();
    let mut r = testgen::rng(seed, i as u64);
    let n = r.gen_range(1..=4);
    let m = r.gen_range(n..=6);
    let kappa = r.gen_range(1..=n);
    let step = r.gen_range(0.2..2.0);
    let x: Mat = testgen::gaussian(&mut r, n, m) * 2.0;
    match kyfan_matrix_prox(&x, step, kappa) {
        Ok(p) => {
            let g = (&x - &p) / step;
            let ok = RectMatrix::new(p)
                .ok()
                .and_then(|pm| subdiff_membership(&pm, &g, kappa, tol).ok().flatten())
                .is_some();
            t.flag("matrix prox optimality", ok);
        }
        Err(_) => t.flag("matrix prox computed", false),
    }
    let k = r.gen_range(1..=6);
    let kv = r.gen_range(1..=k);
    let a = testgen::random_vector(&mut r, k, 3.0);
    let b = testgen::random_vector(&mut r, k, 3.0);
    let pa = kyfan_vector_prox(&a, step, kv);
    let pb = kyfan_vector_prox(&b, step, kv);
    t.check("nonexpansiveness", ((&pa - &pb).norm() - (&a - &b).norm()).max(0.0), 1e-10);
    let proj = project_kyfan_dual_ball(&(&a / step), kv) * step;
    t.check("Moreau decomposition", (&pa + proj - &a).norm(), 1e-10);
    t
}

fn quotient(seed: u64, i: usize, tol: &Tolerances) -> Tally {
    let mut t = Tally::default();
    let mut r = testgen::rng(seed, i as u64);
    let opts = SpectrumOptions { min_gap: 0.5, min_sigma: 0.5, max_multiplicity: 2 };
    let inst = testgen::random_instance(&mut r, 4, 5, &opts);
    let Some(cert) = subdiff_membership(&inst.x, &inst.gamma, inst.kappa, tol).ok().flatten() else {
        t.flag("generated pair is a member", false);
        return t;
    };
    let g = testgen::cone_direction(&mut r, &inst);
    let Some(e) = d2_psi_explicit(&cert, &g, tol).finite() else {
        t.flag("cone direction has a finite value", false);
        return t;
    };
    let cfg = QuotientConfig { seed: seed ^ i as u64, ..QuotientConfig::default() };
    let est = d2_quotient_oracle(&KyFan(inst.kappa), inst.x.as_mat(), &inst.gamma, &g, &cfg);
    t.check("oracle vs closed form", (est.value - e).abs() / (1.0 + e), 1e-2);
    t
}

pub fn run_suite(suite: Suite, seed: u64, count: usize, exec: Exec) -> SuiteSummary {
    let tol = Tolerances::default();
    let f: fn(u64, usize, &Tolerances) -> Tally = match suite {
        Suite::Formulas => formulas,
        Suite::Subgrad => subgrad,
        Suite::Prox => prox,
        Suite::Quotient => quotient,
    };
    let tallies = map_indexed(exec, count, |i| f(seed, i, &tol));
    let total = tallies.into_iter().enumerate().fold(Tally::default(), |acc, (i, t)| acc.merge(t, i));
    SuiteSummary {
        suite,
        instances: count,
        checks: total.checks,
        failures: total.failures,
        max_error: total.max_error,
        first_failure: total.first_failure,
    }
}

pub fn run_oracle_validate(suites: &[Suite], seed: u64, count: usize, exec: Exec) -> ValidationReport {
    let mut list: Vec<Suite> = if suites.is_empty() { Suite::ALL.to_vec() } else { suites.to_vec() };
    list.sort();
    list.dedup();
    let suites: Vec<SuiteSummary> = list.into_iter().map(|s| run_suite(s, seed, count, exec)).collect();
    let passed = suites.iter().all(|s| s.failures == 0);
    ValidationReport { seed, count, suites, passed }
}
