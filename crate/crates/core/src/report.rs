//! Problem files, analysis pipelines and their JSON reports.
//!
//! Reports are deterministic for fixed inputs and seeds; wall-clock timings are attached only
//! on request.

use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_desc, Mat, Vector};
use crate::oracle::{d2_quotient_oracle, tilt_probe, KyFan, ProbeConfig, ProbeResult, QuotientConfig, QuotientEstimate};
use crate::par::Exec;
use crate::secder::{critical_cone_membership, d2_psi_explicit, d2_psi_general, ConeCase, CriticalConeCert};
use crate::spectral::{MatrixJson, RectMatrix};
use crate::subgrad::{subdiff_check, subdiff_distance, SubgradCertificate, SubgradCheck};
use crate::testgen;
use crate::tilt::{analyze_tilt, BlockDims, ProblemSpec, Theta, TiltOptions, TiltVerdict, UpsilonSpec};
use crate::tol::Tolerances;
use crate::value::{ExtReal, Reason};

/// Exit code for input and precondition errors.
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaFile {
    Quadratic {
        #[serde(rename = "Q")]
        q: MatrixJson,
        #[serde(rename = "L")]
        l: MatrixJson,
    },
    LeastSquares {
        #[serde(rename = "A")]
        a: MatrixJson,
        b: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOptions {
    pub rotation_samples: usize,
    pub seed: u64,
}

/// The problem schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    pub kappa: usize,
    pub nu: f64,
    #[serde(rename = "X")]
    pub x: MatrixJson,
    pub theta: ThetaFile,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: ProblemOptions,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn schema(pointer: &str, message: impl Into<String>) -> Error {
    Error::Schema { pointer: pointer.into(), message: message.into() }
}

/// Deserialize any schema type from JSON text, reporting failures with a JSON pointer.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = pointer_of(e.path());
        schema(&pointer, e.inner().to_string())
    })?;
    de.end().map_err(|e| schema("/", e.to_string()))?;
    Ok(value)
}

fn matrix_at(mj: &MatrixJson, pointer: &str, rows: usize, cols: usize) -> Result<Mat> {
    if mj.rows != rows || mj.cols != cols {
        return Err(schema(pointer, format!("expected {rows}x{cols}, found {}x{}", mj.rows, mj.cols)));
    }
    mj.to_mat().map_err(|e| schema(&format!("{pointer}/data"), e.to_string()))
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    /// Check every dimension against `n`, `m` and build the problem.
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return Err(schema("/n", "n must be positive"));
        }
        if m < n {
            return Err(schema("/m", format!("m must be at least n = {n}")));
        }
        if self.kappa == 0 || self.kappa > n {
            return Err(schema("/kappa", format!("kappa must lie in 1..={n}")));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(schema("/nu", "nu must be positive and finite"));
        }
        let x = matrix_at(&self.x, "/X", n, m)?;
        let d = n * m;
        let theta = match &self.theta {
            ThetaFile::Quadratic { q, l } => {
                Theta::Quadratic { q: matrix_at(q, "/theta/Q", d, d)?, l: matrix_at(l, "/theta/L", n, m)? }
            }
            ThetaFile::LeastSquares { a, b } => {
                if a.cols != d {
                    return Err(schema("/theta/A", format!("A must have {d} columns, found {}", a.cols)));
                }
                if b.len() != a.rows {
                    return Err(schema("/theta/b", format!("b must have {} entries, found {}", a.rows, b.len())));
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(schema("/theta/b", "non-finite entry"));
                }
                Theta::LeastSquares { a: matrix_at(a, "/theta/A", a.rows, d)?, b: Vector::from_column_slice(b) }
            }
        };
        let xbar = RectMatrix::new(x).map_err(|e| schema("/X", e.to_string()))?;
        ProblemSpec::new(xbar, self.nu, self.kappa, theta)
    }
}

/// Flags shared by the analysis commands.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    /// Named tolerance overrides, applied after the problem file's.
    pub tol_overrides: Vec<(String, f64)>,
    pub seed: Option<u64>,
    pub rotation_samples: Option<usize>,
    pub probe: bool,
    pub d2_samples: usize,
    pub timings: bool,
    pub exec: Exec,
}

impl RunFlags {
    fn tolerances(&self, base: Tolerances) -> Result<Tolerances> {
        let mut tol = base;
        for (name, value) in &self.tol_overrides {
            if !tol.set(name, *value) {
                return Err(Error::Schema {
                    pointer: format!("/tolerances/{name}"),
                    message: format!("unknown tolerance or non-positive value {value}"),
                });
            }
        }
        Ok(tol)
    }

    fn tilt_options(&self, problem: &ProblemFile) -> TiltOptions {
        TiltOptions {
            seed: self.seed.unwrap_or(problem.options.seed),
            rotation_samples: self.rotation_samples.unwrap_or(problem.options.rotation_samples),
            exec: self.exec,
            ..TiltOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexSets {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub beta1: Vec<usize>,
    pub beta_plus: Vec<usize>,
    pub beta0: Vec<usize>,
    pub c: Vec<usize>,
}

impl IndexSets {
    pub fn of(cert: &SubgradCertificate) -> Self {
        let list = |r: &Range<usize>| r.clone().collect::<Vec<_>>();
        Self {
            alpha: list(&cert.alpha),
            beta: list(&cert.beta),
            gamma: list(&cert.gamma),
            beta1: list(&cert.beta1),
            beta_plus: list(&cert.beta_plus),
            beta0: list(&cert.beta0),
            c: list(&cert.c()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    #[serde(flatten)]
    pub certificate: SubgradCertificate,
    pub sigma_x: Vec<f64>,
    #[serde(rename = "U")]
    pub u: MatrixJson,
    #[serde(rename = "V")]
    pub v: MatrixJson,
}

impl CertificateSummary {
    pub fn of(cert: &SubgradCertificate) -> Self {
        Self {
            certificate: cert.clone(),
            sigma_x: cert.pair.sigma.iter().copied().collect(),
            u: MatrixJson::from_mat(&cert.pair.u),
            v: MatrixJson::from_mat(&cert.pair.v),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UpsilonSummary {
    pub case: ConeCase,
    pub block_dims: BlockDims,
    pub hull_dim: usize,
    pub constraint: String,
    pub exact: bool,
}

impl UpsilonSummary {
    pub fn of(ups: &UpsilonSpec) -> Self {
        Self {
            case: ups.case,
            block_dims: ups.block_dims,
            hull_dim: ups.hull_dim(),
            constraint: ups.constraint_text(),
            exact: ups.exact,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stationarity {
    #[serde(rename = "Gamma_bar")]
    pub gamma_bar: MatrixJson,
    pub member: bool,
    /// Frobenius distance from `Γ̄` to `∂Ψκ(X̄)`.
    pub distance: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianSummary {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct D2Sample {
    pub label: String,
    #[serde(rename = "G")]
    pub direction: MatrixJson,
    pub value: ExtReal,
    pub reason: Reason,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub certificate_ms: f64,
    pub verdict_ms: f64,
    pub probe_ms: f64,
}

/// Everything `analyze` knows about one problem.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub problem: ProblemFile,
    pub tolerances: Tolerances,
    pub tilt_options: TiltOptions,
    pub hessian: Option<HessianSummary>,
    pub stationarity: Option<Stationarity>,
    pub certificate: Option<CertificateSummary>,
    pub index_sets: Option<IndexSets>,
    pub upsilon: Option<UpsilonSummary>,
    pub d2_samples: Vec<D2Sample>,
    pub verdict: Option<TiltVerdict>,
    pub oracle: Option<ProbeResult>,
    pub error: Option<String>,
    pub timings: Option<Timings>,
    pub exit_code: i32,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn hessian_summary(spec: &ProblemSpec) -> HessianSummary {
    let (vals, _) = sym_eigen_desc(&spec.hessian());
    let lambda_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    HessianSummary { lambda_max, lambda_min }
}

fn stationarity(spec: &ProblemSpec, tol: &Tolerances) -> Result<(Stationarity, Option<SubgradCertificate>)> {
    let gamma = spec.gamma_bar();
    let check = subdiff_check(&spec.xbar, &gamma, spec.kappa, tol)?;
    let distance = subdiff_distance(&spec.xbar, &gamma, spec.kappa, tol)?;
    let (member, reason, cert) = match check {
        SubgradCheck::Member(c) => (true, None, Some(*c)),
        SubgradCheck::NotMember(why) => (false, Some(why), None),
    };
    Ok((Stationarity { gamma_bar: MatrixJson::from_mat(&gamma), member, distance, reason }, cert))
}

fn d2_samples(cert: &SubgradCertificate, ups: &UpsilonSpec, count: usize, seed: u64, tol: &Tolerances) -> Vec<D2Sample> {
    let (n, m) = (cert.n(), cert.m());
    let mut rng = testgen::rng(seed, 11);
    let hull = ups.hull_vectors();
    let mut out = Vec::with_capacity(2 * count);
    for i in 0..count {
        let g = testgen::unit_direction(&mut rng, n, m);
        let mut push = |label: String, g: Mat| {
            let v = d2_psi_explicit(cert, &g, tol);
            out.push(D2Sample { label, direction: MatrixJson::from_mat(&g), value: v.value, reason: v.reason });
        };
        push(format!("random_{i}"), g.clone());
        if hull.ncols() > 0 {
            let p = &hull * (hull.transpose() * crate::linalg::vec_rm(&g));
            push(format!("hull_projection_{i}"), crate::linalg::unvec_rm(&p, n, m));
        }
    }
    out
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Full pipeline: stationarity, certificate, Υ, verdict, optional d² samples and probe.
///
/// Schema errors are returned as `Err`. Precondition failures (non-PSD Hessian, `Γ̄` not a
/// subgradient) produce a report with exit code 3 and the diagnostic filled in.
pub fn run_analyze(problem: &ProblemFile, flags: &RunFlags) -> Result<AnalysisReport> {
    let spec = problem.to_spec()?;
    let tol = flags.tolerances(problem.tolerances)?;
    let opts = flags.tilt_options(problem);
    let mut report = AnalysisReport {
        problem: problem.clone(),
        tolerances: tol,
        tilt_options: opts,
        hessian: Some(hessian_summary(&spec)),
        stationarity: None,
        certificate: None,
        index_sets: None,
        upsilon: None,
        d2_samples: Vec::new(),
        verdict: None,
        oracle: None,
        error: None,
        timings: None,
        exit_code: EXIT_INPUT,
    };
    let t0 = Instant::now();
    let (stat, cert) = stationarity(&spec, &tol)?;
    report.stationarity = Some(stat);
    if cert.is_none() {
        report.error = Some("stationarity failed: -nu grad theta(X) is not a subgradient of the Ky-Fan norm".into());
        return Ok(report);
    }
    let certificate_ms = ms(t0);
    let t1 = Instant::now();
    let (cert, ups, verdict) = match analyze_tilt(&spec, &tol, &opts) {
        Ok(v) => v,
        Err(e) => {
            report.error = Some(e.to_string());
            return Ok(report);
        }
    };
    let verdict_ms = ms(t1);
    report.certificate = Some(CertificateSummary::of(&cert));
    report.index_sets = Some(IndexSets::of(&cert));
    report.upsilon = Some(UpsilonSummary::of(&ups));
    report.d2_samples = d2_samples(&cert, &ups, flags.d2_samples, opts.seed, &tol);
    report.exit_code = verdict.status.exit_code();
    report.verdict = Some(verdict);
    let t2 = Instant::now();
    if flags.probe {
        let cfg = ProbeConfig { seed: opts.seed, ..ProbeConfig::default() };
        report.oracle = Some(tilt_probe(&spec, &cfg, flags.exec)?);
    }
    if flags.timings {
        report.timings = Some(Timings { certificate_ms, verdict_ms, probe_ms: ms(t2) });
    }
    Ok(report)
}

/// Output of `tilt`: Υ and the verdict, with the optional probe.
#[derive(Debug, Clone, Serialize)]
pub struct TiltReport {
    pub upsilon: UpsilonSummary,
    pub verdict: TiltVerdict,
    pub oracle: Option<ProbeResult>,
    pub exit_code: i32,
}

pub fn run_tilt(problem: &ProblemFile, flags: &RunFlags) -> Result<TiltReport> {
    let spec = problem.to_spec()?;
    let tol = flags.tolerances(problem.tolerances)?;
    let opts = flags.tilt_options(problem);
    let (_, ups, verdict) = analyze_tilt(&spec, &tol, &opts)?;
    let oracle = if flags.probe {
        let cfg = ProbeConfig { seed: opts.seed, ..ProbeConfig::default() };
        Some(tilt_probe(&spec, &cfg, flags.exec)?)
    } else {
        None
    };
    Ok(TiltReport { upsilon: UpsilonSummary::of(&ups), exit_code: verdict.status.exit_code(), verdict, oracle })
}

/// Output of `subgrad-check`.
#[derive(Debug, Clone, Serialize)]
pub struct SubgradReport {
    pub member: bool,
    pub reason: Option<String>,
    pub distance: f64,
    pub certificate: Option<CertificateSummary>,
    pub index_sets: Option<IndexSets>,
}

fn gamma_for(spec: &ProblemSpec, gamma: Option<&MatrixJson>) -> Result<Mat> {
    match gamma {
        Some(g) => matrix_at(g, "/Gamma", spec.n(), spec.m()),
        None => Ok(spec.gamma_bar()),
    }
}

/// Membership of `Γ` (default `−ν∇ϑ(X̄)`) in `∂Ψκ(X̄)`.
pub fn run_subgrad_check(problem: &ProblemFile, gamma: Option<&MatrixJson>, flags: &RunFlags) -> Result<SubgradReport> {
    let spec = problem.to_spec()?;
    let tol = flags.tolerances(problem.tolerances)?;
    let gamma = gamma_for(&spec, gamma)?;
    let distance = subdiff_distance(&spec.xbar, &gamma, spec.kappa, &tol)?;
    Ok(match subdiff_check(&spec.xbar, &gamma, spec.kappa, &tol)? {
        SubgradCheck::Member(c) => SubgradReport {
            member: true,
            reason: None,
            distance,
            index_sets: Some(IndexSets::of(&c)),
            certificate: Some(CertificateSummary::of(&c)),
        },
        SubgradCheck::NotMember(why) => {
            SubgradReport { member: false, reason: Some(why), distance, certificate: None, index_sets: None }
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct D2CrossCheck {
    pub general: ExtReal,
    pub oracle: QuotientEstimate,
    /// `|oracle − closed form| / (1 + closed form)` when the closed form is finite.
    pub oracle_rel_gap: Option<f64>,
}

/// Output of `d2`: `{value | "+inf", reason, terms}` plus the cone certificate.
#[derive(Debug, Clone, Serialize)]
pub struct D2Report {
    pub value: ExtReal,
    pub reason: Reason,
    pub terms: Vec<(String, f64)>,
    pub cone: CriticalConeCert,
    pub cross_check: Option<D2CrossCheck>,
}

/// `d²Ψκ(X̄ | Γ)(G)` by the closed form, optionally cross-checked.
pub fn run_d2(
    problem: &ProblemFile,
    g: &MatrixJson,
    gamma: Option<&MatrixJson>,
    cross_check: bool,
    flags: &RunFlags,
) -> Result<D2Report> {
    let spec = problem.to_spec()?;
    let tol = flags.tolerances(problem.tolerances)?;
    let gamma = gamma_for(&spec, gamma)?;
    let g = matrix_at(g, "/G", spec.n(), spec.m())?;
    let cert = match subdiff_check(&spec.xbar, &gamma, spec.kappa, &tol)? {
        SubgradCheck::Member(c) => *c,
        SubgradCheck::NotMember(why) => return Err(Error::NotSubgradient(why)),
    };
    let cone = critical_cone_membership(&cert, &g, &tol);
    let v = d2_psi_explicit(&cert, &g, &tol);
    let cross_check = if cross_check {
        let general = d2_psi_general(&spec.xbar, &gamma, &g, spec.kappa, &tol)?.value;
        let cfg = QuotientConfig { seed: flags.seed.unwrap_or(problem.options.seed), ..QuotientConfig::default() };
        let oracle = d2_quotient_oracle(&KyFan(spec.kappa), spec.xbar.as_mat(), &gamma, &g, &cfg);
        let oracle_rel_gap = v.finite().map(|e| (oracle.value - e).abs() / (1.0 + e));
        Some(D2CrossCheck { general, oracle, oracle_rel_gap })
    } else {
        None
    };
    Ok(D2Report { value: v.value, reason: v.reason, terms: v.terms, cone, cross_check })
}
