//! Seeded random instances for validation suites: matrices with designed singular-value
//! groups, subgradients in each case, and directions inside or outside the critical cone.

use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{skew, sym, Mat, Vector};
use crate::secder::ConeCase;
use crate::spectral::RectMatrix;

pub type Rng64 = ChaCha8Rng;

/// Deterministic generator for a (seed, stream) pair.
pub fn rng(seed: u64, stream: u64) -> Rng64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn gaussian(rng: &mut Rng64, n: usize, m: usize) -> Mat {
    Mat::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-like random orthogonal matrix (QR of a Gaussian with sign fix).
pub fn orthogonal(rng: &mut Rng64, k: usize) -> Mat {
    if k == 0 {
        return Mat::zeros(0, 0);
    }
    let qr = gaussian(rng, k, k).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn psd(rng: &mut Rng64, k: usize, scale: f64) -> Mat {
    let rank = if k == 0 { 0 } else { rng.gen_range(0..=k) };
    let f = gaussian(rng, k, rank) * scale;
    &f * f.transpose()
}

/// Options shaping the singular spectrum of generated matrices.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub min_gap: f64,
    pub min_sigma: f64,
    pub max_multiplicity: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { min_gap: 0.2, min_sigma: 0.3, max_multiplicity: 3 }
    }
}

/// A generated `(X, Γ)` pair with its construction frame.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: RectMatrix,
    pub gamma: Mat,
    pub kappa: usize,
    pub case: ConeCase,
    pub u0: Mat,
    pub v0: Mat,
    pub sigma_x: Vec<f64>,
    pub sigma_gamma: Vec<f64>,
    pub alpha: Range<usize>,
    pub beta: Range<usize>,
    pub beta1: Range<usize>,
    pub beta_plus: Range<usize>,
    pub beta0: Range<usize>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn m(&self) -> usize {
        self.x.cols()
    }

    /// `U₀ K V₀ᵀ`.
    pub fn lift(&self, k: &Mat) -> Mat {
        &self.u0 * k * self.v0.transpose()
    }
}

/// Positive group sizes summing to `total`.
fn compositions(rng: &mut Rng64, total: usize, max_mult: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = total;
    while left > 0 {
        let k = rng.gen_range(1..=left.min(max_mult));
        out.push(k);
        left -= k;
    }
    out
}

/// Random nonincreasing spectrum with `rank` positive entries in groups.
fn spectrum(rng: &mut Rng64, n: usize, rank: usize, opts: &SpectrumOptions) -> Vec<f64> {
    let sizes = compositions(rng, rank, opts.max_multiplicity);
    let mut values = Vec::with_capacity(sizes.len());
    let mut v = opts.min_sigma + rng.gen_range(0.0..0.7);
    for _ in 0..sizes.len() {
        values.push(v);
        v += opts.min_gap + rng.gen_range(0.0..0.8);
    }
    values.reverse();
    let mut sigma = Vec::with_capacity(n);
    for (size, val) in sizes.iter().zip(values) {
        sigma.extend(std::iter::repeat_n(val, *size));
    }
    sigma.resize(n, 0.0);
    sigma
}

/// Values of σ(Γ) on β: `n1` ones, fractional entries, then zeros, summing to `total`.
fn beta_values(rng: &mut Rng64, len: usize, total: f64, exact: bool) -> Option<Vec<f64>> {
    for _ in 0..64 {
        let n1 = rng.gen_range(0..=len);
        if n1 as f64 > total + 1e-12 {
            continue;
        }
        let rest = total - n1 as f64;
        let n0 = rng.gen_range(0..=len - n1);
        let nf = len - n1 - n0;
        let mut vals = vec![1.0; n1];
        if nf == 0 {
            if (exact && rest.abs() > 1e-12) || (!exact && rest < 0.5) {
                continue;
            }
        } else {
            let target = if exact { rest } else { rest * rng.gen_range(0.1..0.9) };
            if target <= 0.05 * nf as f64 || target >= 0.95 * nf as f64 {
                continue;
            }
            let equal = rng.gen_bool(0.3);
            let weights: Vec<f64> = (0..nf).map(|_| if equal { 1.0 } else { rng.gen_range(0.3..1.0) }).collect();
            let wsum: f64 = weights.iter().sum();
            let mut frac: Vec<f64> = weights.iter().map(|w| w * target / wsum).collect();
            if frac.iter().any(|f| *f <= 0.02 || *f >= 0.98) {
                continue;
            }
            frac.sort_by(|a, b| b.total_cmp(a));
            vals.extend(frac);
        }
        vals.resize(len, 0.0);
        return Some(vals);
    }
    None
}

/// Random `(X, Γ)` with `Γ ∈ ∂Ψκ(X)` in the requested case.
pub fn subgrad_instance(
    rng: &mut Rng64,
    n: usize,
    m: usize,
    kappa: usize,
    case: ConeCase,
    opts: &SpectrumOptions,
) -> Option<Instance> {
    assert!(1 <= kappa && kappa <= n && n <= m);
    let rank = match case {
        ConeCase::InteriorGroup => rng.gen_range(kappa..=n),
        _ => rng.gen_range(0..kappa),
    };
    let sigma_x = spectrum(rng, n, rank, opts);
    let (beta, alpha) = if case == ConeCase::InteriorGroup {
        let k = kappa - 1;
        let mut start = k;
        while start > 0 && sigma_x[start - 1] == sigma_x[k] {
            start -= 1;
        }
        let mut end = k + 1;
        while end < n && sigma_x[end] == sigma_x[k] {
            end += 1;
        }
        (start..end, 0..start)
    } else {
        (rank..n, 0..rank)
    };
    let room = (kappa - alpha.end) as f64;
    let bvals = match case {
        ConeCase::InteriorGroup | ConeCase::ZeroGroupTight => beta_values(rng, beta.len(), room, true)?,
        ConeCase::ZeroGroupStrict => beta_values(rng, beta.len(), room, false)?,
    };
    let mut sigma_gamma = vec![0.0; n];
    for i in alpha.clone() {
        sigma_gamma[i] = 1.0;
    }
    for (i, v) in beta.clone().zip(&bvals) {
        sigma_gamma[i] = *v;
    }
    let n1 = bvals.iter().filter(|v| **v == 1.0).count();
    let nz = bvals.iter().filter(|v| **v == 0.0).count();
    let beta1 = beta.start..beta.start + n1;
    let beta0 = beta.end - nz..beta.end;
    let beta_plus = beta1.end..beta0.start;

    let u0 = orthogonal(rng, n);
    let v0 = orthogonal(rng, m);
    let embed = |d: &[f64]| {
        let mut k = Mat::zeros(n, m);
        for (i, v) in d.iter().enumerate() {
            k[(i, i)] = *v;
        }
        &u0 * k * v0.transpose()
    };
    let x = RectMatrix::new(embed(&sigma_x)).ok()?;
    let gamma = embed(&sigma_gamma);
    Some(Instance { x, gamma, kappa, case, u0, v0, sigma_x, sigma_gamma, alpha, beta, beta1, beta_plus, beta0 })
}

/// Random instance with random sizes (n ≤ `nmax`, m ≤ `mmax`), κ and case.
pub fn random_instance(rng: &mut Rng64, nmax: usize, mmax: usize, opts: &SpectrumOptions) -> Instance {
    loop {
        let n = rng.gen_range(1..=nmax);
        let m = rng.gen_range(n..=mmax.max(n));
        let kappa = rng.gen_range(1..=n);
        let case = match rng.gen_range(0..3) {
            0 => ConeCase::InteriorGroup,
            1 => ConeCase::ZeroGroupStrict,
            _ => ConeCase::ZeroGroupTight,
        };
        if let Some(inst) = subgrad_instance(rng, n, m, kappa, case, opts) {
            return inst;
        }
    }
}

fn set_block(k: &mut Mat, rows: Range<usize>, cols: Range<usize>, b: &Mat) {
    k.view_mut((rows.start, cols.start), (rows.len(), cols.len())).copy_from(b);
}

fn zero_block(k: &mut Mat, rows: Range<usize>, cols: Range<usize>) {
    k.view_mut((rows.start, cols.start), (rows.len(), cols.len())).fill(0.0);
}

/// Random `K` in the construction frame whose lift lies in the critical cone.
pub fn cone_frame_direction(rng: &mut Rng64, inst: &Instance) -> Mat {
    let (n, m) = (inst.n(), inst.m());
    let mut k = gaussian(rng, n, m);
    let (b1, bp, b0, beta) = (inst.beta1.clone(), inst.beta_plus.clone(), inst.beta0.clone(), inst.beta.clone());
    match inst.case {
        ConeCase::InteriorGroup => {
            let varpi: f64 = rng.sample(StandardNormal);
            let skew_part = skew(&gaussian(rng, beta.len(), beta.len()));
            let mut s = Mat::zeros(beta.len(), beta.len());
            let sh = |r: &Range<usize>| r.start - beta.start..r.end - beta.start;
            let c1 = Mat::identity(b1.len(), b1.len()) * varpi + psd(rng, b1.len(), 1.0);
            let d0 = Mat::identity(b0.len(), b0.len()) * varpi - psd(rng, b0.len(), 1.0);
            set_block(&mut s, sh(&b1), sh(&b1), &c1);
            set_block(&mut s, sh(&bp), sh(&bp), &(Mat::identity(bp.len(), bp.len()) * varpi));
            set_block(&mut s, sh(&b0), sh(&b0), &d0);
            set_block(&mut k, beta.clone(), beta, &(s + skew_part));
        }
        ConeCase::ZeroGroupStrict => {
            zero_block(&mut k, beta.clone(), beta.start..m);
            set_block(&mut k, b1.clone(), b1.clone(), &psd(rng, b1.len(), 1.0));
        }
        ConeCase::ZeroGroupTight => {
            zero_block(&mut k, beta.clone(), beta.start..m);
            let varpi: f64 = rng.gen_range(0.1..1.5);
            let c1 = Mat::identity(b1.len(), b1.len()) * varpi + psd(rng, b1.len(), 1.0);
            set_block(&mut k, b1.clone(), b1.clone(), &c1);
            set_block(&mut k, bp.clone(), bp.clone(), &(Mat::identity(bp.len(), bp.len()) * varpi));
            if !b0.is_empty() {
                let de = gaussian(rng, b0.len(), m - b0.start);
                let top = crate::linalg::spectral_norm(&de).max(1e-12);
                let scale = varpi * rng.gen_range(0.0..=1.0) / top;
                set_block(&mut k, b0.clone(), b0.start..m, &(de * scale));
            }
        }
    }
    k
}

/// Random direction in the critical cone.
pub fn cone_direction(rng: &mut Rng64, inst: &Instance) -> Mat {
    let k = cone_frame_direction(rng, inst);
    inst.lift(&k)
}

/// Random direction in the zero set of the second subderivative (inside the cone).
pub fn zero_set_direction(rng: &mut Rng64, inst: &Instance) -> Mat {
    let mut k = cone_frame_direction(rng, inst);
    let (n, m) = (inst.n(), inst.m());
    let (al, b1, bp, b0) = (inst.alpha.clone(), inst.beta1.clone(), inst.beta_plus.clone(), inst.beta0.clone());
    let ga = inst.beta.end..n;
    let c = n..m;
    let aa = sym(&gaussian(rng, al.len(), al.len()));
    let ab = gaussian(rng, al.len(), b1.len());
    match inst.case {
        ConeCase::InteriorGroup => {
            let head = al.start..bp.end;
            let mut h = sym(&gaussian(rng, head.len(), head.len()));
            let sh = |r: &Range<usize>| r.start - head.start..r.end - head.start;
            let hb = sh(&b1).start..sh(&bp).end;
            let kb = k.view((b1.start, b1.start), (hb.len(), hb.len())).into_owned();
            set_block(&mut h, hb.clone(), hb, &sym(&kb));
            zero_block(&mut h, sh(&al), sh(&bp));
            zero_block(&mut h, sh(&bp), sh(&al));
            set_block(&mut k, head.clone(), head.clone(), &h);
            zero_block(&mut k, b1.start..bp.end, b0.clone());
            zero_block(&mut k, b0.clone(), b1.start..bp.end);
            for r in [&al, &b1, &bp] {
                zero_block(&mut k, r.clone(), ga.clone());
                zero_block(&mut k, ga.clone(), r.clone());
                zero_block(&mut k, r.clone(), c.clone());
            }
            zero_block(&mut k, al.clone(), b0.clone());
            zero_block(&mut k, b0.clone(), al.clone());
        }
        _ => {
            set_block(&mut k, al.clone(), al.clone(), &aa);
            set_block(&mut k, al.clone(), b1.clone(), &ab);
            set_block(&mut k, b1.clone(), al.clone(), &ab.transpose());
            for r in [&bp, &b0] {
                zero_block(&mut k, al.clone(), r.clone());
                zero_block(&mut k, r.clone(), al.clone());
            }
            zero_block(&mut k, al.clone(), c);
        }
    }
    inst.lift(&k)
}

/// Perturbation that keeps critical-cone membership but generically leaves the zero set.
pub fn cone_preserving_perturbation(rng: &mut Rng64, inst: &Instance) -> Mat {
    let (n, m) = (inst.n(), inst.m());
    let mut k = gaussian(rng, n, m);
    let beta = inst.beta.clone();
    match inst.case {
        ConeCase::InteriorGroup => {
            let t = skew(&gaussian(rng, beta.len(), beta.len()));
            set_block(&mut k, beta.clone(), beta, &t);
        }
        _ => zero_block(&mut k, beta.clone(), beta.start..m),
    }
    inst.lift(&k)
}

/// Unit-norm random direction.
pub fn unit_direction(rng: &mut Rng64, n: usize, m: usize) -> Mat {
    let g = gaussian(rng, n, m);
    let nrm = g.norm();
    g / nrm
}

/// Random nonincreasing singular values helper for prox tests.
pub fn random_vector(rng: &mut Rng64, k: usize, scale: f64) -> Vector {
    Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

/// Kinds of engineered quadratic problems with a known tilt-stability status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engineered {
    /// Positive definite Hessian.
    PositiveDefinite,
    /// One-dimensional kernel orthogonal to the hull of Υ.
    Transverse,
    /// Kernel spanned by `Ū e_i e_iᵀ V̄ᵀ`, `i ∈ α`.
    DiagonalAlpha,
    /// Kernel spanned by a symmetric off-diagonal element of the α corner.
    SymmetricAlpha,
    /// Kernel spanned by `Ū e_i e_jᵀ V̄ᵀ`, `i ∈ γ`, `j ∈ c`.
    GammaC,
}

impl Engineered {
    pub fn expected(self) -> crate::tilt::TiltStatus {
        match self {
            Engineered::PositiveDefinite | Engineered::Transverse => crate::tilt::TiltStatus::Stable,
            _ => crate::tilt::TiltStatus::Unstable,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineeredProblem {
    pub kind: Engineered,
    pub spec: crate::tilt::ProblemSpec,
    pub planted: Option<Mat>,
}

/// Quadratic ϑ with Hessian `q` that makes `X̄` stationary with subgradient `Γ̄` (ν given).
pub fn quadratic_with_hessian(inst: &Instance, q: Mat, nu: f64) -> crate::tilt::ProblemSpec {
    let (n, m) = (inst.n(), inst.m());
    let qx = crate::linalg::unvec_rm(&(&q * crate::linalg::vec_rm(inst.x.as_mat())), n, m);
    let l = -&inst.gamma / nu - qx;
    crate::tilt::ProblemSpec::new(inst.x.clone(), nu, inst.kappa, crate::tilt::Theta::Quadratic { q, l })
        .expect("consistent shapes")
}

fn kernel_projector(w: &Mat, scale: f64) -> Mat {
    let v = crate::linalg::vec_rm(w);
    let v = &v / v.norm();
    (Mat::identity(v.len(), v.len()) - &v * v.transpose()) * scale
}

/// One engineered problem of the given kind, or `None` if the drawn sizes cannot host it.
pub fn engineered_problem(rng: &mut Rng64, kind: Engineered, nmax: usize, mmax: usize) -> Option<EngineeredProblem> {
    let opts = SpectrumOptions { min_gap: 0.4, min_sigma: 0.5, max_multiplicity: 2 };
    let inst = random_instance(rng, nmax, mmax, &opts);
    let (n, m) = (inst.n(), inst.m());
    let d = n * m;
    let scale = rng.gen_range(1.0..2.0);
    let (q, planted) = match kind {
        Engineered::PositiveDefinite => {
            let f = gaussian(rng, d, d) / (d as f64).sqrt();
            (&f * f.transpose() + Mat::identity(d, d) * scale, None)
        }
        Engineered::Transverse => {
            let tol = crate::Tolerances::default();
            let cert = crate::subgrad::subdiff_membership(&inst.x, &inst.gamma, inst.kappa, &tol).ok()??;
            let ups = crate::tilt::build_upsilon(&cert);
            let hull = ups.hull_vectors();
            if hull.ncols() == d {
                return None;
            }
            let g = crate::linalg::vec_rm(&gaussian(rng, n, m));
            let k = &g - &hull * (hull.transpose() * &g);
            if k.norm() < 1e-3 {
                return None;
            }
            let w = crate::linalg::unvec_rm(&k, n, m);
            (kernel_projector(&w, scale), Some(w))
        }
        Engineered::DiagonalAlpha => {
            if inst.alpha.is_empty() {
                return None;
            }
            let i = rng.gen_range(inst.alpha.clone());
            let mut k = Mat::zeros(n, m);
            k[(i, i)] = 1.0;
            let w = inst.lift(&k);
            (kernel_projector(&w, scale), Some(w))
        }
        Engineered::SymmetricAlpha => {
            if inst.alpha.len() < 2 {
                return None;
            }
            let i = rng.gen_range(inst.alpha.clone());
            let j = loop {
                let j = rng.gen_range(inst.alpha.clone());
                if j != i {
                    break j;
                }
            };
            let mut k = Mat::zeros(n, m);
            k[(i, j)] = 1.0;
            k[(j, i)] = 1.0;
            let w = inst.lift(&k);
            (kernel_projector(&w, scale), Some(w))
        }
        Engineered::GammaC => {
            if inst.case != ConeCase::InteriorGroup || inst.beta.end >= n || m == n {
                return None;
            }
            let i = rng.gen_range(inst.beta.end..n);
            let j = rng.gen_range(n..m);
            let mut k = Mat::zeros(n, m);
            k[(i, j)] = 1.0;
            let w = inst.lift(&k);
            (kernel_projector(&w, scale), Some(w))
        }
    };
    let nu = rng.gen_range(0.5..2.0);
    Some(EngineeredProblem { kind, spec: quadratic_with_hessian(&inst, q, nu), planted })
}

/// Draw until an engineered problem of the given kind is produced.
pub fn engineered(rng: &mut Rng64, kind: Engineered, nmax: usize, mmax: usize) -> EngineeredProblem {
    loop {
        if let Some(p) = engineered_problem(rng, kind, nmax, mmax) {
            return p;
        }
    }
}
