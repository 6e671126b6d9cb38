//! Ordered SVD and eigen-decompositions, value grouping, the bordered embedding
//! `B(X) = [[0, X], [Xᵀ, 0]]` and its orthogonal frame.

use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{columns, complete_basis, svd_full, sym_eigen_desc, Mat, Vector};

/// A finite real n×m matrix with n ≤ m.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix(Mat);

impl RectMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() > m.ncols() {
            return Err(Error::Dimension(format!(
                "expected 1 <= rows <= cols, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize, m: usize) -> Result<Self> {
        Self::new(Mat::zeros(n, m))
    }

    pub fn from_row_slice(n: usize, m: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * m, data.len())));
        }
        Self::new(Mat::from_row_slice(n, m, data))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

impl std::ops::Deref for RectMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// Wire format `{"rows": n, "cols": m, "data": [row-major]}` for any dense matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_mat(m: &Mat) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }

    pub fn to_mat(&self) -> Result<Mat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "matrix declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl Serialize for RectMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_mat(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RectMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let m = raw.to_mat().map_err(serde::de::Error::custom)?;
        RectMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// An ordered SVD `X = U [Diag(σ) 0] Vᵀ` with full orthogonal `U` (n×n) and `V` (m×m).
#[derive(Debug, Clone, PartialEq)]
pub struct SvdPair {
    pub u: Mat,
    pub v: Mat,
    pub sigma: Vector,
}

impl SvdPair {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    /// First n columns of V.
    pub fn v1(&self) -> Mat {
        self.v.columns(0, self.n()).into_owned()
    }

    /// Last m−n columns of V.
    pub fn vc(&self) -> Mat {
        let n = self.n();
        self.v.columns(n, self.m() - n).into_owned()
    }

    /// `Uᵀ A V` for an n×m matrix `A`.
    pub fn rotate_in(&self, a: &Mat) -> Mat {
        self.u.transpose() * a * &self.v
    }

    /// `U K Vᵀ` for an n×m matrix `K`.
    pub fn rotate_out(&self, k: &Mat) -> Mat {
        &self.u * k * self.v.transpose()
    }

    /// `U [Diag(d) 0] Vᵀ`.
    pub fn compose(&self, d: &Vector) -> Mat {
        let mut k = Mat::zeros(self.n(), self.m());
        for i in 0..self.n() {
            k[(i, i)] = d[i];
        }
        self.rotate_out(&k)
    }

    /// Largest of the orthogonality defects of `U` and `V`.
    pub fn orthogonality_defect(&self) -> f64 {
        let eu = (self.u.transpose() * &self.u - Mat::identity(self.n(), self.n())).norm();
        let ev = (self.v.transpose() * &self.v - Mat::identity(self.m(), self.m())).norm();
        eu.max(ev)
    }
}

/// Ordered SVD with a deterministic sign convention: the largest-magnitude entry of each
/// left singular vector is positive (first such entry on ties).
pub fn svd_ordered(x: &RectMatrix) -> Result<SvdPair> {
    let (n, m) = x.shape();
    let (u_raw, s_raw, v_raw) = svd_full(x.as_mat())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]).then(i.cmp(&j)));
    let mut u = columns(&u_raw, &order);
    let mut v1 = columns(&v_raw, &order);
    let sigma = Vector::from_iterator(n, order.iter().map(|&i| s_raw[i].max(0.0)));

    for j in 0..n {
        let col = u.column(j);
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(j).neg_mut();
            v1.column_mut(j).neg_mut();
        }
    }

    let vc = complete_basis(&v1);
    let mut v = Mat::zeros(m, m);
    v.columns_mut(0, n).copy_from(&v1);
    v.columns_mut(n, m - n).copy_from(&vc);
    let pair = SvdPair { u, v, sigma };
    if pair.orthogonality_defect() > 1e-8 {
        return Err(Error::Numeric("SVD factors lost orthogonality".into()));
    }
    Ok(pair)
}

/// Distinct-value grouping of an ordered singular spectrum.
///
/// Index sets are 0-based ranges. Groups `a_1..a_s` hold positive values; `b` holds the
/// zero group (possibly empty); `c` is `n..m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularGrouping {
    pub nu: Vec<f64>,
    pub groups: Vec<Range<usize>>,
    pub b: Range<usize>,
    pub c: Range<usize>,
    pub s: usize,
    /// 0-based group index holding position κ; equals `s` when κ falls in the zero group.
    pub r: usize,
    pub kappa: usize,
    pub group_tol: f64,
}

impl SingularGrouping {
    /// Indices of positive singular values.
    pub fn a(&self) -> Range<usize> {
        0..self.b.start
    }

    /// Group `l` for `l < s`, the zero group for `l == s`.
    pub fn group(&self, l: usize) -> Range<usize> {
        if l < self.s {
            self.groups[l].clone()
        } else {
            self.b.clone()
        }
    }

    /// ν_l, with ν_{s+1} = 0.
    pub fn nu_of(&self, l: usize) -> f64 {
        if l < self.s {
            self.nu[l]
        } else {
            0.0
        }
    }

    pub fn kappa_in_zero_group(&self) -> bool {
        self.r == self.s
    }

    /// Number of indices before group r (κ₀).
    pub fn kappa0(&self) -> usize {
        self.group(self.r).start
    }
}

/// Group an ordered spectrum by transitive chaining with absolute tolerance `group_tol`.
pub fn group_singular(svd: &SvdPair, kappa: usize, group_tol: f64) -> Result<SingularGrouping> {
    let sigma = &svd.sigma;
    let n = sigma.len();
    if kappa == 0 || kappa > n {
        return Err(Error::Precondition(format!("kappa must lie in 1..={n}, got {kappa}")));
    }
    if !(group_tol > 0.0) {
        return Err(Error::Precondition("group_tol must be positive".into()));
    }
    let mut zero_start = n;
    let mut prev = 0.0;
    while zero_start > 0 && sigma[zero_start - 1] - prev <= group_tol {
        prev = sigma[zero_start - 1];
        zero_start -= 1;
    }
    let mut groups = Vec::new();
    let mut nu = Vec::new();
    let mut start = 0;
    while start < zero_start {
        let mut end = start + 1;
        while end < zero_start && sigma[end - 1] - sigma[end] <= group_tol {
            end += 1;
        }
        nu.push(sigma.rows(start, end - start).mean());
        groups.push(start..end);
        start = end;
    }
    let s = groups.len();
    let b = zero_start..n;
    let k = kappa - 1;
    let r = groups.iter().position(|g| g.contains(&k)).unwrap_or(s);
    Ok(SingularGrouping { nu, groups, b, c: n..svd.m(), s, r, kappa, group_tol })
}

/// `B(X) = [[0, X], [Xᵀ, 0]]`.
pub fn bmap(x: &Mat) -> Mat {
    let (n, m) = x.shape();
    let mut b = Mat::zeros(n + m, n + m);
    b.view_mut((0, n), (n, m)).copy_from(x);
    b.view_mut((n, 0), (m, n)).copy_from(&x.transpose());
    b
}

/// `B*(M) = 2 M₁₂` for a symmetric (n+m)×(n+m) matrix.
pub fn bmap_adjoint(mm: &Mat, n: usize) -> Mat {
    let m = mm.ncols() - n;
    mm.view((0, n), (n, m)).into_owned() * 2.0
}

/// Orthogonal frame `P` diagonalizing `B(X)`.
///
/// Column layout: positive block `a`, zero block `b`, block `c`, second zero block `b`,
/// and the reversed positive block. `Pᵀ B(X) P = Diag(σ_a, 0, 0, 0, −reverse(σ_a))`.
#[derive(Debug, Clone)]
pub struct EmbeddingFrame {
    pub p: Mat,
    pub eigenvalues: Vector,
    pub a_cols: Range<usize>,
    pub b_cols: Range<usize>,
    pub c_cols: Range<usize>,
    pub b2_cols: Range<usize>,
    pub a_rev_cols: Range<usize>,
    group_cols: Vec<Range<usize>>,
}

impl EmbeddingFrame {
    /// Columns of `P` for the positive group `l`.
    pub fn group_cols(&self, l: usize) -> Range<usize> {
        self.group_cols[l].clone()
    }

    /// `P_{a_l}`.
    pub fn p_group(&self, l: usize) -> Mat {
        let r = self.group_cols(l);
        self.p.columns(r.start, r.len()).into_owned()
    }

    /// Columns of the zero-eigenvalue sub-frame `P₀`.
    pub fn p0_cols(&self) -> Range<usize> {
        self.b_cols.start..self.b2_cols.end
    }

    pub fn p0(&self) -> Mat {
        let r = self.p0_cols();
        self.p.columns(r.start, r.len()).into_owned()
    }
}

pub fn build_frame(svd: &SvdPair, grouping: &SingularGrouping) -> Result<EmbeddingFrame> {
    let n = svd.n();
    let m = svd.m();
    let mut cursor = 0;
    for g in &grouping.groups {
        if g.start != cursor || g.is_empty() {
            return Err(Error::Inconsistent("positive groups are not contiguous".into()));
        }
        cursor = g.end;
    }
    if grouping.b.start != cursor || grouping.b.end != n || grouping.c != (n..m) {
        return Err(Error::Inconsistent("groups do not partition the index range".into()));
    }
    let na = grouping.b.start;
    let nb = grouping.b.len();
    let nc = m - n;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut p = Mat::zeros(n + m, n + m);
    let mut eigenvalues = Vector::zeros(n + m);
    let b_cols = na..na + nb;
    let c_cols = b_cols.end..b_cols.end + nc;
    let b2_cols = c_cols.end..c_cols.end + nb;
    let a_rev_cols = b2_cols.end..b2_cols.end + na;

    for i in 0..na {
        let jr = a_rev_cols.end - 1 - i;
        for row in 0..n {
            p[(row, i)] = h * svd.u[(row, i)];
            p[(row, jr)] = h * svd.u[(row, i)];
        }
        for row in 0..m {
            p[(n + row, i)] = h * svd.v[(row, i)];
            p[(n + row, jr)] = -h * svd.v[(row, i)];
        }
        eigenvalues[i] = svd.sigma[i];
        eigenvalues[jr] = -svd.sigma[i];
    }
    for (k, i) in grouping.b.clone().enumerate() {
        let j1 = b_cols.start + k;
        let j2 = b2_cols.start + k;
        for row in 0..n {
            p[(row, j1)] = h * svd.u[(row, i)];
            p[(row, j2)] = h * svd.u[(row, i)];
        }
        for row in 0..m {
            p[(n + row, j1)] = h * svd.v[(row, i)];
            p[(n + row, j2)] = -h * svd.v[(row, i)];
        }
    }
    for k in 0..nc {
        let j = c_cols.start + k;
        for row in 0..m {
            p[(n + row, j)] = svd.v[(row, n + k)];
        }
    }
    Ok(EmbeddingFrame {
        p,
        eigenvalues,
        a_cols: 0..na,
        b_cols,
        c_cols,
        b2_cols,
        a_rev_cols,
        group_cols: grouping.groups.clone(),
    })
}

/// Ordered eigen-decomposition of a symmetric matrix with grouping of equal eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenGrouping {
    pub q: Mat,
    pub lambda: Vector,
    pub mu: Vec<f64>,
    pub theta: Vec<Range<usize>>,
    pub group_tol: f64,
}

impl EigenGrouping {
    /// Group holding 0-based index `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.theta.iter().position(|t| t.contains(&i)).expect("index out of range")
    }

    /// `l_i(Z)` for the 0-based index `i`: how many equal eigenvalues rank at or before it.
    pub fn l_of(&self, i: usize) -> usize {
        i - self.theta[self.group_of(i)].start + 1
    }

    pub fn q_group(&self, l: usize) -> Mat {
        let t = &self.theta[l];
        self.q.columns(t.start, t.len()).into_owned()
    }
}

pub fn eigen_grouped(z: &Mat, group_tol: f64) -> Result<EigenGrouping> {
    if z.nrows() != z.ncols() {
        return Err(Error::Dimension("eigen_grouped needs a square matrix".into()));
    }
    let defect = (z - z.transpose()).norm();
    if defect > 1e-10 * (1.0 + z.norm()) {
        return Err(Error::NotSymmetric(defect));
    }
    let (lambda, q) = sym_eigen_desc(z);
    let p = lambda.len();
    let mut theta = Vec::new();
    let mut mu = Vec::new();
    let mut start = 0;
    while start < p {
        let mut end = start + 1;
        while end < p && lambda[end - 1] - lambda[end] <= group_tol {
            end += 1;
        }
        mu.push(lambda.rows(start, end - start).mean());
        theta.push(start..end);
        start = end;
    }
    Ok(EigenGrouping { q, lambda, mu, theta, group_tol })
}
