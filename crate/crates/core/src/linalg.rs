//! Dense linear-algebra helpers shared by the spectral and tilt modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric part `(A + Aᵀ)/2`.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Skew part `(A − Aᵀ)/2`.
pub fn skew(a: &Mat) -> Mat {
    (a - a.transpose()) * 0.5
}

/// Frobenius inner product.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

/// Sub-block of `a` selected by row and column index lists.
pub fn block(a: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Columns of `a` listed in `cols`, in order.
pub fn columns(a: &Mat, cols: &[usize]) -> Mat {
    Mat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Squared Frobenius norm of a sub-block.
pub fn block_norm_sq(a: &Mat, rows: &[usize], cols: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &i in rows {
        for &j in cols {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc
}

fn to_faer(a: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted nonincreasing.
pub fn sym_eigen_desc(a: &Mat) -> (Vector, Mat) {
    let n = a.nrows();
    if n == 0 {
        return (Vector::zeros(0), Mat::zeros(0, 0));
    }
    let eig = to_faer(&sym(a))
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolver failed on finite input");
    let raw = eig.S().column_vector();
    let q = from_faer(eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]).then(i.cmp(&j)));
    let vals = Vector::from_iterator(n, order.iter().map(|&i| raw[i]));
    (vals, columns(&q, &order))
}

/// Full SVD `A = U [Diag(σ) 0] Vᵀ` of an n×m matrix with n ≤ m, σ in solver order.
pub fn svd_full(a: &Mat) -> Result<(Mat, Vector, Mat)> {
    let svd = to_faer(a).svd().map_err(|e| Error::Numeric(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let sigma = Vector::from_fn(s.nrows(), |i, _| s[i]);
    Ok((from_faer(svd.U()), sigma, from_faer(svd.V())))
}

/// Largest eigenvalue of a symmetric matrix, `-inf` for an empty one.
pub fn lambda_max(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    sym_eigen_desc(a).0[0]
}

/// Smallest eigenvalue of a symmetric matrix, `+inf` for an empty one.
pub fn lambda_min(a: &Mat) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    sym_eigen_desc(a).0[n - 1]
}

/// Sum of the `k` largest eigenvalues of a symmetric matrix.
pub fn top_eig_sum(a: &Mat, k: usize) -> f64 {
    let (vals, _) = sym_eigen_desc(a);
    vals.iter().take(k).sum()
}

/// Singular values, nonincreasing. Works for any shape, including empty.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let sv = to_faer(a).singular_values().expect("singular value solver failed on finite input");
    let mut s = sv;
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Spectral norm, zero for empty matrices.
pub fn spectral_norm(a: &Mat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Extend an orthonormal column set `q` (p×k) to a basis of `R^p`, returning the p×(p−k) complement.
///
/// Greedy Gram–Schmidt over the standard basis, twice orthogonalized. Deterministic.
pub fn complete_basis(q: &Mat) -> Mat {
    let p = q.nrows();
    let k = q.ncols();
    let mut basis: Vec<Vector> = (0..k).map(|j| q.column(j).into_owned()).collect();
    let mut extra: Vec<Vector> = Vec::with_capacity(p - k);
    let mut used = vec![false; p];
    while basis.len() < p {
        let mut best: Option<(usize, Vector, f64)> = None;
        for (e, &taken) in used.iter().enumerate() {
            if taken {
                continue;
            }
            let mut v = Vector::zeros(p);
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&v);
                    v.axpy(-c, b, 1.0);
                }
            }
            let nrm = v.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| nrm > *bn + 1e-14) {
                best = Some((e, v, nrm));
            }
        }
        let (e, v, nrm) = best.expect("basis completion ran out of candidates");
        used[e] = true;
        if nrm < 1e-8 {
            continue;
        }
        let v = v / nrm;
        basis.push(v.clone());
        extra.push(v);
    }
    let mut out = Mat::zeros(p, extra.len());
    for (j, v) in extra.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

/// Orthonormal basis for the column span of `a`, dropping directions below `tol` relative to the largest.
pub fn orthonormal_span(a: &Mat, tol: f64) -> Mat {
    let p = a.nrows();
    if a.ncols() == 0 || p == 0 {
        return Mat::zeros(p, 0);
    }
    let svd = to_faer(a).svd().expect("SVD of a finite matrix");
    let s = svd.S().column_vector();
    let top = if s.nrows() > 0 { s[0] } else { 0.0 };
    if top == 0.0 {
        return Mat::zeros(p, 0);
    }
    let u = from_faer(svd.U());
    let keep: Vec<usize> = (0..s.nrows()).filter(|&i| s[i] > tol * top).collect();
    columns(&u, &keep)
}

/// Orthonormal basis of the null space of `a` (columns), using singular values at or below `tol`.
pub fn null_space(a: &Mat, tol: f64) -> Mat {
    let n = a.ncols();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let svd = to_faer(a).svd().expect("SVD of a finite matrix");
    let s = svd.S().column_vector();
    let v = from_faer(svd.V());
    let keep: Vec<usize> = (0..n).filter(|&i| i >= s.nrows() || s[i] <= tol).collect();
    columns(&v, &keep)
}

/// Row-major vectorization of an n×m matrix.
pub fn vec_rm(a: &Mat) -> Vector {
    let (n, m) = a.shape();
    Vector::from_fn(n * m, |k, _| a[(k / m, k % m)])
}

/// Inverse of [`vec_rm`].
pub fn unvec_rm(v: &Vector, n: usize, m: usize) -> Mat {
    Mat::from_fn(n, m, |i, j| v[i * m + j])
}

/// Scale-aware relative error `|a − b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}
