//! Dense complex linear algebra shared by every module: Hermitian eigen
//! decompositions, PSD square roots, Kronecker actions and rank-revealing
//! bases. Everything is `DMatrix<Complex64>`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(m + m*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Max-norm distance between `m` and its adjoint.
pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_diagonal(m: &CMat) -> bool {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j && m[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = hermitian_part(m);
    if is_diagonal(&h) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| h[(a, a)].re.total_cmp(&h[(b, b)].re));
        let vals = idx.iter().map(|&i| h[(i, i)].re).collect();
        let vecs = CMat::from_fn(n, n, |i, j| if i == idx[j] { ONE } else { ZERO });
        return (vals, vecs);
    }
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, idx[j])]);
    (vals, vecs)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let h = hermitian_part(m);
    let mut vals: Vec<f64> = if is_diagonal(&h) {
        (0..n).map(|i| h[(i, i)].re).collect()
    } else {
        h.symmetric_eigenvalues().iter().copied().collect()
    };
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn min_eig(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn max_eig(m: &CMat) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.is_square() && is_diagonal(m) {
        return m.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    // The Gram matrix of the thinner side is cheaper and Hermitian.
    let g = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    max_eig(&g).max(0.0).sqrt()
}

/// PSD square root by Hermitian eigen-decomposition. Eigenvalues below
/// `-eps * max(1, |lambda_max|)` are an error, the rest are clamped at zero.
pub fn psd_sqrt(m: &CMat, eps: f64, context: &str) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if let Some(&lo) = vals.first() {
        if lo < -eps * scale {
            return Err(Error::NotPsd {
                min_eig: lo,
                context: context.to_string(),
            });
        }
    }
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(scale_columns(&vecs, &roots) * vecs.adjoint())
}

pub fn scale_columns(m: &CMat, s: &[f64]) -> CMat {
    let mut out = m.clone();
    for (j, &sj) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(sj);
    }
    out
}

/// `(a ⊗ b) x` without forming the Kronecker product. Rows of `x` are
/// indexed `alpha * b.ncols() + t` with `alpha < a.ncols()`.
pub fn kron_apply(a: &CMat, b: &CMat, x: &CMat) -> CMat {
    let (p, q) = a.shape();
    let (r, s) = b.shape();
    assert_eq!(x.nrows(), q * s, "kron_apply: row count");
    let at = a.transpose();
    let mut out = CMat::zeros(p * r, x.ncols());
    for col in 0..x.ncols() {
        let xc = x.column(col);
        let mcol = CMat::from_column_slice(s, q, xc.as_slice());
        let y = b * mcol * &at;
        out.column_mut(col).copy_from_slice(y.as_slice());
    }
    out
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Thin SVD `m = U diag(s) V*`, singular values descending.
pub fn svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (CMat::zeros(rows, 0), Vec::new(), CMat::zeros(cols, 0));
    }
    let f = faer::Mat::<C64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = f.thin_svd().expect("svd converges");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    (
        CMat::from_fn(rows, k, |i, j| u[(i, j)]),
        (0..k).map(|i| s[i].re).collect(),
        CMat::from_fn(cols, k, |i, j| v[(i, j)]),
    )
}

/// Orthonormal basis (as an isometry) for the column space of `m`; singular
/// values below `rel_tol * sigma_max` are discarded.
pub fn orthonormal_basis(m: &CMat, rel_tol: f64) -> CMat {
    let (u, s, _) = svd(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let keep = s.iter().filter(|&&v| smax > 0.0 && v > rel_tol * smax).count();
    u.columns(0, keep).into_owned()
}

/// Null space of `m` and its full singular spectrum (descending, padded with
/// zeros to `m.ncols()`). Singular values at or below `abs_tol` count as zero.
pub fn null_space(m: &CMat, abs_tol: f64) -> (CMat, Vec<f64>) {
    let cols = m.ncols();
    if cols == 0 {
        return (CMat::zeros(0, 0), Vec::new());
    }
    let f = faer::Mat::<C64>::from_fn(m.nrows(), cols, |i, j| m[(i, j)]);
    let svd = f.svd().expect("svd converges");
    let (s, v) = (svd.S().column_vector(), svd.V());
    let mut sv: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    sv.resize(cols, 0.0);
    let null: Vec<usize> = (0..cols).filter(|&i| sv[i] <= abs_tol).collect();
    let basis = CMat::from_fn(cols, null.len(), |i, j| v[(i, null[j])]);
    (basis, sv)
}

/// Rescale by a unit phase so the largest-modulus entry is real and positive.
pub fn fix_phase(v: &CVec) -> CVec {
    let mut best = ZERO;
    for z in v.iter() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best == ZERO {
        return v.clone();
    }
    let phase = best.conj() / best.norm();
    v * phase
}

/// Max-entry norm.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Vectorization by stacking columns.
pub fn vec_cols(a: &CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

pub fn unvec_cols(v: &[C64], m: usize) -> CMat {
    CMat::from_column_slice(m, m, v)
}

/// Matrix of a linear map on `m x m` matrices acting on column-stacked
/// vectorizations.
pub fn map_matrix(m: usize, f: impl Fn(&CMat) -> CMat) -> CMat {
    let mut out = CMat::zeros(m * m, m * m);
    for t in 0..m {
        for s in 0..m {
            let mut e = CMat::zeros(m, m);
            e[(s, t)] = ONE;
            let img = f(&e);
            out.column_mut(s + t * m).copy_from_slice(img.as_slice());
        }
    }
    out
}

/// Apply a map given by its `m^2 x m^2` matrix.
pub fn apply_map_matrix(map: &CMat, a: &CMat) -> CMat {
    let m = a.nrows();
    let v = map * vec_cols(a);
    unvec_cols(v.as_slice(), m)
}
