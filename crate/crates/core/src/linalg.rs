//! Dense least-squares helpers built on nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which singular values count as zero.
fn rank_cutoff(svals: &DVector<f64>, rows: usize, cols: usize) -> f64 {
    let max = svals.iter().cloned().fold(0.0_f64, f64::max);
    max * (rows.max(cols) as f64) * f64::EPSILON * 16.0
}

/// Minimal-norm least-squares solution of `a * x = b`.
///
/// Singular values under a relative cutoff are dropped, so rank-deficient
/// systems return the smallest-norm minimizer.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DVector::zeros(cols);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let cutoff = rank_cutoff(&svd.singular_values, rows, cols);
    let mut x = DVector::zeros(cols);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coeff = u.column(k).dot(b) / s;
        x += v_t.row(k).transpose() * coeff;
    }
    x
}

/// Same as [`min_norm_lstsq`] for several right-hand sides at once.
pub fn min_norm_lstsq_multi(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for j in 0..b.ncols() {
        let col = min_norm_lstsq(a, &b.column(j).into_owned());
        out.set_column(j, &col);
    }
    out
}

/// Right singular vectors of `a` (rows of `V^T`), ordered by increasing
/// singular value. Requires `a.nrows() >= a.ncols()` for a complete basis.
pub fn right_singular_vectors_ascending(a: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut out: Vec<(f64, DVector<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, v_t.row(k).transpose()))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
