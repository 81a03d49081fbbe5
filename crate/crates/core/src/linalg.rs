//! Small dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::DMatrix;

/// Largest singular value of a matrix with two columns, from the closed-form
/// eigenvalues of its 2×2 Gram matrix.
pub fn spectral_norm_2col(a: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), 2);
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    for row in a.row_iter() {
        p += row[0] * row[0];
        q += row[0] * row[1];
        r += row[1] * row[1];
    }
    let half = 0.5 * (p - r);
    let lmax = 0.5 * (p + r) + libm::hypot(half, q);
    libm::sqrt(lmax.max(0.0))
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
