//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::CMat;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (CMat, DVector<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vecs, vals)
}

/// `Y Yᴴ / T` for a `N×T` block.
pub fn sample_covariance(y: &CMat) -> CMat {
    let t = y.ncols().max(1) as f64;
    let mut q = y * y.adjoint();
    q.unscale_mut(t);
    hermitize(&mut q);
    q
}

/// Overwrites the strictly lower triangle with the conjugate of the upper one
/// and zeroes the imaginary diagonal.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute error when `b = 0`.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    let d = frobenius(&(a - b));
    let n = frobenius(b);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Dense LU inverse; `None` when the pivot collapses.
pub fn dense_inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// `Re tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(values: &[f64]) -> CMat {
    DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
