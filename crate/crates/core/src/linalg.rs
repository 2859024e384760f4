//! Small dense complex helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of `vectors` are the matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eigen(h: &CMat) -> HermitianEigen {
    let n = h.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let sym = hermitian_part(h);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// (H + H^H) / 2.
pub fn hermitian_part(h: &CMat) -> CMat {
    (h + h.adjoint()).scale(0.5)
}

pub fn max_asymmetry(h: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            worst = worst.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius(h: &CMat) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Re trace(A B) for square matrices of equal size.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            acc += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    acc
}

/// x^H A x, real part.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    let ax = a * x;
    x.dotc(&ax).re
}

/// `U diag(sqrt(max(λ, 0)))` so that `F F^H` equals the PSD part of `h`.
/// Eigenvalues within rounding of zero relative to the largest are dropped.
pub fn psd_factor(h: &CMat) -> CMat {
    let eig = hermitian_eigen(h);
    let mut f = eig.vectors.clone();
    let floor = eig.values.first().copied().unwrap_or(0.0).max(0.0) * h.nrows() as f64 * f64::EPSILON;
    for (c, &v) in eig.values.iter().enumerate() {
        let s = if v > floor { v.sqrt() } else { 0.0 };
        f.column_mut(c).scale_mut(s);
    }
    f
}

pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}
