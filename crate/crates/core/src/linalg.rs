//! Small dense helpers shared by the frame and tensor code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_abs_r(m: &RMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.abs()))
}

pub fn max_abs_v(v: &CVec) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Largest over smallest singular value.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Bilinear pairing `aᵀ M b` (no conjugation).
pub fn bilinear(m: &CMat, a: &CVec, b: &CVec) -> Complex64 {
    (a.transpose() * m * b)[(0, 0)]
}

/// Matrix of the 2-form `a ∧ b`.
pub fn wedge(a: &CVec, b: &CVec) -> CMat {
    a * b.transpose() - b * a.transpose()
}
