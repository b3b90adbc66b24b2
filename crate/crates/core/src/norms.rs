//! Vector and matrix norms used by the bound formulas.
//!
//! Vector ∞-norm is the largest absolute entry, the 1-norm the sum of absolute
//! entries. The matrix ∞-norm is the largest absolute row sum.

use nalgebra::{DMatrix, DVector};

pub fn vec_norm1(v: &DVector<f64>) -> f64 {
    v.iter().map(|e| e.abs()).sum()
}

pub fn vec_norm2_sq(v: &DVector<f64>) -> f64 {
    v.iter().map(|e| e * e).sum()
}

pub fn vec_norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

pub fn mat_norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|e| e.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_inf_norm_is_max_row_sum() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.25]);
        assert_eq!(mat_norm_inf(&m), 3.0);
    }

    #[test]
    fn vector_norms() {
        let v = DVector::from_vec(vec![3.0, -4.0]);
        assert_eq!(vec_norm1(&v), 7.0);
        assert_eq!(vec_norm2_sq(&v), 25.0);
        assert_eq!(vec_norm_inf(&v), 4.0);
    }
}
