//! Packed storage for symmetric tensors.

use nalgebra::{Matrix3, Matrix4};

/// Index pairs of the 10 stored components of a symmetric 4-tensor.
pub const SYM4_PAIRS: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

const SYM4_TABLE: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];

/// Index pairs of the 6 stored components of a symmetric 3-tensor (0-based spatial axes).
pub const SYM3_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

const SYM3_TABLE: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

pub const MINKOWSKI: [f64; 10] = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];

#[inline]
pub fn sym4(a: usize, b: usize) -> usize {
    SYM4_TABLE[a][b]
}

#[inline]
pub fn sym3(a: usize, b: usize) -> usize {
    SYM3_TABLE[a][b]
}

pub fn sym4_to_mat(s: &[f64]) -> Matrix4<f64> {
    Matrix4::from_fn(|a, b| s[sym4(a, b)])
}

/// Packs the upper triangle; the lower triangle is ignored.
pub fn mat_to_sym4(m: &Matrix4<f64>) -> [f64; 10] {
    let mut out = [0.0; 10];
    for (k, &(a, b)) in SYM4_PAIRS.iter().enumerate() {
        out[k] = m[(a, b)];
    }
    out
}

pub fn sym3_to_mat(s: &[f64]) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| s[sym3(a, b)])
}

pub fn mat_to_sym3(m: &Matrix3<f64>) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (k, &(a, b)) in SYM3_PAIRS.iter().enumerate() {
        out[k] = m[(a, b)];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_agree_with_pairs() {
        for (k, &(a, b)) in SYM4_PAIRS.iter().enumerate() {
            assert_eq!(sym4(a, b), k);
            assert_eq!(sym4(b, a), k);
        }
        for (k, &(a, b)) in SYM3_PAIRS.iter().enumerate() {
            assert_eq!(sym3(a, b), k);
            assert_eq!(sym3(b, a), k);
        }
    }

    #[test]
    fn roundtrip() {
        let s: Vec<f64> = (0..10).map(|i| i as f64 * 0.5 - 1.0).collect();
        let m = sym4_to_mat(&s);
        assert_eq!(m, m.transpose());
        assert_eq!(mat_to_sym4(&m).to_vec(), s);
    }
}
