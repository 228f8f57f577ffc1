//! Small dense helpers: checked inversion with a condition cap, rank-3 arrays,
//! and the Levi-Civita symbol.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};

/// Condition-number cap applied to every matrix inversion in the crate.
pub const CONDITION_CAP: f64 = 1e12;

/// Result of a checked inversion.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub inverse: DMatrix<f64>,
    /// 1-norm condition number estimate `‖A‖₁ ‖A⁻¹‖₁`.
    pub cond: f64,
}

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU with partial pivoting. Returns `None` when the matrix is singular or
/// its condition estimate exceeds `cap`; the estimate is returned either way.
pub fn invert(a: &DMatrix<f64>, cap: f64) -> (Option<Inverse>, f64) {
    assert!(a.is_square());
    if a.nrows() == 0 {
        return (
            Some(Inverse {
                inverse: DMatrix::zeros(0, 0),
                cond: 1.0,
            }),
            1.0,
        );
    }
    if a.iter().any(|x| !x.is_finite()) {
        return (None, f64::INFINITY);
    }
    let Some(inv) = a.clone().lu().try_inverse() else {
        return (None, f64::INFINITY);
    };
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > cap {
        return (None, cond);
    }
    (Some(Inverse { inverse: inv, cond }), cond)
}

/// Dense rank-3 array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: [d0, d1, d2],
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn from_fn(d0: usize, d1: usize, d2: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(d0, d1, d2);
        for a in 0..d0 {
            for b in 0..d1 {
                for c in 0..d2 {
                    t[(a, b, c)] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Slice `t[(.., .., c)]` as a matrix.
    pub fn slice_last(&self, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims[0], self.dims[1], |a, b| self[(a, b, c)])
    }

    /// Slice `t[(a, .., ..)]` as a matrix.
    pub fn slice_first(&self, a: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims[1], self.dims[2], |b, c| self[(a, b, c)])
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn offset(&self, (a, b, c): (usize, usize, usize)) -> usize {
        debug_assert!(a < self.dims[0] && b < self.dims[1] && c < self.dims[2]);
        (a * self.dims[1] + b) * self.dims[2] + c
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, idx: (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, idx: (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

/// Levi-Civita symbol on three indices in `0..3`.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn vector(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.25]);
        let (inv, cond) = invert(&a, CONDITION_CAP);
        let inv = inv.unwrap().inverse;
        assert_eq!(inv, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        assert_eq!(cond, 4.0);
    }

    #[test]
    fn singular_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(invert(&a, CONDITION_CAP).0.is_none());
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        let (inv, cond) = invert(&b, CONDITION_CAP);
        assert!(inv.is_none());
        assert!(cond > CONDITION_CAP);
    }

    #[test]
    fn cross_matches_levi_civita() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.5, 0.25, -0.7];
        let c = cross(&a, &b);
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    s += levi_civita(i, j, k) * a[j] * b[k];
                }
            }
            assert!((s - c[i]).abs() < 1e-15);
        }
    }
}
