//! Row-major dense matrices and pointwise nonlinearities.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix. Immutable once built except through explicit
/// `*_mut` accessors; cheap to clone at desk scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S: Scalar = f64> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadDataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::BadDataLength {
                    rows: r,
                    cols: c,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Elementwise map into a new matrix.
    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    fn shape_check(&self, rhs: &Self, op: &'static str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        Ok(())
    }

    /// Standard matrix product. Per-cell accumulation runs over `k` in
    /// increasing order, so the result is bit-identical to the naive
    /// triple loop.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.shape_check(rhs, "add")?;
        Ok(self.zip(rhs, |a, b| a + b))
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.shape_check(rhs, "sub")?;
        Ok(self.zip(rhs, |a, b| a - b))
    }

    /// Elementwise product.
    pub fn hadamard(&self, rhs: &Self) -> Result<Self> {
        self.shape_check(rhs, "hadamard")?;
        Ok(self.zip(rhs, |a, b| a * b))
    }

    fn zip(&self, rhs: &Self, f: impl Fn(S, S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, factor: S) -> Self {
        self.map(|v| v * factor)
    }

    pub fn add_assign(&mut self, rhs: &Self) -> Result<()> {
        self.shape_check(rhs, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += factor * rhs`.
    pub fn axpy(&mut self, factor: S, rhs: &Self) -> Result<()> {
        self.shape_check(rhs, "axpy")?;
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, factor: S) {
        for v in &mut self.data {
            *v = *v * factor;
        }
    }

    /// Adds a 1-row matrix to every row.
    pub fn broadcast_add_row(&self, row: &Self) -> Result<Self> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(Error::DimensionMismatch {
                op: "broadcast_add_row",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: row.rows,
                right_cols: row.cols,
            });
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] += row.data[c];
            }
        }
        Ok(out)
    }

    /// Column sums as a 1-row matrix.
    pub fn col_sums(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c] += self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> Result<S> {
        self.shape_check(rhs, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .fold(S::zero(), |acc, (&a, &b)| acc.max((a - b).abs())))
    }
}

impl<S: Scalar> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

/// Numerically stable logistic sigmoid, branched on the sign so neither
/// branch exponentiates a positive argument.
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Elementwise logistic sigmoid; outputs lie in (0, 1) for finite input.
pub fn sigmoid<S: Scalar>(x: &Matrix<S>) -> Matrix<S> {
    x.map(sigmoid_scalar)
}

/// Elementwise max(0, x).
pub fn relu<S: Scalar>(x: &Matrix<S>) -> Matrix<S> {
    x.map(|v| v.max(S::zero()))
}

/// Elementwise hyperbolic tangent.
pub fn tanh<S: Scalar>(x: &Matrix<S>) -> Matrix<S> {
    x.map(|v| v.tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;
    use proptest::prelude::*;

    /// Independent naive triple-loop product, kept separate from
    /// `Matrix::matmul` on purpose.
    fn matmul_oracle(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn matmul_identity() {
        let id = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = Matrix::from_rows(&[vec![3.0, -1.5], vec![2.25, 7.0]]).unwrap();
        assert_eq!(id.matmul(&m).unwrap(), m);
        assert_eq!(m.matmul(&id).unwrap(), m);
    }

    #[test]
    fn matmul_hand_checked() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let p = a.matmul(&b).unwrap();
        assert_eq!(p.shape(), (1, 1));
        assert_eq!(p[(0, 0)], 11.0);
    }

    #[test]
    fn matmul_matches_triple_loop_bitwise() {
        let mut rng = SplitMix64::new(42);
        let a = random_matrix(&mut rng, 7, 5);
        let b = random_matrix(&mut rng, 5, 3);
        let got = a.matmul(&b).unwrap();
        let want = matmul_oracle(&a, &b);
        assert_eq!(got.data(), want.data());
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3"), "{err}");
        assert!(err.contains("4x2"), "{err}");
    }

    #[test]
    fn bad_data_length_rejected() {
        assert!(Matrix::new(2, 2, vec![1.0_f64; 3]).is_err());
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let m = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(sigmoid(&m)[(0, 0)], 0.5);
    }

    #[test]
    fn sigmoid_log_ratio_gives_mixing_weight() {
        // alpha1 = 1, alpha2 = 3: the gate value equals alpha1/(alpha1+alpha2).
        let x = (1.0_f64 / 3.0).ln();
        assert!((sigmoid_scalar(x) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_large_negative_no_underflow() {
        let m = Matrix::from_rows(&[vec![-50.0_f64]]).unwrap();
        let v = sigmoid(&m)[(0, 0)];
        assert!(v > 0.0 && v <= 1e-20, "v = {v}");
        // Reference value computed at 60 decimal digits.
        assert!((v - 1.9287498479639178e-22).abs() / 1.9287498479639178e-22 < 1e-12);
    }

    #[test]
    fn relu_basics() {
        let m = Matrix::from_rows(&[vec![-1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(relu(&m).data(), &[0.0, 0.0, 2.0]);

        let neg = Matrix::from_rows(&[vec![-3.0, -0.5], vec![-2.0, -1e9]]).unwrap();
        assert_eq!(relu(&neg), Matrix::zeros(2, 2));
    }

    #[test]
    fn relu_idempotent() {
        let mut rng = SplitMix64::new(7);
        let m = random_matrix(&mut rng, 4, 6);
        let once = relu(&m);
        assert_eq!(relu(&once), once);
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = SplitMix64::new(3);
        let m = random_matrix(&mut rng, 5, 2);
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn col_sums_and_broadcast() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.col_sums().data(), &[4.0, 6.0]);
        let bias = Matrix::from_rows(&[vec![10.0, 20.0]]).unwrap();
        let shifted = m.broadcast_add_row(&bias).unwrap();
        assert_eq!(shifted.data(), &[11.0, 22.0, 13.0, 24.0]);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(x in -40.0_f64..40.0) {
            let s = sigmoid_scalar(x) + sigmoid_scalar(-x);
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn matmul_associative(seed in 0u64..1000) {
            let mut rng = SplitMix64::new(seed);
            let a = random_matrix(&mut rng, 3, 4);
            let b = random_matrix(&mut rng, 4, 2);
            let c = random_matrix(&mut rng, 2, 5);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.max_abs().max(1e-9);
            prop_assert!(left.max_abs_diff(&right).unwrap() / scale < 1e-9);
        }
    }
}
