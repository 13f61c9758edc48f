//! Minimal dense linear algebra: row-major matrices and LU factorization
//! with partial pivoting, sized for the KKT systems assembled by the solver.

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
#[error("matrix is numerically singular at pivot {pivot}")]
pub struct SingularMatrix {
    pub pivot: usize,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `y = M^T x`.
    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi != T::zero() {
                for (j, a) in self.row(i).iter().enumerate() {
                    y[j] += *a * xi;
                }
            }
        }
        y
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }
}

/// LU factors `P M = L U` of a square matrix, stored packed with the row
/// swaps applied during elimination.
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    swaps: Vec<usize>,
}

/// Factorizes a square matrix in place with partial pivoting.
pub fn factorize<T: Real>(mut m: DenseMatrix<T>) -> Result<LuFactors<T>, SingularMatrix> {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    let mut swaps = vec![0usize; n];
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = m.at(k, k).abs();
        for i in (k + 1)..n {
            let v = m.at(i, k).abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = i;
            }
        }
        if !(pivot_val > T::zero()) || !pivot_val.is_finite() {
            return Err(SingularMatrix { pivot: k });
        }
        swaps[k] = pivot_row;
        if pivot_row != k {
            for j in 0..n {
                let tmp = m.at(k, j);
                *m.at_mut(k, j) = m.at(pivot_row, j);
                *m.at_mut(pivot_row, j) = tmp;
            }
        }
        let inv_pivot = T::one() / m.at(k, k);
        for i in (k + 1)..n {
            let factor = m.at(i, k) * inv_pivot;
            *m.at_mut(i, k) = factor;
            if factor != T::zero() {
                for j in (k + 1)..n {
                    let delta = factor * m.at(k, j);
                    *m.at_mut(i, j) -= delta;
                }
            }
        }
    }
    Ok(LuFactors { lu: m, swaps })
}

impl<T: Real> LuFactors<T> {
    /// Solves `M x = rhs` using the stored factors.
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        debug_assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.swaps[k]);
        }
        // Forward substitution with the unit-diagonal L factor.
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.at(i, j) * x[j];
            }
            x[i] = acc;
        }
        // Back substitution with U.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu.at(i, j) * x[j];
            }
            x[i] = acc / self.lu.at(i, i);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_small_system_exactly() {
        let mut m = DenseMatrix::zeros(3, 3);
        let entries = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                *m.at_mut(i, j) = entries[i][j];
            }
        }
        let x_true: Vec<f64> = vec![1.0, -2.0, 0.5];
        let rhs = m.matvec(&x_true);
        let lu = factorize(m).unwrap();
        let x = lu.solve(&rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn solves_a_random_system_to_high_accuracy() {
        // Fixed linear congruential fill keeps the test deterministic.
        let n = 40;
        let mut state = 0x2545f4914f6cdd1d_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *m.at_mut(i, j) = next();
            }
            *m.at_mut(i, i) += 4.0; // diagonal dominance keeps it well conditioned
        }
        let x_true: Vec<f64> = (0..n).map(|_| next()).collect();
        let rhs = m.matvec(&x_true);
        let lu = factorize(m.clone()).unwrap();
        let x = lu.solve(&rhs);
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "error {err}");
        let res = m
            .matvec(&x)
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let mut m = DenseMatrix::<f64>::zeros(2, 2);
        *m.at_mut(0, 1) = 1.0;
        *m.at_mut(1, 0) = 1.0;
        let lu = factorize(m).unwrap();
        let x = lu.solve(&[3.0, 5.0]);
        assert!((x[0] - 5.0).abs() < 1e-15);
        assert!((x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = DenseMatrix::zeros(2, 2);
        *m.at_mut(0, 0) = 1.0;
        *m.at_mut(0, 1) = 2.0;
        *m.at_mut(1, 0) = 2.0;
        *m.at_mut(1, 1) = 4.0;
        assert!(factorize(m).is_err());
    }

    #[test]
    fn transpose_matvec_matches_direct_computation() {
        let mut m = DenseMatrix::zeros(2, 3);
        let entries = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        for i in 0..2 {
            for j in 0..3 {
                *m.at_mut(i, j) = entries[i][j];
            }
        }
        let y = m.matvec_transpose(&[1.0, -1.0]);
        assert_eq!(y, vec![-3.0, -3.0, -3.0]);
    }
}
