//! Small dense linear solves for the oracles. Systems here have at most a few
//! hundred unknowns, so Gaussian elimination with partial pivoting is plenty.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    n: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n + col] += v;
    }

    /// Solve `self * x = rhs`. Returns `None` when a pivot falls below
    /// `1e-13` times the largest column entry, i.e. the system is singular
    /// to working precision.
    pub fn solve(mut self, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.n;
        debug_assert_eq!(rhs.len(), n);
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n).map(|r| (r, self.data[r * n + col].abs())).fold(
                (col, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
            if pivot_abs <= 1e-13 * scale {
                return None;
            }
            if pivot_row != col {
                for k in 0..n {
                    self.data.swap(col * n + k, pivot_row * n + k);
                }
                rhs.swap(col, pivot_row);
            }
            let pivot = self.data[col * n + col];
            for r in (col + 1)..n {
                let factor = self.data[r * n + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for k in col..n {
                    self.data[r * n + k] -= factor * self.data[col * n + k];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let row = &self.data[r * n..(r + 1) * n];
            let tail: f64 = row[r + 1..]
                .iter()
                .zip(&x[r + 1..])
                .map(|(a, b)| a * b)
                .sum();
            x[r] = (rhs[r] - tail) / row[r];
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 1; 1 3] x = [3; 5] -> x = [0.8, 1.4]
        let mut m = Dense::zeros(2);
        m.add(0, 0, 2.0);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 3.0);
        let x = m.solve(vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn needs_pivoting() {
        let mut m = Dense::zeros(2);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        let x = m.solve(vec![2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_is_none() {
        let mut m = Dense::zeros(2);
        m.add(0, 0, 1.0);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 1.0);
        assert!(m.solve(vec![1.0, 1.0]).is_none());
        assert!(Dense::identity(3).solve(vec![1.0, 2.0, 3.0]).is_some());
    }
}
