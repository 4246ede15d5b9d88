//! Dense least squares by Householder QR, with singular values of the
//! triangular factor for conditioning diagnostics.

use crate::scalar::{c, Scalar};

/// Householder factorisation of a tall column-major matrix, with `Q^T b`
/// carried along.
#[derive(Debug, Clone)]
pub(crate) struct QrSystem<T> {
    /// Upper triangle, column-major, `cols x cols`.
    r: Vec<T>,
    qtb: Vec<T>,
    cols: usize,
}

impl<T: Scalar> QrSystem<T> {
    /// Factorises `[columns] x = b`. Every column must have `b.len()` rows and
    /// there must be at least as many rows as columns.
    pub fn factor(columns: &[Vec<T>], b: &[T]) -> Self {
        let rows = b.len();
        let cols = columns.len();
        assert!(rows >= cols, "least squares needs rows >= cols");
        let mut a: Vec<Vec<T>> = columns.to_vec();
        let mut rhs = b.to_vec();
        let two = c::<T>(2.0);

        for k in 0..cols {
            let norm = a[k][k..].iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
            if norm == T::zero() {
                continue;
            }
            let alpha = if a[k][k] > T::zero() { -norm } else { norm };
            let mut v = a[k][k..].to_vec();
            v[0] = v[0] - alpha;
            let vnorm_sq = v.iter().fold(T::zero(), |s, &x| s + x * x);
            if vnorm_sq == T::zero() {
                continue;
            }
            let reflect = |col: &mut [T]| {
                let dot = v.iter().zip(col.iter()).fold(T::zero(), |s, (&p, &q)| s + p * q);
                let f = two * dot / vnorm_sq;
                for (x, &vi) in col.iter_mut().zip(&v) {
                    *x = *x - f * vi;
                }
            };
            for col in a.iter_mut().skip(k + 1) {
                reflect(&mut col[k..]);
            }
            reflect(&mut rhs[k..]);
            a[k][k] = alpha;
            for x in a[k][k + 1..].iter_mut() {
                *x = T::zero();
            }
        }

        let mut r = vec![T::zero(); cols * cols];
        for (j, col) in a.iter().enumerate() {
            r[j * cols..j * cols + j + 1].copy_from_slice(&col[..=j]);
        }
        Self { r, qtb: rhs[..cols].to_vec(), cols }
    }

    fn r_at(&self, i: usize, j: usize) -> T {
        self.r[j * self.cols + i]
    }

    /// Singular values of R (equal to those of the factored matrix), descending.
    pub fn singular_values(&self) -> Vec<T> {
        let n = self.cols;
        let cols: Vec<Vec<T>> = (0..n).map(|j| (0..n).map(|i| self.r_at(i, j)).collect()).collect();
        jacobi_singular_values(cols)
    }

    /// Back substitution. Returns `None` when a diagonal entry of R is zero.
    pub fn solve(&self) -> Option<Vec<T>> {
        let n = self.cols;
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = self.qtb[i];
            for j in i + 1..n {
                s = s - self.r_at(i, j) * x[j];
            }
            let d = self.r_at(i, i);
            if d == T::zero() {
                return None;
            }
            x[i] = s / d;
        }
        Some(x)
    }
}

/// One-sided Jacobi: orthogonalise the columns, their norms are the singular values.
pub(crate) fn jacobi_singular_values<T: Scalar>(mut cols: Vec<Vec<T>>) -> Vec<T> {
    let n = cols.len();
    let tol = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = cols[i].iter().zip(&cols[j]).fold(
                    (T::zero(), T::zero(), T::zero()),
                    |(a, b, g), (&x, &y)| (a + x * x, b + y * y, g + x * y),
                );
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (c::<T>(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                let (left, right) = cols.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = cs * xi - sn * yj;
                    *y = sn * xi + cs * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|col| col.iter().fold(T::zero(), |s, &v| s + v * v).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_overdetermined_consistent_system() {
        // x0 + 2 x1 = b over a few rows, exact solution (3, -1)
        let c0 = vec![1.0, 2.0, 3.0, 4.0];
        let c1 = vec![1.0, -1.0, 0.5, 2.0];
        let b: Vec<f64> = c0.iter().zip(&c1).map(|(a, d)| 3.0 * a - d).collect();
        let qr = QrSystem::factor(&[c0, c1], &b);
        let x = qr.solve().unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        // fit a line to non-collinear points; closed form from 2x2 normal equations
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 2.9, 5.2, 7.1, 8.8];
        let ones = vec![1.0; 5];
        let qr = QrSystem::factor(&[ones, t.to_vec()], &y);
        let x = qr.solve().unwrap();
        let n = 5.0;
        let (st, sy, stt, sty) = (10.0, 25.0, 30.0, t.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>());
        let slope = (n * sty - st * sy) / (n * stt - st * st);
        let icpt = (sy - slope * st) / n;
        assert_relative_eq!(x[0], icpt, epsilon = 1e-12);
        assert_relative_eq!(x[1], slope, epsilon = 1e-12);
    }

    #[test]
    fn singular_values_of_diagonal_and_rank_deficient() {
        let sv = jacobi_singular_values(vec![vec![0.0, 3.0], vec![-4.0, 0.0]]);
        assert_relative_eq!(sv[0], 4.0, epsilon = 1e-14);
        assert_relative_eq!(sv[1], 3.0, epsilon = 1e-14);

        let c0 = vec![1.0, 2.0, 3.0];
        let c1 = vec![2.0, 4.0, 6.0];
        let qr = QrSystem::factor(&[c0, c1], &[1.0, 1.0, 1.0]);
        let sv = qr.singular_values();
        assert_relative_eq!(sv[0], (5.0f64 * 14.0).sqrt(), epsilon = 1e-12);
        assert!(sv[1] < 1e-12);
    }

    #[test]
    fn zero_column_is_reported_unsolvable() {
        let qr = QrSystem::factor(&[vec![1.0, 1.0, 1.0], vec![0.0; 3]], &[1.0, 2.0, 3.0]);
        assert!(qr.solve().is_none());
        assert_eq!(qr.singular_values()[1], 0.0);
    }
}
