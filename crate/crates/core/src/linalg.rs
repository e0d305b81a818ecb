//! Dense LU with partial pivoting for the small fixed-size systems of the
//! implicit integrator.

use crate::error::{MaserError, Result};
use crate::scalar::Real;

pub(crate) struct Lu<T, const N: usize> {
    lu: [[T; N]; N],
    perm: [usize; N],
}

impl<T: Real, const N: usize> Lu<T, N> {
    pub(crate) fn factor(mut a: [[T; N]; N]) -> Result<Self> {
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let mut pivot = k;
            let mut best = a[k][k].abs();
            for (i, row) in a.iter().enumerate().skip(k + 1) {
                if row[k].abs() > best {
                    best = row[k].abs();
                    pivot = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(MaserError::Singular);
            }
            a.swap(k, pivot);
            perm.swap(k, pivot);
            let inv = T::one() / a[k][k];
            for i in (k + 1)..N {
                let factor = a[i][k] * inv;
                a[i][k] = factor;
                if factor != T::zero() {
                    for j in (k + 1)..N {
                        let t = a[k][j];
                        a[i][j] = a[i][j] - factor * t;
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub(crate) fn solve(&self, b: &[T; N]) -> [T; N] {
        let mut x = [T::zero(); N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s = s - self.lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..N).rev() {
            let mut s = x[i];
            for j in (i + 1)..N {
                s = s - self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let a: [[f64; 3]; 3] = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x_true: [f64; 3] = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i][j] * x_true[j];
            }
        }
        let x = Lu::factor(a).unwrap().solve(&b);
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = [[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(Lu::factor(a), Err(MaserError::Singular)));
    }
}
