//! Envelope (skyline) LDLᵀ factorization for sparse symmetric positive
//! definite systems, over `f64` or exact rationals.

use num_rational::BigRational;
use num_traits::{Num, Zero};

use crate::error::{Error, Result};

pub trait Scalar: Clone + Num {
    fn dot(a: &[Self], b: &[Self]) -> Self;
    fn is_positive(&self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn dot(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        let mut acc = [0.0f64; 4];
        let chunks = n / 4;
        for c in 0..chunks {
            let i = 4 * c;
            acc[0] += a[i] * b[i];
            acc[1] += a[i + 1] * b[i + 1];
            acc[2] += a[i + 2] * b[i + 2];
            acc[3] += a[i + 3] * b[i + 3];
        }
        let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        for i in 4 * chunks..n {
            s += a[i] * b[i];
        }
        s
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }
}

impl Scalar for BigRational {
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter()
            .zip(b)
            .filter(|(x, y)| !x.is_zero() && !y.is_zero())
            .fold(BigRational::zero(), |acc, (x, y)| acc + x * y)
    }

    fn is_positive(&self) -> bool {
        *self > BigRational::zero()
    }
}

/// `A = L D Lᵀ` with `L` stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct SkylineLdl<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: Scalar> SkylineLdl<T> {
    /// Factors the symmetric matrix given by its diagonal and, per row `i`,
    /// the strictly-lower entries `(j, a_ij)` with `j < i`.
    pub fn factor(diag: Vec<T>, strict_lower: &[Vec<(usize, T)>]) -> Result<Self> {
        let n = diag.len();
        assert_eq!(strict_lower.len(), n);
        let first: Vec<usize> = strict_lower
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, _)| j).min().unwrap_or(i).min(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut len = 0usize;
        for (i, &f) in first.iter().enumerate() {
            start.push(len);
            len += i - f;
        }
        start.push(len);
        let mut lower = vec![T::zero(); len];
        for (i, row) in strict_lower.iter().enumerate() {
            for (j, a) in row {
                debug_assert!(*j < i);
                lower[start[i] + j - first[i]] = a.clone();
            }
        }

        let mut d = diag;
        for i in 0..n {
            let fi = first[i];
            let (prev, cur) = lower.split_at_mut(start[i]);
            let row = &mut cur[..i - fi];
            // Crout sweep: row holds g_j = (L_ij * D_j) for the columns done so far.
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                if lo < j {
                    let lj = &prev[start[j] + lo - fj..start[j] + j - fj];
                    let s = T::dot(&row[lo - fi..j - fi], lj);
                    let slot = &mut row[j - fi];
                    *slot = slot.clone() - s;
                }
            }
            let mut di = d[i].clone();
            for j in fi..i {
                let g = row[j - fi].clone();
                if g.is_zero() {
                    continue;
                }
                let l = g.clone() / d[j].clone();
                di = di - g * l.clone();
                row[j - fi] = l;
            }
            if !di.is_positive() {
                return Err(Error::Singular(format!(
                    "pivot {i} is not positive; matrix is not SPD"
                )));
            }
            d[i] = di;
        }
        Ok(Self {
            first,
            start,
            lower,
            diag: d,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn envelope_len(&self) -> usize {
        self.lower.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s = T::dot(row, &x[fi..i]);
            x[i] = x[i].clone() - s;
        }
        for (xi, di) in x.iter_mut().zip(&self.diag) {
            *xi = xi.clone() / di.clone();
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i].clone();
            if xi.is_zero() {
                continue;
            }
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (xk, l) in x[fi..i].iter_mut().zip(row) {
                *xk = xk.clone() - l.clone() * xi.clone();
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    /// 1-D Dirichlet Laplacian: 2 on the diagonal, -1 off.
    fn laplacian(n: usize) -> (Vec<f64>, Vec<Vec<(usize, f64)>>) {
        let diag = vec![2.0; n];
        let lower = (0..n)
            .map(|i| if i == 0 { vec![] } else { vec![(i - 1, -1.0)] })
            .collect();
        (diag, lower)
    }

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let (diag, lower) = laplacian(n);
        let ldl = SkylineLdl::factor(diag, &lower).unwrap();
        // A x = e_0 + e_{n-1} has solution x = 1.
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        b[n - 1] = 1.0;
        let x = ldl.solve(&b);
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn solves_wide_envelope() {
        // Arrow-ish SPD matrix with a long first-column envelope.
        let n = 12;
        let diag: Vec<f64> = (0..n).map(|i| 10.0 + i as f64).collect();
        let lower: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| if i == 0 { vec![] } else { vec![(0, 1.0), (i - 1, -0.5)] })
            .map(|mut r| {
                r.dedup_by_key(|e| e.0);
                r
            })
            .collect();
        let ldl = SkylineLdl::factor(diag.clone(), &lower).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        // b = A x_true
        let mut b: Vec<f64> = diag.iter().zip(&x_true).map(|(d, x)| d * x).collect();
        for (i, row) in lower.iter().enumerate() {
            for &(j, a) in row {
                b[i] += a * x_true[j];
                b[j] += a * x_true[i];
            }
        }
        let x = ldl.solve(&b);
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rational_solve_is_exact() {
        let n = 6;
        let r = |v: i64| BigRational::from_integer(BigInt::from(v));
        let diag = vec![r(2); n];
        let lower: Vec<Vec<(usize, BigRational)>> = (0..n)
            .map(|i| if i == 0 { vec![] } else { vec![(i - 1, r(-1))] })
            .collect();
        let ldl = SkylineLdl::factor(diag, &lower).unwrap();
        let mut b = vec![r(0); n];
        b[0] = r(1);
        let x = ldl.solve(&b);
        // Green's function of the path: x_i = (n - i) / (n + 1)
        for (i, xi) in x.iter().enumerate() {
            assert_eq!(*xi, BigRational::new(BigInt::from(n - i), BigInt::from(n + 1)));
        }
    }

    #[test]
    fn rejects_indefinite() {
        let diag = vec![1.0, 1.0];
        let lower = vec![vec![], vec![(0, 2.0)]];
        assert!(SkylineLdl::factor(diag, &lower).is_err());
    }
}
