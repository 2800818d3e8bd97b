//! Banded storage and LU with partial pivoting (LAPACK gbtrf layout without the packing).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Band matrix: `data[i][j - i + kl]` holds A_{ij} for -kl <= j - i <= ku.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded<T> {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<T>,
}

pub trait Field: Copy + Default + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<Output = Self> + std::ops::Div<Output = Self> {
    fn abs(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Field for f64 {
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Field for Complex64 {
    fn abs(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

impl<T: Field> Banded<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![T::default(); n * (kl + ku + 1)] }
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.idx(i, j).map(|k| self.data[k]).unwrap_or_default()
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j).expect("entry outside the band");
        self.data[k] = v;
    }

    /// Column range of row i inside the band.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row_range(i).fold(T::default(), |acc, j| acc + self.get(i, j) * x[j]))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<T>
    where
        T: nalgebra::Scalar,
    {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn map<U: Field>(&self, f: impl Fn(T) -> U) -> Banded<U> {
        Banded { n: self.n, kl: self.kl, ku: self.ku, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// s·A + diag(d)
    pub fn scaled_shift(&self, s: T, d: T) -> Banded<T> {
        let mut out = self.map(|v| v * s);
        for i in 0..self.n {
            let v = out.get(i, i) + d;
            out.set(i, i, v);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// LU factors with row interchanges. U has bandwidth kl + ku.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    /// upper bandwidth of U
    ku2: usize,
    /// row-major dense band of U, width ku2 + 1, starting at the diagonal
    u: Vec<T>,
    /// multipliers, kl per column
    l: Vec<T>,
    piv: Vec<usize>,
}

/// Relative pivot size below which the factorization is reported as singular.
pub const PIVOT_TOL: f64 = 1e-14;

impl<T: Field> BandedLu<T> {
    pub fn factor(a: &Banded<T>) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku2 = a.kl + a.ku;
        let w = ku2 + 1;
        // working rows: row i holds columns i..i+ku2 after elimination; before,
        // row i holds columns i-kl..i+ku. Keep a dense window per row indexed from col i - kl.
        let ww = kl + ku2 + 1;
        let mut rows: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mut r = vec![T::default(); ww];
                for j in a.row_range(i) {
                    r[j + kl - i] = a.get(i, j);
                }
                r
            })
            .collect();
        // entry (i, j) lives at rows[i][j + kl - i]
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut piv = vec![0; n];
        let mut l = vec![T::default(); n * kl.max(1)];
        let mut u = vec![T::default(); n * w];
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[k][kl].abs();
            for i in k + 1..=last {
                let v = rows[i][k + kl - i].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            if best <= PIVOT_TOL * scale {
                return Err(Error::Conditioning { row: k, pivot: best, distance: best });
            }
            piv[k] = p;
            if p != k {
                // swap columns k..k+ku2 of rows k and p
                for j in k..(k + ku2 + 1).min(n) {
                    let a_ = rows[k][j + kl - k];
                    let b_ = rows[p][j + kl - p];
                    rows[k][j + kl - k] = b_;
                    rows[p][j + kl - p] = a_;
                }
            }
            let pivot = rows[k][kl];
            for i in k + 1..=last {
                let m = rows[i][k + kl - i] / pivot;
                l[k * kl.max(1) + (i - k - 1)] = m;
                rows[i][k + kl - i] = T::default();
                for j in k + 1..(k + ku2 + 1).min(n) {
                    let v = rows[i][j + kl - i] - m * rows[k][j + kl - k];
                    rows[i][j + kl - i] = v;
                }
            }
            for j in k..(k + w).min(n) {
                u[k * w + (j - k)] = rows[k][j + kl - k];
            }
        }
        let _ = min_pivot;
        Ok(Self { n, kl, ku2, u, l, piv })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let kl = self.kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                let m = self.l[k * kl.max(1) + (i - k - 1)];
                b[i] = b[i] - m * bk;
            }
        }
        let w = self.ku2 + 1;
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..(k + w).min(n) {
                s = s - self.u[k * w + (j - k)] * b[j];
            }
            b[k] = s / self.u[k * w];
        }
    }

    /// Smallest |U_kk|, a cheap indicator of how close the matrix is to singular.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n).map(|k| self.u[k * (self.ku2 + 1)].abs()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn solves_random_band_system() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for &(kl, ku) in &[(1, 1), (4, 4), (2, 3), (0, 2)] {
            let n = 40;
            let mut a = Banded::<Complex64>::zeros(n, kl, ku);
            for i in 0..n {
                for j in a.row_range(i) {
                    a.set(i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
            let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let b = a.matvec(&x);
            let mut y = b.clone();
            BandedLu::factor(&a).unwrap().solve_in_place(&mut y);
            // random triangular bands are badly conditioned, so compare backward error
            let res: f64 = a.matvec(&y).iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(res < 1e-12, "kl={kl} ku={ku}: {res}");
        }
    }

    #[test]
    fn needs_pivoting() {
        // zero leading entry
        let mut a = Banded::<f64>::zeros(3, 1, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 2.0);
        a.set(2, 1, 3.0);
        a.set(2, 2, 1.0);
        let mut b = a.matvec(&[1.0, 2.0, 3.0]);
        BandedLu::factor(&a).unwrap().solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 2.0).abs() < 1e-14 && (b[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_reported() {
        let mut a = Banded::<f64>::zeros(2, 1, 1);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        assert!(matches!(BandedLu::factor(&a), Err(Error::Conditioning { row: 1, .. })));
    }
}
