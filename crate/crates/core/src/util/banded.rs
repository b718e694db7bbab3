//! Banded LU factorization with partial pivoting (LAPACK-style storage).
//!
//! Used for the beam operators (bandwidth 2..3) and as the direct option for
//! small saddle-point systems. Storage keeps `kl` extra superdiagonal rows for
//! pivoting fill, so a matrix with `kl` sub- and `ku` superdiagonals occupies
//! `2*kl + ku + 1` rows per column.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        let r = self.kl + self.ku + i - j; // i - j in [-(kl+ku), kl]
        j * self.ldab + r
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        (j <= i + self.ku) && (i <= j + self.kl)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band kl={} ku={}", self.kl, self.ku);
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band kl={} ku={}", self.kl, self.ku);
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for j in j0..=j1 {
                s += self.ab[self.slot(i, j)] * x[j];
            }
            y[i] = s;
        }
    }

    /// In-place LU with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku; // row offset of the diagonal in the work storage
        let mut ipiv = vec![0usize; n];

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j among rows j..=j+km
            let mut jp = 0usize;
            let mut pmax = self.ab[j * ldab + kv].abs();
            for i in 1..=km {
                let v = self.ab[j * ldab + kv + i].abs();
                if v > pmax {
                    pmax = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            let ju = (j + kl + ku).min(n - 1);
            if pmax == 0.0 {
                return Err(Error::SingularOperator(format!(
                    "banded LU: zero pivot column {j}"
                )));
            }
            if jp != 0 {
                for j2 in j..=ju {
                    let a = j2 * ldab + kv + j - j2;
                    let b = j2 * ldab + kv + j + jp - j2;
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[j * ldab + kv];
            for i in 1..=km {
                self.ab[j * ldab + kv + i] /= piv;
            }
            for j2 in (j + 1)..=ju {
                let ujj2 = self.ab[j2 * ldab + kv + j - j2];
                if ujj2 != 0.0 {
                    for i in 1..=km {
                        self.ab[j2 * ldab + kv + j + i - j2] -= self.ab[j * ldab + kv + i] * ujj2;
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kv = self.kl + self.ku;
        // L solve with row interchanges
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let ip = self.ipiv[j];
            if ip != j {
                b.swap(ip, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= self.ab[j * self.ldab + kv + i] * bj;
                }
            }
        }
        // U back-substitution (bandwidth kl+ku above the diagonal)
        for j in (0..n).rev() {
            b[j] /= self.ab[j * self.ldab + kv];
            let bj = b[j];
            if bj != 0.0 {
                let i0 = j.saturating_sub(kv);
                for i in i0..j {
                    b[i] -= self.ab[j * self.ldab + kv + i - j] * bj;
                }
            }
        }
    }
}
