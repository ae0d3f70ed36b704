//! Banded matrix storage and a banded LU factorization with partial pivoting.
//!
//! All couplings in the discretization are element-local, so every system
//! matrix has a small bandwidth; the KKT solver exploits this throughout.

use crate::error::{Error, Result};

/// Symmetric banded matrix; stores the lower triangle within half-bandwidth `kd`.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    kd: usize,
    /// data[i * (kd + 1) + d] holds entry (i, i - d) for d = 0..=kd.
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        SymBand {
            n,
            kd,
            data: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(
            d <= self.kd,
            "entry ({i},{j}) outside half-bandwidth {}",
            self.kd
        );
        self.data[hi * (self.kd + 1) + d] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.kd {
            0.0
        } else {
            self.data[hi * (self.kd + 1) + d]
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let dmax = self.kd.min(i);
            for d in 0..=dmax {
                let j = i - d;
                let v = self.data[i * (self.kd + 1) + d];
                y[i] += v * x[j];
                if d != 0 {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// u^T A v
    pub fn quad_form(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.n);
        assert_eq!(v.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            let dmax = self.kd.min(i);
            for d in 0..=dmax {
                let j = i - d;
                let a = self.data[i * (self.kd + 1) + d];
                if d == 0 {
                    acc += a * u[i] * v[i];
                } else {
                    acc += a * (u[i] * v[j] + u[j] * v[i]);
                }
            }
        }
        acc
    }

    /// Visit stored lower-triangle entries (i >= j), including explicit zeros.
    pub fn for_each_lower(&self, mut f: impl FnMut(usize, usize, f64)) {
        for i in 0..self.n {
            let dmax = self.kd.min(i);
            for d in 0..=dmax {
                f(i, i - d, self.data[i * (self.kd + 1) + d]);
            }
        }
    }

    /// Linear combination sum_k coeff_k * m_k; all matrices must share `n`.
    pub fn linear_combination(terms: &[(f64, &SymBand)]) -> Self {
        let n = terms[0].1.n;
        let kd = terms.iter().map(|(_, m)| m.kd).max().unwrap();
        let mut out = SymBand::zeros(n, kd);
        for &(c, m) in terms {
            assert_eq!(m.n, n);
            m.for_each_lower(|i, j, v| out.add(i, j, c * v));
        }
        out
    }
}

/// General banded matrix in LAPACK-style storage with room for pivoting fill-in.
///
/// Entry (i, j) is stored when -(ku + kl) <= i - j <= kl; the extra `kl`
/// superdiagonals hold fill-in produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        j * self.width + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku + self.kl < j || j + self.kl < i {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside declared band kl={} ku={}",
            self.kl,
            self.ku
        );
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.data[self.offset(i, j)] * x[j];
            }
        }
        y
    }

    /// In-place LU factorization with partial pivoting (deterministic:
    /// ties keep the smallest row index). Returns the pivot vector.
    pub fn factor(&mut self) -> Result<BandLu<'_>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let imax = (j + 1..=(j + kl).min(n - 1)).fold(j, |best, i| {
                if self.data[self.offset(i, j)].abs() > self.data[self.offset(best, j)].abs() {
                    i
                } else {
                    best
                }
            });
            ipiv[j] = imax;
            if self.data[self.offset(imax, j)] == 0.0 {
                return Err(Error::SingularSystem {
                    what: "pivot column",
                    index: j,
                });
            }
            if imax != j {
                let hi = (j + kl + ku).min(n - 1);
                for c in j..=hi {
                    let oj = self.offset(j, c);
                    let oi = self.offset(imax, c);
                    self.data.swap(oj, oi);
                }
            }
            let pivot = self.data[self.offset(j, j)];
            let hi_row = (j + kl).min(n - 1);
            let hi_col = (j + kl + ku).min(n - 1);
            for i in j + 1..=hi_row {
                let oij = self.offset(i, j);
                let l = self.data[oij] / pivot;
                self.data[oij] = l;
                if l != 0.0 {
                    for c in j + 1..=hi_col {
                        let ajc = self.data[self.offset(j, c)];
                        let oic = self.offset(i, c);
                        self.data[oic] -= l * ajc;
                    }
                }
            }
        }
        Ok(BandLu {
            factors: self,
            ipiv,
        })
    }
}

/// Factored band matrix; borrows the storage it factored in place.
pub struct BandLu<'a> {
    factors: &'a BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu<'_> {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let m = self.factors;
        let n = m.n;
        for j in 0..n {
            if self.ipiv[j] != j {
                x.swap(j, self.ipiv[j]);
            }
            let hi = (j + m.kl).min(n - 1);
            for i in j + 1..=hi {
                x[i] -= m.data[m.offset(i, j)] * x[j];
            }
        }
        for j in (0..n).rev() {
            x[j] /= m.data[m.offset(j, j)];
            let lo = j.saturating_sub(m.kl + m.ku);
            for i in lo..j {
                x[i] -= m.data[m.offset(i, j)] * x[j];
            }
        }
    }
}
