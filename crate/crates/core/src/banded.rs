//! Complex banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `c` holds rows
//! `c − kl − ku ..= c + kl` so that fill-in from row interchanges fits.

use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, data: vec![ZERO; n * ld] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        c * self.ld + self.kl + self.ku + r - c
    }

    fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && r + self.ku >= c && r <= c + self.kl
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        if self.in_band(r, c) {
            self.data[self.idx(r, c)]
        } else {
            ZERO
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: C64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside the band");
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        for c in 0..self.n {
            let xc = x[c];
            if xc == ZERO {
                continue;
            }
            let r0 = c.saturating_sub(self.ku);
            let r1 = (c + self.kl).min(self.n - 1);
            for r in r0..=r1 {
                y[r] += self.data[self.idx(r, c)] * xc;
            }
        }
        y
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for c in 0..self.n {
            let r0 = c.saturating_sub(self.ku);
            let r1 = (c + self.kl).min(self.n - 1);
            for r in r0..=r1 {
                rows[r] += self.data[self.idx(r, c)].norm();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// In-place LU factorization.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku, ld) = (self.kl, self.ku, self.ld);
        let scale = self.norm_inf();
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let km = kl.min(n - 1 - k);
            let base = self.idx(k, k);
            let mut p = 0;
            let mut best = self.data[base].norm_sqr();
            for i in 1..=km {
                let v = self.data[base + i].norm_sqr();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = k + p;
            let pv = best.sqrt();
            min_pivot = min_pivot.min(pv);
            if pv == 0.0 || !pv.is_finite() {
                return Err(Error::NearSingular(format!("zero pivot in column {k}")));
            }
            ju = ju.max((k + ku + p).min(n - 1));
            if p != 0 {
                for c in k..=ju {
                    let a = self.idx(k, c);
                    let b = self.idx(k + p, c);
                    self.data.swap(a, b);
                }
            }
            let inv = self.data[base].inv();
            for i in 1..=km {
                self.data[base + i] *= inv;
            }
            if km == 0 {
                continue;
            }
            for c in k + 1..=ju {
                let top = self.idx(k, c);
                let t = self.data[top];
                if t == ZERO {
                    continue;
                }
                let (left, right) = self.data.split_at_mut(c * ld);
                let lcol = &left[base + 1..base + 1 + km];
                let off = top + 1 - c * ld;
                let ccol = &mut right[off..off + km];
                for (x, l) in ccol.iter_mut().zip(lcol) {
                    *x -= l * t;
                }
            }
        }
        Ok(BandLu { m: self, piv, min_pivot, scale })
    }
}

/// Factored band matrix.
#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    /// Smallest pivot magnitude met during elimination.
    pub min_pivot: f64,
    /// Infinity norm of the unfactored matrix.
    pub scale: f64,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let m = &self.m;
        let n = m.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let t = b[k];
            if t == ZERO {
                continue;
            }
            let km = m.kl.min(n - 1 - k);
            let base = m.idx(k, k);
            for i in 1..=km {
                b[k + i] -= m.data[base + i] * t;
            }
        }
        let w = m.kl + m.ku;
        for k in (0..n).rev() {
            let d = m.data[m.idx(k, k)];
            b[k] /= d;
            let t = b[k];
            if t == ZERO {
                continue;
            }
            let lo = k.saturating_sub(w);
            let start = m.idx(lo, k);
            for (r, a) in (lo..k).zip(&m.data[start..start + (k - lo)]) {
                b[r] -= a * t;
            }
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
