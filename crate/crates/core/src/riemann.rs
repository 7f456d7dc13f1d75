//! Points of the ramified cover on which every `τ_j(z) = (z − σ_j²)^{1/2}` is single valued.
//!
//! A sheet is encoded by the finite set of modes whose square root takes the
//! lower branch (`Im τ_j ≤ 0`); all other modes use the root with `Im τ_j ≥ 0`.
//! Mode numbers start at 1.

use std::collections::BTreeSet;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cross_section::ModeBasis;
use crate::error::{Error, Result};

/// `z` together with the modes whose branch is flipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetPoint {
    pub re: f64,
    pub im: f64,
    #[serde(default)]
    pub flipped: BTreeSet<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// Limit point `E ± i0` taken from the physical region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub energy: f64,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfacePoint {
    Sheet(SheetPoint),
    Boundary(BoundaryPoint),
}

/// Branch value together with a flag for ramification points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tau {
    pub value: C64,
    pub ramified: bool,
}

impl SheetPoint {
    pub fn physical(z: C64) -> Self {
        Self { re: z.re, im: z.im, flipped: BTreeSet::new() }
    }

    pub fn with_flips(z: C64, flipped: impl IntoIterator<Item = usize>) -> Self {
        Self { re: z.re, im: z.im, flipped: flipped.into_iter().collect() }
    }

    pub fn z(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

impl BoundaryPoint {
    pub fn plus(energy: f64) -> Self {
        Self { energy, side: Side::Plus }
    }
}

impl From<SheetPoint> for SurfacePoint {
    fn from(p: SheetPoint) -> Self {
        SurfacePoint::Sheet(p)
    }
}

impl From<BoundaryPoint> for SurfacePoint {
    fn from(p: BoundaryPoint) -> Self {
        SurfacePoint::Boundary(p)
    }
}

impl SurfacePoint {
    /// Projection to the complex plane.
    pub fn z(&self) -> C64 {
        match self {
            SurfacePoint::Sheet(p) => p.z(),
            SurfacePoint::Boundary(b) => C64::new(b.energy, 0.0),
        }
    }

    pub fn is_flipped(&self, j: usize) -> bool {
        match self {
            SurfacePoint::Sheet(p) => p.flipped.contains(&j),
            SurfacePoint::Boundary(_) => false,
        }
    }

    pub fn flipped(&self) -> Vec<usize> {
        match self {
            SurfacePoint::Sheet(p) => p.flipped.iter().copied().collect(),
            SurfacePoint::Boundary(_) => Vec::new(),
        }
    }

    fn max_flip(&self) -> usize {
        match self {
            SurfacePoint::Sheet(p) => p.flipped.iter().next_back().copied().unwrap_or(0),
            SurfacePoint::Boundary(_) => 0,
        }
    }

    /// Square root of `z − threshold` on this point's branch for a mode with the
    /// given flip state. Works for any threshold, including discrete ones.
    pub fn root(&self, threshold: f64, flipped: bool) -> Tau {
        match self {
            SurfacePoint::Sheet(p) => {
                let w = p.z() - threshold;
                let r = upper_sqrt(w);
                Tau { value: if flipped { -r } else { r }, ramified: w == C64::new(0.0, 0.0) }
            }
            SurfacePoint::Boundary(b) => {
                let d = b.energy - threshold;
                let value = if d > 0.0 {
                    let s = d.sqrt();
                    C64::new(if b.side == Side::Plus { s } else { -s }, 0.0)
                } else {
                    C64::new(0.0, (-d).sqrt())
                };
                Tau { value, ramified: d == 0.0 }
            }
        }
    }
}

/// Square root with nonnegative imaginary part; real positive arguments give the
/// positive root, which is the `E + i0` limit.
pub fn upper_sqrt(w: C64) -> C64 {
    let r = w.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

/// `τ_j` at `p` for mode `j` (1-based) of `basis`.
pub fn tau(p: &SurfacePoint, j: usize, basis: &ModeBasis) -> Result<Tau> {
    let s = basis.sigma(j)?;
    Ok(p.root(s * s, p.is_flipped(j)))
}

/// True iff the point lies in the region where every `Im τ_j > 0`.
pub fn is_physical(p: &SheetPoint, basis: &ModeBasis) -> bool {
    if !p.flipped.is_empty() {
        return false;
    }
    let s1 = basis.modes().first().map(|m| m.sigma).unwrap_or(f64::INFINITY);
    !(p.im == 0.0 && p.re >= s1 * s1)
}

const TAIL_SIN: f64 = 0.923_879_532_511_286_7; // sin(3π/8)

/// `d(p, q) = sup_j |τ_j(p) − τ_j(q)|` over all modes of the cross-sections
/// underlying `basis`.
///
/// Modes are enumerated until a certified tail bound drops below the running
/// maximum. For `σ_j² ≥ 2M`, `M = max(|z|, |z'|)`, both roots lie in the sector
/// `arg τ ∈ [3π/8, 5π/8]`, hence `|τ_j(z) − τ_j(z')| ≤ |z − z'| / (2 sin(3π/8) √(σ_j² − M))`.
pub fn metric_d(p: &SurfacePoint, q: &SurfacePoint, basis: &ModeBasis) -> Result<f64> {
    let zp = p.z();
    let zq = q.z();
    let m = zp.norm().max(zq.norm());
    let dz = (zp - zq).norm();
    let tail = |sigma: f64| -> f64 {
        let s2 = sigma * sigma;
        if s2 < 2.0 * m {
            f64::INFINITY
        } else {
            dz / (2.0 * TAIL_SIN * (s2 - m).sqrt())
        }
    };
    let need = p.max_flip().max(q.max_flip());
    let mut count = basis.len().max(need).max(8);
    loop {
        let ext = basis.extended(count);
        let mut best: f64 = 0.0;
        for (i, md) in ext.modes().iter().enumerate() {
            let j = i + 1;
            let s2 = md.sigma * md.sigma;
            let a = p.root(s2, p.is_flipped(j)).value;
            let b = q.root(s2, q.is_flipped(j)).value;
            best = best.max((a - b).norm());
        }
        let next = ext.next_sigma();
        let bound = tail(next);
        if count >= need && (bound <= best || bound <= 1e-15) {
            return Ok(best);
        }
        if count > 1_000_000 {
            return Err(Error::Precondition("metric tail did not converge".into()));
        }
        count *= 2;
    }
}

/// Brute-force reference value of `sup_{j ≤ count}` used to cross-check [`metric_d`].
pub fn metric_d_truncated(p: &SurfacePoint, q: &SurfacePoint, basis: &ModeBasis, count: usize) -> f64 {
    let ext = basis.extended(count);
    ext.modes()
        .iter()
        .enumerate()
        .map(|(i, md)| {
            let s2 = md.sigma * md.sigma;
            (p.root(s2, p.is_flipped(i + 1)).value - q.root(s2, q.is_flipped(i + 1)).value).norm()
        })
        .fold(0.0, f64::max)
}

/// Radius `r` of the disc `|z − E| = r` in direction `theta` such that the
/// metric distance to `E + i0` equals `target`. Points with `sin(theta) < 0` are
/// placed on the sheet continued across the cut of every propagating mode.
pub fn point_at_distance(
    energy: f64,
    theta: f64,
    target: f64,
    basis: &ModeBasis,
) -> Result<(SheetPoint, f64)> {
    let centre = SurfacePoint::Boundary(BoundaryPoint::plus(energy));
    let flips: Vec<usize> = if theta.sin() < 0.0 {
        let n = basis.count_below(energy.max(0.0).sqrt());
        basis
            .extended(n.max(1))
            .modes()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.sigma * m.sigma < energy)
            .map(|(i, _)| i + 1)
            .collect()
    } else {
        Vec::new()
    };
    let at = |r: f64| SheetPoint::with_flips(C64::new(energy, 0.0) + C64::from_polar(r, theta), flips.clone());
    // d grows at least like |z − E| / (2 max|τ|) and at most like sqrt(|z − E|); bracket then bisect.
    let mut hi = target * target.max(1.0);
    let mut guard = 0;
    while metric_d(&centre, &SurfacePoint::Sheet(at(hi)), basis)? < target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Precondition("could not bracket metric distance".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if metric_d(&centre, &SurfacePoint::Sheet(at(mid)), basis)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = at(lo);
    let d = metric_d(&centre, &SurfacePoint::Sheet(p.clone()), basis)?;
    Ok((p, d))
}
