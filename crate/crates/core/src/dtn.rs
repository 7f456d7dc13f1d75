//! Truncated Helmholtz systems closed by exact discrete modal Dirichlet-to-Neumann
//! conditions, and weighted resolvent norm estimates.
//!
//! On a face column `I` each face mode `φ_k` with discrete transverse eigenvalue
//! `λ_k = (4/h²) sin²(kπh/2w)` continues outward as `ρ_kⁿ`, where
//! `ρ + 1/ρ = 2 − h²(z − λ_k)`. Writing `τ = (z − λ_k)^{1/2}` on the branch fixed by
//! the sheet and `s = τh/2`, the outgoing root is `ρ = (√(1 − s²) + i s)²`, i.e.
//! `ρ = e^{iκh}` with `(2/h) sin(κh/2) = τ`. The ghost column beyond the face is
//! eliminated with `u_{I+1} = Φ diag(ρ) Φᵀ h u_I`, so the closure is reflectionless
//! for the five-point scheme. Every face mode is retained.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::cross_section::{End, ModeBasis};
use crate::discretize::{Face, Grid, WeightKind, weight_diag};
use crate::error::{Error, Result};
use crate::geometry::{TheoremClass, WaveguideDomain, classify_theorem};
use crate::riemann::{SheetPoint, SurfacePoint};
use crate::C64;

/// Accepted relative residual of a solve.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Relative change of successive Rayleigh quotients that stops power iteration.
pub const POWER_TOL: f64 = 1e-4;
pub const POWER_MAX_ITER: usize = 400;
pub const DEFAULT_SEED: u64 = 42;

/// Modal closure of one truncation face.
#[derive(Clone, Debug)]
pub struct DtnClosure {
    pub end: End,
    pub face_nodes: Vec<usize>,
    /// `phi[m][p]`: mode `m` at face node `p` (continuum sine sampled on the lattice).
    pub phi: Vec<Vec<f64>>,
    /// Quadrature weight of the face sum.
    pub weight: f64,
    /// Discrete transverse eigenvalues.
    pub thresholds: Vec<f64>,
    pub tau: Vec<C64>,
    /// Outgoing ratio `ρ` per mode.
    pub ghost: Vec<C64>,
    /// 1-based index of each face mode in the domain basis, when retained there.
    pub basis_index: Vec<Option<usize>>,
    /// Retained mode count.
    pub rank: usize,
    /// Smallest count `J` with `Im τ_J (L − R0) ≥ 30`, for reference.
    pub evanescent_rank: usize,
}

/// Discrete modal closure at the face `end` for the sheet point `p`.
pub fn dtn_matrix(grid: &Grid, end: End, basis: &ModeBasis, p: &SurfacePoint) -> Result<DtnClosure> {
    let face = grid.face(end).ok_or_else(|| Error::Precondition(format!("{end:?} end is empty")))?;
    closure_for_face(grid, face, basis, p)
}

fn face_intervals(face: &Face, h: f64) -> Vec<(usize, usize)> {
    // Runs of consecutive lattice rows; each run is one interval of the cross-section.
    let mut runs = Vec::new();
    let mut start = 0;
    for p in 1..=face.ys.len() {
        if p == face.ys.len() || face.ys[p] - face.ys[p - 1] > 1.5 * h {
            runs.push((start, p));
            start = p;
        }
    }
    runs
}

/// Discrete transverse eigenvalues of every face, sorted and deduplicated.
/// These are the branch points of the closed system.
pub fn face_thresholds(grid: &Grid) -> Vec<f64> {
    let h = grid.h;
    let mut out = Vec::new();
    for face in grid.faces() {
        for (s, e) in face_intervals(face, h) {
            let w = (e - s + 1) as f64 * h;
            for k in 1..=(e - s) {
                out.push((2.0 / h * (k as f64 * std::f64::consts::PI * h / (2.0 * w)).sin()).powi(2));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    out
}

fn closure_for_face(grid: &Grid, face: &Face, basis: &ModeBasis, p: &SurfacePoint) -> Result<DtnClosure> {
    let h = grid.h;
    let n = face.nodes.len();
    let mut out = DtnClosure {
        end: face.end,
        face_nodes: face.nodes.clone(),
        phi: Vec::new(),
        weight: h,
        thresholds: Vec::new(),
        tau: Vec::new(),
        ghost: Vec::new(),
        basis_index: Vec::new(),
        rank: 0,
        evanescent_rank: 0,
    };
    let mut order = Vec::new();
    for (iv, (s, e)) in face_intervals(face, h).into_iter().enumerate() {
        let a = face.ys[s] - h;
        let w = (e - s + 1) as f64 * h;
        for k in 1..=(e - s) {
            let mut col = vec![0.0; n];
            for q in s..e {
                col[q] = (2.0 / w).sqrt() * (k as f64 * std::f64::consts::PI * (face.ys[q] - a) / w).sin();
            }
            let lam = (2.0 / h * (k as f64 * std::f64::consts::PI * h / (2.0 * w)).sin()).powi(2);
            let idx = basis.find(face.end, iv, k);
            let flipped = idx.is_some_and(|j| p.is_flipped(j));
            let t = p.root(lam, flipped);
            if t.ramified || t.value.norm() < 1e-13 * lam.max(1.0) {
                return Err(Error::ThresholdPoint { mode: idx.unwrap_or(0) });
            }
            let s2 = t.value * (h / 2.0);
            let c = (C64::new(1.0, 0.0) - s2 * s2).sqrt();
            let rho = (c + C64::i() * s2).powi(2);
            order.push((lam, col, t.value, rho, idx));
        }
    }
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let depth = (grid.l - grid.r0).max(0.0);
    out.evanescent_rank = order.len();
    for (m, (lam, col, tau, rho, idx)) in order.into_iter().enumerate() {
        if out.evanescent_rank == n && tau.im * depth >= 30.0 {
            out.evanescent_rank = m + 1;
        }
        out.thresholds.push(lam);
        out.phi.push(col);
        out.tau.push(tau);
        out.ghost.push(rho);
        out.basis_index.push(idx);
    }
    out.rank = out.phi.len();
    Ok(out)
}

impl DtnClosure {
    /// `Φ diag(ρ) Φᵀ h`, mapping the face trace to the ghost column.
    pub fn ghost_block(&self) -> Vec<Vec<C64>> {
        let n = self.face_nodes.len();
        let mut t = vec![vec![C64::new(0.0, 0.0); n]; n];
        for (m, col) in self.phi.iter().enumerate() {
            let g = self.ghost[m] * self.weight;
            for p in 0..n {
                if col[p] == 0.0 {
                    continue;
                }
                let gp = g * col[p];
                for q in 0..n {
                    t[p][q] += gp * col[q];
                }
            }
        }
        t
    }

    /// `Φ diag((ρ − 1)/h) Φᵀ h`: the discrete outgoing normal derivative.
    pub fn dtn_block(&self) -> Vec<Vec<C64>> {
        let mut b = self.ghost_block();
        let g = 1.0 / self.weight;
        for (p, row) in b.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= g;
            }
            row[p] -= g;
        }
        b
    }

    /// `max |h Σ φ_a φ_b − δ_ab|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, pa) in self.phi.iter().enumerate() {
            for (b, pb) in self.phi.iter().enumerate() {
                let s: f64 = pa.iter().zip(pb).map(|(x, y)| x * y).sum::<f64>() * self.weight;
                worst = worst.max((s - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// Factored `−Δ_h − z` with modal closures on every face.
#[derive(Debug)]
pub struct ClosedSystem {
    pub point: SurfacePoint,
    pub closures: Vec<DtnClosure>,
    matrix: BandMatrix,
    lu: BandLu,
}

/// Assembles the band matrix of the closed system without factoring it.
pub fn assemble_matrix(grid: &Grid, basis: &ModeBasis, p: &SurfacePoint) -> Result<(BandMatrix, Vec<DtnClosure>)> {
    let z = p.z();
    let inv = 1.0 / (grid.h * grid.h);
    let bw = grid.bandwidth();
    let mut a = BandMatrix::zeros(grid.len(), bw, bw);
    for k in 0..grid.len() {
        let (i, j) = grid.node(k);
        let (i, j) = (i as isize, j as isize);
        a.add(k, k, C64::new(4.0 * inv, 0.0) - z);
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if let Some(m) = grid.index(i + di, j + dj) {
                a.add(k, m, C64::new(-inv, 0.0));
            }
        }
    }
    let mut closures = Vec::new();
    for face in grid.faces() {
        let c = closure_for_face(grid, face, basis, p)?;
        let t = c.ghost_block();
        for (pi, &r) in c.face_nodes.iter().enumerate() {
            for (qi, &s) in c.face_nodes.iter().enumerate() {
                let v = t[pi][qi];
                if v != C64::new(0.0, 0.0) {
                    a.add(r, s, -v * inv);
                }
            }
        }
        closures.push(c);
    }
    Ok((a, closures))
}

pub fn assemble_system(grid: &Grid, basis: &ModeBasis, p: &SurfacePoint) -> Result<ClosedSystem> {
    let (matrix, closures) = assemble_matrix(grid, basis, p)?;
    let lu = matrix.clone().factor()?;
    Ok(ClosedSystem { point: p.clone(), closures, matrix, lu })
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

impl ClosedSystem {
    pub fn len(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n() == 0
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.matvec(u)
    }

    pub fn norm_inf(&self) -> f64 {
        self.lu.scale
    }

    pub fn min_pivot(&self) -> f64 {
        self.lu.min_pivot
    }

    /// `‖A u − f‖ / ‖f‖` (zero for `f = u = 0`).
    pub fn relative_residual(&self, u: &[C64], f: &[C64]) -> f64 {
        let r: Vec<C64> = self.apply(u).iter().zip(f).map(|(a, b)| a - b).collect();
        let nf = vnorm(f);
        if nf == 0.0 {
            return vnorm(&r);
        }
        vnorm(&r) / nf
    }

    /// LU solve with up to two refinement steps, without acceptance checks.
    pub fn solve_unchecked(&self, f: &[C64]) -> (Vec<C64>, f64) {
        let mut u = self.lu.solve(f);
        let mut res = self.relative_residual(&u, f);
        for _ in 0..2 {
            if res <= 1e-12 {
                break;
            }
            let r: Vec<C64> = f.iter().zip(self.apply(&u)).map(|(a, b)| a - b).collect();
            let d = self.lu.solve(&r);
            let cand: Vec<C64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
            let cres = self.relative_residual(&cand, f);
            if cres >= res {
                break;
            }
            u = cand;
            res = cres;
        }
        (u, res)
    }

    /// `A(z)⁻¹ f`, rejected when the residual exceeds [`RESIDUAL_TOL`].
    pub fn solve(&self, f: &[C64]) -> Result<(Vec<C64>, f64)> {
        let (u, res) = self.solve_unchecked(f);
        if !(res <= RESIDUAL_TOL) {
            return Err(Error::NearSingular(format!("relative residual {res:.3e}")));
        }
        Ok((u, res))
    }

    /// `A(z)⁻ᴴ f`. The closed matrix is complex symmetric, so `A⁻ᴴ f = conj(A⁻¹ conj f)`.
    pub fn solve_adjoint(&self, f: &[C64]) -> Result<(Vec<C64>, f64)> {
        let g: Vec<C64> = f.iter().map(|v| v.conj()).collect();
        let (u, res) = self.solve(&g)?;
        Ok((u.into_iter().map(|v| v.conj()).collect(), res))
    }

    /// Plain LU solve, no refinement.
    pub fn solve_raw(&self, f: &[C64]) -> Vec<C64> {
        self.lu.solve(f)
    }

    pub fn solve_adjoint_unchecked(&self, f: &[C64]) -> Vec<C64> {
        let g: Vec<C64> = f.iter().map(|v| v.conj()).collect();
        self.lu.solve(&g).into_iter().map(|v| v.conj()).collect()
    }
}

/// One weighted resolvent norm measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub point: SurfacePoint,
    pub delta: f64,
    pub norm_estimate: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Power iteration for `‖W_l R W_r‖` given a factored system.
pub fn power_norm(system: &ClosedSystem, left: &[f64], right: &[f64], seed: u64) -> Result<(f64, usize, f64)> {
    let n = system.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    for (v, w) in x.iter_mut().zip(right) {
        if *w == 0.0 {
            *v = C64::new(0.0, 0.0);
        }
    }
    let nx = vnorm(&x);
    if nx == 0.0 {
        return Ok((0.0, 0, 0.0));
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut prev = 0.0;
    let mut worst_res: f64 = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let f: Vec<C64> = x.iter().zip(right).map(|(v, w)| v * w).collect();
        let (u, r1) = system.solve(&f)?;
        let y: Vec<C64> = u.iter().zip(left).map(|(v, w)| v * w).collect();
        let rq = y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let g: Vec<C64> = y.iter().zip(left).map(|(v, w)| v * w).collect();
        let (v, r2) = system.solve_adjoint(&g)?;
        worst_res = worst_res.max(r1).max(r2);
        let mut nxt: Vec<C64> = v.iter().zip(right).map(|(a, w)| a * w).collect();
        let nn = vnorm(&nxt);
        if nn == 0.0 {
            return Ok((rq.sqrt(), it, worst_res));
        }
        nxt.iter_mut().for_each(|a| *a /= nn);
        x = nxt;
        if it > 1 && (rq - prev).abs() <= POWER_TOL * rq {
            return Ok((rq.sqrt(), it, worst_res));
        }
        prev = rq;
    }
    Ok((prev.sqrt(), POWER_MAX_ITER, worst_res))
}

/// Weight used for resolvent sweeps: one-ended `(1+x)` form on one-ended domains,
/// `(1+|x−x0|)` otherwise.
pub fn sweep_weight(domain: &WaveguideDomain) -> WeightKind {
    WeightKind::PolyMinus { one_ended: domain.is_one_ended() }
}

/// Estimates `‖W R(p) W‖` with `W` the polynomial weight of exponent `−(3+δ)/2`.
pub fn estimate_weighted_norm(
    domain: &WaveguideDomain,
    grid: &Grid,
    basis: &ModeBasis,
    p: &SurfacePoint,
    delta: f64,
) -> Result<ResolventProbe> {
    let w = weight_diag(grid, sweep_weight(domain), delta, domain.x0)?;
    let system = assemble_system(grid, basis, p)?;
    let (norm, iterations, res) = power_norm(&system, &w.values, &w.values, DEFAULT_SEED)?;
    Ok(ResolventProbe { point: p.clone(), delta, norm_estimate: norm, iterations, relative_residual: res })
}

/// Same as [`estimate_weighted_norm`] with an arbitrary weight vector on both sides.
pub fn estimate_norm_with_weight(grid: &Grid, basis: &ModeBasis, p: &SurfacePoint, weight: &[f64], delta: f64) -> Result<ResolventProbe> {
    let system = assemble_system(grid, basis, p)?;
    let (norm, iterations, res) = power_norm(&system, weight, weight, DEFAULT_SEED)?;
    Ok(ResolventProbe { point: p.clone(), delta, norm_estimate: norm, iterations, relative_residual: res })
}

/// Basis large enough to index every face mode of `grid`.
pub fn grid_basis(domain: &WaveguideDomain, grid: &Grid) -> ModeBasis {
    let count: usize = grid.faces().iter().map(|f| f.nodes.len()).sum();
    crate::cross_section::domain_modes(domain.y_minus.as_ref(), domain.y_plus.as_ref(), count.max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub energy: f64,
    pub eps: f64,
    pub delta: f64,
    pub norm_estimate: f64,
    pub iterations: usize,
    pub residual: f64,
    pub l: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub theorem_class: TheoremClass,
    pub rows: Vec<SweepRow>,
    /// `(E, sup over ε)` pairs.
    pub sup_by_energy: Vec<(f64, f64)>,
    /// Least-squares slope of `log sup_ε ‖·‖` against `log E`.
    pub slope: Option<f64>,
    /// Energies where the estimate grows like a power of `1/ε` as `ε` decreases.
    pub divergent_energies: Vec<f64>,
    /// Rows exceeding `1.07 (3/δ)(1 + |z|^{1/2})` on one-ended domains.
    pub bound_violations: Vec<usize>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let v: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mx = v.iter().map(|p| p.0).sum::<f64>() / n;
    let my = v.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = v.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return None;
    }
    Some(v.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Theorem-1.1-type constant `(3/δ)(1 + |z|^{1/2})`.
pub fn one_ended_bound(z: C64, delta: f64) -> f64 {
    3.0 / delta * (1.0 + z.norm().sqrt())
}

/// Headroom on the one-ended bound allowed for truncation and grid error.
pub const BOUND_HEADROOM: f64 = 1.07;

/// Probes `z = E + iε` on the physical sheet over a product grid of energies and
/// absorptions, in parallel on the current rayon pool. Rows come back in
/// energy-major order whatever the completion order.
pub fn sweep_bound(
    domain: &WaveguideDomain,
    grid: &Grid,
    energies: &[f64],
    eps_list: &[f64],
    delta: f64,
    seed: u64,
) -> Result<SweepReport> {
    let basis = grid_basis(domain, grid);
    let w = weight_diag(grid, sweep_weight(domain), delta, domain.x0)?;
    let tasks: Vec<(f64, f64)> = energies.iter().flat_map(|&e| eps_list.iter().map(move |&s| (e, s))).collect();
    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(e, s)| -> Result<SweepRow> {
            let p = SurfacePoint::Sheet(SheetPoint::physical(C64::new(e, s)));
            let system = assemble_system(grid, &basis, &p)?;
            let (norm, iterations, res) = power_norm(&system, &w.values, &w.values, seed)?;
            Ok(SweepRow { energy: e, eps: s, delta, norm_estimate: norm, iterations, residual: res, l: grid.l, h: grid.h })
        })
        .collect::<Result<_>>()?;
    let mut sup_by_energy = Vec::new();
    let mut divergent = Vec::new();
    for &e in energies {
        let mut mine: Vec<&SweepRow> = rows.iter().filter(|r| r.energy == e).collect();
        mine.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        sup_by_energy.push((e, mine.iter().map(|r| r.norm_estimate).fold(0.0, f64::max)));
        if let [.., a, b] = mine.as_slice() {
            let rate = (b.norm_estimate / a.norm_estimate).ln() / (a.eps / b.eps).ln();
            if rate >= DIVERGENCE_RATE {
                divergent.push(e);
            }
        }
    }
    let one_ended = domain.is_one_ended();
    let bound_violations = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| one_ended && r.norm_estimate > BOUND_HEADROOM * one_ended_bound(C64::new(r.energy, r.eps), delta))
        .map(|(i, _)| i)
        .collect();
    Ok(SweepReport {
        theorem_class: classify_theorem(domain),
        slope: loglog_slope(&sup_by_energy),
        sup_by_energy,
        rows,
        divergent_energies: divergent,
        bound_violations,
    })
}

/// Growth exponent in `1/ε` between the two smallest absorptions above which a
/// sweep point is reported as divergent.
pub const DIVERGENCE_RATE: f64 = 0.35;
