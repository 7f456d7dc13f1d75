//! Pole indicators for the closed system: relative smallest singular value,
//! real-axis scans, local minimization and resonance-free balls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_section::ModeBasis;
use crate::discretize::{build_grid, weight_diag, Grid, WeightKind};
use crate::dtn::{assemble_system, face_thresholds, grid_basis, power_norm, ClosedSystem, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::geometry::WaveguideDomain;
use crate::riemann::{point_at_distance, BoundaryPoint, SheetPoint, SurfacePoint};
use crate::C64;

/// Relative tolerance of the Ritz value.
pub const SIGMA_TOL: f64 = 1e-6;
pub const SIGMA_MAX_ITER: usize = 120;
/// A dip is a refined minimum this many times below the rolling median.
pub const DIP_FACTOR: f64 = 10.0;
/// Local minima this many times below the median are refined before the
/// dip test; the dips are narrower than the scan step.
pub const CANDIDATE_FACTOR: f64 = 2.0;
/// Half width, in samples, of the rolling median window.
pub const MEDIAN_HALF_WINDOW: usize = 50;
/// Stopping size of the local minimizer, in `|z|`.
pub const LOCATE_TOL: f64 = 1e-4;
/// Candidates for the ball constant, tried from the largest.
pub const C1_CANDIDATES: [f64; 4] = [0.5, 0.2, 0.1, 0.05];
/// Safety factor between the calibrated and the asserted norm constant.
pub const C2_FACTOR: f64 = 2.0;
/// Minimizers closer than this to a branch point are flagged.
pub const RAMIFICATION_ZONE: f64 = 1e-3;

/// One sample of the pole indicator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub point: SurfacePoint,
    pub sigma_min: f64,
}

/// A refined dip of the pole indicator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub point: SurfacePoint,
    pub sigma_min: f64,
    /// `sigma_min` over the rolling median around the dip.
    pub depth: f64,
    /// Location on the refined grid, when a refinement was run.
    pub refined: Option<f64>,
    /// Whether the dip survived `h → h/2`.
    pub persistent: Option<bool>,
    /// `(4 E_{h/2} − E_h)/3`, removing the `O(h²)` threshold shift.
    pub extrapolated: Option<f64>,
}

impl Dip {
    pub fn energy(&self) -> f64 {
        self.point.z().re
    }

    /// Best available location: extrapolated, refined, then raw.
    pub fn location(&self) -> f64 {
        self.extrapolated.or(self.refined).unwrap_or_else(|| self.energy())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleScanResult {
    pub points: Vec<ScanPoint>,
    /// Sorted by `|z|`.
    pub dips: Vec<Dip>,
    /// Energies skipped because they sit on a branch point.
    pub skipped: Vec<f64>,
    pub h: f64,
}

impl PoleScanResult {
    pub fn persistent_dips(&self) -> impl Iterator<Item = &Dip> {
        self.dips.iter().filter(|d| d.persistent == Some(true))
    }

    /// CSV with columns `re_z, im_z, flipped_modes, sigma_min`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re_z", "im_z", "flipped_modes", "sigma_min"])?;
        for p in &self.points {
            let z = p.point.z();
            let flips: Vec<String> = p.point.flipped().iter().map(|j| j.to_string()).collect();
            w.write_record([format!("{:.10e}", z.re), format!("{:.10e}", z.im), flips.join(";"), format!("{:.10e}", p.sigma_min)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative smallest singular value of a factored system: Lanczos on
/// `(AᴴA)⁻¹` with full reorthogonalization, divided by `‖A‖_∞`. Converged
/// when the largest Ritz value moves by less than [`SIGMA_TOL`] relative.
pub fn system_sigma_min(system: &ClosedSystem) -> f64 {
    let n = system.len();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut q: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let nq = vnorm(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::<f64>::new());
    let mut theta = 0.0;
    for step in 0..SIGMA_MAX_ITER.min(n) {
        // w = A⁻¹ A⁻ᴴ q
        let mut w = system.solve_raw(&system.solve_adjoint_unchecked(&q));
        if w.iter().any(|v| !v.is_finite()) {
            return 0.0;
        }
        let a = q.iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
        basis.push(q);
        for _ in 0..2 {
            for b in &basis {
                let c: C64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                w.iter_mut().zip(b).for_each(|(y, x)| *y -= c * x);
            }
        }
        alpha.push(a);
        let bnext = vnorm(&w);
        let m = alpha.len();
        let t = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let top = t.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        let done = step > 0 && (top - theta).abs() <= SIGMA_TOL * top;
        theta = top;
        if done || bnext <= 1e-14 * top {
            break;
        }
        beta.push(bnext);
        q = w.into_iter().map(|v| v / bnext).collect();
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return 0.0;
    }
    1.0 / theta.sqrt() / system.norm_inf()
}

fn sigma_with(grid: &Grid, basis: &ModeBasis, p: &SurfacePoint) -> Result<f64> {
    match assemble_system(grid, basis, p) {
        Ok(s) => Ok(system_sigma_min(&s)),
        Err(Error::NearSingular(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Same as [`sigma_with`] but a branch point counts as a pole hit.
fn sigma_or_zero(grid: &Grid, basis: &ModeBasis, p: &SurfacePoint) -> Result<f64> {
    match sigma_with(grid, basis, p) {
        Err(Error::ThresholdPoint { .. }) => Ok(0.0),
        r => r,
    }
}

/// Relative `σ_min` of the closed system at `p`. Ramification points are refused.
pub fn min_singular_value(domain: &WaveguideDomain, p: &SurfacePoint, grid: &Grid) -> Result<f64> {
    sigma_with(grid, &grid_basis(domain, grid), p)
}

fn rolling_median(values: &[f64], half: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            let mut w: Vec<f64> = values[lo..hi].iter().copied().filter(|v| v.is_finite()).collect();
            w.sort_by(f64::total_cmp);
            if w.is_empty() {
                f64::NAN
            } else {
                w[w.len() / 2]
            }
        })
        .collect()
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden<F: FnMut(f64) -> Result<f64>>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

fn linspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![a];
    }
    (0..steps).map(|k| a + (b - a) * k as f64 / (steps - 1) as f64).collect()
}

fn scan_energies(grid: &Grid, basis: &ModeBasis, energies: &[f64]) -> Result<PoleScanResult> {
    let thresholds = face_thresholds(grid);
    let on_branch = |e: f64| thresholds.iter().any(|&t| (e - t).abs() <= 1e-12 * t.max(1.0));
    let (skipped, kept): (Vec<f64>, Vec<f64>) = energies.iter().partition(|&&e| on_branch(e));
    let sigmas: Vec<f64> = kept
        .par_iter()
        .map(|&e| sigma_or_zero(grid, basis, &BoundaryPoint::plus(e).into()))
        .collect::<Result<_>>()?;
    let median = rolling_median(&sigmas, MEDIAN_HALF_WINDOW);
    let mut dips = Vec::new();
    for i in 0..sigmas.len() {
        let s = sigmas[i];
        let left = if i > 0 { sigmas[i - 1] } else { f64::INFINITY };
        let right = sigmas.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if !(s < median[i] / CANDIDATE_FACTOR && s <= left && s <= right) {
            continue;
        }
        let a = if i > 0 { kept[i - 1] } else { kept[i] };
        let b = kept.get(i + 1).copied().unwrap_or(kept[i]);
        let (e, sv) = if b > a {
            golden(a, b, 1e-7 * b.abs().max(1.0), |e| sigma_or_zero(grid, basis, &BoundaryPoint::plus(e).into()))?
        } else {
            (kept[i], s)
        };
        let (e, sv) = if sv <= s { (e, sv) } else { (kept[i], s) };
        if sv >= median[i] / DIP_FACTOR {
            continue;
        }
        dips.push(Dip {
            point: BoundaryPoint::plus(e).into(),
            sigma_min: sv,
            depth: sv / median[i],
            refined: None,
            persistent: None,
            extrapolated: None,
        });
    }
    dips.sort_by(|p, q| p.point.z().norm().total_cmp(&q.point.z().norm()));
    let points = kept
        .iter()
        .zip(&sigmas)
        .map(|(&e, &s)| ScanPoint { point: BoundaryPoint::plus(e).into(), sigma_min: s })
        .collect();
    Ok(PoleScanResult { points, dips, skipped, h: grid.h })
}

/// `σ_min` along `E + i0` for `steps` energies spanning `energy_range`, with
/// dips refined by golden-section search. Dips are not yet checked for
/// persistence; see [`confirm_dips`].
pub fn scan_real_axis(domain: &WaveguideDomain, energy_range: (f64, f64), steps: usize, grid: &Grid) -> Result<PoleScanResult> {
    if !domain.cylindrical_ends {
        return Err(Error::Precondition("scan needs cylindrical ends".into()));
    }
    let (a, b) = energy_range;
    if !(b > a) || steps < 2 {
        return Err(Error::Precondition(format!("bad scan range ({a}, {b}) with {steps} steps")));
    }
    scan_energies(grid, &grid_basis(domain, grid), &linspace(a, b, steps))
}

/// Rescans a window around every dip on the grid with spacing `h/2`. A dip is
/// persistent when the window again contains a dip; its location is then
/// extrapolated from the two grids.
pub fn confirm_dips(domain: &WaveguideDomain, grid: &Grid, scan: &mut PoleScanResult, step: f64) -> Result<()> {
    if scan.dips.is_empty() {
        return Ok(());
    }
    let fine = build_grid(domain, grid.h / 2.0, grid.l)?;
    let basis = grid_basis(domain, &fine);
    for dip in &mut scan.dips {
        let e = dip.energy();
        let half = 0.05 * e.abs() + 0.1;
        let n = ((2.0 * half / step).round() as usize).max(8) + 1;
        let local = scan_energies(&fine, &basis, &linspace((e - half).max(f64::MIN_POSITIVE), e + half, n))?;
        let best = local.dips.iter().min_by(|p, q| (p.energy() - e).abs().total_cmp(&(q.energy() - e).abs()));
        match best {
            Some(d) => {
                dip.refined = Some(d.energy());
                dip.persistent = Some(true);
                dip.extrapolated = Some((4.0 * d.energy() - e) / 3.0);
            }
            None => dip.persistent = Some(false),
        }
    }
    Ok(())
}

/// Minimizer of `σ_min` over the sheet of a seed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleLocation {
    pub point: SheetPoint,
    pub sigma_min: f64,
    /// `sigma_min` over the median on a small ring around the minimizer.
    pub depth: f64,
    /// The minimizer approached a branch point of the sheet.
    pub near_ramification: bool,
    pub evaluations: usize,
}

/// Result of [`locate_pole`]: the minimizer on the given grid and on the grid
/// with half the spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleReport {
    pub coarse: PoleLocation,
    pub fine: PoleLocation,
    /// The dip is still below `1/DIP_FACTOR` of its surroundings after refinement.
    pub persistent: bool,
}

fn minimize_on_sheet(grid: &Grid, basis: &ModeBasis, seed: &SheetPoint, step: f64) -> Result<PoleLocation> {
    let flips = seed.flipped.clone();
    let at = |v: [f64; 2]| SheetPoint { re: v[0], im: v[1], flipped: flips.clone() };
    let mut evaluations = 0usize;
    let mut f = |v: [f64; 2]| -> Result<f64> {
        evaluations += 1;
        sigma_or_zero(grid, basis, &at(v).into())
    };
    let x0 = [seed.re, seed.im];
    let mut simplex = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut vals = [f(simplex[0])?, f(simplex[1])?, f(simplex[2])?];
    for _ in 0..400 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = [simplex[order[0]], simplex[order[1]], simplex[order[2]]];
        vals = [vals[order[0]], vals[order[1]], vals[order[2]]];
        let size = (1..3).map(|k| (simplex[k][0] - simplex[0][0]).hypot(simplex[k][1] - simplex[0][1])).fold(0.0, f64::max);
        if size < LOCATE_TOL * 0.1 || vals[0] == 0.0 {
            break;
        }
        let c = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let lerp = |t: f64| [c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])];
        let r = lerp(-1.0);
        let fr = f(r)?;
        if fr < vals[0] {
            let e = lerp(-2.0);
            let fe = f(e)?;
            if fe < fr {
                simplex[2] = e;
                vals[2] = fe;
            } else {
                simplex[2] = r;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = r;
            vals[2] = fr;
        } else {
            let k = if fr < vals[2] { lerp(-0.5) } else { lerp(0.5) };
            let fk = f(k)?;
            if fk < vals[2].min(fr) {
                simplex[2] = k;
                vals[2] = fk;
            } else {
                for i in 1..3 {
                    simplex[i] = [(simplex[i][0] + simplex[0][0]) / 2.0, (simplex[i][1] + simplex[0][1]) / 2.0];
                    vals[i] = f(simplex[i])?;
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let point = at(simplex[best]);
    let sigma_min = vals[best];
    let ring = 0.25 * step.max(LOCATE_TOL);
    let mut around: Vec<f64> = (0..8)
        .map(|k| {
            let d = C64::from_polar(ring * 4.0, std::f64::consts::TAU * k as f64 / 8.0);
            sigma_or_zero(grid, basis, &at([point.re + d.re, point.im + d.im]).into())
        })
        .collect::<Result<_>>()?;
    around.sort_by(f64::total_cmp);
    let background = 0.5 * (around[3] + around[4]);
    let thresholds = face_thresholds(grid);
    let near_ramification = thresholds.iter().any(|&t| (point.z() - t).norm() < RAMIFICATION_ZONE * t.max(1.0));
    Ok(PoleLocation { point, sigma_min, depth: sigma_min / background, near_ramification, evaluations: evaluations + 8 })
}

/// Derivative-free minimization of `σ_min` over `z` on the seed's sheet, then
/// again on the grid with spacing `h/2` starting from the coarse minimizer.
pub fn locate_pole(domain: &WaveguideDomain, seed: &SheetPoint, grid: &Grid) -> Result<PoleReport> {
    let step = 0.05 * seed.z().norm().max(1.0);
    let coarse = minimize_on_sheet(grid, &grid_basis(domain, grid), seed, step)?;
    let fine_grid = build_grid(domain, grid.h / 2.0, grid.l)?;
    let fine = minimize_on_sheet(&fine_grid, &grid_basis(domain, &fine_grid), &coarse.point, step)?;
    let persistent = fine.depth < 1.0 / DIP_FACTOR;
    Ok(PoleReport { coarse, fine, persistent })
}

/// One sample of a resonance-free ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSample {
    pub point: SheetPoint,
    pub metric_distance: f64,
    pub sigma_min: f64,
    pub cutoff_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResFreeReport {
    pub energy: f64,
    pub c1: f64,
    pub c2: f64,
    /// `c1 / (1 + E)`.
    pub radius: f64,
    /// `c2 (1 + E)^{1/2}`.
    pub norm_bound: f64,
    pub sigma_floor: f64,
    pub samples: Vec<BallSample>,
    pub passed: bool,
    /// True for a zero radius, where the claim holds vacuously.
    pub vacuous: bool,
}

impl ResFreeReport {
    pub fn min_sigma(&self) -> f64 {
        self.samples.iter().map(|s| s.sigma_min).fold(f64::INFINITY, f64::min)
    }

    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.cutoff_norm).fold(0.0, f64::max)
    }
}

/// Cutoff `χ` used for `‖χR(z)χ‖`: one on `|x − x0| ≤ R0 + 1`, zero beyond `R0 + 2`.
pub fn ball_cutoff(domain: &WaveguideDomain) -> WeightKind {
    WeightKind::CutoffChi { inner: domain.r0 + 1.0, outer: domain.r0 + 2.0 }
}

fn ball_samples(grid: &Grid, basis: &ModeBasis, domain: &WaveguideDomain, energy: f64, radius: f64, samples: usize) -> Result<Vec<BallSample>> {
    let angles = samples.div_ceil(2).max(1);
    let mut spots = Vec::new();
    for k in 0..samples {
        let frac = if k % 2 == 0 { 0.5 } else { 0.95 };
        let theta = std::f64::consts::TAU * ((k / 2) as f64 + 0.25 + 0.5 * (k % 2) as f64) / angles as f64;
        let (p, d) = point_at_distance(energy, theta, frac * radius, basis)?;
        // Points the lattice cannot tell apart from the centre do not probe the ball.
        if (p.z() - energy).norm() > grid.h * grid.h {
            spots.push((p, d));
        }
    }
    if spots.is_empty() {
        return Err(Error::Precondition(format!("ball of radius {radius} at E = {energy} is below grid resolution")));
    }
    let chi = weight_diag(grid, ball_cutoff(domain), 1.0, domain.x0)?;
    spots
        .into_par_iter()
        .map(|(p, d)| {
            let sp: SurfacePoint = p.clone().into();
            let (sigma_min, cutoff_norm) = match assemble_system(grid, basis, &sp) {
                Ok(sys) => {
                    let s = system_sigma_min(&sys);
                    let n = match power_norm(&sys, &chi.values, &chi.values, DEFAULT_SEED) {
                        Ok((n, _, _)) => n,
                        Err(Error::NearSingular(_)) => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                    (s, n)
                }
                Err(Error::NearSingular(_)) | Err(Error::ThresholdPoint { .. }) => (0.0, f64::INFINITY),
                Err(e) => return Err(e),
            };
            Ok(BallSample { point: p, metric_distance: d, sigma_min, cutoff_norm })
        })
        .collect()
}

/// Samples the metric ball `d(z, E + i0) < c1 (1+E)^{−1}` on both half planes
/// (the lower one on the sheet continued across every propagating cut) and
/// checks `σ_min ≥ sigma_floor` and `‖χR(z)χ‖ ≤ c2 (1+E)^{1/2}` at every sample.
pub fn verify_resonance_free(
    domain: &WaveguideDomain,
    energy: f64,
    c1: f64,
    c2: f64,
    sigma_floor: f64,
    grid: &Grid,
    samples: usize,
) -> Result<ResFreeReport> {
    if !(c1 >= 0.0) || !(c2 > 0.0) || samples == 0 {
        return Err(Error::Precondition(format!("need c1 ≥ 0, c2 > 0 and samples > 0 (got {c1}, {c2}, {samples})")));
    }
    let radius = c1 / (1.0 + energy);
    let norm_bound = c2 * (1.0 + energy).sqrt();
    let mut report =
        ResFreeReport { energy, c1, c2, radius, norm_bound, sigma_floor, samples: Vec::new(), passed: true, vacuous: radius == 0.0 };
    if report.vacuous {
        return Ok(report);
    }
    let basis = grid_basis(domain, grid);
    report.samples = ball_samples(grid, &basis, domain, energy, radius, samples)?;
    report.passed = report.samples.iter().all(|s| s.sigma_min >= sigma_floor && s.cutoff_norm <= norm_bound);
    Ok(report)
}

/// Constants fitted on training energies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c1: f64,
    pub c2: f64,
    pub sigma_floor: f64,
    pub energies: Vec<f64>,
    /// Largest `‖χR(z)χ‖ (1+E)^{−1/2}` seen on the training balls.
    pub max_scaled_norm: f64,
}

/// Chooses the largest `c1` in [`C1_CANDIDATES`] whose training balls stay clear
/// of poles, with the pole floor `1/DIP_FACTOR` of the median training `σ_min`,
/// and sets `c2` to [`C2_FACTOR`] times the largest scaled norm.
pub fn calibrate_resonance_free(domain: &WaveguideDomain, grid: &Grid, energies: &[f64], samples: usize) -> Result<Calibration> {
    if energies.is_empty() {
        return Err(Error::Precondition("no calibration energies".into()));
    }
    let basis = grid_basis(domain, grid);
    for &c1 in &C1_CANDIDATES {
        let mut all = Vec::new();
        let mut scaled: f64 = 0.0;
        for &e in energies {
            let s = ball_samples(grid, &basis, domain, e, c1 / (1.0 + e), samples)?;
            for b in &s {
                scaled = scaled.max(b.cutoff_norm / (1.0 + e).sqrt());
            }
            all.extend(s);
        }
        let mut sig: Vec<f64> = all.iter().map(|b| b.sigma_min).collect();
        sig.sort_by(f64::total_cmp);
        let floor = sig[sig.len() / 2] / DIP_FACTOR;
        if sig[0] >= floor && scaled.is_finite() {
            return Ok(Calibration { c1, c2: C2_FACTOR * scaled, sigma_floor: floor, energies: energies.to_vec(), max_scaled_norm: scaled });
        }
    }
    Err(Error::Construction("no candidate ball radius is pole free on the training energies".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gallery;
    use serde_json::json;

    #[test]
    fn rolling_median_of_constant() {
        let m = rolling_median(&[2.0; 9], 2);
        assert!(m.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden(0.0, 3.0, 1e-9, |x| Ok((x - 1.3f64).powi(2))).unwrap();
        assert!((x - 1.3).abs() < 1e-7 && fx < 1e-13);
    }

    #[test]
    fn resolvent_set_is_not_a_dip() {
        let d = gallery("half_strip", &json!({})).unwrap();
        let g = build_grid(&d, std::f64::consts::PI / 16.0, 18.0).unwrap();
        let s = min_singular_value(&d, &SheetPoint::physical(C64::new(-5.0, 0.0)).into(), &g).unwrap();
        assert!(s > 1e-3, "{s}");
    }

    #[test]
    fn ramification_refused() {
        let d = gallery("full_strip", &json!({"lower": 0.0, "upper": std::f64::consts::PI})).unwrap();
        let g = build_grid(&d, std::f64::consts::PI / 16.0, 18.0).unwrap();
        let t = face_thresholds(&g)[0];
        let r = min_singular_value(&d, &BoundaryPoint::plus(t).into(), &g);
        assert!(matches!(r, Err(Error::ThresholdPoint { .. })));
    }

    #[test]
    fn zero_radius_is_vacuous() {
        let d = gallery("hourglass", &json!({})).unwrap();
        let g = build_grid(&d, 1.0 / 16.0, 13.0).unwrap();
        let r = verify_resonance_free(&d, 10.0, 0.0, 1.0, 0.0, &g, 4).unwrap();
        assert!(r.passed && r.vacuous && r.samples.is_empty());
    }
}
