//! Leapfrog wave propagation on the truncated Dirichlet lattice and decay fits
//! of local norms.

use serde::{Deserialize, Serialize};

use crate::discretize::{DiscreteOperator, Grid, WeightVector};
use crate::error::{Error, Result};

/// Largest Courant number `Δt/h` accepted by [`propagate`].
pub const CFL_MAX: f64 = 0.9 / std::f64::consts::SQRT_2;
/// Fits need at least this many points in the window.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub u: Vec<f64>,
    /// `∂_t u`.
    pub v: Vec<f64>,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Self {
        Self { u, v, t: 0.0 }
    }
}

/// Support of compactly supported initial data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub center: [f64; 2],
    pub radius: f64,
}

/// `exp(−1/(1 − r²/ρ²))` scaled to peak 1, as `(f1, f2)`: `m = 0` puts the bump
/// in the displacement, `m = 1` in the velocity.
pub fn initial_bump(grid: &Grid, center: [f64; 2], radius: f64, m: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(radius > 0.0) {
        return Err(Error::Precondition(format!("bump radius must be positive, got {radius}")));
    }
    if m > 1 {
        return Err(Error::Precondition(format!("data slot must be 0 or 1, got {m}")));
    }
    // Every lattice site within the ball must be an interior node away from the faces.
    let h = grid.h;
    let i0 = ((center[0] - radius - grid.x_lo) / h).floor() as isize;
    let i1 = ((center[0] + radius - grid.x_lo) / h).ceil() as isize;
    let j0 = ((center[1] - radius - grid.y_lo) / h).floor() as isize;
    let j1 = ((center[1] + radius - grid.y_lo) / h).ceil() as isize;
    if i0 < 1 || j0 < 0 || i1 as usize + 1 >= grid.ncol || j1 as usize >= grid.nrow {
        return Err(Error::Precondition("bump support leaves the truncated lattice".into()));
    }
    for i in i0..=i1 {
        for j in j0..=j1 {
            let (x, y) = (grid.x(i as usize), grid.y(j as usize));
            if (x - center[0]).hypot(y - center[1]) <= radius && !grid.is_interior(i, j) {
                return Err(Error::Precondition(format!("bump support leaves the domain near ({x:.3}, {y:.3})")));
            }
        }
    }
    let bump: Vec<f64> = grid.sample(|x, y| {
        let q = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (radius * radius);
        if q < 1.0 {
            (1.0 - 1.0 / (1.0 - q)).exp()
        } else {
            0.0
        }
    });
    let zero = vec![0.0; grid.len()];
    Ok(if m == 0 { (bump, zero) } else { (zero, bump) })
}

/// Latest time at which reflections from the truncation faces cannot reach
/// `|x| ≤ R0`: `2(L − r − R0)` with `L` the truncation abscissa, reduced when
/// the data sit off centre so that the travel path `2L − |c_x| − r − R0` is respected.
pub fn reflection_horizon(grid: &Grid, support: &Support) -> f64 {
    let basic = 2.0 * (grid.l - support.radius - grid.r0);
    let path = 2.0 * grid.l - support.center[0].abs() - support.radius - grid.r0;
    basic.min(path)
}

/// Local norms and energy at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSample {
    pub t: f64,
    pub norm_m0: f64,
    pub norm_m1: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub dt: f64,
    pub steps: usize,
    pub series: Vec<WaveSample>,
    pub final_state: WaveState,
}

impl Propagation {
    /// Largest `|E(t) − E(0)| / E(0)` over the series.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.series.first().map_or(0.0, |s| s.energy);
        if e0 == 0.0 {
            return 0.0;
        }
        self.series.iter().map(|s| (s.energy - e0).abs() / e0).fold(0.0, f64::max)
    }

    /// CSV with columns `t, norm_m0, norm_m1, energy`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "norm_m0", "norm_m1", "energy"])?;
        for s in &self.series {
            w.write_record([s.t, s.norm_m0, s.norm_m1, s.energy].map(|v| format!("{v:.12e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * grid.h * grid.h
}

/// `½(‖v‖² + ⟨Au, u⟩)`.
pub fn energy(grid: &Grid, op: &DiscreteOperator, u: &[f64], v: &[f64]) -> f64 {
    0.5 * (dot(grid, v, v) + dot(grid, &op.apply(u), u))
}

/// `‖χu‖` for `m = 0`, `(‖χu‖² + ‖∇_h(χu)‖²)^{1/2}` for `m = 1`.
pub fn local_norm(grid: &Grid, op: &DiscreteOperator, u: &[f64], chi: &WeightVector, m: u32) -> Result<f64> {
    if u.len() != grid.len() || chi.values.len() != grid.len() {
        return Err(Error::Precondition("grid function and cutoff must match the grid".into()));
    }
    let cu: Vec<f64> = u.iter().zip(&chi.values).map(|(a, c)| a * c).collect();
    let l2 = dot(grid, &cu, &cu);
    match m {
        0 => Ok(l2.sqrt()),
        1 => Ok((l2 + dot(grid, &op.apply(&cu), &cu)).sqrt()),
        _ => Err(Error::Precondition(format!("order must be 0 or 1, got {m}"))),
    }
}

/// Leapfrog integration of `u_tt + A u = 0` up to `t_final`, recording local
/// norms with the cutoff `chi` every `sample_every` steps. The velocity lives
/// on half steps, and the recorded energy is the leapfrog invariant
/// `½(‖v_{n+½}‖² + ⟨A u_{n+1}, u_n⟩)`, which is positive under the CFL bound
/// and equals `½(‖v‖² + ⟨Au, u⟩)` up to `O(Δt²)`.
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    grid: &Grid,
    op: &DiscreteOperator,
    state: WaveState,
    support: &Support,
    t_final: f64,
    cfl: f64,
    chi: &WeightVector,
    sample_every: usize,
) -> Result<Propagation> {
    if !(cfl > 0.0 && cfl <= CFL_MAX) {
        return Err(Error::Precondition(format!("Courant number {cfl} outside (0, {CFL_MAX:.4}]")));
    }
    let horizon = reflection_horizon(grid, support);
    if !(t_final <= horizon) {
        return Err(Error::Precondition(format!("final time {t_final} exceeds the reflection horizon {horizon:.3}")));
    }
    if state.u.len() != grid.len() || state.v.len() != grid.len() {
        return Err(Error::Precondition("state does not match the grid".into()));
    }
    let sample_every = sample_every.max(1);
    let steps = ((t_final - state.t) / (cfl * grid.h)).ceil().max(0.0) as usize;
    let dt = if steps == 0 { 0.0 } else { (t_final - state.t) / steps as f64 };
    let t0 = state.t;
    let mut u = state.u;
    let mut au = op.apply(&u);
    // v at t0 + dt/2 from a Taylor step.
    let mut v: Vec<f64> = state.v.iter().zip(&au).map(|(v, a)| v - 0.5 * dt * a).collect();
    let sample = |t: f64, u: &[f64], energy: f64| -> Result<WaveSample> {
        Ok(WaveSample { t, norm_m0: local_norm(grid, op, u, chi, 0)?, norm_m1: local_norm(grid, op, u, chi, 1)?, energy })
    };
    // The invariant at n = 0 uses the virtual half step v_{−½} = v_{½} + Δt A u_0.
    let back: Vec<f64> = v.iter().zip(&au).map(|(w, a)| w + dt * a).collect();
    let e0 = 0.5 * (dot(grid, &back, &back) + dot(grid, &au, &u) - dt * dot(grid, &au, &back));
    let mut series = vec![sample(t0, &u, e0)?];
    for n in 1..=steps {
        for (x, w) in u.iter_mut().zip(&v) {
            *x += dt * w;
        }
        au = op.apply(&u);
        if n % sample_every == 0 || n == steps {
            // ⟨A u_{n}, u_{n−1}⟩ = ⟨A u_n, u_n⟩ − Δt ⟨A u_n, v_{n−½}⟩
            let e = 0.5 * (dot(grid, &v, &v) + dot(grid, &au, &u) - dt * dot(grid, &au, &v));
            series.push(sample(t0 + n as f64 * dt, &u, e)?);
        }
        for (w, a) in v.iter_mut().zip(&au) {
            *w -= dt * a;
        }
    }
    // Velocity at the final time from the last half step.
    let v_end: Vec<f64> = v.iter().zip(&au).map(|(w, a)| w + 0.5 * dt * a).collect();
    let t = t0 + steps as f64 * dt;
    Ok(Propagation { dt, steps, series, final_state: WaveState { u, v: v_end, t } })
}

/// Power-law fit `norm ≈ C t^{exponent}` on a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// Points used in the fit.
    pub series: Vec<(f64, f64)>,
}

/// Least-squares slope of `log norm` against `log t` over `window`. With
/// `envelope`, only the local maxima of the series enter the fit.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64), envelope: bool) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::Precondition(format!("window ({t0}, {t1}) must satisfy 0 < t_min < t_max")));
    }
    let peak = series.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let inside: Vec<(usize, (f64, f64))> =
        series.iter().copied().enumerate().filter(|(_, (t, _))| *t >= t0 && *t <= t1).collect();
    let pts: Vec<(f64, f64)> = if envelope {
        inside
            .iter()
            .filter(|(i, (_, v))| {
                let l = i.checked_sub(1).map(|k| series[k].1);
                let r = series.get(i + 1).map(|p| p.1);
                matches!((l, r), (Some(l), Some(r)) if *v >= l && *v > r)
            })
            .map(|(_, p)| *p)
            .collect()
    } else {
        inside.iter().map(|(_, p)| *p).collect()
    };
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!("window holds {} fit points, need {MIN_FIT_POINTS}", pts.len())));
    }
    if pts.iter().any(|&(_, v)| !(v > 100.0 * f64::EPSILON * peak)) {
        return Err(Error::Precondition("norms in the window are at rounding level".into()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let residual = (logs.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { exponent: slope, window, residual, series: pts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = (1..=200).map(|k| (k as f64, 3.0 * (k as f64).powf(-1.5))).collect();
        let f = fit_decay(&s, (10.0, 200.0), false).unwrap();
        assert!((f.exponent + 1.5).abs() < 1e-12 && f.residual < 1e-12);
    }

    #[test]
    fn short_window_rejected() {
        let s: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64, 1.0 / k as f64)).collect();
        assert!(fit_decay(&s, (2.0, 3.0), false).is_err());
        assert!(fit_decay(&s, (3.0, 2.0), false).is_err());
    }
}
