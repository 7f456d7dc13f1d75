//! Weights `w_±` adapted to the upper and lower parts of a strip with a strictly
//! convex obstacle.
//!
//! Away from the three gaps `w_±′` equals the model `g(x) = δ(1+|x−x3|)^{−δ−1}`.
//! On each gap the derivative is the quintic Hermite interpolant of `g` (value,
//! first and second derivative at both ends, so `w_±′ ∈ C²`) plus `a·(t(1−t))³`.
//! The bubble keeps the junction data, so only the integral over the gap depends
//! on the amplitude `a`, linearly; the two amplitudes that enforce `w_+ = w_−`
//! outside `[x1, x5]` are therefore solved in closed form.

use serde::{Deserialize, Serialize};

use super::Multiplier;
use crate::error::{Error, Result};
use crate::geometry::{Ellipse, WaveguideDomain};

/// Four-point Gauss–Legendre rule on `[0, 1]`; exact for degree 7.
const GAUSS: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexSide {
    /// Upper component `Ω₊`; `w₊(x4) = 0`.
    Plus,
    /// Lower component `Ω₋`; `w₋(x2) = 0`.
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Model {
    delta: f64,
    x3: f64,
}

impl Model {
    /// `[g, g′, g″]`.
    fn eval(&self, x: f64) -> [f64; 3] {
        let d = self.delta;
        let s = (x - self.x3).signum();
        let r = 1.0 + (x - self.x3).abs();
        [d * r.powf(-d - 1.0), -s * d * (d + 1.0) * r.powf(-d - 2.0), d * (d + 1.0) * (d + 2.0) * r.powf(-d - 3.0)]
    }

    /// `∫_a^b g`, from the continuous primitive `sign(s)(1 − (1+|s|)^{−δ})`, `s = x − x3`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let prim = |x: f64| {
            let s = x - self.x3;
            s.signum() * (1.0 - (1.0 + s.abs()).powf(-self.delta))
        };
        prim(b) - prim(a)
    }
}

/// Quintic Hermite data plus bubble amplitude on `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Gap {
    a: f64,
    b: f64,
    /// `[p0, L p0′, L² p0″, p1, L p1′, L² p1″]`.
    data: [f64; 6],
    amplitude: f64,
}

impl Gap {
    fn new(model: &Model, a: f64, b: f64) -> Self {
        let l = b - a;
        let (ga, gb) = (model.eval(a), model.eval(b));
        Gap { a, b, data: [ga[0], ga[1] * l, ga[2] * l * l, gb[0], gb[1] * l, gb[2] * l * l], amplitude: 0.0 }
    }

    /// `[p, dp/dt, d²p/dt²]` of the Hermite part at `t`.
    fn hermite(&self, t: f64) -> [f64; 3] {
        let [p0, d0, s0, p1, d1, s1] = self.data;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let v = p0 * (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5)
            + d0 * (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5)
            + s0 * (0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5)
            + p1 * (10.0 * t3 - 15.0 * t4 + 6.0 * t5)
            + d1 * (-4.0 * t3 + 7.0 * t4 - 3.0 * t5)
            + s1 * (0.5 * t3 - t4 + 0.5 * t5);
        let dv = p0 * (-30.0 * t2 + 60.0 * t3 - 30.0 * t4)
            + d0 * (1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4)
            + s0 * (t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4)
            + p1 * (30.0 * t2 - 60.0 * t3 + 30.0 * t4)
            + d1 * (-12.0 * t2 + 28.0 * t3 - 15.0 * t4)
            + s1 * (1.5 * t2 - 4.0 * t3 + 2.5 * t4);
        let ddv = p0 * (-60.0 * t + 180.0 * t2 - 120.0 * t3)
            + d0 * (-36.0 * t + 96.0 * t2 - 60.0 * t3)
            + s0 * (1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3)
            + p1 * (60.0 * t - 180.0 * t2 + 120.0 * t3)
            + d1 * (-24.0 * t + 84.0 * t2 - 60.0 * t3)
            + s1 * (3.0 * t - 12.0 * t2 + 10.0 * t3);
        [v, dv, ddv]
    }

    /// `[B, B′, B″]` of `B(t) = (t(1−t))³`.
    fn bubble(t: f64) -> [f64; 3] {
        let q = t * (1.0 - t);
        let dq = 1.0 - 2.0 * t;
        [q.powi(3), 3.0 * q * q * dq, 6.0 * q * dq * dq - 6.0 * q * q]
    }

    /// `[w′, w″, w‴]` at `x`.
    fn eval(&self, x: f64) -> [f64; 3] {
        let l = self.b - self.a;
        let t = (x - self.a) / l;
        let p = self.hermite(t);
        let bb = Self::bubble(t);
        let a = self.amplitude;
        [p[0] + a * bb[0], (p[1] + a * bb[1]) / l, (p[2] + a * bb[2]) / (l * l)]
    }

    /// `∫_a^x w′`.
    fn integral_to(&self, x: f64) -> f64 {
        let span = x - self.a;
        GAUSS.iter().map(|&(t, wt)| wt * self.eval(self.a + t * span)[0]).sum::<f64>() * span
    }

    fn integral(&self) -> f64 {
        self.integral_to(self.b)
    }

    /// `∫_a^b B((x−a)/L) dx = L/140`.
    fn bubble_integral(&self) -> f64 {
        (self.b - self.a) / 140.0
    }

    fn min_value(&self, samples: usize) -> (f64, f64) {
        (0..=samples)
            .map(|i| {
                let x = self.a + (self.b - self.a) * i as f64 / samples as f64;
                (self.eval(x)[0], x)
            })
            .fold((f64::INFINITY, self.a), |m, v| if v.0 < m.0 { v } else { m })
    }

    /// Smallest amplitude keeping `w′ ≥ floor` on the gap.
    fn positivity_amplitude(&self, floor: f64, samples: usize) -> f64 {
        let mut need: f64 = f64::NEG_INFINITY;
        for i in 1..samples {
            let t = i as f64 / samples as f64;
            let p = self.hermite(t)[0];
            let b = Self::bubble(t)[0];
            need = need.max((floor - p) / b);
        }
        need
    }
}

/// One of the two weights: derivative pieces and the cumulative integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBranch {
    pub side: ConvexSide,
    model: Model,
    x: [f64; 5],
    rho0: f64,
    gaps: [Gap; 3],
    /// `∫_{x1}^{zero} w′`, subtracted so that the branch vanishes at its zero.
    offset: f64,
}

impl ConvexBranch {
    /// `[w′, w″, w‴]`.
    fn derivative(&self, x: f64) -> [f64; 3] {
        for g in &self.gaps {
            if x >= g.a && x <= g.b {
                return g.eval(x);
            }
        }
        self.model.eval(x)
    }

    /// `∫_{x1}^x w′`.
    fn primitive(&self, x: f64) -> f64 {
        let [x1, x2, _, x4, x5] = self.x;
        let r = self.rho0;
        let m = &self.model;
        if x <= x1 {
            return -m.integral(x, x1);
        }
        // Pieces in order: gap 1, model, gap 2, model, gap 3, model tail.
        let pieces: [(f64, f64, Option<&Gap>); 6] = [
            (x1, x2 - r, Some(&self.gaps[0])),
            (x2 - r, x2 + r, None),
            (x2 + r, x4 - r, Some(&self.gaps[1])),
            (x4 - r, x4 + r, None),
            (x4 + r, x5, Some(&self.gaps[2])),
            (x5, f64::INFINITY, None),
        ];
        let mut acc = 0.0;
        for (a, b, gap) in pieces {
            let end = x.min(b);
            acc += match gap {
                Some(g) => g.integral_to(end),
                None => m.integral(a, end),
            };
            if x <= b {
                break;
            }
        }
        acc
    }

    pub fn value(&self, x: f64) -> f64 {
        self.primitive(x) - self.offset
    }

    /// Breakpoints `x1..x5`.
    pub fn breakpoints(&self) -> [f64; 5] {
        self.x
    }

    /// Model derivative `δ(1+|x−x3|)^{−δ−1}`.
    pub fn model_derivative(&self, x: f64) -> f64 {
        self.model.eval(x)[0]
    }
}

impl Multiplier for ConvexBranch {
    fn order(&self) -> usize {
        3
    }

    fn derivs(&self, x: f64) -> [f64; 4] {
        let d = self.derivative(x);
        [self.value(x), d[0], d[1], d[2]]
    }
}

/// The pair `w_±` with breakpoints `x1 < … < x5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexWeight {
    pub delta: f64,
    pub x: [f64; 5],
    pub rho0: f64,
    pub plus: ConvexBranch,
    pub minus: ConvexBranch,
}

impl ConvexWeight {
    pub fn branch(&self, side: ConvexSide) -> &ConvexBranch {
        match side {
            ConvexSide::Plus => &self.plus,
            ConvexSide::Minus => &self.minus,
        }
    }
}

const POSITIVITY_SAMPLES: usize = 2000;

/// Builds `w_±` for breakpoints `x1 < x2 < x3 < x4 < x5` and `δ > 0`.
pub fn build_convex_weight(delta: f64, x: [f64; 5]) -> Result<ConvexWeight> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Weight(format!("δ must be positive, got {delta}")));
    }
    if x.windows(2).any(|p| !(p[0] < p[1])) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Construction(format!("breakpoints must increase strictly: {x:?}")));
    }
    let [x1, x2, x3, x4, x5] = x;
    let rho0 = x.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min) / 3.0;
    let model = Model { delta, x3 };
    let gap = |a: f64, b: f64| -> Result<Gap> {
        let mut g = Gap::new(&model, a, b);
        let floor = 0.1 * g.data[0].min(g.data[3]);
        let (low, _) = g.min_value(POSITIVITY_SAMPLES);
        if low < floor {
            g.amplitude = g.positivity_amplitude(floor, POSITIVITY_SAMPLES).max(0.0);
        }
        Ok(g)
    };
    // Free choices first: both middle gaps, the left gap of w₊, the right gap of w₋.
    let p1 = gap(x1, x2 - rho0)?;
    let mid = gap(x2 + rho0, x4 - rho0)?;
    let m3 = gap(x4 + rho0, x5)?;
    // w₋(x1) = w₊(x1) and w₋(x5) = w₊(x5) fix the two remaining integrals.
    let target_m1 = p1.integral() + model.integral(x2, x2 + rho0) + mid.integral() + model.integral(x4 - rho0, x4);
    let target_p3 = model.integral(x2, x2 + rho0) + mid.integral() + model.integral(x4 - rho0, x4) + m3.integral();
    let solve = |a: f64, b: f64, target: f64, name: &str| -> Result<Gap> {
        let mut g = Gap::new(&model, a, b);
        g.amplitude = (target - g.integral()) / g.bubble_integral();
        let (low, at) = g.min_value(POSITIVITY_SAMPLES);
        if !(low > 0.0) {
            return Err(Error::Construction(format!(
                "{name}: amplitude {:.6e} required by the integral condition makes w′ = {low:.3e} at x = {at:.6}",
                g.amplitude
            )));
        }
        Ok(g)
    };
    let m1 = solve(x1, x2 - rho0, target_m1, "left gap of w₋")?;
    let p3 = solve(x4 + rho0, x5, target_p3, "right gap of w₊")?;
    let mut plus = ConvexBranch { side: ConvexSide::Plus, model, x, rho0, gaps: [p1, mid, p3], offset: 0.0 };
    let mut minus = ConvexBranch { side: ConvexSide::Minus, model, x, rho0, gaps: [m1, mid, m3], offset: 0.0 };
    plus.offset = plus.primitive(x4);
    minus.offset = minus.primitive(x2);
    for b in [&plus, &minus] {
        for g in &b.gaps {
            let (low, at) = g.min_value(POSITIVITY_SAMPLES);
            if !(low > 0.0) {
                return Err(Error::Construction(format!("w′ = {low:.3e} ≤ 0 at x = {at:.6} on the {:?} branch", b.side)));
            }
        }
    }
    Ok(ConvexWeight { delta, x, rho0, plus, minus })
}

/// Extremal points of a convex obstacle and the breakpoints derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBreakpoints {
    /// Leftmost `(x₋, y₋)` and rightmost `(x₊, y₊)` points.
    pub left: [f64; 2],
    pub right: [f64; 2],
    /// Lowest `(x_m, y_m)` and highest `(x_M, y_M)` points.
    pub bottom: [f64; 2],
    pub top: [f64; 2],
    pub x: [f64; 5],
    /// Whether the roles of top and bottom were exchanged because `x_M < x_m`.
    pub mirrored: bool,
}

fn ellipse_point(e: &Ellipse, t: f64) -> [f64; 2] {
    let (c, s) = (e.angle.cos(), e.angle.sin());
    let (px, py) = (e.a * t.cos(), e.b * t.sin());
    [e.cx + c * px - s * py, e.cy + s * px + c * py]
}

fn ellipse_params(e: &Ellipse) -> (f64, f64) {
    let (c, s) = (e.angle.cos(), e.angle.sin());
    // x′(t) = 0 and y′(t) = 0.
    let t_right = (-e.b * s).atan2(e.a * c);
    let t_top = (e.b * c).atan2(e.a * s);
    (t_right, t_top)
}

/// `x1 = x₋ + r1, x2 = x_m, x3 = (x_m + x_M)/2, x4 = x_M, x5 = x₊ − r1` with
/// `r1 = ⅓ min(x₊ − x_M, x_M − x_m, x_m − x₋)`.
pub fn obstacle_breakpoints(e: &Ellipse) -> Result<ObstacleBreakpoints> {
    let (tr, tt) = ellipse_params(e);
    let right = ellipse_point(e, tr);
    let left = ellipse_point(e, tr + std::f64::consts::PI);
    let top = ellipse_point(e, tt);
    let bottom = ellipse_point(e, tt + std::f64::consts::PI);
    let (lo, hi, mirrored) = if top[0] >= bottom[0] { (bottom[0], top[0], false) } else { (top[0], bottom[0], true) };
    let scale = right[0] - left[0];
    if hi - lo <= 1e-9 * scale {
        return Err(Error::Construction("highest and lowest points share an abscissa; the symmetric case needs no adapted weight".into()));
    }
    let r1 = (right[0] - hi).min(hi - lo).min(lo - left[0]) / 3.0;
    Ok(ObstacleBreakpoints { left, right, bottom, top, x: [left[0] + r1, lo, 0.5 * (lo + hi), hi, right[0] - r1], mirrored })
}

/// Sign of `w ν_x` along the obstacle boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSignReport {
    /// Largest `w ν_x` over all samples.
    pub max_w_nu_x: f64,
    /// Largest `w ν_x` over samples farther than `exclusion` from both the highest
    /// and lowest points.
    pub max_away: f64,
    pub exclusion: f64,
    /// Samples where `|w ν_x| ≤ tol`.
    pub near_zero: Vec<[f64; 2]>,
    pub breakpoints: ObstacleBreakpoints,
    pub samples: usize,
}

/// Samples `∂O` of the domain's obstacle and evaluates `w ν_x` with `w = w₊` on
/// the upper arc (leftmost to rightmost point over the top) and `w = w₋` below.
/// `ν` is the outward normal of `Ω`, pointing into the obstacle.
pub fn check_obstacle_sign(domain: &WaveguideDomain, delta: f64, samples: usize, exclusion: f64, tol: f64) -> Result<(ConvexWeight, ObstacleSignReport)> {
    let e = domain.obstacle().ok_or_else(|| Error::Precondition(format!("domain '{}' has no obstacle", domain.name)))?;
    let bp = obstacle_breakpoints(&e)?;
    let weight = build_convex_weight(delta, bp.x)?;
    let (upper, lower) = if bp.mirrored { (&weight.minus, &weight.plus) } else { (&weight.plus, &weight.minus) };
    let (tr, _) = ellipse_params(&e);
    let (c, s) = (e.angle.cos(), e.angle.sin());
    let mut rep = ObstacleSignReport {
        max_w_nu_x: f64::NEG_INFINITY,
        max_away: f64::NEG_INFINITY,
        exclusion,
        near_zero: Vec::new(),
        breakpoints: bp.clone(),
        samples,
    };
    let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    for i in 0..samples {
        let phase = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let t = tr + phase;
        let p = ellipse_point(&e, t);
        // Outward normal of the ellipse, rotated; ν of Ω is its negative.
        let (nx, ny) = (t.cos() / e.a, t.sin() / e.b);
        let gx = c * nx - s * ny;
        let gy = s * nx + c * ny;
        let nu_x = -gx / (gx * gx + gy * gy).sqrt();
        // Counterclockwise from the rightmost point the arc passes over the top.
        let on_upper = phase > 0.0 && phase < std::f64::consts::PI;
        let w = if on_upper { upper.value(p[0]) } else { lower.value(p[0]) };
        let v = w * nu_x;
        rep.max_w_nu_x = rep.max_w_nu_x.max(v);
        if dist(p, bp.top) > exclusion && dist(p, bp.bottom) > exclusion {
            rep.max_away = rep.max_away.max(v);
        }
        if v.abs() <= tol {
            rep.near_zero.push(p);
        }
    }
    Ok((weight, rep))
}
