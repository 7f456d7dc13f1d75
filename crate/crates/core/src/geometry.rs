//! Planar waveguide domains, boundary normals and the `x ν_x` sign checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};

/// Sign tolerance on `x ν_x`.
pub const SIGN_TOL: f64 = 1e-10;
/// Parameter neighbourhood of segment endpoints excluded from normal sampling.
pub const CORNER_EXCLUSION: f64 = 1e-6;
/// Default sampling density used by [`classify_theorem`].
pub const CLASSIFY_SAMPLES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Smooth,
    PiecewiseLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphAxis {
    /// Points `(s, f(s))`.
    YOfX,
    /// Points `(f(s), s)`.
    XOfY,
}

/// Scalar profile used by graph segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Profile {
    /// `Σ c_k s^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `w0 + (w1 − w0) S(|s|/r0)` with the quintic smoothstep `S`, constant for `|s| ≥ r0`.
    Smoothstep { w0: f64, w1: f64, r0: f64 },
}

fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let t2 = t * t;
        (t2 * t * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - t) * (1.0 - t))
    }
}

impl Profile {
    /// Value and first derivative.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        match self {
            Profile::Polynomial { coeffs } => {
                let mut f = 0.0;
                let mut df = 0.0;
                for c in coeffs.iter().rev() {
                    df = df * s + f;
                    f = f * s + c;
                }
                (f, df)
            }
            Profile::Smoothstep { w0, w1, r0 } => {
                let (v, dv) = smoothstep(s.abs() / r0);
                (w0 + (w1 - w0) * v, (w1 - w0) * dv * s.signum() / r0)
            }
        }
    }
}

/// One parametrized piece of the boundary, `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line { from: [f64; 2], to: [f64; 2] },
    /// `c + R(angle) (a cos θ, b sin θ)`, `θ` from `theta0` to `theta1`.
    Arc {
        center: [f64; 2],
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
        theta0: f64,
        theta1: f64,
    },
    /// Graph of `scale · f(s)`, `s` from `s0` to `s1`.
    Graph {
        axis: GraphAxis,
        profile: Profile,
        #[serde(default = "one")]
        scale: f64,
        s0: f64,
        s1: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Segment {
    pub fn point(&self, t: f64) -> [f64; 2] {
        match self {
            Segment::Line { from, to } => [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])],
            Segment::Arc { center, a, b, angle, theta0, theta1 } => {
                let th = theta0 + t * (theta1 - theta0);
                let (px, py) = (a * th.cos(), b * th.sin());
                let (c, s) = (angle.cos(), angle.sin());
                [center[0] + c * px - s * py, center[1] + s * px + c * py]
            }
            Segment::Graph { axis, profile, scale, s0, s1 } => {
                let s = s0 + t * (s1 - s0);
                let f = scale * profile.eval(s).0;
                match axis {
                    GraphAxis::YOfX => [s, f],
                    GraphAxis::XOfY => [f, s],
                }
            }
        }
    }

    pub fn tangent(&self, t: f64) -> [f64; 2] {
        match self {
            Segment::Line { from, to } => [to[0] - from[0], to[1] - from[1]],
            Segment::Arc { a, b, angle, theta0, theta1, .. } => {
                let th = theta0 + t * (theta1 - theta0);
                let dth = theta1 - theta0;
                let (px, py) = (-a * th.sin() * dth, b * th.cos() * dth);
                let (c, s) = (angle.cos(), angle.sin());
                [c * px - s * py, s * px + c * py]
            }
            Segment::Graph { axis, profile, scale, s0, s1 } => {
                let s = s0 + t * (s1 - s0);
                let ds = s1 - s0;
                let df = scale * profile.eval(s).1 * ds;
                match axis {
                    GraphAxis::YOfX => [ds, df],
                    GraphAxis::XOfY => [df, ds],
                }
            }
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            Segment::Line { .. } => Regularity::PiecewiseLinear,
            _ => Regularity::Smooth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremClass {
    Cig,
    Hour,
    Flat,
    Convexobs,
    None,
}

/// Ellipse obstacle `{ |R(−angle)(p − c)|_{a,b} < 1 }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub angle: f64,
}

impl Ellipse {
    pub fn contains_closed(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.cx, p[1] - self.cy);
        let (c, s) = (self.angle.cos(), self.angle.sin());
        let (qx, qy) = (c * dx + s * dy, -s * dx + c * dy);
        (qx / self.a).powi(2) + (qy / self.b).powi(2) <= 1.0
    }

    /// Half extents of the bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (c, s) = (self.angle.cos(), self.angle.sin());
        (
            ((self.a * c).powi(2) + (self.b * s).powi(2)).sqrt(),
            ((self.a * s).powi(2) + (self.b * c).powi(2)).sqrt(),
        )
    }

    /// Leftmost and rightmost boundary points.
    pub fn extremal_points(&self) -> ([f64; 2], [f64; 2]) {
        let (c, s) = (self.angle.cos(), self.angle.sin());
        // x(θ) = cx + a c cos θ − b s sin θ is maximal at θ = atan2(−b s, a c).
        let th = (-self.b * s).atan2(self.a * c);
        let p = |th: f64| {
            let (px, py) = (self.a * th.cos(), self.b * th.sin());
            [self.cx + c * px - s * py, self.cy + s * px + c * py]
        };
        (p(th + PI), p(th))
    }
}

/// Analytic inside tests for the gallery, or a ray-crossing test for custom input.
#[derive(Clone, Debug, PartialEq)]
enum Shape {
    HalfStrip { width: f64 },
    Strip { lower: f64, upper: f64 },
    Product,
    Cigar { radius: f64 },
    Parabola,
    Hourglass { profile: Profile },
    StripMinusConvex { lower: f64, upper: f64, ellipse: Ellipse },
    Custom { polyline: Vec<[[f64; 2]; 2]> },
}

/// JSON domain description: a gallery name with parameters, or `custom`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<Segment>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ends: Option<EndsSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EndsSpec {
    #[serde(default)]
    pub minus: Option<CrossSection>,
    #[serde(default)]
    pub plus: Option<CrossSection>,
    pub r0: f64,
    #[serde(default)]
    pub x0: Option<f64>,
}

/// A planar domain whose boundary is a list of parametrized segments.
#[derive(Clone, Debug)]
pub struct WaveguideDomain {
    pub name: String,
    shape: Shape,
    segments: Vec<Segment>,
    orientation: Vec<f64>,
    pub r0: f64,
    pub y_minus: Option<CrossSection>,
    pub y_plus: Option<CrossSection>,
    pub x0: f64,
    /// False for domains such as the parabola whose ends are not products.
    pub cylindrical_ends: bool,
}

/// A sampled boundary point with its outward normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundarySample {
    pub segment: usize,
    pub t: f64,
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

/// Boundary quadrature node: point, outward normal and arc-length weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryNode {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub ds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlaringEntry {
    pub interval: (f64, f64),
    pub c_i: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryReport {
    pub sup_x_nu_x: f64,
    pub violating_points: Vec<[f64; 2]>,
    pub flaring_constant: Vec<FlaringEntry>,
    pub theorem_class: TheoremClass,
}

fn param<T: for<'de> Deserialize<'de> + Default>(params: &Value) -> Result<T> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| Error::InvalidDomain(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HalfStripParams {
    width: f64,
    r0: f64,
}
impl Default for HalfStripParams {
    fn default() -> Self {
        Self { width: PI, r0: 1.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct StripParams {
    lower: f64,
    upper: f64,
    r0: f64,
}
impl Default for StripParams {
    fn default() -> Self {
        Self { lower: -1.0, upper: 1.0, r0: 1.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProductParams {
    cross_section: Vec<[f64; 2]>,
    r0: f64,
}
impl Default for ProductParams {
    fn default() -> Self {
        Self { cross_section: vec![[0.0, PI]], r0: 1.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CigarParams {
    radius: f64,
}
impl Default for CigarParams {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ParabolaParams {
    ymax: f64,
}
impl Default for ParabolaParams {
    fn default() -> Self {
        Self { ymax: 3.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HourglassParams {
    waist: f64,
    width: f64,
    r0: f64,
}
impl Default for HourglassParams {
    fn default() -> Self {
        Self { waist: 0.5, width: 1.0, r0: 2.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConvexParams {
    a: f64,
    b: f64,
    cx: f64,
    cy: f64,
    angle: f64,
    lower: f64,
    upper: f64,
    r0: Option<f64>,
}
impl Default for ConvexParams {
    fn default() -> Self {
        Self { a: 0.5, b: 0.3, cx: 0.6, cy: 0.1, angle: 0.5, lower: -1.0, upper: 1.0, r0: None }
    }
}

fn wall(x_from: f64, x_to: f64, y: f64) -> Segment {
    Segment::Line { from: [x_from, y], to: [x_to, y] }
}

/// Named example domains.
pub fn gallery(name: &str, params: &Value) -> Result<WaveguideDomain> {
    let mut d = match name {
        "half_strip" => {
            let p: HalfStripParams = param(params)?;
            positive(p.width, "width")?;
            positive(p.r0, "r0")?;
            let stub = p.r0 + 1.0;
            WaveguideDomain::raw(
                name,
                Shape::HalfStrip { width: p.width },
                vec![wall(stub, 0.0, 0.0), Segment::Line { from: [0.0, 0.0], to: [0.0, p.width] }, wall(0.0, stub, p.width)],
                p.r0,
                None,
                Some(CrossSection::interval(0.0, p.width)?),
            )
        }
        "full_strip" => {
            let p: StripParams = param(params)?;
            positive(p.r0, "r0")?;
            let y = CrossSection::interval(p.lower, p.upper)?;
            let s = p.r0 + 1.0;
            WaveguideDomain::raw(
                name,
                Shape::Strip { lower: p.lower, upper: p.upper },
                vec![wall(-s, s, p.lower), wall(s, -s, p.upper)],
                p.r0,
                Some(y.clone()),
                Some(y),
            )
        }
        "product_cylinder" => {
            let p: ProductParams = param(params)?;
            positive(p.r0, "r0")?;
            let y = CrossSection::try_from(p.cross_section)?;
            let s = p.r0 + 1.0;
            let mut segs = Vec::new();
            for &(a, b) in y.intervals() {
                segs.push(wall(-s, s, a));
                segs.push(wall(s, -s, b));
            }
            WaveguideDomain::raw(name, Shape::Product, segs, p.r0, Some(y.clone()), Some(y))
        }
        "cigar" => {
            let p: CigarParams = param(params)?;
            positive(p.radius, "radius")?;
            let r = p.radius;
            let stub = 2.0 * r + 1.0;
            WaveguideDomain::raw(
                name,
                Shape::Cigar { radius: r },
                vec![
                    wall(stub, r, r),
                    Segment::Arc { center: [r, 0.0], a: r, b: r, angle: 0.0, theta0: PI / 2.0, theta1: 1.5 * PI },
                    wall(r, stub, -r),
                ],
                r,
                None,
                Some(CrossSection::interval(-r, r)?),
            )
        }
        "parabola" => {
            let p: ParabolaParams = param(params)?;
            positive(p.ymax, "ymax")?;
            let mut d = WaveguideDomain::raw(
                name,
                Shape::Parabola,
                vec![Segment::Graph {
                    axis: GraphAxis::XOfY,
                    profile: Profile::Polynomial { coeffs: vec![0.0, 0.0, 1.0] },
                    scale: 1.0,
                    s0: -p.ymax,
                    s1: p.ymax,
                }],
                p.ymax * p.ymax,
                None,
                None,
            );
            d.cylindrical_ends = false;
            d
        }
        "hourglass" => {
            let p: HourglassParams = param(params)?;
            positive(p.waist, "waist")?;
            positive(p.r0, "r0")?;
            if p.width <= p.waist {
                return Err(Error::InvalidDomain("hourglass width must exceed the waist".into()));
            }
            let profile = Profile::Smoothstep { w0: p.waist, w1: p.width, r0: p.r0 };
            let s = p.r0 + 1.0;
            let y = CrossSection::interval(-p.width, p.width)?;
            WaveguideDomain::raw(
                name,
                Shape::Hourglass { profile: profile.clone() },
                vec![
                    Segment::Graph { axis: GraphAxis::YOfX, profile: profile.clone(), scale: -1.0, s0: -s, s1: s },
                    Segment::Graph { axis: GraphAxis::YOfX, profile, scale: 1.0, s0: s, s1: -s },
                ],
                p.r0,
                Some(y.clone()),
                Some(y),
            )
        }
        "strip_minus_convex" => {
            let p: ConvexParams = param(params)?;
            positive(p.a, "a")?;
            positive(p.b, "b")?;
            let e = Ellipse { cx: p.cx, cy: p.cy, a: p.a, b: p.b, angle: p.angle };
            let (hx, hy) = e.half_extents();
            if !(p.cy - hy > p.lower && p.cy + hy < p.upper) {
                return Err(Error::InvalidDomain("obstacle not strictly inside the strip".into()));
            }
            let r0 = p.r0.unwrap_or(p.cx.abs() + hx + 0.5);
            if r0 <= p.cx.abs() + hx {
                return Err(Error::InvalidDomain("r0 must clear the obstacle".into()));
            }
            let s = r0 + 1.0;
            let y = CrossSection::interval(p.lower, p.upper)?;
            WaveguideDomain::raw(
                name,
                Shape::StripMinusConvex { lower: p.lower, upper: p.upper, ellipse: e },
                vec![
                    wall(-s, s, p.lower),
                    wall(s, -s, p.upper),
                    Segment::Arc { center: [p.cx, p.cy], a: p.a, b: p.b, angle: p.angle, theta0: 0.0, theta1: 2.0 * PI },
                ],
                r0,
                Some(y.clone()),
                Some(y),
            )
        }
        other => return Err(Error::UnknownDomain(other.to_string())),
    };
    d.finish()?;
    Ok(d)
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("{what} must be positive, got {v}")))
    }
}

impl WaveguideDomain {
    fn raw(
        name: &str,
        shape: Shape,
        segments: Vec<Segment>,
        r0: f64,
        y_minus: Option<CrossSection>,
        y_plus: Option<CrossSection>,
    ) -> Self {
        Self {
            name: name.to_string(),
            shape,
            orientation: vec![1.0; segments.len()],
            segments,
            r0,
            y_minus,
            y_plus,
            x0: 0.0,
            cylindrical_ends: true,
        }
    }

    /// Builds a domain from its JSON description.
    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        if spec.kind != "custom" {
            return gallery(&spec.kind, &spec.params);
        }
        let segments = spec.segments.clone().ok_or_else(|| Error::InvalidDomain("custom domain needs segments".into()))?;
        let ends = spec.ends.clone().ok_or_else(|| Error::InvalidDomain("custom domain needs ends".into()))?;
        positive(ends.r0, "r0")?;
        let mut polyline = Vec::new();
        for s in &segments {
            let n = match s {
                Segment::Line { .. } => 1,
                _ => 4096,
            };
            let mut prev = s.point(0.0);
            for k in 1..=n {
                let q = s.point(k as f64 / n as f64);
                polyline.push([prev, q]);
                prev = q;
            }
        }
        for w in segments.windows(2) {
            let (a, b) = (w[0].point(1.0), w[1].point(0.0));
            if (a[0] - b[0]).hypot(a[1] - b[1]) > 1e-9 {
                return Err(Error::InvalidDomain(format!("segments do not share endpoints at {a:?} / {b:?}")));
            }
        }
        let mut d = Self::raw("custom", Shape::Custom { polyline }, segments, ends.r0, ends.minus, ends.plus);
        d.x0 = ends.x0.unwrap_or(0.0);
        d.finish()?;
        Ok(d)
    }

    /// Validates the domain and fixes the orientation of every segment.
    fn finish(&mut self) -> Result<()> {
        if self.cylindrical_ends && self.y_minus.is_none() && self.y_plus.is_none() {
            return Err(Error::InvalidDomain("at least one end must be nonempty".into()));
        }
        let mut orient = Vec::with_capacity(self.segments.len());
        for (i, s) in self.segments.iter().enumerate() {
            let t = 0.5 + 1e-3 * (i as f64 + 1.0).sqrt();
            let nu = raw_normal(s, t).ok_or(Error::DegenerateTangent { segment: i, t })?;
            let p = s.point(t);
            let out = [p[0] + 1e-6 * nu[0], p[1] + 1e-6 * nu[1]];
            let inn = [p[0] - 1e-6 * nu[0], p[1] - 1e-6 * nu[1]];
            match (self.contains(out), self.contains(inn)) {
                (false, true) => orient.push(1.0),
                (true, false) => orient.push(-1.0),
                _ => return Err(Error::InvalidDomain(format!("segment {i} does not separate inside from outside"))),
            }
        }
        self.orientation = orient;
        if self.cylindrical_ends {
            self.check_product_structure()?;
        }
        Ok(())
    }

    fn check_product_structure(&self) -> Result<()> {
        let (ylo, yhi) = self.y_range();
        for (x, y) in [(self.r0, &self.y_plus), (-self.r0, &self.y_minus)] {
            for k in 0..=200 {
                let yy = ylo + (yhi - ylo) * (k as f64 + 0.37) / 201.0;
                let want = y.as_ref().map_or(false, |c| c.contains(yy));
                for xx in [x, x + x.signum() * 0.5, x + x.signum() * 3.0] {
                    if self.contains([xx, yy]) != want {
                        return Err(Error::InvalidDomain(format!("no product structure at ({xx}, {yy})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x, y] = p;
        match &self.shape {
            Shape::HalfStrip { width } => x > 0.0 && y > 0.0 && y < *width,
            Shape::Strip { lower, upper } => y > *lower && y < *upper,
            Shape::Product => self.y_plus.as_ref().map_or(false, |c| c.contains(y)),
            Shape::Cigar { radius } => {
                let r = *radius;
                (x - r).powi(2) + y * y < r * r || (x > r && y.abs() < r)
            }
            Shape::Parabola => x > y * y,
            Shape::Hourglass { profile } => y.abs() < profile.eval(x).0,
            Shape::StripMinusConvex { lower, upper, ellipse } => y > *lower && y < *upper && !ellipse.contains_closed(p),
            Shape::Custom { polyline } => {
                if x >= self.r0 {
                    return self.y_plus.as_ref().map_or(false, |c| c.contains(y));
                }
                if x <= -self.r0 {
                    return self.y_minus.as_ref().map_or(false, |c| c.contains(y));
                }
                let mut crossings = 0usize;
                for [a, b] in polyline {
                    if (a[0] <= x) != (b[0] <= x) {
                        let yc = a[1] + (x - a[0]) * (b[1] - a[1]) / (b[0] - a[0]);
                        if yc > y {
                            crossings += 1;
                        }
                    }
                }
                crossings % 2 == 1
            }
        }
    }

    /// Convex obstacle of a `strip_minus_convex` domain.
    pub fn obstacle(&self) -> Option<Ellipse> {
        match &self.shape {
            Shape::StripMinusConvex { ellipse, .. } => Some(*ellipse),
            _ => None,
        }
    }

    pub fn is_one_ended(&self) -> bool {
        self.y_minus.is_none() || self.y_plus.is_none()
    }

    /// Outward unit normal on segment `segment` at parameter `t`.
    pub fn outward_normal(&self, segment: usize, t: f64) -> Result<[f64; 2]> {
        let s = self
            .segments
            .get(segment)
            .ok_or_else(|| Error::Precondition(format!("segment {segment} does not exist")))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Precondition(format!("parameter {t} outside [0, 1]")));
        }
        let nu = raw_normal(s, t).ok_or(Error::DegenerateTangent { segment, t })?;
        let o = self.orientation[segment];
        Ok([o * nu[0], o * nu[1]])
    }

    /// Boundary samples at `n` parameters per segment, endpoints excluded.
    pub fn boundary_samples(&self, n: usize) -> Result<Vec<BoundarySample>> {
        let n = n.max(2);
        let mut out = Vec::with_capacity(n * self.segments.len());
        for (i, s) in self.segments.iter().enumerate() {
            for k in 0..n {
                let t = CORNER_EXCLUSION + (1.0 - 2.0 * CORNER_EXCLUSION) * k as f64 / (n - 1) as f64;
                out.push(BoundarySample { segment: i, t, point: s.point(t), normal: self.outward_normal(i, t)? });
            }
        }
        Ok(out)
    }

    /// Midpoint-rule quadrature of `∂Ω ∩ {x_lo ≤ x ≤ x_hi}` with nodes about
    /// `spacing` apart. The straight walls of each end are continued from the
    /// last segment out to the window edge.
    pub fn boundary_quadrature(&self, x_lo: f64, x_hi: f64, spacing: f64) -> Result<Vec<BoundaryNode>> {
        if !(spacing > 0.0) || !(x_hi > x_lo) {
            return Err(Error::Precondition(format!("bad quadrature window [{x_lo}, {x_hi}] with spacing {spacing}")));
        }
        let mut out = Vec::new();
        let mut push = |point: [f64; 2], normal: [f64; 2], ds: f64| {
            if point[0] >= x_lo && point[0] <= x_hi {
                out.push(BoundaryNode { point, normal, ds });
            }
        };
        for (i, s) in self.segments.iter().enumerate() {
            let mut len = 0.0;
            let mut prev = s.point(0.0);
            for k in 1..=256 {
                let p = s.point(k as f64 / 256.0);
                len += (p[0] - prev[0]).hypot(p[1] - prev[1]);
                prev = p;
            }
            let n = ((len / spacing).ceil() as usize).max(1);
            let dt = 1.0 / n as f64;
            for k in 0..n {
                let t = (k as f64 + 0.5) * dt;
                let tg = s.tangent(t);
                push(s.point(t), self.outward_normal(i, t)?, tg[0].hypot(tg[1]) * dt);
            }
        }
        let ends = [(&self.y_plus, self.x_max(), x_hi), (&self.y_minus, x_lo, self.x_min())];
        for (y, a, b) in ends {
            let Some(y) = y else { continue };
            if b <= a {
                continue;
            }
            let n = ((b - a) / spacing).ceil() as usize;
            let dx = (b - a) / n as f64;
            for &(lo, hi) in y.intervals() {
                for k in 0..n {
                    let x = a + (k as f64 + 0.5) * dx;
                    push([x, lo], [0.0, -1.0], dx);
                    push([x, hi], [0.0, 1.0], dx);
                }
            }
        }
        Ok(out)
    }

    /// Vertical extent of the closure, ends included.
    pub fn y_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            for k in 0..=512 {
                let p = s.point(k as f64 / 512.0);
                lo = lo.min(p[1]);
                hi = hi.max(p[1]);
            }
        }
        for y in [&self.y_minus, &self.y_plus].into_iter().flatten() {
            lo = lo.min(y.lower());
            hi = hi.max(y.upper());
        }
        (lo, hi)
    }

    /// Smallest boundary abscissa; the left edge of one-ended domains.
    pub fn x_min(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for s in &self.segments {
            for k in 0..=2048 {
                lo = lo.min(s.point(k as f64 / 2048.0)[0]);
            }
        }
        lo
    }

    /// Largest boundary abscissa; the right edge of domains with only a left end.
    pub fn x_max(&self) -> f64 {
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            for k in 0..=2048 {
                hi = hi.max(s.point(k as f64 / 2048.0)[0]);
            }
        }
        hi
    }

    /// Smallest channel width over the ends.
    pub fn narrowest_channel(&self) -> f64 {
        [&self.y_minus, &self.y_plus]
            .into_iter()
            .flatten()
            .map(|y| y.narrowest())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest end diameter.
    pub fn end_diameter(&self) -> f64 {
        [&self.y_minus, &self.y_plus].into_iter().flatten().map(|y| y.diameter()).fold(0.0, f64::max)
    }
}

fn raw_normal(s: &Segment, t: f64) -> Option<[f64; 2]> {
    let tg = s.tangent(t);
    let n = tg[0].hypot(tg[1]);
    if !(n > 1e-14) || !n.is_finite() {
        return None;
    }
    Some([tg[1] / n, -tg[0] / n])
}

fn sup_x_nu(samples: &[BoundarySample]) -> (f64, Vec<[f64; 2]>) {
    let mut sup = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for s in samples {
        let v = s.point[0] * s.normal[0];
        sup = sup.max(v);
        if v > SIGN_TOL {
            bad.push(s.point);
        }
    }
    (sup, bad)
}

/// Samples `x ν_x` over the boundary.
pub fn check_star_shaped_x(domain: &WaveguideDomain, samples_per_segment: usize) -> Result<GeometryReport> {
    if samples_per_segment < 2 {
        return Err(Error::Precondition("need at least two samples per segment".into()));
    }
    let samples = domain.boundary_samples(samples_per_segment)?;
    let (sup, bad) = sup_x_nu(&samples);
    let (class, flaring) = classify_from(domain, &samples, sup)?;
    Ok(GeometryReport { sup_x_nu_x: sup, violating_points: bad, flaring_constant: flaring, theorem_class: class })
}

fn flaring_on(samples: &[BoundarySample], lo: f64, hi: f64) -> Result<Option<f64>> {
    let mut sup = f64::NEG_INFINITY;
    let mut any = false;
    for s in samples.iter().filter(|s| s.point[0] > lo && s.point[0] < hi) {
        any = true;
        sup = sup.max(s.point[0] * s.normal[0]);
    }
    if !any {
        return Err(Error::EmptyFlaringSet { lo, hi });
    }
    Ok(if sup < -SIGN_TOL { Some(-sup) } else { None })
}

/// Largest `C_I` with `x ν_x ≤ −C_I` on the sampled boundary over `I = (lo, hi)`.
pub fn check_flaring(domain: &WaveguideDomain, interval: (f64, f64), samples: usize) -> Result<Option<f64>> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Precondition("flaring interval must be bounded and nonempty".into()));
    }
    let all = domain.boundary_samples(samples)?;
    let (ylo, yhi) = domain.y_range();
    if !(ylo.is_finite() && yhi.is_finite()) {
        return Err(Error::Precondition("slab is unbounded".into()));
    }
    flaring_on(&all, lo, hi)
}

fn candidate_intervals(domain: &WaveguideDomain) -> Vec<(f64, f64)> {
    let r = domain.r0;
    let mut out = Vec::new();
    for bins in [6usize, 8, 12, 16] {
        let w = 2.0 * r / bins as f64;
        for len in 1..=3 {
            for k in 0..=bins - len {
                let lo = -r + k as f64 * w;
                let hi = lo + len as f64 * w;
                if lo < 0.0 && hi > 0.0 {
                    continue;
                }
                out.push((lo, hi));
            }
        }
    }
    out
}

/// Partial flaring: the non-flaring boundary of each slab component lies on one horizontal line.
fn partial_flaring(domain: &WaveguideDomain, samples: &[BoundarySample], lo: f64, hi: f64) -> bool {
    let in_slab: Vec<&BoundarySample> = samples.iter().filter(|s| s.point[0] > lo && s.point[0] < hi).collect();
    if in_slab.is_empty() {
        return false;
    }
    let flaring = in_slab.iter().filter(|s| s.point[0] * s.normal[0] < -1e-6).count();
    if flaring == 0 {
        return false;
    }
    let mut levels: Vec<f64> = Vec::new();
    for s in in_slab.iter().filter(|s| s.point[0] * s.normal[0] >= -1e-6) {
        if s.normal[0].abs() > 1e-9 {
            return false;
        }
        if !levels.iter().any(|l| (l - s.point[1]).abs() < 1e-9) {
            levels.push(s.point[1]);
        }
    }
    levels.sort_by(f64::total_cmp);
    let xm = 0.5 * (lo + hi);
    for w in levels.windows(2) {
        let connected = (1..200).all(|k| {
            let y = w[0] + (w[1] - w[0]) * k as f64 / 200.0;
            domain.contains([xm, y])
        });
        if connected {
            return false;
        }
    }
    true
}

fn classify_from(
    domain: &WaveguideDomain,
    samples: &[BoundarySample],
    sup: f64,
) -> Result<(TheoremClass, Vec<FlaringEntry>)> {
    let star = sup <= SIGN_TOL;
    let min_x = samples.iter().map(|s| s.point[0]).fold(f64::INFINITY, f64::min);
    let mut flaring = Vec::new();
    for (lo, hi) in candidate_intervals(domain) {
        if let Ok(c) = flaring_on(samples, lo, hi) {
            flaring.push(FlaringEntry { interval: (lo, hi), c_i: c });
        }
    }
    if star && domain.y_minus.is_none() && min_x >= -SIGN_TOL {
        return Ok((TheoremClass::Cig, flaring));
    }
    if star && flaring.iter().any(|f| f.c_i.is_some()) {
        return Ok((TheoremClass::Hour, flaring));
    }
    if domain.obstacle().is_some() {
        return Ok((TheoremClass::Convexobs, flaring));
    }
    if star && flaring.iter().any(|f| partial_flaring(domain, samples, f.interval.0, f.interval.1)) {
        return Ok((TheoremClass::Flat, flaring));
    }
    Ok((TheoremClass::None, flaring))
}

/// Which resolvent theorem's hypotheses the domain satisfies.
pub fn classify_theorem(domain: &WaveguideDomain) -> TheoremClass {
    classify_with_samples(domain, CLASSIFY_SAMPLES)
}

pub fn classify_with_samples(domain: &WaveguideDomain, samples_per_segment: usize) -> TheoremClass {
    check_star_shaped_x(domain, samples_per_segment).map(|r| r.theorem_class).unwrap_or(TheoremClass::None)
}

/// True if the flat-slab condition holds on some candidate interval.
pub fn has_flat_slab(domain: &WaveguideDomain, samples_per_segment: usize) -> Result<bool> {
    let samples = domain.boundary_samples(samples_per_segment)?;
    let (sup, _) = sup_x_nu(&samples);
    if sup > SIGN_TOL {
        return Ok(false);
    }
    Ok(candidate_intervals(domain).into_iter().any(|(lo, hi)| partial_flaring(domain, &samples, lo, hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    #[test]
    fn half_strip_top_wall_normal() {
        let d = gallery("half_strip", &json!({"width": PI})).unwrap();
        assert!(close(d.outward_normal(2, 0.5).unwrap(), [0.0, 1.0]));
        assert!(close(d.outward_normal(1, 0.5).unwrap(), [-1.0, 0.0]));
    }

    #[test]
    fn parabola_normal_at_y_one() {
        let d = gallery("parabola", &Value::Null).unwrap();
        // s = y runs over [-3, 3]; y = 1 at t = 4/6.
        let nu = d.outward_normal(0, 4.0 / 6.0).unwrap();
        let want = [-1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        assert!(close(nu, want), "{nu:?}");
    }

    #[test]
    fn cigar_circle_normal() {
        let d = gallery("cigar", &json!({"radius": 1.0})).unwrap();
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let th = PI / 2.0 + t * PI;
            assert!(close(d.outward_normal(1, t).unwrap(), [th.cos(), th.sin()]));
        }
    }

    #[test]
    fn degenerate_tangent_is_an_error() {
        let spec: DomainSpec = serde_json::from_value(json!({
            "type": "custom",
            "segments": [{"kind": "line", "from": [0.0, 0.0], "to": [0.0, 0.0]}],
            "ends": {"plus": [[0.0, 1.0]], "r0": 1.0}
        }))
        .unwrap();
        assert!(WaveguideDomain::from_spec(&spec).is_err());
    }

    #[test]
    fn unknown_gallery_name() {
        assert!(matches!(gallery("torus", &Value::Null), Err(Error::UnknownDomain(_))));
        assert!(gallery("strip_minus_convex", &json!({"a": 0.5, "b": 1.2, "cx": 0.0, "cy": 0.0, "angle": 0.0})).is_err());
    }

    #[test]
    fn star_shaped_examples() {
        let p = gallery("parabola", &Value::Null).unwrap();
        let r = check_star_shaped_x(&p, 200).unwrap();
        assert!(r.sup_x_nu_x <= 0.0 && r.violating_points.is_empty());
        let s = gallery("full_strip", &Value::Null).unwrap();
        let r = check_star_shaped_x(&s, 50).unwrap();
        assert_eq!(r.sup_x_nu_x, 0.0);
        let o = gallery("strip_minus_convex", &Value::Null).unwrap();
        assert!(!check_star_shaped_x(&o, 200).unwrap().violating_points.is_empty());
    }

    #[test]
    fn flaring_examples() {
        let strip = gallery("full_strip", &Value::Null).unwrap();
        assert_eq!(check_flaring(&strip, (0.2, 0.8), 100).unwrap(), None);
        let cigar = gallery("cigar", &Value::Null).unwrap();
        assert_eq!(check_flaring(&cigar, (1.2, 2.5), 100).unwrap(), None);
        assert!(matches!(check_flaring(&cigar, (10.0, 11.0), 100), Err(Error::EmptyFlaringSet { .. })));
    }

    #[test]
    fn classes() {
        let cases = [
            ("cigar", json!({}), TheoremClass::Cig),
            ("half_strip", json!({}), TheoremClass::Cig),
            ("parabola", json!({}), TheoremClass::Cig),
            ("hourglass", json!({}), TheoremClass::Hour),
            ("strip_minus_convex", json!({"a": 0.4, "b": 0.4, "cx": 0.0, "cy": 0.0, "angle": 0.0}), TheoremClass::Convexobs),
            ("strip_minus_convex", json!({}), TheoremClass::Convexobs),
            ("full_strip", json!({}), TheoremClass::None),
            ("product_cylinder", json!({}), TheoremClass::None),
        ];
        for (name, p, want) in cases {
            let d = gallery(name, &p).unwrap();
            assert_eq!(classify_theorem(&d), want, "{name}");
        }
        let disk = gallery("strip_minus_convex", &json!({"a": 0.4, "b": 0.4, "cx": 0.0, "cy": 0.0, "angle": 0.0})).unwrap();
        assert!(has_flat_slab(&disk, 400).unwrap());
    }

    #[test]
    fn extremal_points_of_rotated_ellipse() {
        let e = Ellipse { cx: 0.3, cy: 0.1, a: 0.5, b: 0.2, angle: 0.7 };
        let (lm, rm) = e.extremal_points();
        let (hx, _) = e.half_extents();
        assert!((rm[0] - (0.3 + hx)).abs() < 1e-12);
        assert!((lm[0] - (0.3 - hx)).abs() < 1e-12);
    }
}
