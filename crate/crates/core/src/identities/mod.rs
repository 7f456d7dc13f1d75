//! Discrete evaluation of the multiplier identities and the weighted Poincaré
//! inequality on grid functions, and the weights used with them.
//!
//! Volume terms use centred differences with the Dirichlet zero extension,
//! weighted by the fraction of each lattice cell that lies inside the domain.
//! Boundary integrals use a quadrature on the true boundary curve; the normal
//! derivative at each node comes from a quadratic fit of the bilinear
//! interpolant along the inward normal, extrapolated to the wall.

mod convex;

pub use convex::{build_convex_weight, obstacle_breakpoints, ConvexSide, ConvexWeight, ObstacleSignReport, check_obstacle_sign};

use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_laplacian, Grid};
use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A real weight `w(x)` with derivatives.
pub trait Multiplier: Sync {
    /// Number of derivatives available (at most 3).
    fn order(&self) -> usize;
    /// `[w, w′, w″, w‴]` at `x`; entries beyond [`Multiplier::order`] are `NaN`.
    fn derivs(&self, x: f64) -> [f64; 4];
}

/// `w(x) = 1 − (1+x)^{−δ}` on `x ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasicWeight {
    pub delta: f64,
}

pub fn build_weight_basic(delta: f64) -> Result<BasicWeight> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Weight(format!("δ must lie in (0, 1], got {delta}")));
    }
    Ok(BasicWeight { delta })
}

impl Multiplier for BasicWeight {
    fn order(&self) -> usize {
        3
    }

    fn derivs(&self, x: f64) -> [f64; 4] {
        let d = self.delta;
        let s = 1.0 + x.max(0.0);
        [
            1.0 - s.powf(-d),
            d * s.powf(-1.0 - d),
            -d * (1.0 + d) * s.powf(-2.0 - d),
            d * (1.0 + d) * (2.0 + d) * s.powf(-3.0 - d),
        ]
    }
}

/// `w(x) = arctan((x − x0)/s)`: bounded, increasing, odd about `x0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArctanWeight {
    pub x0: f64,
    pub scale: f64,
}

impl Multiplier for ArctanWeight {
    fn order(&self) -> usize {
        3
    }

    fn derivs(&self, x: f64) -> [f64; 4] {
        let s = (x - self.x0) / self.scale;
        let q = 1.0 + s * s;
        let c = self.scale;
        [s.atan(), 1.0 / (q * c), -2.0 * s / (q * q * c * c), (6.0 * s * s - 2.0) / (q * q * q * c * c * c)]
    }
}

/// `μ(x) = tanh((x − x0)/s)`, so `μ′` is a smooth bump of width `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TanhWeight {
    pub x0: f64,
    pub scale: f64,
}

impl Multiplier for TanhWeight {
    fn order(&self) -> usize {
        3
    }

    fn derivs(&self, x: f64) -> [f64; 4] {
        let c = self.scale;
        let t = ((x - self.x0) / c).tanh();
        let s2 = 1.0 - t * t;
        [t, s2 / c, -2.0 * t * s2 / (c * c), (4.0 * t * t * s2 - 2.0 * s2 * s2) / (c * c * c)]
    }
}

/// `w(x) = a + b x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineWeight {
    pub a: f64,
    pub b: f64,
}

impl Multiplier for AffineWeight {
    fn order(&self) -> usize {
        3
    }

    fn derivs(&self, x: f64) -> [f64; 4] {
        [self.a + self.b * x, self.b, 0.0, 0.0]
    }
}

/// A weight given by closures for `w` and its first `order` derivatives.
pub struct FnWeight<F: Fn(f64) -> [f64; 4] + Sync> {
    pub f: F,
    pub order: usize,
}

impl<F: Fn(f64) -> [f64; 4] + Sync> Multiplier for FnWeight<F> {
    fn order(&self) -> usize {
        self.order
    }

    fn derivs(&self, x: f64) -> [f64; 4] {
        let mut d = (self.f)(x);
        for v in d.iter_mut().skip(self.order + 1) {
            *v = f64::NAN;
        }
        d
    }
}

/// Both sides of one identity evaluated on a grid function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub h: f64,
    pub boundary_term: f64,
}

impl IdentityReport {
    fn new(identity: &str, lhs: f64, rhs: f64, h: f64, boundary_term: f64) -> Self {
        Self { identity: identity.into(), lhs, rhs, residual: (lhs - rhs).abs(), h, boundary_term }
    }

    /// Residual relative to the largest of `|lhs|`, `|rhs|`.
    pub fn relative(&self) -> f64 {
        let s = self.lhs.abs().max(self.rhs.abs());
        if s == 0.0 {
            self.residual
        } else {
            self.residual / s
        }
    }
}

/// Boundary quadrature node carrying the normal derivative of a grid function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxNode {
    pub at: [f64; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
    pub ds: f64,
    pub dnu: C64,
}

/// Inward probe depths in units of `h`. The first few cells next to a curved
/// wall carry the staircase error, so the fit starts two cells in.
const PROBE_DEPTHS: [f64; 9] = [2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0];

/// Bilinear interpolant of the zero extension of `u`.
pub fn interpolate(grid: &Grid, u: &[C64], p: [f64; 2]) -> C64 {
    let fx = (p[0] - grid.x_lo) / grid.h;
    let fy = (p[1] - grid.y_lo) / grid.h;
    let (i, j) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - i, fy - j);
    let (i, j) = (i as isize, j as isize);
    zero_ext(grid, u, i, j) * ((1.0 - tx) * (1.0 - ty))
        + zero_ext(grid, u, i + 1, j) * (tx * (1.0 - ty))
        + zero_ext(grid, u, i, j + 1) * ((1.0 - tx) * ty)
        + zero_ext(grid, u, i + 1, j + 1) * (tx * ty)
}

/// Normal derivatives of `u` on the boundary quadrature of `grid`. Values along
/// the inward normal are fitted by a quadratic in the depth and the slope is
/// extrapolated to the wall.
pub fn boundary_flux(grid: &Grid, u: &[C64]) -> Vec<FluxNode> {
    let h = grid.h;
    // Least-squares weights for the linear coefficient of a quadratic fit.
    let s: Vec<f64> = PROBE_DEPTHS.iter().map(|d| d * h).collect();
    let m = nalgebra::DMatrix::from_fn(s.len(), 3, |r, c| s[r].powi(c as i32));
    let pinv = (m.transpose() * &m).try_inverse().expect("probe depths are distinct") * m.transpose();
    let slope: Vec<f64> = (0..s.len()).map(|r| pinv[(1, r)]).collect();
    grid.boundary()
        .iter()
        .map(|b| {
            let d: C64 = s
                .iter()
                .zip(&slope)
                .map(|(&depth, &c)| interpolate(grid, u, [b.point[0] - depth * b.normal[0], b.point[1] - depth * b.normal[1]]) * c)
                .sum();
            FluxNode { at: b.point, normal: b.normal, ds: b.ds, dnu: -d }
        })
        .collect()
}

fn zero_ext(grid: &Grid, u: &[C64], i: isize, j: isize) -> C64 {
    grid.index(i, j).map_or(ZERO, |m| u[m])
}

/// Centred `∂_x` with the Dirichlet zero extension.
pub fn dx_dirichlet(grid: &Grid, u: &[C64]) -> Vec<C64> {
    diff(grid, u, (1, 0))
}

/// Centred `∂_y` with the Dirichlet zero extension.
pub fn dy_dirichlet(grid: &Grid, u: &[C64]) -> Vec<C64> {
    diff(grid, u, (0, 1))
}

fn diff(grid: &Grid, u: &[C64], d: (isize, isize)) -> Vec<C64> {
    let s = 0.5 / grid.h;
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.node(k);
            let (i, j) = (i as isize, j as isize);
            (zero_ext(grid, u, i + d.0, j + d.1) - zero_ext(grid, u, i - d.0, j - d.1)) * s
        })
        .collect()
}

/// `P u = (−Δ_h − z) u` with Dirichlet conditions on the mask.
pub fn apply_p(grid: &Grid, u: &[C64], z: C64) -> Vec<C64> {
    let a = assemble_laplacian(grid);
    a.apply(u).into_iter().zip(u).map(|(v, w)| v - z * w).collect()
}

fn check_len(grid: &Grid, u: &[C64]) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::Precondition(format!("grid function has {} values, grid has {} nodes", u.len(), grid.len())));
    }
    Ok(())
}

fn need_order(w: &dyn Multiplier, k: usize, what: &str) -> Result<()> {
    if w.order() < k {
        return Err(Error::Weight(format!("{what} needs {k} derivatives, weight provides {}", w.order())));
    }
    Ok(())
}

struct Fields {
    u: Vec<C64>,
    ux: Vec<C64>,
    uy: Vec<C64>,
    pu: Vec<C64>,
    x: Vec<f64>,
    y: Vec<f64>,
    h2: f64,
    cell: Vec<f64>,
}

impl Fields {
    fn new(grid: &Grid, u: &[C64], z: C64) -> Self {
        Fields {
            u: u.to_vec(),
            ux: dx_dirichlet(grid, u),
            uy: dy_dirichlet(grid, u),
            pu: apply_p(grid, u, z),
            x: (0..grid.len()).map(|k| grid.position(k)[0]).collect(),
            y: (0..grid.len()).map(|k| grid.position(k)[1]).collect(),
            h2: grid.h * grid.h,
            cell: grid.cell_fraction().to_vec(),
        }
    }

    fn sum(&self, f: impl Fn(usize) -> C64) -> C64 {
        (0..self.u.len()).map(|k| f(k) * self.cell[k]).sum::<C64>() * self.h2
    }
}

/// `⟨w′u′,u′⟩ = ¼⟨w‴u,u⟩ + ½Re⟨Pu,(wu)′⟩ + ½Re⟨wu′,Pu⟩ + ε Im⟨wu′,u⟩ + ½∫_{∂Ω} w|∂_ν u|² ν_x`.
pub fn morawetz_residual(grid: &Grid, u: &[C64], w: &dyn Multiplier, e: f64, eps: f64) -> Result<IdentityReport> {
    check_len(grid, u)?;
    need_order(w, 3, "the Morawetz identity")?;
    let f = Fields::new(grid, u, C64::new(e, eps));
    let d: Vec<[f64; 4]> = f.x.iter().map(|&x| w.derivs(x)).collect();
    let lhs = f.sum(|k| C64::from(d[k][1] * f.ux[k].norm_sqr())).re;
    let t1 = 0.25 * f.sum(|k| C64::from(d[k][3] * f.u[k].norm_sqr())).re;
    let t2 = 0.5 * f.sum(|k| f.pu[k] * (f.u[k] * d[k][1] + f.ux[k] * d[k][0]).conj()).re;
    let t3 = 0.5 * f.sum(|k| f.ux[k] * d[k][0] * f.pu[k].conj()).re;
    let t4 = eps * f.sum(|k| f.ux[k] * d[k][0] * f.u[k].conj()).im;
    let b: f64 = boundary_flux(grid, u).iter().map(|e| w.derivs(e.at[0])[0] * e.dnu.norm_sqr() * e.normal[0] * e.ds).sum();
    Ok(IdentityReport::new("morawetz", lhs, t1 + t2 + t3 + t4 + 0.5 * b, grid.h, 0.5 * b))
}

/// `⟨μ′u′,u′⟩ + E⟨μ′u,u⟩ = 2Re⟨μPu,u′⟩ − 2ε Im⟨μu,u′⟩ + ⟨μ′∂_y u,∂_y u⟩ + ∫_{∂Ω} μ|∂_ν u|² ν_x`.
pub fn ibpe_residual(grid: &Grid, u: &[C64], mu: &dyn Multiplier, e: f64, eps: f64) -> Result<IdentityReport> {
    check_len(grid, u)?;
    need_order(mu, 1, "the energy identity")?;
    let f = Fields::new(grid, u, C64::new(e, eps));
    let d: Vec<[f64; 4]> = f.x.iter().map(|&x| mu.derivs(x)).collect();
    let lhs = f.sum(|k| C64::from(d[k][1] * (f.ux[k].norm_sqr() + e * f.u[k].norm_sqr()))).re;
    let t1 = 2.0 * f.sum(|k| f.pu[k] * d[k][0] * f.ux[k].conj()).re;
    let t2 = -2.0 * eps * f.sum(|k| f.u[k] * d[k][0] * f.ux[k].conj()).im;
    let t3 = f.sum(|k| C64::from(d[k][1] * f.uy[k].norm_sqr())).re;
    let b: f64 = boundary_flux(grid, u).iter().map(|e| mu.derivs(e.at[0])[0] * e.dnu.norm_sqr() * e.normal[0] * e.ds).sum();
    Ok(IdentityReport::new("ibpe", lhs, t1 + t2 + t3 + b, grid.h, b))
}

/// Which transverse identity [`ibpy_residual`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbpyVariant {
    /// `‖∂_y u‖² = ½Re⟨Pu,∂_y(yu)⟩ + ½Re⟨y∂_y u,Pu⟩ + ε Im⟨y∂_y u,u⟩ + ½∫ y|∂_ν u|² ν_y`.
    Yj,
    /// `0 = Re⟨Pu,∂_y u⟩ + ε Im⟨∂_y u,u⟩ + ½∫|∂_ν u|² ν_y`.
    Translation,
}

pub fn ibpy_residual(grid: &Grid, u: &[C64], e: f64, eps: f64, variant: IbpyVariant) -> Result<IdentityReport> {
    check_len(grid, u)?;
    let f = Fields::new(grid, u, C64::new(e, eps));
    let edges = boundary_flux(grid, u);
    match variant {
        IbpyVariant::Yj => {
            let lhs = f.sum(|k| C64::from(f.uy[k].norm_sqr())).re;
            let t1 = 0.5 * f.sum(|k| f.pu[k] * (f.u[k] + f.uy[k] * f.y[k]).conj()).re;
            let t2 = 0.5 * f.sum(|k| f.uy[k] * f.y[k] * f.pu[k].conj()).re;
            let t3 = eps * f.sum(|k| f.uy[k] * f.y[k] * f.u[k].conj()).im;
            let b: f64 = edges.iter().map(|e| e.at[1] * e.dnu.norm_sqr() * e.normal[1] * e.ds).sum();
            Ok(IdentityReport::new("ibpy", lhs, t1 + t2 + t3 + 0.5 * b, grid.h, 0.5 * b))
        }
        IbpyVariant::Translation => {
            let t1 = f.sum(|k| f.pu[k] * f.uy[k].conj()).re;
            let t2 = eps * f.sum(|k| f.uy[k] * f.u[k].conj()).im;
            let b: f64 = edges.iter().map(|e| e.dnu.norm_sqr() * e.normal[1] * e.ds).sum();
            Ok(IdentityReport::new("translation", 0.0, t1 + t2 + 0.5 * b, grid.h, 0.5 * b))
        }
    }
}

/// The two truncated identities on `Ω_R = Ω ∩ {|x| < R}`: the real-part identity
/// for `‖u′‖²_{Ω_R}` with face terms `±u′ū + R(−|∇_y u|² + E|u|² + |u′|²)`, and
/// the imaginary-part identity with face terms `εR|u|² ± Im u′ū`.
pub fn eigenvalue_identity_check(grid: &Grid, u: &[C64], e: f64, eps: f64, r: f64) -> Result<(IdentityReport, IdentityReport)> {
    check_len(grid, u)?;
    let h = grid.h;
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("R must be positive, got {r}")));
    }
    // Face columns at x = ±R that have a lattice column on either side.
    let mut faces: Vec<(f64, usize)> = Vec::new();
    for s in [1.0, -1.0] {
        let c = ((s * r - grid.x_lo) / h).round();
        if c < 0.0 || c as usize >= grid.ncol || (grid.x(c as usize) - s * r).abs() > 1e-6 * h {
            continue;
        }
        let c = c as usize;
        if c == 0 || c + 1 >= grid.ncol {
            return Err(Error::Precondition(format!("R = {r} reaches the truncation face")));
        }
        faces.push((s, c));
    }
    let inside = grid.x_lo < -r || grid.x(grid.ncol - 1) > r;
    if faces.is_empty() || !inside {
        return Err(Error::Precondition(format!("R = {r} is not a lattice column inside the grid")));
    }
    let f = Fields::new(grid, u, C64::new(e, eps));
    // Trapezoid weights across x: full inside, half on the face columns.
    let omega: Vec<f64> = f
        .x
        .iter()
        .map(|&x| {
            if (x.abs() - r).abs() < 1e-6 * h {
                0.5
            } else if x.abs() < r {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let lhs1 = f.sum(|k| C64::from(omega[k] * f.ux[k].norm_sqr())).re;
    let xu = |k: usize| f.ux[k] * f.x[k];
    let a1 = 0.5 * f.sum(|k| f.pu[k] * (f.u[k] + xu(k)).conj() * omega[k]).re;
    let a2 = 0.5 * f.sum(|k| xu(k) * f.pu[k].conj() * omega[k]).re;
    let a3 = eps * f.sum(|k| xu(k) * f.u[k].conj() * omega[k]).im;
    let edge_weight = |x: f64| if (x.abs() - r).abs() < 1e-6 * h { 0.5 } else if x.abs() < r { 1.0 } else { 0.0 };
    let bnd: f64 = boundary_flux(grid, u)
        .iter()
        .map(|ed| edge_weight(ed.at[0]) * ed.at[0] * ed.dnu.norm_sqr() * ed.normal[0] * ed.ds)
        .sum();
    let mut face_re = 0.0;
    let mut face_im = 0.0;
    for &(s, c) in &faces {
        for j in 0..grid.nrow {
            if let Some(k) = grid.index(c as isize, j as isize) {
                let cross = f.ux[k] * f.u[k].conj() * s;
                face_re += h * (cross.re + r * (-f.uy[k].norm_sqr() + e * f.u[k].norm_sqr() + f.ux[k].norm_sqr()));
                face_im += h * (eps * r * f.u[k].norm_sqr() + cross.im);
            }
        }
    }
    let rhs1 = a1 + a2 + a3 + 0.5 * bnd + 0.5 * face_re;
    let b1 = f.sum(|k| f.pu[k] * (f.u[k] + xu(k)).conj() * omega[k]).im;
    let b2 = f.sum(|k| xu(k) * f.pu[k].conj() * omega[k]).im;
    let b3 = -2.0 * eps * f.sum(|k| xu(k) * f.u[k].conj() * omega[k]).re;
    let rhs2 = b1 + b2 + b3 + face_im;
    Ok((
        IdentityReport::new("truncated_real", lhs1, rhs1, h, 0.5 * bnd + 0.5 * face_re),
        IdentityReport::new("truncated_imag", 0.0, rhs2, h, face_im),
    ))
}

/// Outcome of one weighted Poincaré comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    /// `‖√(w‴) u‖`.
    pub weighted_u: f64,
    /// `‖√(w′) u′‖`.
    pub weighted_du: f64,
    pub ratio: f64,
    /// `2√(1+δ)/√(2+δ)`.
    pub constant: f64,
}

/// Constant of the weighted Poincaré inequality.
pub fn poincare_constant(delta: f64) -> f64 {
    2.0 * (1.0 + delta).sqrt() / (2.0 + delta).sqrt()
}

/// Compares `‖√(w‴)u‖` with `‖√(w′)u′‖` for `w = 1 − (1+(x−x0))^{−δ}`. The
/// derivative is the forward difference on lattice edges, with `w′` at edge
/// midpoints and `u = 0` off the mask.
pub fn poincare_check(grid: &Grid, u: &[C64], delta: f64, x0: f64) -> Result<PoincareReport> {
    check_len(grid, u)?;
    let w = build_weight_basic(delta)?;
    for (k, v) in u.iter().enumerate() {
        if *v != ZERO && grid.is_face_node(k) {
            return Err(Error::Precondition("u must vanish on the boundary, including the truncation faces".into()));
        }
        let x = grid.position(k)[0];
        if *v != ZERO && x < x0 {
            return Err(Error::Precondition(format!("u must be supported in x ≥ {x0}, found support at x = {x}")));
        }
    }
    let h = grid.h;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for k in 0..grid.len() {
        let (i, j) = grid.node(k);
        let x = grid.x(i);
        lhs += w.derivs(x - x0)[3] * u[k].norm_sqr();
        // Edges to the right of every interior node, plus the edge entering the
        // leftmost node of each horizontal run.
        let right = zero_ext(grid, u, i as isize + 1, j as isize);
        rhs += w.derivs(x + 0.5 * h - x0)[1] * (right - u[k]).norm_sqr();
        if !grid.is_interior(i as isize - 1, j as isize) {
            rhs += w.derivs((x - 0.5 * h - x0).max(0.0))[1] * u[k].norm_sqr();
        }
    }
    let weighted_u = (lhs * h * h).sqrt();
    let weighted_du = rhs.sqrt();
    Ok(PoincareReport {
        weighted_u,
        weighted_du,
        ratio: if weighted_du > 0.0 { weighted_u / weighted_du } else { 0.0 },
        constant: poincare_constant(delta),
    })
}
