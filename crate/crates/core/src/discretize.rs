//! Uniform-grid staircase discretization of a truncated waveguide.

use std::io::Write;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cross_section::End;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryNode, WaveguideDomain};
use crate::C64;

/// Minimum number of grid cells across the narrowest end channel.
pub const MIN_CELLS_ACROSS: f64 = 8.0;
/// Truncation must exceed `R0` by this many end diameters.
pub const TRUNCATION_DIAMETERS: f64 = 5.0;

const NONE: u32 = u32::MAX;
/// Subsamples per axis when measuring the cut cells along a wall.
const CELL_SUBSAMPLES: usize = 16;

/// Nodes of one truncation face, ordered by increasing `y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Face {
    pub end: End,
    pub column: usize,
    pub nodes: Vec<usize>,
    pub ys: Vec<f64>,
}

/// Lattice `x_i = x_lo + i h`, `y_j = y_lo + j h` with a staircase interior mask.
#[derive(Clone, Debug)]
pub struct Grid {
    pub h: f64,
    pub x_lo: f64,
    pub y_lo: f64,
    pub ncol: usize,
    pub nrow: usize,
    pub r0: f64,
    /// Effective truncation abscissa after snapping to the lattice.
    pub l: f64,
    pub x0: f64,
    mask: Vec<bool>,
    index: Vec<u32>,
    nodes: Vec<(u32, u32)>,
    faces: Vec<Face>,
    boundary: Vec<BoundaryNode>,
    cell_fraction: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub h: f64,
    pub x_lo: f64,
    pub y_lo: f64,
    pub ncol: usize,
    pub nrow: usize,
    pub r0: f64,
    pub l: f64,
    pub unknowns: usize,
    /// Layout of the companion mask file.
    pub mask_layout: String,
}

fn snap(v: f64, h: f64) -> Option<usize> {
    let k = (v / h).round();
    if k >= 0.0 && (v / h - k).abs() < 1e-6 {
        Some(k as usize)
    } else {
        None
    }
}

/// Staircase grid of `domain` truncated at `|x| = L` (or `x = L` for one-ended domains).
pub fn build_grid(domain: &WaveguideDomain, h: f64, l: f64) -> Result<Grid> {
    if !domain.cylindrical_ends {
        return Err(Error::Grid("domain has no cylindrical end to truncate".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Grid(format!("spacing must be positive, got {h}")));
    }
    let narrow = domain.narrowest_channel();
    if narrow / h < MIN_CELLS_ACROSS - 1e-9 {
        return Err(Error::Grid(format!(
            "h = {h} too coarse: {:.2} cells across the narrowest channel, need {MIN_CELLS_ACROSS}",
            narrow / h
        )));
    }
    let need = domain.r0 + TRUNCATION_DIAMETERS * domain.end_diameter();
    if l <= need {
        return Err(Error::Grid(format!("truncation L = {l} must exceed R0 + 5 diameters = {need}")));
    }
    let (y_lo, y_hi) = domain.y_range();
    for y in [&domain.y_minus, &domain.y_plus].into_iter().flatten() {
        for &(a, b) in y.intervals() {
            if snap(a - y_lo, h).is_none() || snap(b - y_lo, h).is_none() {
                return Err(Error::Grid(format!("interval ({a}, {b}) is not aligned with spacing {h}")));
            }
        }
    }
    let nrow = ((y_hi - y_lo) / h).round() as usize + 1;
    let (x_lo, x_hi) = match (&domain.y_minus, &domain.y_plus) {
        (Some(_), Some(_)) => {
            let n = (l / h).round();
            (-n * h, n * h)
        }
        (None, Some(_)) => {
            let a = domain.x_min();
            let n = ((l - a) / h).round();
            (a, a + n * h)
        }
        (Some(_), None) => {
            let b = domain.x_max();
            let n = ((l + b) / h).round();
            (b - n * h, b)
        }
        (None, None) => unreachable!("validated domains have an end"),
    };
    let ncol = ((x_hi - x_lo) / h).round() as usize + 1;
    let mut mask = vec![false; ncol * nrow];
    let mut index = vec![NONE; ncol * nrow];
    let mut nodes = Vec::new();
    for i in 0..ncol {
        let x = x_lo + i as f64 * h;
        for j in 0..nrow {
            let y = y_lo + j as f64 * h;
            if domain.contains([x, y]) {
                mask[i * nrow + j] = true;
                index[i * nrow + j] = nodes.len() as u32;
                nodes.push((i as u32, j as u32));
            }
        }
    }
    let mut faces = Vec::new();
    let push_face = |end: End, column: usize| {
        let mut f = Face { end, column, nodes: Vec::new(), ys: Vec::new() };
        for j in 0..nrow {
            let k = index[column * nrow + j];
            if k != NONE {
                f.nodes.push(k as usize);
                f.ys.push(y_lo + j as f64 * h);
            }
        }
        f
    };
    if domain.y_minus.is_some() {
        faces.push(push_face(End::Minus, 0));
    }
    if domain.y_plus.is_some() {
        faces.push(push_face(End::Plus, ncol - 1));
    }
    for f in &faces {
        if f.nodes.is_empty() {
            return Err(Error::Grid(format!("{:?} face has no nodes", f.end)));
        }
    }
    let l_eff = x_hi.abs().max(x_lo.abs());
    let boundary = domain.boundary_quadrature(x_lo, x_hi, 0.5 * h)?;
    let cell_fraction = nodes
        .iter()
        .map(|&(i, j)| {
            let (i, j) = (i as isize, j as isize);
            let near_wall = (-1..=1).any(|a| {
                (-1..=1).any(|b| {
                    let (p, q) = (i + a, j + b);
                    p >= 0 && q >= 0 && (p as usize) < ncol && (q as usize) < nrow && !mask[p as usize * nrow + q as usize]
                })
            });
            if !near_wall {
                return 1.0;
            }
            let (x, y) = (x_lo + i as f64 * h, y_lo + j as f64 * h);
            let n = CELL_SUBSAMPLES;
            let mut inside = 0usize;
            for a in 0..n {
                for b in 0..n {
                    let px = x + h * ((a as f64 + 0.5) / n as f64 - 0.5);
                    let py = y + h * ((b as f64 + 0.5) / n as f64 - 0.5);
                    inside += domain.contains([px, py]) as usize;
                }
            }
            inside as f64 / (n * n) as f64
        })
        .collect();
    Ok(Grid { h, x_lo, y_lo, ncol, nrow, r0: domain.r0, l: l_eff, x0: domain.x0, mask, index, nodes, faces, boundary, cell_fraction })
}

impl Grid {
    /// Area fraction of each node's dual cell that lies in the domain.
    pub fn cell_fraction(&self) -> &[f64] {
        &self.cell_fraction
    }

    /// Quadrature of the true boundary inside the lattice window.
    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_lo + j as f64 * self.h
    }

    pub fn is_interior(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.ncol && (j as usize) < self.nrow && self.mask[i as usize * self.nrow + j as usize]
    }

    /// Unknown index of lattice node `(i, j)`.
    pub fn index(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.ncol || j as usize >= self.nrow {
            return None;
        }
        let k = self.index[i as usize * self.nrow + j as usize];
        (k != NONE).then_some(k as usize)
    }

    /// Lattice coordinates of unknown `k`.
    pub fn node(&self, k: usize) -> (usize, usize) {
        let (i, j) = self.nodes[k];
        (i as usize, j as usize)
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.node(k);
        [self.x(i), self.y(j)]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, end: End) -> Option<&Face> {
        self.faces.iter().find(|f| f.end == end)
    }

    pub fn is_face_node(&self, k: usize) -> bool {
        let (i, _) = self.node(k);
        self.faces.iter().any(|f| f.column == i)
    }

    /// Interior node count in one lattice column.
    pub fn column_count(&self, i: usize) -> usize {
        (0..self.nrow).filter(|&j| self.mask[i * self.nrow + j]).count()
    }

    /// `⟨u, v⟩ = h² Σ u v̄`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        let h2 = self.h * self.h;
        u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() * h2
    }

    pub fn norm(&self, u: &[C64]) -> f64 {
        (u.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.h * self.h).sqrt()
    }

    pub fn interior_area(&self) -> f64 {
        self.len() as f64 * self.h * self.h
    }

    /// Largest index distance between coupled unknowns of the 5-point stencil
    /// together with dense face blocks.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for (k, &(i, j)) in self.nodes.iter().enumerate() {
            for (di, dj) in [(1isize, 0isize), (0, 1)] {
                if let Some(m) = self.index(i as isize + di, j as isize + dj) {
                    bw = bw.max(m.abs_diff(k));
                }
            }
        }
        for f in &self.faces {
            if let (Some(a), Some(b)) = (f.nodes.first(), f.nodes.last()) {
                bw = bw.max(b - a);
            }
        }
        bw
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            h: self.h,
            x_lo: self.x_lo,
            y_lo: self.y_lo,
            ncol: self.ncol,
            nrow: self.nrow,
            r0: self.r0,
            l: self.l,
            unknowns: self.len(),
            mask_layout: "u8 per lattice node, 1 = interior; rows j = 0..nrow (y ascending) outer, columns i = 0..ncol inner".into(),
        }
    }

    /// Writes `<stem>.json` metadata and the `<stem>.mask` byte lattice.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&self.meta())?)?;
        let mut bytes = Vec::with_capacity(self.ncol * self.nrow);
        for j in 0..self.nrow {
            for i in 0..self.ncol {
                bytes.push(self.mask[i * self.nrow + j] as u8);
            }
        }
        std::fs::File::create(dir.join(format!("{stem}.mask")))?.write_all(&bytes)?;
        Ok(())
    }

    /// Writes a grid function as CSV rows `x, y, re, im`.
    pub fn write_function_csv(&self, u: &[C64], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "re", "im"])?;
        for (k, v) in u.iter().enumerate() {
            let p = self.position(k);
            w.write_record([p[0].to_string(), p[1].to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Samples `f(x, y)` at every unknown.
    pub fn sample<T>(&self, f: impl Fn(f64, f64) -> T) -> Vec<T> {
        (0..self.len()).map(|k| {
            let p = self.position(k);
            f(p[0], p[1])
        }).collect()
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1]).find(|&k| self.cols[k] == c).map_or(0.0, |k| self.vals[k])
    }

    pub fn apply<T>(&self, u: &[T]) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1]).fold(T::default(), |acc, k| acc + u[self.cols[k]] * self.vals[k])
            })
            .collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Five-point `−Δ_h` with Dirichlet conditions on the mask and on the truncation faces.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix,
}

pub fn assemble_laplacian(grid: &Grid) -> DiscreteOperator {
    let inv = 1.0 / (grid.h * grid.h);
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for k in 0..grid.len() {
        let (i, j) = grid.node(k);
        let (i, j) = (i as isize, j as isize);
        let mut entries = vec![(k, 4.0 * inv)];
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if let Some(m) = grid.index(i + di, j + dj) {
                entries.push((m, -inv));
            }
        }
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    DiscreteOperator { matrix: CsrMatrix { n: grid.len(), row_ptr, cols, vals } }
}

impl DiscreteOperator {
    pub fn apply<T>(&self, u: &[T]) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        self.matrix.apply(u)
    }
}

/// Named weight functions evaluated nodewise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum WeightKind {
    /// `(1 + |x − x0|)^{−(3+δ)/2}`, or `(1 + x − x0)^{…}` with `x ≥ x0` when one-ended.
    PolyMinus {
        #[serde(default)]
        one_ended: bool,
    },
    PolyPlus {
        #[serde(default)]
        one_ended: bool,
    },
    /// `1 − (1 + x)^{−δ}` for `x ≥ 0`.
    MorawetzW,
    /// Smooth cutoff in `|x − x0|`: one up to `inner`, zero from `outer` on.
    CutoffChi { inner: f64, outer: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub kind: WeightKind,
    pub values: Vec<f64>,
}

/// `C^∞` step from 1 at `s ≤ 0` to 0 at `s ≥ 1`.
pub fn smooth_step_down(s: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let (a, b) = (f(1.0 - s), f(s));
        a / (a + b)
    }
}

/// Value of `kind` at abscissa `x`.
pub fn weight_value(kind: WeightKind, delta: f64, x0: f64, x: f64) -> Result<f64> {
    let poly = |one_ended: bool, sign: f64| -> Result<f64> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Weight(format!("δ must lie in (0, 1], got {delta}")));
        }
        let r = if one_ended {
            if x - x0 < -1e-12 {
                return Err(Error::Weight(format!("one-ended weight at x = {x} < {x0}")));
            }
            1.0 + (x - x0).max(0.0)
        } else {
            1.0 + (x - x0).abs()
        };
        Ok(r.powf(sign * (3.0 + delta) / 2.0))
    };
    match kind {
        WeightKind::PolyMinus { one_ended } => poly(one_ended, -1.0),
        WeightKind::PolyPlus { one_ended } => poly(one_ended, 1.0),
        WeightKind::MorawetzW => {
            if !(delta > 0.0) {
                return Err(Error::Weight(format!("δ must be positive, got {delta}")));
            }
            if x < -1e-12 {
                return Err(Error::Weight(format!("Morawetz weight needs x ≥ 0, got {x}")));
            }
            Ok(1.0 - (1.0 + x.max(0.0)).powf(-delta))
        }
        WeightKind::CutoffChi { inner, outer } => {
            if !(outer > inner && inner >= 0.0) {
                return Err(Error::Weight("cutoff needs 0 ≤ inner < outer".into()));
            }
            Ok(smooth_step_down(((x - x0).abs() - inner) / (outer - inner)))
        }
    }
}

pub fn weight_diag(grid: &Grid, kind: WeightKind, delta: f64, x0: f64) -> Result<WeightVector> {
    let values = (0..grid.len()).map(|k| weight_value(kind, delta, x0, grid.position(k)[0])).collect::<Result<_>>()?;
    Ok(WeightVector { kind, values })
}

fn difference<T>(grid: &Grid, u: &[T], dir: (isize, isize)) -> Vec<T>
where
    T: Copy + Default + Sub<Output = T> + Mul<f64, Output = T>,
{
    let h = grid.h;
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.node(k);
            let (i, j) = (i as isize, j as isize);
            let fwd = grid.index(i + dir.0, j + dir.1);
            let bwd = grid.index(i - dir.0, j - dir.1);
            match (fwd, bwd) {
                (Some(a), Some(b)) => (u[a] - u[b]) * (0.5 / h),
                (Some(a), None) => (u[a] - u[k]) * (1.0 / h),
                (None, Some(b)) => (u[k] - u[b]) * (1.0 / h),
                (None, None) => T::default(),
            }
        })
        .collect()
}

/// Centered `∂_x`, one-sided next to the mask boundary.
pub fn discrete_derivative_x<T>(grid: &Grid, u: &[T]) -> Vec<T>
where
    T: Copy + Default + Sub<Output = T> + Mul<f64, Output = T>,
{
    difference(grid, u, (1, 0))
}

/// Centered `∂_y`, one-sided next to the mask boundary.
pub fn discrete_derivative_y<T>(grid: &Grid, u: &[T]) -> Vec<T>
where
    T: Copy + Default + Sub<Output = T> + Mul<f64, Output = T>,
{
    difference(grid, u, (0, 1))
}
