//! Dirichlet spectrum of a cross-section made of finitely many intervals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two mode frequencies count as one eigenvalue.
pub const MULTIPLICITY_TOL: f64 = 1e-12;

/// Finite union of disjoint open intervals, sorted left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct CrossSection {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<[f64; 2]>> for CrossSection {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        CrossSection::new(v.into_iter().map(|[a, b]| (a, b)).collect())
    }
}

impl From<CrossSection> for Vec<[f64; 2]> {
    fn from(c: CrossSection) -> Self {
        c.intervals.iter().map(|&(a, b)| [a, b]).collect()
    }
}

impl CrossSection {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidCrossSection("no intervals".into()));
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidCrossSection(format!("bad interval ({a}, {b})")));
            }
        }
        intervals.sort_by(|p, q| p.0.total_cmp(&q.0));
        for w in intervals.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::InvalidCrossSection(format!(
                    "intervals ({}, {}) and ({}, {}) touch or overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < y && y < b)
    }

    /// Index of the interval containing `y`, if any.
    pub fn locate(&self, y: f64) -> Option<usize> {
        self.intervals.iter().position(|&(a, b)| a < y && y < b)
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].0
    }

    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].1
    }

    /// Extent from the lowest to the highest endpoint.
    pub fn diameter(&self) -> f64 {
        self.upper() - self.lower()
    }

    pub fn narrowest(&self) -> f64 {
        self.intervals.iter().map(|&(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    /// Number of Dirichlet frequencies `σ ≤ lambda` counted with multiplicity.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.intervals
            .iter()
            .map(|&(a, b)| (lambda * (b - a) / PI).floor().max(0.0) as usize)
            .sum()
    }
}

/// Which cylindrical end a mode lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Minus,
    Plus,
}

impl End {
    pub fn sign(self) -> f64 {
        match self {
            End::Minus => -1.0,
            End::Plus => 1.0,
        }
    }
}

/// A single transverse mode `sqrt(2/w) sin(kπ(y-a)/w)` on one interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub sigma: f64,
    pub end: End,
    pub interval: usize,
    pub harmonic: usize,
    pub a: f64,
    pub b: f64,
}

impl Mode {
    pub fn eval(&self, y: f64) -> f64 {
        if !(self.a < y && y < self.b) {
            return 0.0;
        }
        let w = self.b - self.a;
        (2.0 / w).sqrt() * (self.harmonic as f64 * PI * (y - self.a) / w).sin()
    }
}

/// Modes sorted by nondecreasing `σ`. Indices in the public API start at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBasis {
    modes: Vec<Mode>,
    minus: Option<CrossSection>,
    plus: Option<CrossSection>,
}

/// Outcome of a gap-condition check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub holds: bool,
    /// First consecutive pair of distinct frequencies violating the bound.
    pub witness: Option<(f64, f64)>,
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= MULTIPLICITY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// First `count` modes of one cross-section, tagged with `end`.
fn collect(y: &CrossSection, end: End, count: usize, out: &mut Vec<Mode>) {
    for (i, &(a, b)) in y.intervals.iter().enumerate() {
        for k in 1..=count {
            out.push(Mode { sigma: k as f64 * PI / (b - a), end, interval: i, harmonic: k, a, b });
        }
    }
}

fn sort_truncate(mut all: Vec<Mode>, j: usize, minus: Option<&CrossSection>, plus: Option<&CrossSection>) -> ModeBasis {
    all.sort_by(|p, q| {
        p.sigma
            .total_cmp(&q.sigma)
            .then(p.end.cmp(&q.end))
            .then(p.interval.cmp(&q.interval))
            .then(p.harmonic.cmp(&q.harmonic))
    });
    all.truncate(j);
    ModeBasis { modes: all, minus: minus.cloned(), plus: plus.cloned() }
}

/// The first `j` Dirichlet eigenpairs of `y`.
pub fn modes(y: &CrossSection, j: usize) -> ModeBasis {
    modes_on(y, End::Plus, j)
}

pub fn modes_on(y: &CrossSection, end: End, j: usize) -> ModeBasis {
    match end {
        End::Minus => domain_modes(Some(y), None, j),
        End::Plus => domain_modes(None, Some(y), j),
    }
}

/// Joint basis over both ends of a domain (the transverse model of `Y_- ⊔ Y_+`).
pub fn domain_modes(minus: Option<&CrossSection>, plus: Option<&CrossSection>, j: usize) -> ModeBasis {
    let mut all = Vec::new();
    if let Some(y) = minus {
        collect(y, End::Minus, j.max(1), &mut all);
    }
    if let Some(y) = plus {
        collect(y, End::Plus, j.max(1), &mut all);
    }
    sort_truncate(all, j.max(1), minus, plus)
}

impl ModeBasis {
    /// The same spectrum enumerated to `j` modes.
    pub fn extended(&self, j: usize) -> ModeBasis {
        domain_modes(self.minus.as_ref(), self.plus.as_ref(), j)
    }

    /// Frequency of the first mode beyond this basis.
    pub fn next_sigma(&self) -> f64 {
        let n = self.modes.len();
        self.extended(n + 1).modes[n].sigma
    }

    /// Number of modes (over the full spectrum) with `σ ≤ lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.minus.as_ref().map_or(0, |y| y.count_below(lambda))
            + self.plus.as_ref().map_or(0, |y| y.count_below(lambda))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> Result<&Mode> {
        if j == 0 || j > self.modes.len() {
            return Err(Error::ModeIndex { index: j, len: self.modes.len() });
        }
        Ok(&self.modes[j - 1])
    }

    pub fn sigma(&self, j: usize) -> Result<f64> {
        Ok(self.mode(j)?.sigma)
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.sigma).collect()
    }

    /// Normalized mode `j` at `y`; zero outside its supporting interval.
    pub fn evaluate(&self, j: usize, y: f64) -> Result<f64> {
        Ok(self.mode(j)?.eval(y))
    }

    /// 1-based index of the mode with the given tag, if retained.
    pub fn find(&self, end: End, interval: usize, harmonic: usize) -> Option<usize> {
        self.modes
            .iter()
            .position(|m| m.end == end && m.interval == interval && m.harmonic == harmonic)
            .map(|i| i + 1)
    }

    /// Distinct frequencies, merged under the multiplicity tolerance.
    pub fn levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for m in &self.modes {
            match out.last() {
                Some(&l) if same_level(l, m.sigma) => {}
                _ => out.push(m.sigma),
            }
        }
        out
    }

    /// Checks `σ_{j'} − σ_j ≥ c_y σ_j^{−n_y}` over consecutive distinct levels.
    pub fn check_gap_condition(&self, c_y: f64, n_y: f64) -> Result<GapCheck> {
        let levels = self.levels();
        if levels.len() < 2 {
            return Err(Error::Precondition("gap check needs at least two distinct frequencies".into()));
        }
        for w in levels.windows(2) {
            if w[1] - w[0] < c_y * w[0].powf(-n_y) {
                return Ok(GapCheck { holds: false, witness: Some((w[0], w[1])) });
            }
        }
        Ok(GapCheck { holds: true, witness: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_spectrum() {
        let y = CrossSection::interval(0.0, PI).unwrap();
        let b = modes(&y, 3);
        assert_eq!(b.sigmas().len(), 3);
        for (k, s) in b.sigmas().iter().enumerate() {
            assert!((s - (k + 1) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_interval_spectrum() {
        let y = CrossSection::interval(-1.0, 1.0).unwrap();
        let s = modes(&y, 2).sigmas();
        assert!((s[0] - PI / 2.0).abs() < 1e-14);
        assert!((s[1] - PI).abs() < 1e-14);
    }

    #[test]
    fn doubled_interval_has_multiplicity_two() {
        let y = CrossSection::new(vec![(0.0, PI), (5.0, 5.0 + PI)]).unwrap();
        let s = modes(&y, 4).sigmas();
        let want = [1.0, 1.0, 2.0, 2.0];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(modes(&y, 4).levels().len(), 2);
    }

    #[test]
    fn evaluate_examples() {
        let y = CrossSection::interval(0.0, PI).unwrap();
        let b = modes(&y, 2);
        assert!((b.evaluate(1, PI / 2.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert_eq!(b.evaluate(1, 4.0).unwrap(), 0.0);
        assert!(matches!(b.evaluate(3, 1.0), Err(Error::ModeIndex { .. })));
        let y = CrossSection::interval(-1.0, 1.0).unwrap();
        assert!(modes(&y, 2).evaluate(2, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn overlapping_intervals_rejected() {
        assert!(CrossSection::new(vec![(0.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(CrossSection::new(vec![(0.0, 1.0), (1.0, 3.0)]).is_err());
        assert!(CrossSection::new(vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn json_is_array_of_pairs() {
        let y = CrossSection::new(vec![(0.0, 1.0), (2.0, 3.5)]).unwrap();
        let s = serde_json::to_string(&y).unwrap();
        assert_eq!(s, "[[0.0,1.0],[2.0,3.5]]");
        let back: CrossSection = serde_json::from_str(&s).unwrap();
        assert_eq!(back, y);
        assert!(serde_json::from_str::<CrossSection>("[[1.0,0.0]]").is_err());
    }
}
