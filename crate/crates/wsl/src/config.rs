use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wsl_core::geometry::DomainSpec;
use wsl_core::riemann::SheetPoint;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// One experiment, read from a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; `--out` and `WSL_OUT` take precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CheckGeometry,
    SweepResolvent,
    ScanResonances,
    VerifyResfree,
    Propagate,
    VerifyIdentities,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::CheckGeometry => "check-geometry",
            Kind::SweepResolvent => "sweep-resolvent",
            Kind::ScanResonances => "scan-resonances",
            Kind::VerifyResfree => "verify-resfree",
            Kind::Propagate => "propagate",
            Kind::VerifyIdentities => "verify-identities",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    CheckGeometry(GeometryParams),
    SweepResolvent(SweepParams),
    ScanResonances(ScanParams),
    VerifyResfree(ResFreeParams),
    Propagate(WaveParams),
    VerifyIdentities(IdentityParams),
}

impl Experiment {
    pub fn kind(&self) -> Kind {
        match self {
            Experiment::CheckGeometry(_) => Kind::CheckGeometry,
            Experiment::SweepResolvent(_) => Kind::SweepResolvent,
            Experiment::ScanResonances(_) => Kind::ScanResonances,
            Experiment::VerifyResfree(_) => Kind::VerifyResfree,
            Experiment::Propagate(_) => Kind::Propagate,
            Experiment::VerifyIdentities(_) => Kind::VerifyIdentities,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    #[serde(default = "default_geometry_samples")]
    pub samples: usize,
    /// Intervals `(lo, hi)` on which to report the flaring constant.
    #[serde(default)]
    pub flaring: Vec<(f64, f64)>,
    /// Expected classification; a mismatch is an assertion failure.
    #[serde(default)]
    pub expect_class: Option<wsl_core::geometry::TheoremClass>,
    /// `δ` of the obstacle weight, for domains with a convex obstacle.
    #[serde(default = "one")]
    pub delta: f64,
}

fn default_geometry_samples() -> usize {
    wsl_core::geometry::CLASSIFY_SAMPLES
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default = "one")]
    pub delta: f64,
    /// Explicit energies, or `emin`/`emax`/`esteps` for a uniform grid.
    #[serde(default)]
    pub energies: Option<Vec<f64>>,
    #[serde(default)]
    pub emin: Option<f64>,
    #[serde(default)]
    pub emax: Option<f64>,
    #[serde(default)]
    pub esteps: Option<usize>,
    pub epslist: Vec<f64>,
    /// Also probe every lattice threshold inside the energy range, where the
    /// closure is exactly singular at `ε = 0`.
    #[serde(default)]
    pub probe_thresholds: bool,
}

impl SweepParams {
    pub fn energy_grid(&self) -> Result<Vec<f64>, CliError> {
        match (&self.energies, self.emin, self.emax, self.esteps) {
            (Some(e), None, None, None) if !e.is_empty() => Ok(e.clone()),
            (None, Some(a), Some(b), Some(n)) if n >= 1 && b >= a => {
                if n == 1 {
                    return Ok(vec![a]);
                }
                Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
            }
            _ => Err(CliError::Usage("give either a non-empty `energies` list or all of `emin` ≤ `emax` and `esteps` ≥ 1".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub emin: f64,
    pub emax: f64,
    pub step: f64,
    /// Rescan dips on the grid with spacing `h/2`.
    #[serde(default = "yes")]
    pub confirm: bool,
    /// Sheet points from which to run the pole locator.
    #[serde(default)]
    pub seeds: Vec<SheetPoint>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResFreeParams {
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub calibrate: Vec<f64>,
    pub verify: Vec<f64>,
    #[serde(default = "default_ball_samples")]
    pub samples: usize,
}

fn default_ball_samples() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveParams {
    pub h: f64,
    /// Truncation length; by default the shortest one whose reflection horizon
    /// covers `t_final`.
    #[serde(rename = "L", default)]
    pub l: Option<f64>,
    pub center: [f64; 2],
    pub radius: f64,
    /// 0 puts the bump in the displacement, 1 in the velocity.
    #[serde(default)]
    pub m: u32,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Fit window `(t_min, t_max)` for the decay exponent.
    pub window: (f64, f64),
    /// Accepted range of the fitted exponent.
    #[serde(default)]
    pub expect_exponent: Option<(f64, f64)>,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_sample_every() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityParams {
    /// Spacings of the refinement study, coarsest first.
    pub h: Vec<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    /// Spectral parameter `[E, ε]`.
    pub z: [f64; 2],
    pub source: [f64; 2],
    #[serde(default = "default_source_radius")]
    pub source_radius: f64,
    /// Cutoff `(inner, outer)` applied before the untruncated identities.
    #[serde(default = "default_cutoff")]
    pub cutoff: (f64, f64),
    /// Half width `R` of the truncated identities.
    pub r: f64,
    #[serde(default = "default_min_reduction")]
    pub min_reduction: f64,
    /// Poincaré trials per `δ`; 0 skips the check.
    #[serde(default)]
    pub poincare_trials: usize,
    #[serde(default = "default_poincare_deltas")]
    pub poincare_deltas: Vec<f64>,
    /// Slack added to the Poincaré constant.
    #[serde(default = "default_poincare_slack")]
    pub poincare_slack: f64,
}

fn default_source_radius() -> f64 {
    0.5
}

fn default_cutoff() -> (f64, f64) {
    (4.0, 6.0)
}

fn default_min_reduction() -> f64 {
    1.5
}

fn default_poincare_deltas() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_poincare_slack() -> f64 {
    0.05
}

impl ExperimentConfig {
    /// Parses a config document. Syntax and schema errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: not UTF-8: {e}", path.display())))?;
        let cfg = Self::parse(text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, bytes))
    }
}
