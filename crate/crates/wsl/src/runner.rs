use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use wsl_core::discretize::{assemble_laplacian, build_grid, weight_diag, weight_value, Grid, WeightKind};
use wsl_core::dtn::{assemble_system, face_thresholds, grid_basis, one_ended_bound, sweep_bound, BOUND_HEADROOM};
use wsl_core::geometry::{
    check_flaring, check_star_shaped_x, has_flat_slab, TheoremClass, WaveguideDomain, SIGN_TOL,
};
use wsl_core::identities::{
    build_weight_basic, check_obstacle_sign, eigenvalue_identity_check, ibpe_residual, ibpy_residual, morawetz_residual,
    poincare_check, poincare_constant, ArctanWeight, IbpyVariant, IdentityReport, Multiplier, TanhWeight,
};
use wsl_core::resonance::{calibrate_resonance_free, confirm_dips, locate_pole, scan_real_axis, verify_resonance_free, ball_cutoff};
use wsl_core::riemann::{SheetPoint, SurfacePoint};
use wsl_core::waves::{fit_decay, initial_bump, propagate, Support, WaveState};
use wsl_core::C64;

use crate::config::{
    Experiment, ExperimentConfig, GeometryParams, IdentityParams, Kind, ResFreeParams, ScanParams, SweepParams, WaveParams,
};
use crate::error::CliError;
use crate::trials::random_trial;

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

/// Samples on the obstacle boundary for the weight sign check.
pub const OBSTACLE_SAMPLES: usize = 1000;
/// `|w ν_x|` below this counts as equality on the obstacle.
pub const OBSTACLE_ZERO_TOL: f64 = 1e-12;
/// Largest relative energy drift accepted in a wave run.
pub const ENERGY_DRIFT_TOL: f64 = 1e-10;

/// Outcome of one experiment, shared by every kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: Kind,
    pub domain: String,
    pub theorem_class: TheoremClass,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub tool_version: String,
    pub started: String,
    pub elapsed_s: f64,
    pub experiment: Kind,
    pub domain: String,
    pub passed: bool,
    pub files: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Summary,
    pub manifest: Manifest,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), data)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.bytes(name, &text)
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> wsl_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.bytes(name, &buf)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Removes the files listed by a previous manifest in `dir`, and refuses
/// directories holding other files so that no output is left unreferenced.
fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join(MANIFEST);
    let mut listed = Vec::new();
    if manifest.exists() {
        let old: Manifest = serde_json::from_slice(&std::fs::read(&manifest)?)
            .map_err(|e| CliError::Usage(format!("{}: unreadable manifest: {e}", manifest.display())))?;
        listed = old.files;
        listed.push(MANIFEST.to_string());
    }
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if !listed.contains(&name) {
            return Err(CliError::Usage(format!(
                "output directory {} holds '{name}', which no manifest lists; use an empty directory",
                dir.display()
            )));
        }
    }
    for name in listed {
        let p = dir.join(name);
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    Ok(())
}

/// Runs one experiment and writes its outputs, a summary and a manifest to `out`.
pub fn run(cfg: &ExperimentConfig, config_bytes: &[u8], out: &Path) -> Result<RunOutcome, CliError> {
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let domain = WaveguideDomain::from_spec(&cfg.domain)?;
    prepare_dir(out)?;
    let mut art = Artifacts { dir: out.to_path_buf(), files: Vec::new() };
    let mut summary = Summary {
        experiment: cfg.experiment.kind(),
        domain: domain.name.clone(),
        theorem_class: wsl_core::geometry::classify_theorem(&domain),
        passed: true,
        metrics: BTreeMap::new(),
        notes: Vec::new(),
    };
    match &cfg.experiment {
        Experiment::CheckGeometry(p) => check_geometry(&domain, p, &mut art, &mut summary)?,
        Experiment::SweepResolvent(p) => sweep(&domain, p, cfg.seed, &mut art, &mut summary)?,
        Experiment::ScanResonances(p) => scan(&domain, p, &mut art, &mut summary)?,
        Experiment::VerifyResfree(p) => resfree(&domain, p, &mut art, &mut summary)?,
        Experiment::Propagate(p) => waves(&domain, p, &mut art, &mut summary)?,
        Experiment::VerifyIdentities(p) => identities(&domain, p, cfg.seed, &mut art, &mut summary)?,
    }
    art.json(SUMMARY, &summary)?;
    let mut files = art.files;
    files.sort();
    let manifest = Manifest {
        config_sha256: sha256_hex(config_bytes),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started: started.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        elapsed_s: clock.elapsed().as_secs_f64(),
        experiment: summary.experiment,
        domain: summary.domain.clone(),
        passed: summary.passed,
        files,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    std::fs::write(out.join(MANIFEST), text)?;
    Ok(RunOutcome { dir: out.to_path_buf(), summary, manifest })
}

fn fail(summary: &mut Summary, note: String) {
    summary.passed = false;
    summary.notes.push(note);
}

fn check_geometry(domain: &WaveguideDomain, p: &GeometryParams, art: &mut Artifacts, s: &mut Summary) -> Result<(), CliError> {
    let report = check_star_shaped_x(domain, p.samples)?;
    let mut flaring = Vec::new();
    for &iv in &p.flaring {
        flaring.push(json!({"interval": iv, "c_i": check_flaring(domain, iv, p.samples)?}));
    }
    let flat = has_flat_slab(domain, p.samples)?;
    s.metrics.insert("sup_x_nu_x".into(), report.sup_x_nu_x);
    s.metrics.insert("violations".into(), report.violating_points.len() as f64);
    if report.violating_points.is_empty() {
        s.notes.push(format!("x ν_x ≤ {SIGN_TOL:e} on the sampled boundary"));
    } else {
        s.notes.push(format!("does not obey x ν_x ≤ 0: {} sampled points violate it", report.violating_points.len()));
    }
    let mut obstacle = None;
    if let Some(e) = domain.obstacle() {
        let (a, b) = e.half_extents();
        let exclusion = 0.1 * a.min(b);
        let (_, sign) = check_obstacle_sign(domain, p.delta, OBSTACLE_SAMPLES, exclusion, OBSTACLE_ZERO_TOL)?;
        s.metrics.insert("obstacle_max_w_nu_x".into(), sign.max_w_nu_x);
        s.metrics.insert("obstacle_max_away".into(), sign.max_away);
        if sign.max_w_nu_x > OBSTACLE_ZERO_TOL {
            fail(s, format!("obstacle weight has w ν_x = {:.3e} > 0", sign.max_w_nu_x));
        }
        obstacle = Some(sign);
    }
    if let Some(want) = p.expect_class {
        if want != report.theorem_class {
            fail(s, format!("expected class {want:?}, found {:?}", report.theorem_class));
        }
    }
    art.csv("boundary.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["x", "y", "nu_x", "nu_y", "x_nu_x"])?;
        for b in domain.boundary_samples(p.samples)? {
            let rec = [b.point[0], b.point[1], b.normal[0], b.normal[1], b.point[0] * b.normal[0]];
            w.write_record(rec.map(|v| format!("{v:.12e}")))?;
        }
        w.flush()?;
        Ok(())
    })?;
    art.json("geometry.json", &json!({"report": report, "flaring": flaring, "flat_slab": flat, "obstacle": obstacle}))
}

fn sweep(domain: &WaveguideDomain, p: &SweepParams, seed: u64, art: &mut Artifacts, s: &mut Summary) -> Result<(), CliError> {
    let mut energies = p.energy_grid()?;
    if p.epslist.is_empty() || p.epslist.iter().any(|&e| !(e > 0.0)) {
        return Err(CliError::Usage("epslist must hold positive absorptions".into()));
    }
    let grid = build_grid(domain, p.h, p.l)?;
    if p.probe_thresholds {
        let (lo, hi) = energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        energies.extend(face_thresholds(&grid).into_iter().filter(|t| *t >= lo && *t <= hi));
        energies.sort_by(f64::total_cmp);
        energies.dedup();
    }
    let report = sweep_bound(domain, &grid, &energies, &p.epslist, p.delta, seed)?;
    art.csv("sweep.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["E", "eps", "delta", "norm_estimate", "iterations", "residual", "L", "h"])?;
        for r in &report.rows {
            let f = |v: f64| format!("{v:.12e}");
            w.write_record([f(r.energy), f(r.eps), f(r.delta), f(r.norm_estimate), r.iterations.to_string(), f(r.residual), f(r.l), f(r.h)])
                ?;
        }
        w.flush()?;
        Ok(())
    })?;
    if let Some(slope) = report.slope {
        s.metrics.insert("slope".into(), slope);
        s.metrics.insert("slope_reference".into(), 0.5);
    }
    if domain.is_one_ended() {
        let ratio = report
            .rows
            .iter()
            .map(|r| r.norm_estimate / one_ended_bound(C64::new(r.energy, r.eps), p.delta))
            .fold(0.0, f64::max);
        s.metrics.insert("max_bound_ratio".into(), ratio);
        s.metrics.insert("bound_headroom".into(), BOUND_HEADROOM);
    }
    s.metrics.insert("bound_violations".into(), report.bound_violations.len() as f64);
    s.metrics.insert("divergent_energies".into(), report.divergent_energies.len() as f64);
    for &i in &report.bound_violations {
        let r = &report.rows[i];
        fail(s, format!("bound violated at E = {}, ε = {}: {:.6e}", r.energy, r.eps, r.norm_estimate));
    }
    let thresholds = grid_basis(domain, &grid).sigmas();
    for &e in &report.divergent_energies {
        let near = thresholds.iter().copied().min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs()));
        let at = near.map_or(String::new(), |t| format!(" (nearest threshold {t:.6})"));
        fail(s, format!("estimate grows as ε → 0 at E = {e}{at}"));
    }
    art.json("sweep.json", &report)
}

fn nearest(values: &[f64], x: f64) -> Option<f64> {
    values.iter().copied().min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}

fn scan(domain: &WaveguideDomain, p: &ScanParams, art: &mut Artifacts, s: &mut Summary) -> Result<(), CliError> {
    if !(p.step > 0.0 && p.emax > p.emin) {
        return Err(CliError::Usage("scan needs emin < emax and step > 0".into()));
    }
    let grid = build_grid(domain, p.h, p.l)?;
    let steps = ((p.emax - p.emin) / p.step).round() as usize + 1;
    let mut result = scan_real_axis(domain, (p.emin, p.emax), steps, &grid)?;
    if p.confirm {
        confirm_dips(domain, &grid, &mut result, p.step)?;
    }
    let thresholds: Vec<f64> = grid_basis(domain, &grid).sigmas();
    let dips: Vec<_> = result
        .dips
        .iter()
        .map(|d| {
            let t = nearest(&thresholds, d.location());
            json!({"dip": d, "location": d.location(), "nearest_threshold": t, "gap": t.map(|t| (t - d.location()).abs())})
        })
        .collect();
    let mut poles = Vec::new();
    for seed in &p.seeds {
        poles.push(locate_pole(domain, seed, &grid)?);
    }
    art.csv("scan.csv", |buf| result.write_csv(buf))?;
    let counted: Vec<_> = result.dips.iter().filter(|d| d.persistent != Some(false)).collect();
    s.metrics.insert("dips".into(), result.dips.len() as f64);
    s.metrics.insert("persistent_dips".into(), counted.len() as f64);
    if let Some(gap) = counted.iter().filter_map(|d| nearest(&thresholds, d.location()).map(|t| (t - d.location()).abs())).reduce(f64::max) {
        s.metrics.insert("max_dip_threshold_gap".into(), gap);
    }
    let poles_found = poles.iter().filter(|r| r.persistent && !r.fine.near_ramification).count();
    s.metrics.insert("poles".into(), poles_found as f64);
    if s.theorem_class != TheoremClass::None {
        for d in &counted {
            fail(s, format!("unexpected σ_min dip at E = {:.6} on a domain of class {:?}", d.location(), s.theorem_class));
        }
        if poles_found > 0 {
            fail(s, format!("{poles_found} unexpected pole(s) located"));
        }
    }
    art.json("scan.json", &json!({"h": result.h, "skipped": result.skipped, "thresholds": thresholds, "dips": dips, "poles": poles}))
}

fn resfree(domain: &WaveguideDomain, p: &ResFreeParams, art: &mut Artifacts, s: &mut Summary) -> Result<(), CliError> {
    let grid = build_grid(domain, p.h, p.l)?;
    let cal = calibrate_resonance_free(domain, &grid, &p.calibrate, p.samples)?;
    let mut reports = Vec::new();
    for &e in &p.verify {
        reports.push(verify_resonance_free(domain, e, cal.c1, cal.c2, cal.sigma_floor, &grid, p.samples)?);
    }
    art.csv("resfree.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["E", "re_z", "im_z", "flipped_modes", "metric_distance", "sigma_min", "cutoff_norm"])?;
        for r in &reports {
            for b in &r.samples {
                let f = |v: f64| format!("{v:.10e}");
                let flips: Vec<String> = b.point.flipped.iter().map(|j| j.to_string()).collect();
                w.write_record([f(r.energy), f(b.point.re), f(b.point.im), flips.join(";"), f(b.metric_distance), f(b.sigma_min), f(b.cutoff_norm)])
                    ?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    s.metrics.insert("c1".into(), cal.c1);
    s.metrics.insert("c2".into(), cal.c2);
    s.metrics.insert("sigma_floor".into(), cal.sigma_floor);
    let worst = reports.iter().map(|r| r.max_norm() / r.norm_bound).fold(0.0, f64::max);
    s.metrics.insert("max_norm_over_bound".into(), worst);
    for r in reports.iter().filter(|r| !r.passed) {
        fail(s, format!("ball at E = {} is not resonance free or exceeds the norm bound (min σ {:.3e}, max ‖χRχ‖ {:.3e})", r.energy, r.min_sigma(), r.max_norm()));
    }
    art.json("resfree.json", &json!({"calibration": cal, "reports": reports}))
}

/// Shortest truncation whose reflection horizon covers `t_final`, padded by one.
pub fn default_wave_length(domain: &WaveguideDomain, p: &WaveParams) -> f64 {
    let r0 = domain.r0;
    let a = 0.5 * p.t_final + p.radius + r0;
    let b = 0.5 * (p.t_final + p.center[0].abs() + p.radius + r0);
    a.max(b).ceil() + 1.0
}

fn waves(domain: &WaveguideDomain, p: &WaveParams, art: &mut Artifacts, s: &mut Summary) -> Result<(), CliError> {
    let l = p.l.unwrap_or_else(|| default_wave_length(domain, p));
    let grid = build_grid(domain, p.h, l)?;
    let op = assemble_laplacian(&grid);
    let (u, v) = initial_bump(&grid, p.center, p.radius, p.m)?;
    let support = Support { center: p.center, radius: p.radius };
    let chi = weight_diag(&grid, ball_cutoff(domain), 1.0, domain.x0)?;
    let run = propagate(&grid, &op, WaveState::new(u, v), &support, p.t_final, p.cfl, &chi, p.sample_every)?;
    let series: Vec<(f64, f64)> = run.series.iter().map(|w| (w.t, w.norm_m0)).collect();
    let fit = fit_decay(&series, p.window, true)?;
    art.csv("waves.csv", |buf| run.write_csv(buf))?;
    let drift = run.energy_drift();
    s.metrics.insert("exponent".into(), fit.exponent);
    // t^{-3/2} with the spectral gap condition on Y, t^{-1} without it.
    s.metrics.insert("exponent_reference".into(), -1.5);
    s.metrics.insert("exponent_bound".into(), -1.0);
    s.metrics.insert("energy_drift".into(), drift);
    s.metrics.insert("L".into(), grid.l);
    if drift > ENERGY_DRIFT_TOL {
        fail(s, format!("energy drift {drift:.3e} exceeds {ENERGY_DRIFT_TOL:e}"));
    }
    if let Some((lo, hi)) = p.expect_exponent {
        if !(fit.exponent >= lo && fit.exponent <= hi) {
            fail(s, format!("decay exponent {:.4} outside [{lo}, {hi}]", fit.exponent));
        }
    }
    art.json("waves.json", &json!({"dt": run.dt, "steps": run.steps, "L": grid.l, "unknowns": grid.len(), "fit": fit}))
}

/// The identity reports for the solution of `(−Δ − z) u = f` with a bump
/// source `f`, on one grid. The untruncated identities use `χu`.
pub fn identity_reports(domain: &WaveguideDomain, grid: &Grid, p: &IdentityParams) -> Result<Vec<IdentityReport>, CliError> {
    let z = C64::new(p.z[0], p.z[1]);
    let system = assemble_system(grid, &grid_basis(domain, grid), &SurfacePoint::Sheet(SheetPoint::physical(z)))?;
    let rho2 = p.source_radius * p.source_radius;
    let f: Vec<C64> = grid.sample(|x, y| {
        let q = ((x - p.source[0]).powi(2) + (y - p.source[1]).powi(2)) / rho2;
        C64::from(if q < 1.0 { (-1.0 / (1.0 - q)).exp() } else { 0.0 })
    });
    let (u, _) = system.solve(&f)?;
    let cut = WeightKind::CutoffChi { inner: p.cutoff.0, outer: p.cutoff.1 };
    let v: Vec<C64> = u
        .iter()
        .enumerate()
        .map(|(k, val)| Ok(val * weight_value(cut, 1.0, domain.x0, grid.position(k)[0])?))
        .collect::<wsl_core::Result<_>>()?;
    let w: Box<dyn Multiplier> =
        if domain.is_one_ended() { Box::new(build_weight_basic(1.0)?) } else { Box::new(ArctanWeight { x0: domain.x0, scale: 1.0 }) };
    let mu = TanhWeight { x0: p.source[0] + 0.3, scale: 0.7 };
    let (e, eps) = (z.re, z.im);
    let mut out = vec![
        morawetz_residual(grid, &v, w.as_ref(), e, eps)?,
        ibpe_residual(grid, &v, &mu, e, eps)?,
        ibpy_residual(grid, &v, e, eps, IbpyVariant::Yj)?,
        ibpy_residual(grid, &v, e, eps, IbpyVariant::Translation)?,
    ];
    let (a, b) = eigenvalue_identity_check(grid, &u, e, eps, p.r)?;
    out.push(a);
    out.push(b);
    Ok(out)
}

/// Residual used for refinement: relative when the left side is nonzero,
/// absolute for identities whose left side is identically zero.
pub fn refinement_residual(r: &IdentityReport) -> f64 {
    if r.lhs == 0.0 {
        r.residual
    } else {
        r.relative()
    }
}

fn identities(domain: &WaveguideDomain, p: &IdentityParams, seed: u64, art: &mut Artifacts, s: &mut Summary) -> Result<(), CliError> {
    if p.h.len() < 2 {
        return Err(CliError::Usage("identity refinement needs at least two spacings".into()));
    }
    let mut levels = Vec::new();
    for &h in &p.h {
        let grid = build_grid(domain, h, p.l)?;
        levels.push(identity_reports(domain, &grid, p)?);
    }
    let names: Vec<String> = levels[0].iter().map(|r| r.identity.clone()).collect();
    let mut ratios = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        let res: Vec<f64> = levels.iter().map(|l| refinement_residual(&l[i])).collect();
        let r: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
        let last = *r.last().unwrap_or(&f64::NAN);
        s.metrics.insert(format!("reduction_{name}"), last);
        if !(last >= p.min_reduction) {
            fail(s, format!("{name}: residual reduction {last:.3} under the last refinement, need {}", p.min_reduction));
        }
        ratios.insert(name.clone(), r);
    }
    let mut poincare = Vec::new();
    if p.poincare_trials > 0 {
        let grid = build_grid(domain, p.h[0], p.l)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &delta in &p.poincare_deltas {
            let limit = poincare_constant(delta) + p.poincare_slack;
            let mut worst: f64 = 0.0;
            for _ in 0..p.poincare_trials {
                let u = random_trial(&grid, domain.x0, &mut rng);
                worst = worst.max(poincare_check(&grid, &u, delta, domain.x0)?.ratio);
            }
            s.metrics.insert(format!("poincare_worst_ratio_delta_{delta}"), worst);
            if worst > limit {
                fail(s, format!("Poincaré ratio {worst:.4} exceeds {limit:.4} at δ = {delta}"));
            }
            poincare.push(json!({"delta": delta, "trials": p.poincare_trials, "worst_ratio": worst, "limit": limit}));
        }
    }
    art.csv("identities.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["identity", "h", "lhs", "rhs", "residual", "boundary_term"])?;
        for level in &levels {
            for r in level {
                let f = |v: f64| format!("{v:.12e}");
                w.write_record([r.identity.clone(), f(r.h), f(r.lhs), f(r.rhs), f(r.residual), f(r.boundary_term)])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    art.json("identities.json", &json!({"levels": levels, "reduction": ratios, "poincare": poincare}))
}
