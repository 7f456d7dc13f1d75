use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::runner::{Manifest, Summary, MANIFEST, SUMMARY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub dir: String,
    pub manifest: Manifest,
    pub summary: Summary,
    /// Headline quantity and the value it is compared with.
    pub headline: Option<(String, f64, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consolidated {
    pub runs: Vec<RunEntry>,
    /// Run indices grouped by domain.
    pub by_domain: BTreeMap<String, Vec<usize>>,
    pub all_passed: bool,
}

fn find_manifests(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_manifests(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == MANIFEST) {
            out.push(p);
        }
    }
    Ok(())
}

fn headline(s: &Summary) -> Option<(String, f64, Option<f64>)> {
    let pick = |k: &str, reference: Option<&str>| {
        s.metrics.get(k).map(|&v| (k.to_string(), v, reference.and_then(|r| s.metrics.get(r).copied())))
    };
    pick("max_bound_ratio", Some("bound_headroom"))
        .or_else(|| pick("slope", Some("slope_reference")))
        .or_else(|| pick("max_dip_threshold_gap", None))
        .or_else(|| pick("persistent_dips", None))
        .or_else(|| pick("exponent", Some("exponent_reference")))
        .or_else(|| pick("max_norm_over_bound", None))
        .or_else(|| pick("sup_x_nu_x", None))
        .or_else(|| {
            s.metrics.iter().filter(|(k, _)| k.starts_with("reduction_")).min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, &v)| (k.clone(), v, None))
        })
}

/// Collects every run under `dir` (recursively) into one summary.
pub fn report(dir: &Path) -> Result<Consolidated, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let mut manifests = Vec::new();
    find_manifests(dir, &mut manifests)?;
    if manifests.is_empty() {
        return Err(CliError::Usage(format!("no run manifests under {}", dir.display())));
    }
    let mut runs = Vec::new();
    for path in manifests {
        let run_dir = path.parent().unwrap_or(dir);
        let manifest: Manifest = serde_json::from_slice(&std::fs::read(&path)?)?;
        let summary: Summary = serde_json::from_slice(&std::fs::read(run_dir.join(SUMMARY))?)?;
        let rel = run_dir.strip_prefix(dir).unwrap_or(run_dir).display().to_string();
        runs.push(RunEntry { dir: if rel.is_empty() { ".".into() } else { rel }, headline: headline(&summary), manifest, summary });
    }
    let mut by_domain: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in runs.iter().enumerate() {
        by_domain.entry(r.summary.domain.clone()).or_default().push(i);
    }
    let all_passed = runs.iter().all(|r| r.summary.passed);
    Ok(Consolidated { runs, by_domain, all_passed })
}

/// Plain-text table, one block per domain.
pub fn render_table(c: &Consolidated) -> String {
    let mut s = String::new();
    for (domain, idx) in &c.by_domain {
        let _ = writeln!(s, "{domain}");
        for &i in idx {
            let r = &c.runs[i];
            let head = match &r.headline {
                Some((k, v, Some(refv))) => format!("{k} = {v:.4} (ref {refv})"),
                Some((k, v, None)) => format!("{k} = {v:.4}"),
                None => String::new(),
            };
            let verdict = if r.summary.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "  {verdict}  {:<18} {:<28} {head}", r.summary.experiment.name(), r.dir);
            for n in r.summary.notes.iter().filter(|_| !r.summary.passed) {
                let _ = writeln!(s, "        {n}");
            }
        }
    }
    let passed = c.runs.iter().filter(|r| r.summary.passed).count();
    let _ = writeln!(s, "{passed}/{} runs passed", c.runs.len());
    s
}
