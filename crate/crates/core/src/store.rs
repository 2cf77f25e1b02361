//! Report files, the results cache and re-verification.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{cache_key, run_scenario, ScenarioReport, REPORT_FORMAT};
use crate::scenario::{Scenario, ScenarioError, Task};

/// Overrides the cache directory.
pub const CACHE_ENV: &str = "FORCED_KEPLER_CACHE";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not a report or scenario: {message}")]
    Parse { path: String, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Cache directory: `$FORCED_KEPLER_CACHE`, else `$XDG_CACHE_HOME/forced-kepler`, else `~/.cache/forced-kepler`.
pub fn cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(d).join("forced-kepler");
    }
    match std::env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".cache").join("forced-kepler"),
        None => std::env::temp_dir().join("forced-kepler-cache"),
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io(dir))?;
    let name = path.file_name().map_or("out".into(), |n| n.to_string_lossy().into_owned());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io(path))
}

pub fn report_json(report: &ScenarioReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn load_report(path: &Path) -> Result<ScenarioReport, StoreError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub use_cache: bool,
    pub cache_dir: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            use_cache: true,
            cache_dir: cache_dir(),
        }
    }
}

pub struct RunOutcome {
    pub report: ScenarioReport,
    pub from_cache: bool,
}

/// Runs a scenario, serving an untampered cached report for the same key when allowed.
pub fn run_cached(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, StoreError> {
    scenario.validate()?;
    let key = cache_key(scenario);
    let path = opts.cache_dir.join(format!("{key}.json"));
    if opts.use_cache && path.exists() {
        match load_report(&path) {
            Ok(r) if r.digest_ok() && r.provenance.cache_key == key && r.scenario == *scenario => {
                log::info!("served from cache {}", path.display());
                return Ok(RunOutcome { report: r, from_cache: true });
            }
            Ok(_) => log::warn!("cached report {} fails its digest, recomputing", path.display()),
            Err(e) => log::warn!("unreadable cache entry: {e}"),
        }
    }
    let report = run_scenario(scenario)?;
    if let Err(e) = write_atomic(&path, report_json(&report).as_bytes()) {
        // a read-only cache must not fail the run
        log::warn!("cache write failed: {e}");
    }
    Ok(RunOutcome { report, from_cache: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Fail,
    /// Informational failure that does not decide the outcome.
    Warn,
    NotApplicable,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Pass => "pass",
            RowStatus::Fail => "FAIL",
            RowStatus::Warn => "warn",
            RowStatus::NotApplicable => "n/a",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub name: String,
    pub status: RowStatus,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub rows: Vec<VerifyRow>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != RowStatus::Fail)
    }

    pub fn row(&self, name: &str) -> Option<&VerifyRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn table(&self) -> String {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<w$}  {:<6} detail\n", "check", "status");
        for r in &self.rows {
            out += &format!("{:<w$}  {:<6} {}\n", r.name, r.status.to_string(), r.detail);
        }
        out += &format!("{} rows, {}\n", self.rows.len(), if self.passed() { "all passed" } else { "FAILED" });
        out
    }
}

fn row(name: impl Into<String>, status: RowStatus, detail: impl Into<String>) -> VerifyRow {
    VerifyRow {
        name: name.into(),
        status,
        detail: detail.into(),
    }
}

fn check_rows(report: &ScenarioReport, rows: &mut Vec<VerifyRow>) {
    for c in &report.checks {
        let status = match (c.passed, c.hard) {
            (true, _) => RowStatus::Pass,
            (false, true) => RowStatus::Fail,
            (false, false) => RowStatus::Warn,
        };
        let detail = match (c.value, c.tolerance) {
            (Some(v), Some(t)) => format!("{v:.3e} vs {t:.1e}; {}", c.detail),
            (Some(v), None) => format!("{v}; {}", c.detail),
            _ => c.detail.clone(),
        };
        rows.push(row(c.name.clone(), status, detail));
    }
    if !report.scenario.has(Task::Orbits) && !report.scenario.has(Task::Nbody) {
        rows.push(row("orbits", RowStatus::NotApplicable, "no orbit task in this scenario"));
    }
    for b in &report.bounds {
        // bounds are reported, never failed: an unmet count is a search limit
        let status = match b.status {
            crate::report::BoundState::Met => RowStatus::Pass,
            crate::report::BoundState::NotMetSearchLimit => RowStatus::Warn,
            crate::report::BoundState::NotApplicable => RowStatus::NotApplicable,
        };
        let detail = format!(
            "predicted {}, found {}{}",
            b.predicted.map_or("-".into(), |v| v.to_string()),
            b.found.map_or("-".into(), |v| v.to_string()),
            b.note.as_ref().map_or(String::new(), |n| format!("; {n}")),
        );
        rows.push(row(format!("bound {}", b.name), status, detail));
    }
}

/// Re-runs the invariant suite for a scenario file or a saved report.
///
/// A report is also checked against its digest and against a fresh run of its scenario.
pub fn verify(path: &Path) -> Result<VerifySummary, StoreError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| StoreError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut rows = Vec::new();
    let is_report = value.get("format").is_some() && value.get("scenario").is_some();
    if !is_report {
        let scenario = Scenario::from_json(&text)?;
        let fresh = run_scenario(&scenario)?;
        check_rows(&fresh, &mut rows);
        return Ok(VerifySummary { rows });
    }
    let stored = match serde_json::from_value::<ScenarioReport>(value) {
        Ok(r) => r,
        Err(e) => {
            rows.push(row("report.schema", RowStatus::Fail, e.to_string()));
            return Ok(VerifySummary { rows });
        }
    };
    rows.push(row(
        "report.format",
        if stored.format == REPORT_FORMAT { RowStatus::Pass } else { RowStatus::Fail },
        stored.format.clone(),
    ));
    rows.push(if stored.digest_ok() {
        row("report.digest", RowStatus::Pass, stored.digest.clone())
    } else {
        row("report.digest", RowStatus::Fail, format!("stored {} but content hashes to {}", stored.digest, stored.compute_digest()))
    });
    let fresh = run_scenario(&stored.scenario)?;
    let same = fresh.deterministic() == stored.deterministic();
    let detail = if same {
        "fresh run reproduces the report".to_string()
    } else {
        let a = serde_json::to_value(stored.deterministic()).expect("reports serialize");
        let b = serde_json::to_value(fresh.deterministic()).expect("reports serialize");
        let differing: Vec<String> = a
            .as_object()
            .into_iter()
            .flatten()
            .filter(|(k, v)| b.get(k.as_str()) != Some(v))
            .map(|(k, _)| k.clone())
            .collect();
        format!("sections differ from a fresh run: {}", differing.join(", "))
    };
    rows.push(row("report.reproduced", if same { RowStatus::Pass } else { RowStatus::Fail }, detail));
    check_rows(&fresh, &mut rows);
    Ok(VerifySummary { rows })
}
