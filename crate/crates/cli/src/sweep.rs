//! Sweeps: every `*.toml` config in a directory, run concurrently.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sdl_core::io::{self, fmt_f64};

use crate::config::ExperimentConfig;
use crate::run::{run_config, Manifest, RunStatus};
use crate::CliError;

/// Name of the aggregate table written into the swept directory.
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub config: PathBuf,
    pub status: RunStatus,
    pub manifest: Option<Manifest>,
    pub error: Option<String>,
}

fn list_configs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::validation(format!("cannot read {}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    out.sort();
    Ok(out)
}

fn failed(config: &Path, status: RunStatus, error: String) -> SweepEntry {
    SweepEntry { config: config.to_path_buf(), status, manifest: None, error: Some(error) }
}

fn run_one(path: &Path, threads: usize) -> SweepEntry {
    match catch_unwind(AssertUnwindSafe(|| run_config(path, threads))) {
        Ok(Ok(m)) => {
            let error = m.diagnostics.first().cloned();
            SweepEntry { config: path.to_path_buf(), status: m.status, manifest: Some(m), error }
        }
        Ok(Err(e)) => {
            let status = if e.exit_code() == 2 { RunStatus::ValidationError } else { RunStatus::SolverError };
            failed(path, status, e.to_string())
        }
        Err(_) => failed(path, RunStatus::SolverError, "run panicked".into()),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long format: one row per (config, metric), plus one `status` row for runs
/// without metrics.
fn aggregate(dir: &Path, entries: &[SweepEntry]) -> String {
    let mut out = String::from("config,task,domain,vertices,status,metric,value\n");
    for e in entries {
        let name = e.config.strip_prefix(dir).unwrap_or(&e.config).display().to_string();
        let status = serde_json::to_value(e.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let summary = e.manifest.as_ref().and_then(|m| m.summary.as_ref());
        let (task, domain, vertices, metrics) = match summary {
            Some(s) => (s.task.clone(), s.domain.clone(), s.vertices.to_string(), s.metrics.clone()),
            None => (String::new(), String::new(), String::new(), BTreeMap::new()),
        };
        let prefix = [name, task, domain, vertices, status].map(|s| csv_field(&s)).join(",");
        if metrics.is_empty() {
            out.push_str(&format!("{prefix},,\n"));
        }
        for (k, v) in metrics {
            out.push_str(&format!("{prefix},{},{}\n", csv_field(&k), fmt_f64(v)));
        }
    }
    out
}

/// Runs every config in `dir` on a pool of `threads` workers. A failing run
/// is recorded in its entry and does not stop the others. Configs that share
/// an output directory after the first are rejected.
pub fn sweep_dir(dir: &Path, threads: usize) -> Result<Vec<SweepEntry>, CliError> {
    let configs = list_configs(dir)?;
    let mut seen = BTreeMap::new();
    let mut runnable = Vec::new();
    let mut entries: Vec<Option<SweepEntry>> = vec![None; configs.len()];
    for (k, p) in configs.iter().enumerate() {
        match ExperimentConfig::load(p) {
            Ok(cfg) => {
                let out = cfg.output_dir(p);
                if let Some(first) = seen.insert(out.clone(), p.clone()) {
                    seen.insert(out.clone(), first.clone());
                    let msg = format!("output directory {} is already used by {}", out.display(), first.display());
                    entries[k] = Some(failed(p, RunStatus::ValidationError, msg));
                } else {
                    runnable.push(k);
                }
            }
            Err(e) => entries[k] = Some(failed(p, RunStatus::ValidationError, e.to_string())),
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::validation(format!("cannot start {threads} workers: {e}")))?;
    let done: Vec<(usize, SweepEntry)> = pool.install(|| runnable.par_iter().map(|&k| (k, run_one(&configs[k], threads))).collect());
    for (k, e) in done {
        entries[k] = Some(e);
    }
    let entries: Vec<SweepEntry> = entries.into_iter().map(|e| e.expect("every config has an entry")).collect();
    io::write_atomic(&dir.join(SWEEP_CSV), aggregate(dir, &entries).as_bytes())
        .map_err(|e| CliError::validation(format!("cannot write {SWEEP_CSV}: {e}")))?;
    Ok(entries)
}
