use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use spreadsim::observables::EnsembleAccumulator;
use spreadsim::{counts_on_grid, uniform_grid, EnsembleSeries, EventLog, Termination};

/// Event logs (`*.csv`) in `dir`, sorted by name.
pub fn log_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no event logs in {}", dir.display());
    }
    Ok(files)
}

/// Latest time every log covers: the earliest final time among runs that
/// did not absorb, or the latest final time if all did.
pub fn common_horizon(logs: &[EventLog]) -> f64 {
    let open = logs
        .iter()
        .filter(|l| l.header.termination != Termination::Absorbed)
        .map(|l| l.header.final_time)
        .fold(f64::INFINITY, f64::min);
    if open.is_finite() {
        open
    } else {
        logs.iter().map(|l| l.header.final_time).fold(0.0, f64::max)
    }
}

/// Mean compartment fractions over all logs in `dir` on `points` grid times.
pub fn average_dir(dir: &Path, points: usize, t_max: Option<f64>) -> Result<EnsembleSeries> {
    if points == 0 {
        bail!("--points must be positive");
    }
    let logs = log_files(dir)?
        .par_iter()
        .map(|p| EventLog::read_path(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let t_max = t_max.unwrap_or_else(|| common_horizon(&logs));
    let grid = uniform_grid(t_max, points);
    let first = &logs[0].header;
    let empty = EnsembleAccumulator::new(grid.clone(), first.state_names.clone(), first.nodes);
    let acc = logs
        .par_iter()
        .try_fold(
            || empty.clone(),
            |mut acc, log| -> Result<_> {
                acc.add(&counts_on_grid(log, &grid)?)?;
                Ok(acc)
            },
        )
        .try_reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            },
        )?;
    Ok(acc.finish()?)
}
