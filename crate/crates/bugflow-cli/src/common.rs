//! Flag plumbing shared across subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bugflow::filter::FilterConfig;
use bugflow::ingest::{read_bug_records_path, BugRecord, ProjectProfile, WorkflowSpec};
use bugflow::stats::default_occupancy_grid;

use crate::output::OutFormat;

pub fn parse_format(s: &str) -> Result<OutFormat, String> {
    s.parse()
}

/// Workflow from `--profile` when given, else `--workflow` by built-in name,
/// else the standard workflow.
pub fn resolve_workflow(workflow: &Option<String>, profile: &Option<PathBuf>) -> Result<WorkflowSpec> {
    if let Some(path) = profile {
        let profile = ProjectProfile::load(path)
            .with_context(|| format!("cannot load profile {}", path.display()))?;
        return Ok(profile.workflow);
    }
    let name = workflow.as_deref().unwrap_or("standard");
    Ok(WorkflowSpec::builtin(name)?)
}

/// `[filter]` table of the profile when given, defaults otherwise.
pub fn resolve_filter_config(profile: &Option<PathBuf>) -> Result<FilterConfig> {
    match profile {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read profile {}", path.display()))?;
            Ok(FilterConfig::from_profile_toml(&text)?)
        }
        None => Ok(FilterConfig::default()),
    }
}

pub fn load_corpus(path: &Path) -> Result<Vec<BugRecord>> {
    let corpus = read_bug_records_path(path)
        .with_context(|| format!("cannot read corpus {}", path.display()))?;
    Ok(corpus)
}

/// Grid flag: `default`, `log:<start>:<end>:<points>` (plus t = 0), or a
/// comma-separated ascending list of hours.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    if spec == "default" {
        return Ok(default_occupancy_grid());
    }
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            bail!("log grid must be log:<start>:<end>:<points>");
        }
        let start: f64 = parts[0].parse().context("bad grid start")?;
        let end: f64 = parts[1].parse().context("bad grid end")?;
        let points: usize = parts[2].parse().context("bad grid point count")?;
        if !(start > 0.0 && end > start && points >= 2) {
            bail!("log grid needs 0 < start < end and at least 2 points");
        }
        let mut grid = vec![0.0];
        for k in 0..points {
            let f = k as f64 / (points - 1) as f64;
            grid.push(start * (end / start).powf(f));
        }
        return Ok(grid);
    }
    let mut grid = Vec::new();
    for part in spec.split(',') {
        let t: f64 = part
            .trim()
            .parse()
            .with_context(|| format!("bad grid value {part:?}"))?;
        grid.push(t);
    }
    if grid.is_empty() || grid.iter().any(|t| *t < 0.0) || grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("grid must be a non-empty ascending list of non-negative hours");
    }
    Ok(grid)
}

pub fn parse_priorities(spec: &str) -> Result<std::collections::BTreeSet<u8>> {
    let mut out = std::collections::BTreeSet::new();
    for part in spec.split(',') {
        let p: u8 = part
            .trim()
            .parse()
            .with_context(|| format!("bad priority {part:?}"))?;
        if !(1..=5).contains(&p) {
            bail!("priority {p} is outside 1..=5");
        }
        out.insert(p);
    }
    Ok(out)
}
