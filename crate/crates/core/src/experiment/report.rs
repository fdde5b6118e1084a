//! CSV, text and JSON renderings of result tables, and the results
//! directory layout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::paper_tables::reference;
use super::{ResultsTable, SuiteConfig, SuiteResult};
use crate::bundle::canonical_json;
use crate::eval::Metric;
use crate::Error;

const EPS: f64 = 1e-12;

pub fn csv_header() -> String {
    let mut cols = vec!["method".to_string(), "model".to_string()];
    for m in Metric::ALL {
        cols.push(format!("{m}_mean"));
        cols.push(format!("{m}_std"));
    }
    for m in Metric::ALL {
        cols.push(format!("{m}_best_in_method"));
    }
    for m in Metric::ALL {
        cols.push(format!("{m}_best_overall"));
    }
    cols.join(",")
}

/// Marks rows whose mean equals the maximum of their group; ties are all
/// marked.
fn best_flags(table: &ResultsTable, metric: Metric, same_method: bool) -> Vec<bool> {
    table
        .rows
        .iter()
        .map(|r| {
            let best = table
                .rows
                .iter()
                .filter(|o| !same_method || o.method == r.method)
                .map(|o| o.aggregate.get(metric).mean)
                .fold(f64::NEG_INFINITY, f64::max);
            r.aggregate.get(metric).mean >= best - EPS
        })
        .collect()
}

/// Means and stds at full precision, then the per-method and table-wide
/// best markers as booleans.
pub fn render_csv(table: &ResultsTable) -> String {
    let in_method: Vec<Vec<bool>> = Metric::ALL.iter().map(|&m| best_flags(table, m, true)).collect();
    let overall: Vec<Vec<bool>> = Metric::ALL.iter().map(|&m| best_flags(table, m, false)).collect();
    let mut out = csv_header();
    out.push('\n');
    for (i, r) in table.rows.iter().enumerate() {
        let mut cells = vec![r.method.key().to_string(), r.family.display_name().to_string()];
        for m in Metric::ALL {
            let ms = r.aggregate.get(m);
            cells.push(ms.mean.to_string());
            cells.push(ms.std.to_string());
        }
        cells.extend(in_method.iter().map(|f| f[i].to_string()));
        cells.extend(overall.iter().map(|f| f[i].to_string()));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub method: String,
    pub model: String,
    pub metric: Metric,
    pub ours_mean: f64,
    pub ours_std: f64,
    pub paper_mean: f64,
    pub paper_std: f64,
    pub abs_delta: f64,
}

/// Our value next to the published one for every cell that has one.
pub fn delta_rows(table: &ResultsTable) -> Vec<DeltaRow> {
    let mut out = Vec::new();
    for r in &table.rows {
        let Some(published) = reference(table.dataset(), r.method, r.family) else { continue };
        for (k, m) in Metric::ALL.into_iter().enumerate() {
            let ours = r.aggregate.get(m);
            out.push(DeltaRow {
                method: r.method.key().to_string(),
                model: r.family.display_name().to_string(),
                metric: m,
                ours_mean: ours.mean,
                ours_std: ours.std,
                paper_mean: published[k].mean,
                paper_std: published[k].std,
                abs_delta: (ours.mean - published[k].mean).abs(),
            });
        }
    }
    out
}

pub fn render_deltas_csv(table: &ResultsTable) -> String {
    let mut out = String::from("method,model,metric,ours_mean,ours_std,paper_mean,paper_std,abs_delta\n");
    for d in delta_rows(table) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.method, d.model, d.metric, d.ours_mean, d.ours_std, d.paper_mean, d.paper_std, d.abs_delta
        );
    }
    out
}

/// Human-readable table in the `0.933 (± 0.042)` style.
pub fn render_text(table: &ResultsTable) -> String {
    let mut out = format!("{} dataset\n", table.dataset().key());
    let _ = write!(out, "{:<10} {:<6}", "method", "model");
    for m in Metric::ALL {
        let _ = write!(out, " {:>17}", m.key());
    }
    out.push('\n');
    for r in &table.rows {
        let _ = write!(out, "{:<10} {:<6}", r.method.key(), r.family.display_name());
        for m in Metric::ALL {
            let _ = write!(out, " {:>17}", r.aggregate.get(m).to_string());
        }
        out.push('\n');
    }
    out
}

/// `<suite>-seed<seed>-<first 8 hex digits of the config and corpus hash>`.
pub fn run_id(suite_name: &str, config: &SuiteConfig, corpus_hash: &str) -> Result<String, Error> {
    let mut h = Sha256::new();
    h.update(canonical_json(config)?.as_bytes());
    h.update(corpus_hash.as_bytes());
    let digest = h.finalize();
    let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    Ok(format!("{suite_name}-seed{}-{hex}", config.settings.seed))
}

/// Everything `run.json` records.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutput<'a> {
    pub run_id: String,
    pub suite: &'a str,
    pub config: &'a SuiteConfig,
    pub corpus_hash: String,
    pub result: &'a SuiteResult,
}

/// Writes `<out>/<run-id>/` with one CSV and one deltas CSV per table, and
/// `run.json`. Returns the run directory.
pub fn write_suite(out: &Path, output: &SuiteOutput<'_>) -> Result<PathBuf, Error> {
    let dir = out.join(&output.run_id);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    let tables = [("balanced", &output.result.balanced), ("imbalanced", &output.result.imbalanced)];
    for (name, table) in tables {
        if let Some(t) = table {
            let p = dir.join(format!("table_{name}.csv"));
            fs::write(&p, render_csv(t)).map_err(io(&p))?;
            let p = dir.join(format!("deltas_{name}.csv"));
            fs::write(&p, render_deltas_csv(t)).map_err(io(&p))?;
        }
    }
    let p = dir.join("run.json");
    fs::write(&p, canonical_json(output)?).map_err(io(&p))?;
    Ok(dir)
}
