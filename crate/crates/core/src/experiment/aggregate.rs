//! Replicate aggregation: group sweep rows and average the re-centered
//! means and standard deviations, the `(m̄, s̄)` summary the figures plot.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::PosteriorSummary;
use crate::error::{GviError, Result};

/// Version tag written as the first line of every aggregate CSV.
pub const AGGREGATE_SCHEMA: &str = "# gvi-aggregate v1";

/// One aggregated group. `dim` is present only when grouping per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub loss: String,
    pub gamma: Option<f64>,
    pub divergence: String,
    pub alpha: Option<f64>,
    pub n: usize,
    pub dim: Option<usize>,
    pub m_bar: f64,
    pub s_bar: f64,
    pub group_size: usize,
}

/// Group rows by `(model, loss, gamma, divergence, alpha, n)` — and `dim`
/// when `by_dim` — then average. Diverged rows never enter a group, and
/// groups left empty produce no output row.
pub fn aggregate(rows: &[PosteriorSummary], by_dim: bool) -> Vec<AggregateRow> {
    type Key = (String, String, u64, String, u64, usize, Option<usize>);
    let mut groups: BTreeMap<Key, (f64, f64, usize)> = BTreeMap::new();
    for row in rows {
        if row.status != "ok" {
            continue;
        }
        let (Some(rm), Some(sigma)) = (row.recentered_mean, row.sigma) else {
            continue;
        };
        let key = (
            row.model.clone(),
            row.loss.clone(),
            row.gamma.map(f64::to_bits).unwrap_or(0),
            row.divergence.clone(),
            row.alpha.map(f64::to_bits).unwrap_or(0),
            row.n,
            if by_dim { Some(row.dim) } else { None },
        );
        let entry = groups.entry(key).or_insert((0.0, 0.0, 0));
        entry.0 += rm;
        entry.1 += sigma;
        entry.2 += 1;
    }
    groups
        .into_iter()
        .map(|((model, loss, gamma, divergence, alpha, n, dim), (sum_m, sum_s, count))| {
            AggregateRow {
                model,
                loss,
                gamma: (gamma != 0).then(|| f64::from_bits(gamma)),
                divergence,
                alpha: (alpha != 0).then(|| f64::from_bits(alpha)),
                n,
                dim,
                m_bar: sum_m / count as f64,
                s_bar: sum_s / count as f64,
                group_size: count,
            }
        })
        .collect()
}

pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{AGGREGATE_SCHEMA}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_aggregates(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: AggregateRow = record.map_err(|e| GviError::SchemaMismatch {
            column: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}
