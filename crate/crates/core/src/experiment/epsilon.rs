//! The ε-diagnostic: how far the empirical objective's minimizer is from
//! minimizing the deterministic auxiliary objective, measured by
//! `ε_n = 2 | E_{q̄_n}[ (1/n) Σ_i ℓ(θ, x_i) − E_μ[ℓ(θ, x)] ] |` on the
//! conjugate Gaussian-mean toy. Consistency manifests as `ε_n → 0`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EpsilonConfig;
use crate::datagen::generate_gaussian;
use crate::error::{GviError, Result};
use crate::optim::OptimConfig;
use crate::seed::mix;
use crate::toy::ToyGaussianMean;

/// Version tag written as the first line of every epsilon CSV.
pub const EPSILON_SCHEMA: &str = "# gvi-epsilon v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub n: usize,
    pub replicate: usize,
    pub epsilon: f64,
}

/// Run the diagnostic over the configured grid. `q̄_n` minimizes the
/// deterministic objective and therefore depends only on `n`, so it is
/// found once per grid point; each replicate then contributes its own data
/// moments. Deterministic given the master seed.
pub fn epsilon_diagnostic(
    config: &EpsilonConfig,
    optim: &OptimConfig,
) -> Result<Vec<EpsilonRow>> {
    config.validate()?;
    let toy = ToyGaussianMean::new(
        config.m_star,
        config.v_star,
        config.model_sigma2,
        config.prior.mean,
        config.prior.sd,
        config.divergence,
    )?;

    let mut rows = Vec::with_capacity(config.n_grid.len() * config.replicates);
    for &n in &config.n_grid {
        let qbar = toy.minimize_deterministic(n, optim)?;
        for replicate in 0..config.replicates {
            let seed = mix(config.master_seed, &[n as u64, replicate as u64]);
            let data = generate_gaussian(n, config.m_star, config.v_star.sqrt(), seed);
            let epsilon = toy.epsilon_n(&data, qbar.mu)?;
            rows.push(EpsilonRow { n, replicate, epsilon });
        }
    }
    Ok(rows)
}

pub fn write_epsilon(path: &Path, rows: &[EpsilonRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{EPSILON_SCHEMA}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_epsilon(path: &Path) -> Result<Vec<EpsilonRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: EpsilonRow = record.map_err(|e| GviError::SchemaMismatch {
            column: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Median ε per n, ascending in n.
pub fn median_by_n(rows: &[EpsilonRow]) -> Vec<(usize, f64)> {
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for row in rows {
        by_n.entry(row.n).or_default().push(row.epsilon);
    }
    by_n
        .into_iter()
        .map(|(n, mut vals)| {
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = vals.len() / 2;
            let median = if vals.len() % 2 == 0 {
                0.5 * (vals[mid - 1] + vals[mid])
            } else {
                vals[mid]
            };
            (n, median)
        })
        .collect()
}
