//! Consistency and robustness sweeps: grid over `n × divergence`, seeded
//! replicates, one posterior summary row per tracked θ-dimension.
//!
//! Grid points are independent: each derives its seed from
//! `(master_seed, model, n, divergence tag, alpha, replicate)`, so runs are
//! reproducible, resumable and schedule-independent. Existing rows in the
//! output CSV are kept and only missing grid points are fitted; the file is
//! rewritten in deterministic key order either way, so a resumed run and a
//! fresh run produce identical bytes apart from the wall-time column.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelKind, SweepConfig};
use crate::datagen::{generate_blr, generate_bmm, BlrDesign, BmmDesign, BETA_TRUE, BLR_SIGMA2};
use crate::divergence::DivergenceSpec;
use crate::error::{GviError, Result};
use crate::family::MeanFieldNormal;
use crate::loss::LossSpec;
use crate::objective::{Dataset, FamilyKind, GviProblem};
use crate::optim::{fit_multi_start, OptimConfig};
use crate::seed::{hash_str, mix};

/// Version tag written as the first line of every sweep CSV.
pub const SWEEP_SCHEMA: &str = "# gvi-sweep v1";

/// One summary row: a fitted posterior's re-centered mean and standard
/// deviation for a single θ-dimension, plus run bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub model: String,
    pub loss: String,
    pub gamma: Option<f64>,
    pub divergence: String,
    pub alpha: Option<f64>,
    pub n: usize,
    pub replicate: usize,
    pub dim: usize,
    pub recentered_mean: Option<f64>,
    pub sigma: Option<f64>,
    pub final_objective: Option<f64>,
    pub status: String,
    pub wall_time_ms: u64,
    pub seed: u64,
}

impl PosteriorSummary {
    /// Identity of the fit a row belongs to (all dims of a fit share it).
    fn fit_key(&self) -> (usize, String, u64, usize) {
        (
            self.n,
            format!("{}:{}", self.divergence, fmt_opt(self.alpha)),
            self.seed,
            self.replicate,
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Derive the seed of one grid point, as
/// `hash(master, model, n, divergence tag, alpha, replicate)`.
pub fn replicate_seed(
    master: u64,
    model: ModelKind,
    n: usize,
    divergence: &DivergenceSpec,
    replicate: usize,
) -> u64 {
    mix(
        master,
        &[
            hash_str(model.tag()),
            n as u64,
            hash_str(divergence.kind.tag()),
            divergence.alpha.map(f64::to_bits).unwrap_or(0),
            replicate as u64,
        ],
    )
}

/// True θ of the sweep's generative model.
pub fn theta_true(model: ModelKind, bmm_dim: usize) -> Vec<f64> {
    match model {
        ModelKind::Blr => {
            let mut t = BETA_TRUE.to_vec();
            t.push(BLR_SIGMA2.ln());
            t
        }
        ModelKind::Bmm => {
            let mut t = vec![crate::datagen::BMM_MEAN_OFFSET; bmm_dim];
            t.extend(vec![-crate::datagen::BMM_MEAN_OFFSET; bmm_dim]);
            t
        }
    }
}

/// Re-center a fitted mixture-model posterior against the true component
/// means, resolving the label permutation by least squares. Returns the
/// per-dimension recentered means and the matched sigmas.
pub fn recenter_bmm(mu: &[f64], sigma: &[f64], truth: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = mu.len() / 2;
    let sq = |v: f64| v * v;
    let direct: f64 = (0..2 * d).map(|j| sq(mu[j] - truth[j])).sum();
    let swapped: f64 = (0..d)
        .map(|j| sq(mu[d + j] - truth[j]) + sq(mu[j] - truth[d + j]))
        .sum();
    if swapped < direct {
        let mut rm = Vec::with_capacity(2 * d);
        let mut rs = Vec::with_capacity(2 * d);
        for j in 0..d {
            rm.push(mu[d + j] - truth[j]);
            rs.push(sigma[d + j]);
        }
        for j in 0..d {
            rm.push(mu[j] - truth[d + j]);
            rs.push(sigma[j]);
        }
        (rm, rs)
    } else {
        (
            (0..2 * d).map(|j| mu[j] - truth[j]).collect(),
            sigma.to_vec(),
        )
    }
}

/// Build the seeded problem of one grid point.
pub fn build_problem(
    model: ModelKind,
    n: usize,
    bmm_dim: usize,
    contaminate: bool,
    loss: &LossSpec,
    divergence: &DivergenceSpec,
    prior_mean: f64,
    prior_sd: f64,
    family: FamilyKind,
    data_seed: u64,
) -> Result<GviProblem> {
    let (dataset, theta_dim) = match model {
        ModelKind::Blr => {
            let data = generate_blr(&BlrDesign::new(n, data_seed)?);
            (Dataset::Blr(data), crate::loss::BLR_THETA_DIM)
        }
        ModelKind::Bmm => {
            let data = generate_bmm(&BmmDesign::new(n, bmm_dim, contaminate, data_seed)?);
            (Dataset::Bmm(data), 2 * bmm_dim)
        }
    };
    GviProblem::new(
        dataset,
        *loss,
        *divergence,
        MeanFieldNormal::isotropic(theta_dim, prior_mean, prior_sd)?,
        family,
    )
}

/// Fit one grid point and summarize it into per-dimension rows.
fn run_grid_point(
    config: &SweepConfig,
    optim: &OptimConfig,
    n: usize,
    divergence: &DivergenceSpec,
    replicate: usize,
) -> Vec<PosteriorSummary> {
    let seed = replicate_seed(config.master_seed, config.model, n, divergence, replicate);
    let started = Instant::now();
    let truth = theta_true(config.model, config.bmm_dim);

    let outcome = build_problem(
        config.model,
        n,
        config.bmm_dim,
        config.contaminate,
        &config.loss,
        divergence,
        config.prior.mean,
        config.prior.sd,
        FamilyKind::MeanFieldNormal,
        seed,
    )
    .and_then(|problem| {
        let mut optim_config = *optim;
        optim_config.seed = mix(seed, &[hash_str("optim")]);
        let result = fit_multi_start(
            &problem,
            &problem.default_init(),
            config.starts,
            config.jitter,
            &optim_config,
        )?;
        let fitted = problem.unpack(&result.params)?;
        Ok((fitted, result.final_objective))
    });

    let wall_time_ms = started.elapsed().as_millis() as u64;
    let base = PosteriorSummary {
        model: config.model.tag().to_string(),
        loss: config.loss.kind.tag().to_string(),
        gamma: config.loss.gamma,
        divergence: divergence.kind.tag().to_string(),
        alpha: divergence.alpha,
        n,
        replicate,
        dim: 0,
        recentered_mean: None,
        sigma: None,
        final_objective: None,
        status: String::new(),
        wall_time_ms,
        seed,
    };

    match outcome {
        Ok((fitted, final_objective)) => {
            let q = fitted.primary();
            let (recentered, sigmas) = match config.model {
                ModelKind::Bmm => recenter_bmm(q.mu(), &q.sigma(), &truth),
                ModelKind::Blr => (
                    q.mu().iter().zip(truth.iter()).map(|(m, t)| m - t).collect(),
                    q.sigma(),
                ),
            };
            recentered
                .iter()
                .zip(sigmas.iter())
                .enumerate()
                .map(|(dim, (rm, s))| PosteriorSummary {
                    dim,
                    recentered_mean: Some(*rm),
                    sigma: Some(*s),
                    final_objective: Some(final_objective),
                    status: "ok".to_string(),
                    ..base.clone()
                })
                .collect()
        }
        Err(_) => vec![PosteriorSummary {
            status: "diverged".to_string(),
            ..base
        }],
    }
}

/// Run the sweep, resuming from any existing output file, and persist the
/// summaries as CSV. Returns the full row set in deterministic order.
pub fn run_sweep(config: &SweepConfig, optim: &OptimConfig) -> Result<Vec<PosteriorSummary>> {
    config.validate()?;
    optim.validate()?;

    let existing = if config.output.exists() {
        read_summaries(&config.output)?
    } else {
        Vec::new()
    };
    let done: HashSet<_> = existing.iter().map(|r| r.fit_key()).collect();

    // grid in deterministic order: n, then divergence index, then replicate
    let mut tasks = Vec::new();
    for &n in &config.n_grid {
        for (div_idx, divergence) in config.divergences.iter().enumerate() {
            for replicate in 0..config.replicates {
                let seed =
                    replicate_seed(config.master_seed, config.model, n, divergence, replicate);
                let key = (
                    n,
                    format!(
                        "{}:{}",
                        divergence.kind.tag(),
                        fmt_opt(divergence.alpha)
                    ),
                    seed,
                    replicate,
                );
                if !done.contains(&key) {
                    tasks.push((n, div_idx, replicate));
                }
            }
        }
    }

    let fresh: Vec<Vec<PosteriorSummary>> = worker_pool()?.install(|| {
        tasks
            .par_iter()
            .map(|&(n, div_idx, replicate)| {
                run_grid_point(config, optim, n, &config.divergences[div_idx], replicate)
            })
            .collect()
    });

    // merge, keeping only rows belonging to the configured grid
    let div_index = |row: &PosteriorSummary| -> Option<usize> {
        config.divergences.iter().position(|d| {
            d.kind.tag() == row.divergence && d.alpha == row.alpha
        })
    };
    let mut rows: Vec<PosteriorSummary> = existing
        .into_iter()
        .filter(|r| div_index(r).is_some() && config.n_grid.contains(&r.n))
        .chain(fresh.into_iter().flatten())
        .collect();
    rows.sort_by_key(|r| (r.n, div_index(r).unwrap_or(usize::MAX), r.replicate, r.dim));

    write_summaries(&config.output, &rows)?;
    Ok(rows)
}

/// Thread pool honoring the `GVI_WORKERS` environment variable.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("GVI_WORKERS") {
        let workers: usize = value
            .parse()
            .map_err(|_| GviError::Config(format!("GVI_WORKERS must be an integer, got {value}")))?;
        if workers == 0 {
            return Err(GviError::Config("GVI_WORKERS must be >= 1".into()));
        }
        builder = builder.num_threads(workers);
    }
    builder
        .build()
        .map_err(|e| GviError::Config(format!("cannot build worker pool: {e}")))
}

/// Write summary rows under the schema comment.
pub fn write_summaries(path: &Path, rows: &[PosteriorSummary]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{SWEEP_SCHEMA}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read summary rows, skipping the schema comment.
pub fn read_summaries(path: &Path) -> Result<Vec<PosteriorSummary>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: PosteriorSummary = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Deserialize { .. } => GviError::SchemaMismatch {
                column: e.to_string(),
            },
            _ => GviError::Csv(e),
        })?;
        rows.push(row);
    }
    Ok(rows)
}
