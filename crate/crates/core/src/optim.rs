//! Stochastic gradient optimization of GVI objectives.
//!
//! A fixed-budget Adam loop over any [`StochasticObjective`]. No early
//! stopping and no schedules: runs stay comparable across divergence
//! choices. Any non-finite value or gradient aborts with the iteration
//! index rather than being clamped, since a NaN here almost always means a
//! misconfigured hyperparameter.

use serde::{Deserialize, Serialize};

use crate::error::{GviError, Result};
use crate::objective::ObjectiveEstimate;
use crate::seed::mix;

/// Anything that can produce seeded value/gradient estimates of itself.
pub trait StochasticObjective: Sync {
    fn param_len(&self) -> usize;
    fn estimate(&self, params: &[f64], mc_samples: usize, seed: u64) -> Result<ObjectiveEstimate>;
}

/// Optimizer hyperparameters. Everything is overridable from the config
/// file; the defaults are a reasonable starting point for the bundled
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub trace_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            iterations: 5000,
            mc_samples: 100,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            trace_every: 50,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(GviError::Config("learning_rate must be positive".into()));
        }
        if self.iterations == 0 || self.mc_samples == 0 || self.trace_every == 0 {
            return Err(GviError::Config(
                "iterations, mc_samples and trace_every must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(GviError::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.adam_eps <= 0.0 {
            return Err(GviError::Config("adam_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one optimization run. The trace holds the exponentially
/// smoothed objective (half-life of twenty records) at every
/// `trace_every`-th iteration, and `final_objective` is a fresh estimate at
/// the fitted parameters under a seed derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub trace: Vec<(usize, f64)>,
    pub final_objective: f64,
    pub config: OptimConfig,
}

const ITER_TAG: u64 = 1;
const JITTER_TAG: u64 = 2;
const START_TAG: u64 = 3;
const FINAL_EVAL_TAG: u64 = 4;

/// Sample budget of the fresh final-objective evaluation.
const FINAL_EVAL_SAMPLES: usize = 10_000;

/// Smoothing factor for a half-life of twenty trace records.
const TRACE_DECAY: f64 = 0.965_936_328_924_846_3; // 0.5^(1/20)

/// Minimize the objective with Adam for the configured number of
/// iterations. Deterministic given `config.seed`.
pub fn fit(
    objective: &dyn StochasticObjective,
    init: &[f64],
    config: &OptimConfig,
) -> Result<FitResult> {
    fit_with_final_seed(objective, init, config, mix(config.seed, &[FINAL_EVAL_TAG]))
}

fn fit_with_final_seed(
    objective: &dyn StochasticObjective,
    init: &[f64],
    config: &OptimConfig,
    final_seed: u64,
) -> Result<FitResult> {
    config.validate()?;
    if init.len() != objective.param_len() {
        return Err(GviError::dims(objective.param_len(), init.len()));
    }

    let mut params = init.to_vec();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut trace = Vec::new();
    let mut ema: Option<f64> = None;

    for t in 0..config.iterations {
        let est = objective.estimate(&params, config.mc_samples, mix(config.seed, &[ITER_TAG, t as u64]))?;
        if !est.value.is_finite() || est.grad.iter().any(|g| !g.is_finite()) {
            return Err(GviError::Diverged { iteration: t });
        }

        if t % config.trace_every == 0 || t + 1 == config.iterations {
            let e = match ema {
                None => est.value,
                Some(prev) => TRACE_DECAY * prev + (1.0 - TRACE_DECAY) * est.value,
            };
            ema = Some(e);
            trace.push((t, e));
        }

        let step = t as f64 + 1.0;
        let lr_t = config.learning_rate * (1.0 - config.adam_beta2.powf(step)).sqrt()
            / (1.0 - config.adam_beta1.powf(step));
        for j in 0..params.len() {
            let g = est.grad[j];
            m[j] = config.adam_beta1 * m[j] + (1.0 - config.adam_beta1) * g;
            v[j] = config.adam_beta2 * v[j] + (1.0 - config.adam_beta2) * g * g;
            params[j] -= lr_t * m[j] / (v[j].sqrt() + config.adam_eps);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(GviError::Diverged { iteration: t });
        }
    }

    let final_est = objective.estimate(
        &params,
        FINAL_EVAL_SAMPLES.max(config.mc_samples),
        final_seed,
    )?;
    if !final_est.value.is_finite() {
        return Err(GviError::Diverged {
            iteration: config.iterations,
        });
    }

    Ok(FitResult {
        params,
        trace,
        final_objective: final_est.value,
        config: *config,
    })
}

/// Run `fit` from seeded initializations and keep the run with the lowest
/// final objective (ties broken by lowest start index). Start 0 uses the
/// given initialization verbatim, so `starts = 1` is exactly [`fit`];
/// later starts add Gaussian jitter of scale `jitter` to every parameter,
/// which is how label-symmetric mixture objectives escape their saddle.
pub fn fit_multi_start(
    objective: &dyn StochasticObjective,
    init: &[f64],
    starts: usize,
    jitter: f64,
    config: &OptimConfig,
) -> Result<FitResult> {
    if starts == 0 {
        return Err(GviError::InvalidSpec("starts must be >= 1".into()));
    }
    let mut best: Option<FitResult> = None;
    let mut diverged = 0usize;
    for k in 0..starts {
        let start_init = if k == 0 {
            init.to_vec()
        } else {
            jittered(init, jitter, mix(config.seed, &[JITTER_TAG, k as u64]))
        };
        let mut start_config = *config;
        if k > 0 {
            start_config.seed = mix(config.seed, &[START_TAG, k as u64]);
        }
        // Selection must compare final objectives on a common seed.
        match fit_with_final_seed(
            objective,
            &start_init,
            &start_config,
            mix(config.seed, &[FINAL_EVAL_TAG]),
        ) {
            Ok(result) => {
                let better = match &best {
                    None => true,
                    Some(b) => result.final_objective < b.final_objective,
                };
                if better {
                    best = Some(result);
                }
            }
            Err(GviError::Diverged { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(GviError::AllStartsDiverged { starts: diverged })
}

fn jittered(init: &[f64], scale: f64, seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = crate::seed::stream_rng(seed, 0);
    init.iter()
        .map(|p| p + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect()
}
