//! Variational families and latent-variable posteriors.
//!
//! The workhorse is the mean-field normal family: a fully factorized
//! Gaussian with per-dimension mean and standard deviation, the latter
//! stored as `log_sigma` so it can be optimized unconstrained. A normal
//! mixture wraps `K` such components behind unnormalized weights, and a
//! per-observation Bernoulli posterior carries the latent memberships of
//! mixture-model losses.

use serde::{Deserialize, Serialize};

use crate::error::{GviError, Result};

/// ln(2π), used throughout the Gaussian densities.
pub const LN_2PI: f64 = 1.8378770664093453_f64;

/// Lower clamp for standard deviations inside density and divergence
/// evaluations. Posteriors collapse toward point masses as n grows; the
/// floor keeps late-stage evaluations finite.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Fully factorized normal distribution over `R^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldNormal {
    mu: Vec<f64>,
    log_sigma: Vec<f64>,
}

impl MeanFieldNormal {
    /// Build from location and log standard deviation vectors of equal,
    /// non-zero length with finite entries.
    pub fn new(mu: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(GviError::InvalidSpec("dimension must be >= 1".into()));
        }
        if mu.len() != log_sigma.len() {
            return Err(GviError::dims(mu.len(), log_sigma.len()));
        }
        if mu.iter().chain(log_sigma.iter()).any(|v| !v.is_finite()) {
            return Err(GviError::InvalidSpec(
                "mean-field normal parameters must be finite".into(),
            ));
        }
        Ok(Self { mu, log_sigma })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            log_sigma: vec![0.0; dim],
        }
    }

    /// Isotropic normal with common mean and standard deviation.
    pub fn isotropic(dim: usize, mean: f64, sd: f64) -> Result<Self> {
        if sd <= 0.0 || !sd.is_finite() {
            return Err(GviError::InvalidSpec(format!(
                "standard deviation must be positive and finite, got {sd}"
            )));
        }
        Self::new(vec![mean; dim], vec![sd.ln(); dim])
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn log_sigma(&self) -> &[f64] {
        &self.log_sigma
    }

    /// Per-dimension standard deviations, floored at [`SIGMA_FLOOR`].
    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma
            .iter()
            .map(|ls| ls.exp().max(SIGMA_FLOOR))
            .collect()
    }

    /// Reparameterized draw `mu + sigma ⊙ noise`. Deterministic given the
    /// noise vector, which is how gradients flow through the sample.
    pub fn sample_reparam(&self, noise: &[f64]) -> Result<Vec<f64>> {
        if noise.len() != self.dim() {
            return Err(GviError::dims(self.dim(), noise.len()));
        }
        Ok(self
            .mu
            .iter()
            .zip(self.log_sigma.iter())
            .zip(noise.iter())
            .map(|((m, ls), e)| m + ls.exp() * e)
            .collect())
    }

    /// Log density at `theta`: sum of univariate normal log densities.
    pub fn log_pdf(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(GviError::dims(self.dim(), theta.len()));
        }
        let mut lp = 0.0;
        for ((m, ls), t) in self.mu.iter().zip(self.log_sigma.iter()).zip(theta.iter()) {
            let s = ls.exp().max(SIGMA_FLOOR);
            let z = (t - m) / s;
            lp += -0.5 * LN_2PI - s.ln() - 0.5 * z * z;
        }
        Ok(lp)
    }

    /// Gradient of the log density with respect to `theta`.
    pub fn grad_log_pdf(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(GviError::dims(self.dim(), theta.len()));
        }
        Ok(self
            .mu
            .iter()
            .zip(self.log_sigma.iter())
            .zip(theta.iter())
            .map(|((m, ls), t)| {
                let s = ls.exp().max(SIGMA_FLOOR);
                -(t - m) / (s * s)
            })
            .collect())
    }

    /// Posterior-collapse summary: the mean re-centered around a reference
    /// value, and the average standard deviation across dimensions.
    pub fn collapse_metrics(&self, theta_star: &[f64]) -> Result<(Vec<f64>, f64)> {
        if theta_star.len() != self.dim() {
            return Err(GviError::dims(self.dim(), theta_star.len()));
        }
        let recentered = self
            .mu
            .iter()
            .zip(theta_star.iter())
            .map(|(m, t)| m - t)
            .collect();
        let mean_sigma = self.sigma().iter().sum::<f64>() / self.dim() as f64;
        Ok((recentered, mean_sigma))
    }
}

/// Mixture of `K` mean-field normals with unnormalized component weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    components: Vec<MeanFieldNormal>,
    logits: Vec<f64>,
}

impl NormalMixture {
    pub fn new(components: Vec<MeanFieldNormal>, logits: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(GviError::InvalidSpec("mixture needs K >= 1".into()));
        }
        if components.len() != logits.len() {
            return Err(GviError::dims(components.len(), logits.len()));
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(GviError::InvalidSpec(
                "mixture components must share a dimension".into(),
            ));
        }
        Ok(Self { components, logits })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[MeanFieldNormal] {
        &self.components
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Softmax of the logits. Sums to one up to rounding.
    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    /// Mixture log density via log-sum-exp over components.
    pub fn log_pdf(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(GviError::dims(self.dim(), theta.len()));
        }
        let w = self.weights();
        let mut terms = Vec::with_capacity(self.k());
        for (c, wk) in self.components.iter().zip(w.iter()) {
            terms.push(wk.ln() + c.log_pdf(theta)?);
        }
        Ok(log_sum_exp(&terms))
    }
}

/// Per-observation Bernoulli posterior over two-valued latent memberships.
/// `p_i = sigmoid(logit_p_i)` is the probability that observation `i`
/// belongs to component 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliLatentPosterior {
    logit_p: Vec<f64>,
}

impl BernoulliLatentPosterior {
    pub fn new(logit_p: Vec<f64>) -> Result<Self> {
        if logit_p.is_empty() {
            return Err(GviError::InvalidSpec(
                "latent posterior needs n >= 1 observations".into(),
            ));
        }
        if logit_p.iter().any(|v| !v.is_finite()) {
            return Err(GviError::InvalidSpec("latent logits must be finite".into()));
        }
        Ok(Self { logit_p })
    }

    /// Neutral posterior: every membership probability 1/2.
    pub fn neutral(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.logit_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logit_p.is_empty()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logit_p
    }

    /// Membership probabilities, each strictly inside (0, 1). Saturated
    /// logits are pulled off the endpoints so enumeration weights never
    /// degenerate to exact point masses.
    pub fn probs(&self) -> Vec<f64> {
        self.logit_p
            .iter()
            .map(|l| sigmoid(*l).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
            .collect()
    }
}

/// Lower clamp for Bernoulli membership probabilities (and one minus it for
/// the upper end).
pub const PROB_FLOOR: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}
