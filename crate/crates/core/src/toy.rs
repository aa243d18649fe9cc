//! The 1-D conjugate Gaussian-mean toy model.
//!
//! Observations are `x ~ μ` with population mean `m*` and variance `v*`;
//! the loss is the negative log likelihood of `N(x | θ, σ²)` with known
//! model variance. Everything of interest is closed form here:
//!
//! * the population expected loss
//!   `E_μ[ℓ(θ, x)] = ½ ln(2π σ²) + ((θ − m*)² + v*) / (2σ²)`,
//! * the auxiliary deterministic objective
//!   `F̄_n(q) = E_q[E_μ[ℓ]] + (1/n) D(q ‖ π)` via
//!   `E_q[(θ − m*)²] = (μ_q − m*)² + σ_q²`,
//! * with the KLD, the exact conjugate posterior,
//! * the gap diagnostic
//!   `ε_n = 2 | E_{q̄_n}[ (1/n) Σ_i ℓ(θ, x_i) − E_μ[ℓ(θ, x)] ] |`,
//!   in which the quadratic θ-terms cancel so only sample moments enter.
//!
//! This model exists to diagnose the machinery: the stochastic estimator,
//! optimizer and sweep runners can all be checked against exact answers.

use crate::divergence::{evaluate_with_grad, DivergenceSpec};
use crate::error::{GviError, Result};
use crate::family::{MeanFieldNormal, LN_2PI};
use crate::objective::ObjectiveEstimate;
use crate::optim::{fit, OptimConfig, StochasticObjective};
use crate::seed::stream_rng;
use rand_distr::{Distribution, StandardNormal};

/// Toy model definition: population moments, model variance, 1-D prior and
/// the divergence regularizing the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyGaussianMean {
    pub m_star: f64,
    pub v_star: f64,
    pub model_sigma2: f64,
    pub prior: MeanFieldNormal,
    pub divergence: DivergenceSpec,
}

impl ToyGaussianMean {
    pub fn new(
        m_star: f64,
        v_star: f64,
        model_sigma2: f64,
        prior_mean: f64,
        prior_sd: f64,
        divergence: DivergenceSpec,
    ) -> Result<Self> {
        if v_star <= 0.0 || model_sigma2 <= 0.0 {
            return Err(GviError::InvalidSpec(
                "variances must be positive".into(),
            ));
        }
        divergence.validate()?;
        Ok(Self {
            m_star,
            v_star,
            model_sigma2,
            prior: MeanFieldNormal::isotropic(1, prior_mean, prior_sd)?,
            divergence,
        })
    }

    /// `E_q[E_μ[ℓ(θ, x)]]` for Gaussian `q`, in closed form.
    pub fn population_term(&self, mu_q: f64, sigma_q: f64) -> f64 {
        let s2 = self.model_sigma2;
        0.5 * (LN_2PI + s2.ln())
            + ((mu_q - self.m_star).powi(2) + sigma_q * sigma_q + self.v_star) / (2.0 * s2)
    }

    /// The deterministic auxiliary objective `F̄_n(q)` at
    /// `q = N(μ_q, exp(2 log σ_q))`.
    pub fn deterministic_objective(&self, q_params: &[f64], n: usize) -> Result<f64> {
        if q_params.len() != 2 {
            return Err(GviError::dims(2, q_params.len()));
        }
        if n == 0 {
            return Err(GviError::InvalidSpec("n must be >= 1".into()));
        }
        let q = MeanFieldNormal::new(vec![q_params[0]], vec![q_params[1]])?;
        let dterm = crate::divergence::evaluate(&self.divergence, &q, &self.prior)?;
        Ok(self.population_term(q_params[0], q.sigma()[0]) + dterm / n as f64)
    }

    /// Exact gradient of the deterministic objective in `(μ_q, log σ_q)`.
    pub fn deterministic_gradient(&self, q_params: &[f64], n: usize) -> Result<Vec<f64>> {
        if q_params.len() != 2 {
            return Err(GviError::dims(2, q_params.len()));
        }
        let q = MeanFieldNormal::new(vec![q_params[0]], vec![q_params[1]])?;
        let sigma_q = q.sigma()[0];
        let s2 = self.model_sigma2;
        let eval = evaluate_with_grad(&self.divergence, &q, &self.prior)?;
        let nf = n as f64;
        Ok(vec![
            (q_params[0] - self.m_star) / s2 + eval.grad_mu[0] / nf,
            sigma_q * sigma_q / s2 + eval.grad_log_sigma[0] / nf,
        ])
    }

    /// Minimizer `q̄_n` of the deterministic objective, found with Adam on
    /// the exact gradients (no Monte-Carlo noise enters).
    pub fn minimize_deterministic(&self, n: usize, config: &OptimConfig) -> Result<FitOutcome> {
        let objective = DeterministicToyObjective { toy: self, n };
        let result = fit(&objective, &[0.0, 0.0], config)?;
        Ok(FitOutcome {
            mu: result.params[0],
            sigma: result.params[1].exp(),
            objective: result.final_objective,
        })
    }

    /// With the KLD the minimizer of `F̄_n` is available exactly; used as an
    /// oracle on the Adam route.
    pub fn deterministic_minimizer_kld(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let s2 = self.model_sigma2;
        let prior_var = self.prior.sigma()[0].powi(2);
        let prec = 1.0 / s2 + 1.0 / (nf * prior_var);
        let mu = (self.m_star / s2 + self.prior.mu()[0] / (nf * prior_var)) / prec;
        let var = (1.0 / nf) / prec;
        (mu, var.sqrt())
    }

    /// Exact Bayesian conjugate posterior `(mean, sd)` given data; the KLD
    /// GVI posterior over the mean-field family coincides with it.
    pub fn conjugate_posterior(&self, data: &[f64]) -> (f64, f64) {
        let n = data.len() as f64;
        let s2 = self.model_sigma2;
        let prior_var = self.prior.sigma()[0].powi(2);
        let prec = n / s2 + 1.0 / prior_var;
        let mean = (data.iter().sum::<f64>() / s2 + self.prior.mu()[0] / prior_var) / prec;
        (mean, (1.0 / prec).sqrt())
    }

    /// `ε_n` evaluated at a Gaussian `q̄_n` with mean `qbar_mu`. The inner
    /// bracket is affine in θ once expanded, so only the sample mean and
    /// second moment of the data appear:
    /// `ε_n = | (m̂₂ − m*² − v*) − 2 μ̄ (x̄ − m*) | / σ²`.
    pub fn epsilon_n(&self, data: &[f64], qbar_mu: f64) -> Result<f64> {
        if data.is_empty() {
            return Err(GviError::EmptyDataset);
        }
        let n = data.len() as f64;
        let xbar = data.iter().sum::<f64>() / n;
        let m2 = data.iter().map(|x| x * x).sum::<f64>() / n;
        let bracket =
            (m2 - self.m_star * self.m_star - self.v_star) - 2.0 * qbar_mu * (xbar - self.m_star);
        Ok((bracket / self.model_sigma2).abs())
    }

    /// Stochastic GVI problem over a dataset, fed to the generic optimizer.
    pub fn problem<'a>(&'a self, data: &'a [f64]) -> ToyProblem<'a> {
        let n = data.len() as f64;
        ToyProblem {
            toy: self,
            n: data.len(),
            xbar: data.iter().sum::<f64>() / n,
            m2: data.iter().map(|x| x * x).sum::<f64>() / n,
        }
    }
}

/// Condensed outcome of a deterministic minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOutcome {
    pub mu: f64,
    pub sigma: f64,
    pub objective: f64,
}

struct DeterministicToyObjective<'a> {
    toy: &'a ToyGaussianMean,
    n: usize,
}

impl StochasticObjective for DeterministicToyObjective<'_> {
    fn param_len(&self) -> usize {
        2
    }

    fn estimate(&self, params: &[f64], mc_samples: usize, seed: u64) -> Result<ObjectiveEstimate> {
        Ok(ObjectiveEstimate {
            value: self.toy.deterministic_objective(params, self.n)?,
            grad: self.toy.deterministic_gradient(params, self.n)?,
            mc_samples,
            seed,
        })
    }
}

/// The stochastic toy objective
/// `F̂(q) = (1/S) Σ_s (1/n) Σ_i ℓ(θ⁽ˢ⁾, x_i) + (1/n) D(q‖π)`, with the mean
/// loss collapsed onto the dataset's first two moments.
pub struct ToyProblem<'a> {
    toy: &'a ToyGaussianMean,
    n: usize,
    xbar: f64,
    m2: f64,
}

impl ToyProblem<'_> {
    /// Mean empirical loss at a fixed θ, `½ln(2πσ²) + (m̂₂ − 2θx̄ + θ²)/(2σ²)`.
    pub fn mean_loss(&self, theta: f64) -> f64 {
        let s2 = self.toy.model_sigma2;
        0.5 * (LN_2PI + s2.ln()) + (self.m2 - 2.0 * theta * self.xbar + theta * theta) / (2.0 * s2)
    }
}

impl StochasticObjective for ToyProblem<'_> {
    fn param_len(&self) -> usize {
        2
    }

    fn estimate(&self, params: &[f64], mc_samples: usize, seed: u64) -> Result<ObjectiveEstimate> {
        if params.len() != 2 {
            return Err(GviError::dims(2, params.len()));
        }
        if mc_samples == 0 {
            return Err(GviError::InvalidSpec("mc_samples must be >= 1".into()));
        }
        let q = MeanFieldNormal::new(vec![params[0]], vec![params[1]])?;
        let sigma = q.sigma()[0];
        let s2 = self.toy.model_sigma2;
        let nf = self.n as f64;

        let mut value = 0.0;
        let mut g_mu = 0.0;
        let mut g_ls = 0.0;
        let inv_s = 1.0 / mc_samples as f64;
        for s in 0..mc_samples {
            let mut rng = stream_rng(seed, 1 + s as u64);
            let eps: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            let theta = params[0] + sigma * eps;
            value += inv_s * self.mean_loss(theta);
            let dtheta = (theta - self.xbar) / s2;
            g_mu += inv_s * dtheta;
            g_ls += inv_s * dtheta * sigma * eps;
        }

        let eval = evaluate_with_grad(&self.toy.divergence, &q, &self.toy.prior)?;
        value += eval.value / nf;
        g_mu += eval.grad_mu[0] / nf;
        g_ls += eval.grad_log_sigma[0] / nf;

        Ok(ObjectiveEstimate {
            value,
            grad: vec![g_mu, g_ls],
            mc_samples,
            seed,
        })
    }
}
