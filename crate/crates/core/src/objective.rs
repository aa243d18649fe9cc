//! Assembly of the scaled GVI objective
//! `F(q) = E_q[(1/n) Σ_i ℓ̄(θ, x_i)] + (1/n) D(q ‖ π)` and its
//! reparameterized Monte-Carlo estimator.
//!
//! `ℓ̄` enumerates two-valued latent memberships exactly via per-observation
//! Bernoulli weights, so no variance enters through `z`. The divergence term
//! is always closed form. Sample `s` of an estimate draws its noise from the
//! substream `(seed, s)`, which makes estimates deterministic given the seed
//! and lets finite-difference checks use common random numbers.
//!
//! Two structural optimizations keep large-`n` estimates cheap and change
//! nothing about the estimator's value: the regression loss is evaluated
//! through its Gram sufficient statistics, and the mixture NLL through
//! latent-weighted first and second moments.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::divergence::{evaluate_with_grad, DivergenceSpec};
use crate::error::{GviError, Result};
use crate::family::{sigmoid, softmax, BernoulliLatentPosterior, MeanFieldNormal, LN_2PI};
use crate::loss::{BlrDatum, BmmDatum, LossKind, LossSpec, BLR_REGRESSORS, BLR_THETA_DIM};
use crate::optim::StochasticObjective;
use crate::seed::stream_rng;

/// Variational family the posterior is searched over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    MeanFieldNormal,
    NormalMixture { k: usize },
}

impl FamilyKind {
    pub fn component_count(&self) -> usize {
        match self {
            FamilyKind::MeanFieldNormal => 1,
            FamilyKind::NormalMixture { k } => *k,
        }
    }
}

/// Observations of a GVI problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Blr(Vec<BlrDatum>),
    Bmm(Vec<BmmDatum>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Blr(d) => d.len(),
            Dataset::Bmm(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter layout of a problem:
/// `[mu_0, log_sigma_0, .., mu_{K-1}, log_sigma_{K-1}, logits(K if K>1), latent logits(n if latents)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub theta_dim: usize,
    pub components: usize,
    pub latents: usize,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        let logits = if self.components > 1 { self.components } else { 0 };
        self.components * 2 * self.theta_dim + logits + self.latents
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component_mu<'a>(&self, params: &'a [f64], k: usize) -> &'a [f64] {
        let base = k * 2 * self.theta_dim;
        &params[base..base + self.theta_dim]
    }

    pub fn component_log_sigma<'a>(&self, params: &'a [f64], k: usize) -> &'a [f64] {
        let base = k * 2 * self.theta_dim + self.theta_dim;
        &params[base..base + self.theta_dim]
    }

    pub fn logits<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        if self.components > 1 {
            let base = self.components * 2 * self.theta_dim;
            &params[base..base + self.components]
        } else {
            &[]
        }
    }

    pub fn latent_logits<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.len() - self.latents..]
    }

    fn mu_range(&self, k: usize) -> std::ops::Range<usize> {
        let base = k * 2 * self.theta_dim;
        base..base + self.theta_dim
    }

    fn log_sigma_range(&self, k: usize) -> std::ops::Range<usize> {
        let base = k * 2 * self.theta_dim + self.theta_dim;
        base..base + self.theta_dim
    }

    fn logits_start(&self) -> usize {
        self.components * 2 * self.theta_dim
    }

    fn latents_start(&self) -> usize {
        self.len() - self.latents
    }
}

/// Value and gradient of one Monte-Carlo estimate of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEstimate {
    pub value: f64,
    pub grad: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
}

/// Fitted variational state unpacked from a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPosterior {
    pub components: Vec<MeanFieldNormal>,
    pub weights: Vec<f64>,
    pub z_posterior: Option<BernoulliLatentPosterior>,
}

impl FittedPosterior {
    /// The dominant component; the posterior itself when the family is
    /// mean-field normal.
    pub fn primary(&self) -> &MeanFieldNormal {
        let (idx, _) = self
            .weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, w)| {
                if *w > acc.1 {
                    (i, *w)
                } else {
                    acc
                }
            });
        &self.components[idx]
    }
}

/// Gram sufficient statistics for the regression loss: with
/// `A = X'X/n`, `b = X'y/n`, `c = y'y/n`, the mean squared residual is
/// `β'Aβ − 2 b'β + c` for any `β`.
#[derive(Debug, Clone, PartialEq)]
struct BlrGram {
    a: Vec<f64>, // row-major 20x20
    b: Vec<f64>,
    c: f64,
}

impl BlrGram {
    fn build(data: &[BlrDatum]) -> Result<Self> {
        let p = BLR_REGRESSORS;
        let n = data.len() as f64;
        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut c = 0.0;
        for r in data {
            if r.x_tilde.len() != p {
                return Err(GviError::dims(p, r.x_tilde.len()));
            }
            c += r.y * r.y;
            for i in 0..p {
                b[i] += r.x_tilde[i] * r.y;
                for j in i..p {
                    a[i * p + j] += r.x_tilde[i] * r.x_tilde[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[i * p + j] = a[j * p + i];
            }
        }
        for v in a.iter_mut() {
            *v /= n;
        }
        for v in b.iter_mut() {
            *v /= n;
        }
        Ok(Self { a, b, c: c / n })
    }

    /// Mean loss `(1/n) Σ_i ℓ(θ, x_i)` and its θ-gradient.
    fn mean_loss(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let p = BLR_REGRESSORS;
        let (beta, log_sigma2) = (&theta[..p], theta[p]);
        let sigma2 = log_sigma2.exp();
        let mut quad = self.c;
        for i in 0..p {
            let mut row = 0.0;
            for j in 0..p {
                row += self.a[i * p + j] * beta[j];
            }
            grad[i] = (row - self.b[i]) / sigma2;
            quad += beta[i] * row - 2.0 * self.b[i] * beta[i];
        }
        grad[p] = 0.5 - quad / (2.0 * sigma2);
        0.5 * (LN_2PI + log_sigma2) + quad / (2.0 * sigma2)
    }
}

/// Unweighted totals for the mixture data, reused to form latent-weighted
/// statistics each estimate call.
#[derive(Debug, Clone, PartialEq)]
struct BmmTotals {
    d: usize,
    sum_x: Vec<f64>,
    sum_xsq: f64,
}

impl BmmTotals {
    fn build(data: &[BmmDatum]) -> Result<Self> {
        let d = data[0].x.len();
        if d == 0 {
            return Err(GviError::InvalidSpec("bmm dimension must be >= 1".into()));
        }
        let mut sum_x = vec![0.0; d];
        let mut sum_xsq = 0.0;
        for r in data {
            if r.x.len() != d {
                return Err(GviError::dims(d, r.x.len()));
            }
            for j in 0..d {
                sum_x[j] += r.x[j];
                sum_xsq += r.x[j] * r.x[j];
            }
        }
        Ok(Self { d, sum_x, sum_xsq })
    }
}

/// Latent-weighted moments: `w1 = Σ w_i`, `s1 = Σ w_i x_i`,
/// `t1 = Σ w_i ‖x_i‖²`, with complements from the totals.
struct WeightedStats {
    w1: f64,
    s1: Vec<f64>,
    t1: f64,
    w2: f64,
    s2: Vec<f64>,
    t2: f64,
}

impl WeightedStats {
    fn build(data: &[BmmDatum], w: &[f64], totals: &BmmTotals) -> Self {
        let d = totals.d;
        let mut w1 = 0.0;
        let mut s1 = vec![0.0; d];
        let mut t1 = 0.0;
        for (r, wi) in data.iter().zip(w.iter()) {
            w1 += wi;
            for j in 0..d {
                s1[j] += wi * r.x[j];
                t1 += wi * r.x[j] * r.x[j];
            }
        }
        let n = data.len() as f64;
        let s2 = totals
            .sum_x
            .iter()
            .zip(s1.iter())
            .map(|(t, a)| t - a)
            .collect();
        WeightedStats {
            w1,
            t1,
            w2: n - w1,
            s2,
            t2: totals.sum_xsq - t1,
            s1,
        }
    }

    /// Mean mixture NLL under the weights, plus θ-gradient.
    fn mean_loss(&self, theta: &[f64], n: f64, grad: &mut [f64]) -> f64 {
        let d = self.s1.len();
        let (mu1, mu2) = (&theta[..d], &theta[d..]);
        let mut quad = self.t1 + self.t2;
        for j in 0..d {
            quad += self.w1 * mu1[j] * mu1[j] - 2.0 * mu1[j] * self.s1[j];
            quad += self.w2 * mu2[j] * mu2[j] - 2.0 * mu2[j] * self.s2[j];
            grad[j] = (self.w1 * mu1[j] - self.s1[j]) / n;
            grad[d + j] = (self.w2 * mu2[j] - self.s2[j]) / n;
        }
        0.5 * d as f64 * LN_2PI + quad / (2.0 * n)
    }
}

/// A Rule-of-Three problem: data, loss, divergence, prior and family.
#[derive(Debug, Clone)]
pub struct GviProblem {
    data: Dataset,
    loss: LossSpec,
    divergence: DivergenceSpec,
    prior: MeanFieldNormal,
    family: FamilyKind,
    blr_gram: Option<BlrGram>,
    bmm_totals: Option<BmmTotals>,
}

impl GviProblem {
    pub fn new(
        data: Dataset,
        loss: LossSpec,
        divergence: DivergenceSpec,
        prior: MeanFieldNormal,
        family: FamilyKind,
    ) -> Result<Self> {
        loss.validate()?;
        divergence.validate()?;
        if data.is_empty() {
            return Err(GviError::EmptyDataset);
        }
        if family.component_count() == 0 {
            return Err(GviError::InvalidSpec("mixture needs K >= 1".into()));
        }
        let (blr_gram, bmm_totals, theta_dim) = match (&data, loss.kind) {
            (Dataset::Blr(d), LossKind::BlrNll) => {
                (Some(BlrGram::build(d)?), None, BLR_THETA_DIM)
            }
            (Dataset::Bmm(d), LossKind::BmmNll | LossKind::BmmGammaScore) => {
                let totals = BmmTotals::build(d)?;
                let dim = 2 * totals.d;
                (None, Some(totals), dim)
            }
            _ => {
                return Err(GviError::InvalidSpec(
                    "loss kind does not match the dataset".into(),
                ))
            }
        };
        if prior.dim() != theta_dim {
            return Err(GviError::dims(theta_dim, prior.dim()));
        }
        Ok(Self {
            data,
            loss,
            divergence,
            prior,
            family,
            blr_gram,
            bmm_totals,
        })
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn theta_dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn divergence(&self) -> &DivergenceSpec {
        &self.divergence
    }

    pub fn prior(&self) -> &MeanFieldNormal {
        &self.prior
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    /// Latents exist exactly when the loss is a mixture loss.
    pub fn has_latents(&self) -> bool {
        self.loss.kind.is_bmm()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            theta_dim: self.theta_dim(),
            components: self.family.component_count(),
            latents: if self.has_latents() { self.n() } else { 0 },
        }
    }

    /// Neutral initialization: zero means, unit scales, uniform component
    /// weights, indifferent latent memberships.
    pub fn default_init(&self) -> Vec<f64> {
        vec![0.0; self.layout().len()]
    }

    /// Unpack a flat parameter vector into family components, weights and
    /// the latent posterior.
    pub fn unpack(&self, params: &[f64]) -> Result<FittedPosterior> {
        let layout = self.layout();
        if params.len() != layout.len() {
            return Err(GviError::dims(layout.len(), params.len()));
        }
        let mut components = Vec::with_capacity(layout.components);
        for k in 0..layout.components {
            components.push(MeanFieldNormal::new(
                layout.component_mu(params, k).to_vec(),
                layout.component_log_sigma(params, k).to_vec(),
            )?);
        }
        let weights = if layout.components > 1 {
            softmax(layout.logits(params))
        } else {
            vec![1.0]
        };
        let z_posterior = if layout.latents > 0 {
            Some(BernoulliLatentPosterior::new(
                layout.latent_logits(params).to_vec(),
            )?)
        } else {
            None
        };
        Ok(FittedPosterior {
            components,
            weights,
            z_posterior,
        })
    }

    /// One Monte-Carlo estimate of objective value and full gradient.
    pub fn estimate(
        &self,
        params: &[f64],
        mc_samples: usize,
        seed: u64,
    ) -> Result<ObjectiveEstimate> {
        if mc_samples == 0 {
            return Err(GviError::InvalidSpec("mc_samples must be >= 1".into()));
        }
        let layout = self.layout();
        if params.len() != layout.len() {
            return Err(GviError::dims(layout.len(), params.len()));
        }
        let n = self.n() as f64;
        let td = layout.theta_dim;
        let k = layout.components;
        let weights = if k > 1 {
            softmax(layout.logits(params))
        } else {
            vec![1.0]
        };
        let latent_w: Vec<f64> = layout
            .latent_logits(params)
            .iter()
            .map(|l| sigmoid(*l))
            .collect();

        let mut value = 0.0;
        let mut grad = vec![0.0; layout.len()];

        // Latent-weighted moments are shared across samples and components.
        let weighted = match (&self.data, self.loss.kind) {
            (Dataset::Bmm(d), LossKind::BmmNll) => Some(WeightedStats::build(
                d,
                &latent_w,
                self.bmm_totals.as_ref().unwrap(),
            )),
            _ => None,
        };

        // Accumulators feeding the latent gradient after the sample loop.
        // For the NLL the loss gap is affine in x_i, so sample-averaged
        // coefficients suffice; the gamma score needs a per-datum buffer.
        let mut gap_delta = vec![0.0; if weighted.is_some() { td / 2 } else { 0 }];
        let mut gap_const = 0.0;
        let mut gap_acc = vec![
            0.0;
            if layout.latents > 0 && matches!(self.loss.kind, LossKind::BmmGammaScore) {
                layout.latents
            } else {
                0
            }
        ];

        let inv_s = 1.0 / mc_samples as f64;
        let mut noise = vec![0.0; td];
        let mut theta = vec![0.0; td];
        let mut grad_theta = vec![0.0; td];
        let mut comp_losses = vec![0.0; k];

        for s in 0..mc_samples {
            let mut rng = stream_rng(seed, 1 + s as u64);
            for e in noise.iter_mut() {
                *e = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
            for c in 0..k {
                let mu = layout.component_mu(params, c);
                let ls = layout.component_log_sigma(params, c);
                for j in 0..td {
                    theta[j] = mu[j] + ls[j].exp() * noise[j];
                }
                let wk = weights[c];
                let loss_value = match self.loss.kind {
                    LossKind::BlrNll => self
                        .blr_gram
                        .as_ref()
                        .unwrap()
                        .mean_loss(&theta, &mut grad_theta),
                    LossKind::BmmNll => {
                        let stats = weighted.as_ref().unwrap();
                        let v = stats.mean_loss(&theta, n, &mut grad_theta);
                        // gap ℓ₁ − ℓ₂ = x·(μ² − μ¹) + ½(‖μ¹‖² − ‖μ²‖²)
                        let d = td / 2;
                        let mut h = 0.0;
                        for j in 0..d {
                            gap_delta[j] += wk * inv_s * (theta[d + j] - theta[j]);
                            h += 0.5 * (theta[j] * theta[j] - theta[d + j] * theta[d + j]);
                        }
                        gap_const += wk * inv_s * h;
                        v
                    }
                    LossKind::BmmGammaScore => self.mean_loss_bmm_gamma(
                        &theta,
                        &latent_w,
                        &mut grad_theta,
                        &mut gap_acc,
                        wk * inv_s,
                    )?,
                };
                comp_losses[c] = loss_value;
                value += wk * inv_s * loss_value;
                let scale = wk * inv_s;
                let mu_range = layout.mu_range(c);
                let ls_range = layout.log_sigma_range(c);
                let ls = layout.component_log_sigma(params, c).to_vec();
                for j in 0..td {
                    grad[mu_range.start + j] += scale * grad_theta[j];
                    grad[ls_range.start + j] += scale * grad_theta[j] * ls[j].exp() * noise[j];
                }
            }
            if k > 1 {
                let mixture_mean: f64 = weights
                    .iter()
                    .zip(comp_losses.iter())
                    .map(|(w, l)| w * l)
                    .sum();
                let base = layout.logits_start();
                for c in 0..k {
                    grad[base + c] += inv_s * weights[c] * (comp_losses[c] - mixture_mean);
                }
            }
        }

        // Latent gradient from the accumulated loss gaps.
        if layout.latents > 0 {
            let base = layout.latents_start();
            match (&self.data, self.loss.kind) {
                (Dataset::Bmm(d), LossKind::BmmNll) => {
                    for (i, r) in d.iter().enumerate() {
                        let gap: f64 = r
                            .x
                            .iter()
                            .zip(gap_delta.iter())
                            .map(|(x, g)| x * g)
                            .sum::<f64>()
                            + gap_const;
                        grad[base + i] = gap * latent_w[i] * (1.0 - latent_w[i]) / n;
                    }
                }
                (_, LossKind::BmmGammaScore) => {
                    for i in 0..layout.latents {
                        grad[base + i] = gap_acc[i] * latent_w[i] * (1.0 - latent_w[i]) / n;
                    }
                }
                _ => {}
            }
        }

        // Closed-form divergence term at weight 1/n.
        let mut div_values = vec![0.0; k];
        for c in 0..k {
            let q = MeanFieldNormal::new(
                layout.component_mu(params, c).to_vec(),
                layout.component_log_sigma(params, c).to_vec(),
            )?;
            let eval = evaluate_with_grad(&self.divergence, &q, &self.prior)?;
            div_values[c] = eval.value;
            let wk = weights[c];
            value += wk * eval.value / n;
            let mu_range = layout.mu_range(c);
            let ls_range = layout.log_sigma_range(c);
            for j in 0..td {
                grad[mu_range.start + j] += wk * eval.grad_mu[j] / n;
                grad[ls_range.start + j] += wk * eval.grad_log_sigma[j] / n;
            }
        }
        if k > 1 {
            let mixture_mean: f64 = weights
                .iter()
                .zip(div_values.iter())
                .map(|(w, d)| w * d)
                .sum();
            let base = layout.logits_start();
            for c in 0..k {
                grad[base + c] += weights[c] * (div_values[c] - mixture_mean) / n;
            }
        }

        Ok(ObjectiveEstimate {
            value,
            grad,
            mc_samples,
            seed,
        })
    }

    /// Mean gamma-score loss over the data at fixed θ, with gradient and
    /// latent gap accumulation. Allocation-free inner loop; agreement with
    /// [`bmm_gamma_score`] is pinned by a unit test.
    fn mean_loss_bmm_gamma(
        &self,
        theta: &[f64],
        latent_w: &[f64],
        grad_theta: &mut [f64],
        gap_acc: &mut [f64],
        gap_weight: f64,
    ) -> Result<f64> {
        let data = match &self.data {
            Dataset::Bmm(d) => d,
            _ => unreachable!("gamma score requires mixture data"),
        };
        let gamma = self.loss.gamma.unwrap();
        let d = theta.len() / 2;
        let n = data.len() as f64;
        let norm = crate::loss::gamma_norm_gaussian(gamma, d, 1.0)?;
        let c = gamma / (gamma - 1.0) * norm.powf((gamma - 1.0) / gamma);
        let log_base = -0.5 * d as f64 * LN_2PI;
        grad_theta.iter_mut().for_each(|g| *g = 0.0);
        let mut acc = 0.0;
        for (i, r) in data.iter().enumerate() {
            let w = latent_w[i];
            let mut sq1 = 0.0;
            let mut sq2 = 0.0;
            for j in 0..d {
                let r1 = r.x[j] - theta[j];
                let r2 = r.x[j] - theta[d + j];
                sq1 += r1 * r1;
                sq2 += r2 * r2;
            }
            let p1 = ((gamma - 1.0) * (log_base - 0.5 * sq1)).exp();
            let p2 = ((gamma - 1.0) * (log_base - 0.5 * sq2)).exp();
            let (l1, l2) = (-c * p1, -c * p2);
            acc += w * l1 + (1.0 - w) * l2;
            for j in 0..d {
                grad_theta[j] += -w * c * (gamma - 1.0) * p1 * (r.x[j] - theta[j]) / n;
                grad_theta[d + j] +=
                    -(1.0 - w) * c * (gamma - 1.0) * p2 * (r.x[j] - theta[d + j]) / n;
            }
            if !gap_acc.is_empty() {
                gap_acc[i] += gap_weight * (l1 - l2);
            }
        }
        Ok(acc / n)
    }
}

impl StochasticObjective for GviProblem {
    fn param_len(&self) -> usize {
        self.layout().len()
    }

    fn estimate(&self, params: &[f64], mc_samples: usize, seed: u64) -> Result<ObjectiveEstimate> {
        GviProblem::estimate(self, params, mc_samples, seed)
    }
}

/// Divergence-only objective: the zero-loss stub. Minimizing it must drive
/// `q` back onto the prior, a useful end-to-end sanity check of the
/// divergence gradients and the optimizer.
#[derive(Debug, Clone)]
pub struct ZeroLossObjective {
    pub divergence: DivergenceSpec,
    pub prior: MeanFieldNormal,
    pub n: usize,
}

impl ZeroLossObjective {
    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            theta_dim: self.prior.dim(),
            components: 1,
            latents: 0,
        }
    }
}

impl StochasticObjective for ZeroLossObjective {
    fn param_len(&self) -> usize {
        self.layout().len()
    }

    fn estimate(&self, params: &[f64], mc_samples: usize, seed: u64) -> Result<ObjectiveEstimate> {
        let layout = self.layout();
        if params.len() != layout.len() {
            return Err(GviError::dims(layout.len(), params.len()));
        }
        let td = layout.theta_dim;
        let q = MeanFieldNormal::new(params[..td].to_vec(), params[td..].to_vec())?;
        let eval = evaluate_with_grad(&self.divergence, &q, &self.prior)?;
        let n = self.n as f64;
        let mut grad = vec![0.0; layout.len()];
        for j in 0..td {
            grad[j] = eval.grad_mu[j] / n;
            grad[td + j] = eval.grad_log_sigma[j] / n;
        }
        Ok(ObjectiveEstimate {
            value: eval.value / n,
            grad,
            mc_samples,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_blr, generate_bmm, BlrDesign, BmmDesign};
    use crate::gradcheck::{central_difference, max_relative_error};
    use crate::loss::blr_nll;

    fn blr_problem(n: usize, seed: u64) -> GviProblem {
        let data = generate_blr(&BlrDesign::new(n, seed).unwrap());
        GviProblem::new(
            Dataset::Blr(data),
            LossSpec::blr_nll(),
            DivergenceSpec::kld(),
            MeanFieldNormal::isotropic(BLR_THETA_DIM, 0.0, 10.0).unwrap(),
            FamilyKind::MeanFieldNormal,
        )
        .unwrap()
    }

    fn bmm_problem(n: usize, d: usize, loss: LossSpec, seed: u64) -> GviProblem {
        let data = generate_bmm(&BmmDesign::new(n, d, false, seed).unwrap());
        GviProblem::new(
            Dataset::Bmm(data),
            loss,
            DivergenceSpec::kld(),
            MeanFieldNormal::isotropic(2 * d, 0.0, 10.0_f64.sqrt()).unwrap(),
            FamilyKind::MeanFieldNormal,
        )
        .unwrap()
    }

    #[test]
    fn zero_loss_stub_reduces_to_divergence_term() {
        let prior = MeanFieldNormal::isotropic(3, 0.5, 2.0).unwrap();
        let stub = ZeroLossObjective {
            divergence: DivergenceSpec::kld(),
            prior: prior.clone(),
            n: 10,
        };
        let params = vec![0.1, -0.2, 0.3, 0.0, 0.1, -0.1];
        let est = StochasticObjective::estimate(&stub, &params, 1, 0).unwrap();
        let q = MeanFieldNormal::new(params[..3].to_vec(), params[3..].to_vec()).unwrap();
        let expect = crate::divergence::kld_mfn(&q, &prior).unwrap() / 10.0;
        assert_eq!(est.value, expect);
    }

    #[test]
    fn point_like_q_recovers_direct_loss_summation() {
        let problem = blr_problem(200, 17);
        let layout = problem.layout();
        let mut params = vec![0.0; layout.len()];
        // point mass at a nonzero theta-hat
        let theta_hat: Vec<f64> = (0..BLR_THETA_DIM).map(|j| 0.1 * j as f64 - 1.0).collect();
        params[..BLR_THETA_DIM].copy_from_slice(&theta_hat);
        for ls in params[BLR_THETA_DIM..2 * BLR_THETA_DIM].iter_mut() {
            *ls = 1e-8_f64.ln();
        }
        let est = problem.estimate(&params, 4, 3).unwrap();

        // direct summation oracle over the raw data
        let data = match &problem.data {
            Dataset::Blr(d) => d,
            _ => unreachable!(),
        };
        let direct: f64 = data
            .iter()
            .map(|r| blr_nll(&theta_hat, r).unwrap().value)
            .sum::<f64>()
            / data.len() as f64;
        let q = MeanFieldNormal::new(
            params[..BLR_THETA_DIM].to_vec(),
            params[BLR_THETA_DIM..2 * BLR_THETA_DIM].to_vec(),
        )
        .unwrap();
        let dterm =
            crate::divergence::kld_mfn(&q, problem.prior()).unwrap() / problem.n() as f64;
        assert!(
            (est.value - dterm - direct).abs() < 1e-4,
            "estimate {} vs direct {direct}",
            est.value - dterm
        );
    }

    #[test]
    fn estimate_is_deterministic_given_seed() {
        let problem = bmm_problem(40, 2, LossSpec::bmm_nll(), 5);
        let params = problem.default_init();
        let a = problem.estimate(&params, 16, 99).unwrap();
        let b = problem.estimate(&params, 16, 99).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.grad, b.grad);
        let c = problem.estimate(&params, 16, 100).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let out = GviProblem::new(
            Dataset::Blr(vec![]),
            LossSpec::blr_nll(),
            DivergenceSpec::kld(),
            MeanFieldNormal::isotropic(BLR_THETA_DIM, 0.0, 10.0).unwrap(),
            FamilyKind::MeanFieldNormal,
        );
        assert!(matches!(out, Err(GviError::EmptyDataset)));
    }

    #[test]
    fn gradient_matches_common_random_number_finite_differences() {
        // 5-dimensional toys: BLR is exercised through a small mixture too.
        let problem = bmm_problem(15, 2, LossSpec::bmm_nll(), 23);
        check_gradient(&problem, 0.6);

        let gamma = bmm_problem(12, 1, LossSpec::bmm_gamma(1.3).unwrap(), 29);
        check_gradient(&gamma, 0.4);

        let blr = blr_problem(30, 31);
        check_gradient(&blr, 0.3);

        let mix = GviProblem::new(
            Dataset::Bmm(generate_bmm(&BmmDesign::new(10, 1, false, 41).unwrap())),
            LossSpec::bmm_nll(),
            DivergenceSpec::renyi(0.5).unwrap(),
            MeanFieldNormal::isotropic(2, 0.0, 2.0).unwrap(),
            FamilyKind::NormalMixture { k: 2 },
        )
        .unwrap();
        check_gradient(&mix, 0.5);
    }

    fn check_gradient(problem: &GviProblem, spread: f64) {
        let layout = problem.layout();
        let mut rng = crate::seed::stream_rng(7, 0);
        use rand::Rng;
        let params: Vec<f64> = (0..layout.len())
            .map(|_| rng.gen_range(-spread..spread))
            .collect();
        let s = 6;
        let seed = 11;
        let est = problem.estimate(&params, s, seed).unwrap();
        let numeric = central_difference(
            |x| problem.estimate(x, s, seed).unwrap().value,
            &params,
            1e-5,
        );
        let err = max_relative_error(&est.grad, &numeric);
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn estimate_variance_shrinks_at_root_s() {
        let problem = blr_problem(50, 3);
        let mut params = problem.default_init();
        params[0] = 1.0; // away from the optimum so the loss term has spread
        let sd_at = |s: usize| {
            let vals: Vec<f64> = (0..200)
                .map(|seed| problem.estimate(&params, s, seed as u64).unwrap().value)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64)
                .sqrt()
        };
        let ratios: Vec<f64> = [25usize, 50, 100]
            .iter()
            .map(|&s| sd_at(2 * s) / sd_at(s))
            .collect();
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(
            (0.6..=0.85).contains(&mean_ratio),
            "mean sd ratio {mean_ratio} (per-level {ratios:?})"
        );
    }

    #[test]
    fn gamma_fast_path_matches_per_datum_loss() {
        use crate::loss::{bmm_gamma_score, bmm_latent_expectation};
        let gamma = 1.3;
        let problem = bmm_problem(25, 2, LossSpec::bmm_gamma(gamma).unwrap(), 77);
        let data = match &problem.data {
            Dataset::Bmm(d) => d.clone(),
            _ => unreachable!(),
        };
        let theta = [0.8, -0.4, 1.1, 0.2];
        let latent_w = vec![0.3; data.len()];
        let mut grad = vec![0.0; 4];
        let mut gap = vec![0.0; data.len()];
        let fast = problem
            .mean_loss_bmm_gamma(&theta, &latent_w, &mut grad, &mut gap, 1.0)
            .unwrap();

        let spec = LossSpec::bmm_gamma(gamma).unwrap();
        let mut slow = 0.0;
        let mut slow_grad = vec![0.0; 4];
        for (i, r) in data.iter().enumerate() {
            let (l, g) = bmm_latent_expectation(&spec, &theta, &r.x, latent_w[i]).unwrap();
            slow += l.value / data.len() as f64;
            for j in 0..4 {
                slow_grad[j] += l.grad_theta[j] / data.len() as f64;
            }
            let l1 = bmm_gamma_score(&theta, &r.x, 1, gamma).unwrap().value;
            let l2 = bmm_gamma_score(&theta, &r.x, 2, gamma).unwrap().value;
            assert!((gap[i] - (l1 - l2)).abs() < 1e-12);
        }
        assert!((fast - slow).abs() < 1e-12);
        for j in 0..4 {
            assert!((grad[j] - slow_grad[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_layout_roundtrip() {
        let problem = GviProblem::new(
            Dataset::Bmm(generate_bmm(&BmmDesign::new(8, 1, false, 2).unwrap())),
            LossSpec::bmm_nll(),
            DivergenceSpec::kld(),
            MeanFieldNormal::isotropic(2, 0.0, 1.0).unwrap(),
            FamilyKind::NormalMixture { k: 2 },
        )
        .unwrap();
        let layout = problem.layout();
        // 2 components * 2 * 2 params + 2 logits + 8 latents
        assert_eq!(layout.len(), 8 + 2 + 8);
        let fitted = problem.unpack(&problem.default_init()).unwrap();
        assert_eq!(fitted.components.len(), 2);
        assert_eq!(fitted.weights, vec![0.5, 0.5]);
        assert_eq!(fitted.z_posterior.unwrap().probs(), vec![0.5; 8]);
    }
}
