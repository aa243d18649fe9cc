//! Loss functions `ℓ(θ, x)` with analytic gradients in `θ`.
//!
//! Three losses are provided:
//!
//! * the Bayesian linear regression negative log likelihood over
//!   `θ = (β ∈ R^20, log σ²)`,
//! * the mixture-model negative log likelihood over `θ = (μ¹, μ²)` with an
//!   explicit two-valued latent membership,
//! * a robust scoring rule derived from the γ-divergence for the same
//!   mixture model,
//!
//! ```text
//! L_p^γ(θ, x) = −(1/(γ−1)) p(x|θ)^{γ−1} · γ / I_{p,γ}(θ)^{−(γ−1)/γ}
//! I_{p,γ}(θ)  = ∫ p(x|θ)^γ dx
//! ```
//!
//! implemented exactly as displayed. For the unit-variance Gaussian model
//! used here `I_{p,γ}` does not depend on `θ`, so the two readings of the
//! normalizer exponent differ only by a constant factor and share their
//! argmin; the properness test in the suite gates the sign conventions. For
//! `γ → 1⁺` the score recovers the log score up to an affine shift.

use serde::{Deserialize, Serialize};

use crate::error::{GviError, Result};
use crate::family::LN_2PI;

/// Number of regressors in the linear-regression design.
pub const BLR_REGRESSORS: usize = 20;

/// θ-dimension of the BLR model: 20 coefficients plus log σ².
pub const BLR_THETA_DIM: usize = BLR_REGRESSORS + 1;

/// Tagged loss choice. `gamma` is required (and must exceed 1) exactly for
/// the γ-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BlrNll,
    BmmNll,
    BmmGammaScore,
}

impl LossKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LossKind::BlrNll => "blr_nll",
            LossKind::BmmNll => "bmm_nll",
            LossKind::BmmGammaScore => "bmm_gamma_score",
        }
    }

    pub fn is_bmm(&self) -> bool {
        matches!(self, LossKind::BmmNll | LossKind::BmmGammaScore)
    }
}

impl LossSpec {
    pub fn new(kind: LossKind, gamma: Option<f64>) -> Result<Self> {
        let spec = Self { kind, gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn blr_nll() -> Self {
        Self { kind: LossKind::BlrNll, gamma: None }
    }

    pub fn bmm_nll() -> Self {
        Self { kind: LossKind::BmmNll, gamma: None }
    }

    pub fn bmm_gamma(gamma: f64) -> Result<Self> {
        Self::new(LossKind::BmmGammaScore, Some(gamma))
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.gamma) {
            (LossKind::BmmGammaScore, Some(g)) if g > 1.0 => Ok(()),
            (LossKind::BmmGammaScore, Some(g)) => Err(GviError::InvalidSpec(format!(
                "gamma must exceed 1, got {g}"
            ))),
            (LossKind::BmmGammaScore, None) => Err(GviError::InvalidSpec(
                "gamma score requires gamma".into(),
            )),
            (_, None) => Ok(()),
            (k, Some(_)) => Err(GviError::InvalidSpec(format!(
                "loss `{}` takes no gamma",
                k.tag()
            ))),
        }
    }
}

/// One linear-regression observation: response and regressor vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlrDatum {
    pub y: f64,
    pub x_tilde: Vec<f64>,
}

/// One mixture-model observation. `z_true` is generator-side bookkeeping
/// (which component produced the point) and is never read by any loss or
/// objective computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmmDatum {
    pub x: Vec<f64>,
    pub z_true: u8,
}

/// A loss value with its gradient in `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad_theta: Vec<f64>,
}

/// BLR negative log likelihood at `theta = [β(20), log σ²]`:
/// `½ ln(2π σ²) + (y − x̃ᵀβ)² / (2σ²)`.
pub fn blr_nll(theta: &[f64], datum: &BlrDatum) -> Result<LossGrad> {
    if theta.len() != BLR_THETA_DIM {
        return Err(GviError::dims(BLR_THETA_DIM, theta.len()));
    }
    if datum.x_tilde.len() != BLR_REGRESSORS {
        return Err(GviError::dims(BLR_REGRESSORS, datum.x_tilde.len()));
    }
    let (beta, log_sigma2) = (&theta[..BLR_REGRESSORS], theta[BLR_REGRESSORS]);
    let sigma2 = log_sigma2.exp();
    let pred: f64 = beta
        .iter()
        .zip(datum.x_tilde.iter())
        .map(|(b, x)| b * x)
        .sum();
    let resid = datum.y - pred;
    let value = 0.5 * (LN_2PI + log_sigma2) + resid * resid / (2.0 * sigma2);

    let mut grad = vec![0.0; BLR_THETA_DIM];
    for (g, x) in grad.iter_mut().zip(datum.x_tilde.iter()) {
        *g = -resid * x / sigma2;
    }
    grad[BLR_REGRESSORS] = 0.5 - resid * resid / (2.0 * sigma2);
    Ok(LossGrad { value, grad_theta: grad })
}

fn bmm_check(theta: &[f64], x: &[f64], z: u8) -> Result<usize> {
    if theta.len() % 2 != 0 || theta.is_empty() {
        return Err(GviError::InvalidSpec(format!(
            "mixture theta must stack two equal-length means, got length {}",
            theta.len()
        )));
    }
    let d = theta.len() / 2;
    if x.len() != d {
        return Err(GviError::dims(d, x.len()));
    }
    if z != 1 && z != 2 {
        return Err(GviError::InvalidSpec(format!(
            "latent membership must be 1 or 2, got {z}"
        )));
    }
    Ok(d)
}

/// Mixture NLL at `theta = [μ¹(d), μ²(d)]` for a given membership:
/// `(d/2) ln 2π + ½ ‖x − μ^z‖²`. The gradient flows only into the selected
/// component's mean.
pub fn bmm_nll(theta: &[f64], x: &[f64], z: u8) -> Result<LossGrad> {
    let d = bmm_check(theta, x, z)?;
    let offset = if z == 1 { 0 } else { d };
    let mu = &theta[offset..offset + d];
    let mut value = 0.5 * d as f64 * LN_2PI;
    let mut grad = vec![0.0; theta.len()];
    for j in 0..d {
        let r = x[j] - mu[j];
        value += 0.5 * r * r;
        grad[offset + j] = -r;
    }
    Ok(LossGrad { value, grad_theta: grad })
}

/// Closed form of `∫ N(x | μ, σ² I_d)^γ dx`, independent of `μ`:
/// `(2π σ²)^{−(γ−1) d / 2} · γ^{−d/2}`.
pub fn gamma_norm_gaussian(gamma: f64, d: usize, sigma2: f64) -> Result<f64> {
    if gamma <= 1.0 {
        return Err(GviError::InvalidSpec(format!(
            "gamma must exceed 1, got {gamma}"
        )));
    }
    if sigma2 <= 0.0 {
        return Err(GviError::InvalidSpec(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let two_pi_s = (2.0 * std::f64::consts::PI * sigma2).ln();
    Ok((-(gamma - 1.0) * d as f64 / 2.0 * two_pi_s - d as f64 / 2.0 * gamma.ln()).exp())
}

/// γ-score of the unit-variance mixture model at membership `z`.
pub fn bmm_gamma_score(theta: &[f64], x: &[f64], z: u8, gamma: f64) -> Result<LossGrad> {
    let d = bmm_check(theta, x, z)?;
    if gamma <= 1.0 {
        return Err(GviError::InvalidSpec(format!(
            "gamma must exceed 1, got {gamma}"
        )));
    }
    let norm = gamma_norm_gaussian(gamma, d, 1.0)?;
    // L = −(1/(γ−1)) p^{γ−1} γ / I^{−(γ−1)/γ} = −c p^{γ−1},
    // c = γ/(γ−1) · I^{(γ−1)/γ}; c is θ-free for the unit-variance model.
    let c = gamma / (gamma - 1.0) * norm.powf((gamma - 1.0) / gamma);

    let offset = if z == 1 { 0 } else { d };
    let mu = &theta[offset..offset + d];
    let mut sq = 0.0;
    for j in 0..d {
        let r = x[j] - mu[j];
        sq += r * r;
    }
    let log_p = -0.5 * d as f64 * LN_2PI - 0.5 * sq;
    let p_pow = ((gamma - 1.0) * log_p).exp();
    let value = -c * p_pow;

    // ∇_{μ^z} L = −c (γ−1) p^{γ−1} (x − μ^z)
    let mut grad = vec![0.0; theta.len()];
    for j in 0..d {
        grad[offset + j] = -c * (gamma - 1.0) * p_pow * (x[j] - mu[j]);
    }
    Ok(LossGrad { value, grad_theta: grad })
}

/// Dispatch a BMM loss spec at a fixed membership.
pub fn bmm_loss(spec: &LossSpec, theta: &[f64], x: &[f64], z: u8) -> Result<LossGrad> {
    match spec.kind {
        LossKind::BmmNll => bmm_nll(theta, x, z),
        LossKind::BmmGammaScore => bmm_gamma_score(theta, x, z, spec.gamma.unwrap()),
        LossKind::BlrNll => Err(GviError::InvalidSpec(
            "blr_nll has no latent membership".into(),
        )),
    }
}

/// Exact expectation over a per-observation Bernoulli membership weight:
/// `w ℓ(·, z=1) + (1−w) ℓ(·, z=2)`, plus the loss gap `ℓ₁ − ℓ₂` that the
/// latent-posterior gradient needs.
pub fn bmm_latent_expectation(
    spec: &LossSpec,
    theta: &[f64],
    x: &[f64],
    w: f64,
) -> Result<(LossGrad, f64)> {
    let l1 = bmm_loss(spec, theta, x, 1)?;
    let l2 = bmm_loss(spec, theta, x, 2)?;
    let value = w * l1.value + (1.0 - w) * l2.value;
    let grad = l1
        .grad_theta
        .iter()
        .zip(l2.grad_theta.iter())
        .map(|(a, b)| w * a + (1.0 - w) * b)
        .collect();
    Ok((LossGrad { value, grad_theta: grad }, l1.value - l2.value))
}
