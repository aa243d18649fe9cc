//! Generalized variational inference (GVI) at desk scale.
//!
//! A GVI problem is specified by three modular choices: a loss `ℓ` linking
//! parameters to observations, a divergence `D` penalizing deviation of the
//! posterior from the prior, and a variational family `Q` the posterior is
//! searched over. The library assembles the scaled objective
//!
//! ```text
//! F(q) = E_q[ (1/n) Σ_i ℓ(θ, x_i) ] + (1/n) D(q ‖ π)
//! ```
//!
//! (with exact enumeration over per-observation latent variables when the
//! loss has them), estimates it with reparameterized Monte-Carlo gradients,
//! and minimizes it with Adam. On top of the core machinery sit seeded data
//! generators, consistency/robustness sweep runners, an ε-diagnostic for the
//! gap between the empirical and population objectives, and CSV/SVG emitters
//! for the resulting posterior summaries.

pub mod datagen;
pub mod divergence;
pub mod error;
pub mod experiment;
pub mod family;
pub mod gradcheck;
pub mod loss;
pub mod objective;
pub mod optim;
pub mod quadrature;
pub mod seed;
pub mod toy;

pub use error::{GviError, Result};
