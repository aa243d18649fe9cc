//! Seeded synthetic data generators.
//!
//! Each record draws from its own counter-indexed ChaCha substream, so
//! generated prefixes are stable: the first `m` records of an `n`-record
//! dataset equal the `m`-record dataset under the same seed. Contamination
//! noise lives on a second substream class, which keeps uncontaminated
//! records bit-identical between clean and contaminated runs.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GviError, Result};
use crate::loss::{BlrDatum, BmmDatum, BLR_REGRESSORS};
use crate::seed::stream_rng;

/// Fixed regression coefficients of the linear-regression design.
pub const BETA_TRUE: [f64; BLR_REGRESSORS] = [
    16.32, 10.15, -12.45, 2.92, 9.21, -4.20, 5.66, 4.09, 3.04, 1.25, 7.33, 15.03, -6.65, 13.28,
    5.29, 7.45, -8.37, 4.35, 17.85, -7.80,
];

/// Residual variance of the linear-regression design.
pub const BLR_SIGMA2: f64 = 25.0;

/// Separation of the mixture components: means at `±OFFSET * (1,..,1)`.
pub const BMM_MEAN_OFFSET: f64 = 2.0;

/// Contamination mechanics: with probability `PROB`, shift an observation
/// by `η · (1,..,1)` with `η ~ N(MEAN, SD²)`.
pub const CONTAMINATION_PROB: f64 = 0.05;
pub const CONTAMINATION_MEAN: f64 = 10.0;
pub const CONTAMINATION_SD: f64 = 1.7320508075688772; // sqrt(3)

/// Linear-regression design: `y = x̃ᵀβ + ε`, `ε ~ N(0, 25)`, regressors
/// i.i.d. standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlrDesign {
    n: usize,
    seed: u64,
}

impl BlrDesign {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(GviError::InvalidSpec("n must be >= 1".into()));
        }
        Ok(Self { n, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Two-component mixture design with optional contamination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BmmDesign {
    n: usize,
    d: usize,
    contaminate: bool,
    seed: u64,
}

impl BmmDesign {
    pub fn new(n: usize, d: usize, contaminate: bool, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(GviError::InvalidSpec("n must be >= 1".into()));
        }
        if d == 0 {
            return Err(GviError::InvalidSpec("d must be >= 1".into()));
        }
        Ok(Self { n, d, contaminate, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn contaminate(&self) -> bool {
        self.contaminate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True component means, stacked as `θ = (μ¹, μ²)`.
    pub fn theta_true(&self) -> Vec<f64> {
        let mut t = vec![BMM_MEAN_OFFSET; self.d];
        t.extend(vec![-BMM_MEAN_OFFSET; self.d]);
        t
    }
}

const STREAM_CLEAN: u64 = 0;
const STREAM_CONTAMINATION: u64 = 1;

fn record_stream(class: u64, i: usize) -> u64 {
    (class << 48) | i as u64
}

/// Generate the linear-regression dataset for a design.
pub fn generate_blr(design: &BlrDesign) -> Vec<BlrDatum> {
    let residual_sd = BLR_SIGMA2.sqrt();
    (0..design.n)
        .map(|i| {
            let mut rng = stream_rng(design.seed, record_stream(STREAM_CLEAN, i));
            let x_tilde: Vec<f64> = (0..BLR_REGRESSORS)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let eps: f64 =
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            let y = x_tilde
                .iter()
                .zip(BETA_TRUE.iter())
                .map(|(x, b)| x * b)
                .sum::<f64>()
                + residual_sd * eps;
            BlrDatum { y, x_tilde }
        })
        .collect()
}

/// Generate the mixture dataset for a design. `z_true` records which
/// component generated each point; inference never reads it.
pub fn generate_bmm(design: &BmmDesign) -> Vec<BmmDatum> {
    (0..design.n)
        .map(|i| {
            let mut rng = stream_rng(design.seed, record_stream(STREAM_CLEAN, i));
            let z: u8 = if rng.gen::<f64>() < 0.5 { 1 } else { 2 };
            let mean = if z == 1 { BMM_MEAN_OFFSET } else { -BMM_MEAN_OFFSET };
            let mut x: Vec<f64> = (0..design.d)
                .map(|_| {
                    mean + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                })
                .collect();
            if design.contaminate {
                let mut crng = stream_rng(design.seed, record_stream(STREAM_CONTAMINATION, i));
                if crng.gen::<f64>() < CONTAMINATION_PROB {
                    let eta = CONTAMINATION_MEAN
                        + CONTAMINATION_SD
                            * <StandardNormal as Distribution<f64>>::sample(
                                &StandardNormal,
                                &mut crng,
                            );
                    for v in x.iter_mut() {
                        *v += eta;
                    }
                }
            }
            BmmDatum { x, z_true: z }
        })
        .collect()
}

/// Draws from a univariate normal, one substream per record; the dataset of
/// the conjugate Gaussian-mean toy model.
pub fn generate_gaussian(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut rng = stream_rng(seed, record_stream(STREAM_CLEAN, i));
            mean + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        })
        .collect()
}

/// Write a BLR dataset as CSV: `y,x1,..,x20` under a schema comment.
pub fn write_blr_csv<W: Write>(mut w: W, data: &[BlrDatum]) -> Result<()> {
    writeln!(w, "# gvi-dataset blr v1")?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=BLR_REGRESSORS).map(|j| format!("x{j}")));
    writeln!(w, "{}", header.join(","))?;
    for d in data {
        let mut row = vec![d.y.to_string()];
        row.extend(d.x_tilde.iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Write a BMM dataset as CSV: `x1,..,xd,z_true` under a schema comment.
pub fn write_bmm_csv<W: Write>(mut w: W, data: &[BmmDatum]) -> Result<()> {
    writeln!(w, "# gvi-dataset bmm v1")?;
    let d = data.first().map(|r| r.x.len()).unwrap_or(0);
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("z_true".to_string());
    writeln!(w, "{}", header.join(","))?;
    for r in data {
        let mut row: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        row.push(r.z_true.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
