//! Gauss-Hermite quadrature, used as the independent oracle for the
//! closed-form divergences and Gaussian integrals.
//!
//! The rule integrates against the weight `exp(-x^2)`. Nodes are the
//! eigenvalues of the symmetric tridiagonal Jacobi matrix (zero diagonal,
//! off-diagonal `sqrt(k/2)`), located by Sturm-sequence bisection; weights
//! are Christoffel numbers `1 / Σ_k p_k(x)^2` over the orthonormal Hermite
//! polynomials. This stays accurate at a few hundred nodes, which is all the
//! oracle tests need. The closed-form code paths never call into here.

/// A Gauss-Hermite rule with `n` nodes for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let nodes = hermite_nodes(n);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let weights = nodes
            .iter()
            .map(|&x| {
                // Christoffel number: 1 / sum of squared orthonormal
                // polynomials p_0..p_{n-1} at the node.
                let mut sum = 0.0;
                let mut p_prev = 0.0;
                let mut p = 1.0 / sqrt_pi.sqrt(); // p_0 = pi^{-1/4}
                sum += p * p;
                for k in 0..n - 1 {
                    let p_next = x * (2.0 / (k as f64 + 1.0)).sqrt() * p
                        - (k as f64 / (k as f64 + 1.0)).sqrt() * p_prev;
                    p_prev = p;
                    p = p_next;
                    sum += p * p;
                }
                1.0 / sum
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E_{N(mu, sigma^2)}[f]` by the substitution `theta = mu + sqrt(2) sigma x`.
    pub fn expect_normal(&self, mu: f64, sigma: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let scale = std::f64::consts::SQRT_2 * sigma;
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(mu + scale * x))
            .sum::<f64>()
            * inv_sqrt_pi
    }

    /// `log E_{N(mu, sigma^2)}[exp(log_f)]` with the sum taken in log space,
    /// so integrands with huge dynamic range stay finite.
    pub fn log_expect_normal(&self, mu: f64, sigma: f64, mut log_f: impl FnMut(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sigma;
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w.ln() + log_f(mu + scale * x))
            .collect();
        crate::family::log_sum_exp(&terms) - 0.5 * std::f64::consts::PI.ln()
    }

    /// Product-rule expectation over a 2-D factorized normal.
    pub fn expect_normal2(
        &self,
        mu: [f64; 2],
        sigma: [f64; 2],
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> f64 {
        let inv_pi = 1.0 / std::f64::consts::PI;
        let s0 = std::f64::consts::SQRT_2 * sigma[0];
        let s1 = std::f64::consts::SQRT_2 * sigma[1];
        let mut acc = 0.0;
        for (&x0, &w0) in self.nodes.iter().zip(self.weights.iter()) {
            for (&x1, &w1) in self.nodes.iter().zip(self.weights.iter()) {
                acc += w0 * w1 * f(mu[0] + s0 * x0, mu[1] + s1 * x1);
            }
        }
        acc * inv_pi
    }
}

/// Eigenvalues of the Hermite Jacobi matrix by Sturm bisection.
fn hermite_nodes(n: usize) -> Vec<f64> {
    // Off-diagonal entries b_k = sqrt(k/2), k = 1..n-1.
    let b2: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
    // All eigenvalues lie within the Gershgorin bound.
    let bound = 2.0 * (n as f64 / 2.0).sqrt() + 1.0;

    // Number of eigenvalues strictly below x, via the Sturm sequence of the
    // shifted characteristic polynomials.
    let count_below = |x: f64| -> usize {
        let mut count = 0usize;
        let mut d = -x;
        if d < 0.0 {
            count += 1;
        }
        for &bb in &b2 {
            d = -x - bb / if d == 0.0 { f64::MIN_POSITIVE } else { d };
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };

    (0..n)
        .map(|i| {
            let mut lo = -bound;
            let mut hi = bound;
            // Bisect until the i-th eigenvalue is pinned to ~1e-15 absolute.
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) <= i {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}
