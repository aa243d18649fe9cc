//! Shared helpers for the integration suites: the quadrature referee for
//! divergences and a pass/fail line printer for acceptance criteria.

use gvi_core::divergence::{DivergenceKind, DivergenceSpec};
use gvi_core::family::MeanFieldNormal;
use gvi_core::quadrature::GaussHermite;

/// Gauss-Hermite evaluation of a divergence over a 1-D pair, straight from
/// each divergence's defining expectation. Independent of the closed forms
/// it referees.
pub fn quadrature_divergence(
    gh: &GaussHermite,
    spec: &DivergenceSpec,
    q: &MeanFieldNormal,
    p: &MeanFieldNormal,
) -> f64 {
    let (mq, sq) = (q.mu()[0], q.sigma()[0]);
    let (mp, sp) = (p.mu()[0], p.sigma()[0]);
    let lq = |t: f64| q.log_pdf(&[t]).unwrap();
    let lp = |t: f64| p.log_pdf(&[t]).unwrap();
    match spec.kind {
        DivergenceKind::Kld => gh.expect_normal(mq, sq, |t| lq(t) - lp(t)),
        DivergenceKind::ReverseKld => gh.expect_normal(mp, sp, |t| lp(t) - lq(t)),
        DivergenceKind::RenyiAlpha => {
            let a = spec.alpha.unwrap();
            gh.log_expect_normal(mq, sq, |t| (a - 1.0) * (lq(t) - lp(t))) / (a - 1.0)
        }
        DivergenceKind::AlphaDiv => {
            let a = spec.alpha.unwrap();
            (gh.expect_normal(mq, sq, |t| ((a - 1.0) * (lq(t) - lp(t))).exp()) - 1.0)
                / (a * (a - 1.0))
        }
        DivergenceKind::Jeffreys => {
            gh.expect_normal(mq, sq, |t| lq(t) - lp(t))
                + gh.expect_normal(mp, sp, |t| lp(t) - lq(t))
        }
        DivergenceKind::Fisher => gh.expect_normal(mq, sq, |t| {
            let g = q.grad_log_pdf(&[t]).unwrap()[0] - p.grad_log_pdf(&[t]).unwrap()[0];
            g * g
        }),
    }
}

/// All six divergence specifications exercised by the suites.
pub fn all_divergences() -> Vec<DivergenceSpec> {
    vec![
        DivergenceSpec::kld(),
        DivergenceSpec::new(DivergenceKind::ReverseKld, None).unwrap(),
        DivergenceSpec::new(DivergenceKind::RenyiAlpha, Some(0.5)).unwrap(),
        DivergenceSpec::new(DivergenceKind::AlphaDiv, Some(0.5)).unwrap(),
        DivergenceSpec::new(DivergenceKind::Jeffreys, None).unwrap(),
        DivergenceSpec::new(DivergenceKind::Fisher, None).unwrap(),
    ]
}

/// Print the one-line verdict for an acceptance criterion, then enforce it.
pub fn criterion(number: usize, name: &str, pass: bool, details: &str) {
    println!(
        "acceptance criterion {number} ({name}): {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {details}");
}
