//! Throwaway calibration harness (run with --ignored); prints fit quality
//! per experiment so acceptance configs can be pinned.

use gvi_core::datagen::{generate_bmm, BmmDesign};
use gvi_core::divergence::{DivergenceKind, DivergenceSpec};
use gvi_core::experiment::config::ModelKind;
use gvi_core::experiment::sweep::{build_problem, recenter_bmm, replicate_seed, theta_true};
use gvi_core::loss::LossSpec;
use gvi_core::objective::{Dataset, FamilyKind, GviProblem};
use gvi_core::optim::{fit_multi_start, OptimConfig};
use gvi_core::seed::{hash_str, mix};

fn all_divs() -> Vec<DivergenceSpec> {
    vec![
        DivergenceSpec::kld(),
        DivergenceSpec::new(DivergenceKind::ReverseKld, None).unwrap(),
        DivergenceSpec::new(DivergenceKind::RenyiAlpha, Some(0.5)).unwrap(),
        DivergenceSpec::new(DivergenceKind::AlphaDiv, Some(0.5)).unwrap(),
        DivergenceSpec::new(DivergenceKind::Jeffreys, None).unwrap(),
        DivergenceSpec::new(DivergenceKind::Fisher, None).unwrap(),
    ]
}

#[test]
#[ignore]
fn calibrate_blr_sweep() {
    let optim = OptimConfig {
        learning_rate: 0.05,
        iterations: 3000,
        mc_samples: 20,
        adam_beta2: 0.99,
        ..OptimConfig::default()
    };
    let truth = theta_true(ModelKind::Blr, 1);
    for div in all_divs() {
        for n in [100usize, 1000, 10000] {
            let started = std::time::Instant::now();
            let mut m1 = 0.0;
            let mut sbar = 0.0;
            let reps = 3;
            for b in 0..reps {
                let seed = replicate_seed(42, ModelKind::Blr, n, &div, b);
                let problem = build_problem(
                    ModelKind::Blr,
                    n,
                    1,
                    false,
                    &LossSpec::blr_nll(),
                    &div,
                    0.0,
                    10.0,
                    FamilyKind::MeanFieldNormal,
                    seed,
                )
                .unwrap();
                let mut oc = optim;
                oc.seed = mix(seed, &[hash_str("optim")]);
                let res = fit_multi_start(&problem, &problem.default_init(), 1, 1.0, &oc).unwrap();
                let fitted = problem.unpack(&res.params).unwrap();
                let q = fitted.primary();
                m1 += (q.mu()[0] - truth[0]) / reps as f64;
                sbar += q.sigma().iter().sum::<f64>() / q.sigma().len() as f64 / reps as f64;
            }
            println!(
                "BLR {}{} n={n}: m1_bar={m1:.4} s_bar={sbar:.4} ({:.2}s/fit)",
                div.kind.tag(),
                div.alpha.map(|a| format!("({a})")).unwrap_or_default(),
                started.elapsed().as_secs_f64() / reps as f64
            );
        }
    }
}

#[test]
#[ignore]
fn calibrate_bmm_prior_robustness() {
    let optim = OptimConfig {
        learning_rate: 0.05,
        iterations: 3000,
        mc_samples: 20,
        adam_beta2: 0.99,
        ..OptimConfig::default()
    };
    let d = 2usize;
    let truth = theta_true(ModelKind::Bmm, d);
    for div in [
        DivergenceSpec::kld(),
        DivergenceSpec::renyi(0.5).unwrap(),
    ] {
        let started = std::time::Instant::now();
        let mut mbar = 0.0;
        let mut sbar = 0.0;
        let reps = 8;
        for b in 0..reps {
            let seed = replicate_seed(42, ModelKind::Bmm, 50, &div, b);
            let problem = build_problem(
                ModelKind::Bmm,
                50,
                d,
                false,
                &LossSpec::bmm_nll(),
                &div,
                -10.0,
                0.1_f64.sqrt(),
                FamilyKind::MeanFieldNormal,
                seed,
            )
            .unwrap();
            let mut oc = optim;
            oc.seed = mix(seed, &[hash_str("optim")]);
            let res = fit_multi_start(&problem, &problem.default_init(), 3, 1.0, &oc).unwrap();
            let fitted = problem.unpack(&res.params).unwrap();
            let q = fitted.primary();
            let (rm, rs) = recenter_bmm(q.mu(), &q.sigma(), &truth);
            mbar += rm.iter().sum::<f64>() / rm.len() as f64 / reps as f64;
            sbar += rs.iter().sum::<f64>() / rs.len() as f64 / reps as f64;
        }
        println!(
            "BMM prior-robust {}: m_bar={mbar:.4} s_bar={sbar:.4} ({:.2}s/fit incl starts)",
            div.kind.tag(),
            started.elapsed().as_secs_f64() / reps as f64
        );
    }
}

#[test]
#[ignore]
fn calibrate_bmm_contamination() {
    let optim = OptimConfig {
        learning_rate: 0.05,
        iterations: 3000,
        mc_samples: 10,
        adam_beta2: 0.99,
        ..OptimConfig::default()
    };
    for loss in [LossSpec::bmm_nll(), LossSpec::bmm_gamma(1.05).unwrap()] {
        for n in [1000usize, 10000] {
            let started = std::time::Instant::now();
            let truth = theta_true(ModelKind::Bmm, 1);
            let reps = 4;
            let mut dims = vec![0.0; 2];
            for b in 0..reps {
                let div = DivergenceSpec::kld();
                let seed = replicate_seed(42, ModelKind::Bmm, n, &div, b);
                let problem = build_problem(
                    ModelKind::Bmm,
                    n,
                    1,
                    true,
                    &loss,
                    &div,
                    0.0,
                    10.0_f64.sqrt(),
                    FamilyKind::MeanFieldNormal,
                    seed,
                )
                .unwrap();
                let mut oc = optim;
                oc.seed = mix(seed, &[hash_str("optim")]);
                let res = fit_multi_start(&problem, &problem.default_init(), 3, 1.0, &oc).unwrap();
                let fitted = problem.unpack(&res.params).unwrap();
                let q = fitted.primary();
                let (rm, _) = recenter_bmm(q.mu(), &q.sigma(), &truth);
                for j in 0..2 {
                    dims[j] += rm[j] / reps as f64;
                }
            }
            println!(
                "BMM contam {} n={n}: rm={dims:?} ({:.2}s/fit incl starts)",
                loss.kind.tag(),
                started.elapsed().as_secs_f64() / reps as f64
            );
        }
    }
}

#[test]
#[ignore]
fn calibrate_base_family() {
    let optim = OptimConfig {
        learning_rate: 0.05,
        iterations: 3000,
        mc_samples: 20,
        adam_beta2: 0.99,
        seed: 11,
        ..OptimConfig::default()
    };
    let div = DivergenceSpec::kld();
    let seed = replicate_seed(42, ModelKind::Blr, 1000, &div, 0);
    let data = {
        let p = build_problem(
            ModelKind::Blr,
            1000,
            1,
            false,
            &LossSpec::blr_nll(),
            &div,
            0.0,
            10.0,
            FamilyKind::MeanFieldNormal,
            seed,
        )
        .unwrap();
        p
    };
    let started = std::time::Instant::now();
    let mfn = fit_multi_start(&data, &data.default_init(), 1, 0.5, &optim).unwrap();
    println!("MFN final {} ({:?})", mfn.final_objective, started.elapsed());

    let mix_problem = build_problem(
        ModelKind::Blr,
        1000,
        1,
        false,
        &LossSpec::blr_nll(),
        &div,
        0.0,
        10.0,
        FamilyKind::NormalMixture { k: 2 },
        seed,
    )
    .unwrap();
    let started = std::time::Instant::now();
    let mixture = fit_multi_start(
        &mix_problem,
        &mix_problem.default_init(),
        2,
        0.5,
        &optim,
    )
    .unwrap();
    println!(
        "Mixture final {} ({:?})  delta={}",
        mixture.final_objective,
        started.elapsed(),
        mixture.final_objective - mfn.final_objective
    );

    // re-evaluate both at S = 10^4 with a common seed
    let re_mfn = gvi_core::optim::StochasticObjective::estimate(&data, &mfn.params, 10_000, 777)
        .unwrap()
        .value;
    let re_mix =
        gvi_core::optim::StochasticObjective::estimate(&mix_problem, &mixture.params, 10_000, 777)
            .unwrap()
            .value;
    println!("re-eval S=1e4: mfn={re_mfn} mix={re_mix} delta={}", re_mix - re_mfn);
}

#[test]
#[ignore]
fn calibrate_bmm_multistart_quality() {
    // fit_multi_start example: d=1, n=500, starts=5
    let optim = OptimConfig {
        learning_rate: 0.05,
        iterations: 3000,
        mc_samples: 10,
        adam_beta2: 0.99,
        seed: 2,
        ..OptimConfig::default()
    };
    let data = generate_bmm(&BmmDesign::new(500, 1, false, 3).unwrap());
    let problem = GviProblem::new(
        Dataset::Bmm(data),
        LossSpec::bmm_nll(),
        DivergenceSpec::kld(),
        gvi_core::family::MeanFieldNormal::isotropic(2, 0.0, 10.0_f64.sqrt()).unwrap(),
        FamilyKind::MeanFieldNormal,
    )
    .unwrap();
    let res = fit_multi_start(&problem, &problem.default_init(), 5, 1.0, &optim).unwrap();
    let fitted = problem.unpack(&res.params).unwrap();
    let mut mus = fitted.primary().mu().to_vec();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("BMM d=1 n=500 starts=5 sorted means: {mus:?} (want near [-2, 2])");
}

#[test]
#[ignore]
fn probe_kld_median_across_seeds() {
    let optim = OptimConfig {
        learning_rate: 0.05,
        iterations: 4000,
        mc_samples: 20,
        adam_beta2: 0.99,
        ..OptimConfig::default()
    };
    let div = DivergenceSpec::kld();
    for master in [1u64, 2, 3, 4, 5, 6, 7, 8] {
        let mut medians = Vec::new();
        for n in [100usize, 1000, 10000] {
            let mut vals: Vec<f64> = (0..5)
                .map(|b| {
                    let seed = replicate_seed(master, ModelKind::Blr, n, &div, b);
                    let problem = build_problem(
                        ModelKind::Blr, n, 1, false, &LossSpec::blr_nll(), &div,
                        0.0, 10.0, FamilyKind::MeanFieldNormal, seed,
                    ).unwrap();
                    let mut oc = optim;
                    oc.seed = mix(seed, &[hash_str("optim")]);
                    let res = fit_multi_start(&problem, &problem.default_init(), 1, 1.0, &oc).unwrap();
                    let fitted = problem.unpack(&res.params).unwrap();
                    (fitted.primary().mu()[0] - 16.32).abs()
                })
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(vals[2]);
        }
        let ok = medians[0] > medians[1] && medians[1] > medians[2];
        println!("master={master}: medians {medians:?} strict_decrease={ok}");
    }
}
