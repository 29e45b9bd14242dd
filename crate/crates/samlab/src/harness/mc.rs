//! Monte Carlo estimators that cross-check the closed-form predictions:
//! a bias/variance/error decomposition over repeated noise draws, and the
//! per-sample expected-error comparison over repeated sample streams. Both
//! report delta-method standard errors so agreement can be judged in units
//! of Monte Carlo uncertainty.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::RegressionProblem;
use crate::numerics::vec as nvec;
use crate::optimizer::{stochastic_sam_run, ClosedFormSolver, OptimConfig};
use crate::rng::Rng;
use crate::theory::{stochastic_error_difference, StochasticErrorLaw};

use super::{mean_std, with_pool};

/// Monte Carlo estimate of the error decomposition at one iteration count.
///
/// `error = bias_sq + var` holds exactly by construction: the variance is
/// computed as the difference of the other two estimators. Standard errors
/// come from the delta method: the squared-bias estimator is linearized
/// around the mean prediction, so its uncertainty is the spread of the
/// per-draw directional terms; the variance inherits the spread of the
/// per-draw differences.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct McDecomposition {
    /// Iteration count the estimates refer to.
    pub k: usize,
    /// Squared distance between noiseless targets and the mean prediction.
    pub bias_sq: f64,
    pub bias_sq_se: f64,
    /// Mean squared distance between predictions and their mean.
    pub var: f64,
    pub var_se: f64,
    /// Mean squared distance between predictions and noiseless targets.
    pub error: f64,
    pub error_se: f64,
}

/// Estimate bias-squared, variance, and error of the iterate's predictions
/// at each requested iteration count, over `draws` independent noise draws
/// seeded `base_seed + draw`. The trajectory is evaluated in closed form on
/// the problem's quadratic reduction, from the problem's own starting point.
pub fn mc_decomposition<P: RegressionProblem + Sync>(
    problem: &P,
    cfg: &OptimConfig,
    ks: &[usize],
    draws: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<McDecomposition>> {
    if draws == 0 {
        return Err(Error::EmptyInput {
            context: "Monte Carlo draws",
        });
    }
    if ks.is_empty() {
        return Err(Error::EmptyInput {
            context: "iteration counts",
        });
    }
    let y_star = problem.y_star()?;
    let n = y_star.len() as f64;
    let w0 = problem.initial_point();

    // predictions[draw][ki] = prediction vector at iteration ks[ki].
    let predictions: Vec<Vec<Vec<f64>>> = with_pool(workers, || {
        (0..draws)
            .into_par_iter()
            .map(|draw| {
                let dataset = problem.generate_dataset(base_seed.wrapping_add(draw as u64))?;
                let loss = problem.to_quadratic(&dataset)?;
                let solver = ClosedFormSolver::new(&loss, &w0, cfg)?;
                ks.iter()
                    .map(|&k| problem.predictions(&solver.iterate(k as u64)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let sqrt_draws = (draws as f64).sqrt();
    let mut out = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let mut p_bar = vec![0.0; y_star.len()];
        for pred in &predictions {
            nvec::axpy(1.0, &pred[ki], &mut p_bar);
        }
        let p_bar = nvec::scale(1.0 / draws as f64, &p_bar);

        // Per-draw error terms and the linearized squared-bias terms.
        let e: Vec<f64> = predictions
            .iter()
            .map(|pred| nvec::norm_sq(&nvec::sub(&y_star, &pred[ki])) / n)
            .collect();
        let grad = nvec::scale(2.0 / n, &nvec::sub(&p_bar, &y_star));
        let v: Vec<f64> = predictions
            .iter()
            .map(|pred| nvec::dot(&grad, &pred[ki]))
            .collect();
        let u: Vec<f64> = e.iter().zip(&v).map(|(ei, vi)| ei - vi).collect();

        let (error, e_std) = mean_std(&e);
        let bias_sq = nvec::norm_sq(&nvec::sub(&y_star, &p_bar)) / n;
        let (_, v_std) = mean_std(&v);
        let (_, u_std) = mean_std(&u);
        out.push(McDecomposition {
            k,
            bias_sq,
            bias_sq_se: v_std / sqrt_draws,
            var: error - bias_sq,
            var_se: u_std / sqrt_draws,
            error,
            error_se: e_std / sqrt_draws,
        });
    }
    Ok(out)
}

/// Empirical vs. predicted expected-error difference for per-sample SAM and
/// GD after `k` fresh samples.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PerSampleLawReport {
    /// Mean SAM error minus mean GD error across streams, where each error
    /// is the squared distance of the stream's final iterate from the truth.
    pub empirical_difference: f64,
    /// Delta-method standard error of `empirical_difference`.
    pub empirical_se: f64,
    pub empirical_sam_error: f64,
    pub empirical_gd_error: f64,
    /// The closed-form law the empirical difference is compared against.
    pub predicted: StochasticErrorLaw,
    /// Number of independent sample streams averaged.
    pub streams: usize,
}

/// Run per-sample SAM and GD on `streams` independent sample streams (each
/// stream: `k` fresh isotropic Gaussian samples with noise level `sigma`,
/// identical for both optimizers) from the zero start, and compare the
/// expected-error difference with the closed-form law.
pub fn run_per_sample_law_check(
    w_bar: &[f64],
    cfg: &OptimConfig,
    k: usize,
    sigma: f64,
    streams: usize,
    base_seed: u64,
    workers: usize,
) -> Result<PerSampleLawReport> {
    if w_bar.is_empty() {
        return Err(Error::EmptyInput { context: "w_bar" });
    }
    if !nvec::all_finite(w_bar) {
        return Err(Error::NonFinite { context: "w_bar" });
    }
    if streams == 0 {
        return Err(Error::EmptyInput {
            context: "sample streams",
        });
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
            requirement: "must be finite and nonnegative",
        });
    }
    let p = w_bar.len();
    let sam_cfg = OptimConfig::new(cfg.eta, cfg.rho, k.max(1))?;
    let gd_cfg = OptimConfig::new(cfg.eta, 0.0, k.max(1))?;

    let finals: Vec<(Vec<f64>, Vec<f64>)> = with_pool(workers, || {
        (0..streams)
            .into_par_iter()
            .map(|i| {
                let mut rng = Rng::for_trial(base_seed, i as u64);
                let samples: Vec<(Vec<f64>, f64)> = (0..k)
                    .map(|_| {
                        let x = rng.normal_vec(p, 1.0);
                        let y = nvec::dot(&x, w_bar) + rng.normal(sigma);
                        (x, y)
                    })
                    .collect();
                let w0 = vec![0.0; p];
                let sam = stochastic_sam_run(&w0, &sam_cfg, k, |t| samples[t].clone(), |_, _| {})?;
                let gd = stochastic_sam_run(&w0, &gd_cfg, k, |t| samples[t].clone(), |_, _| {})?;
                Ok((sam, gd))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut m_sam = vec![0.0; p];
    let mut m_gd = vec![0.0; p];
    for (s, g) in &finals {
        nvec::axpy(1.0, s, &mut m_sam);
        nvec::axpy(1.0, g, &mut m_gd);
    }
    let m_sam = nvec::scale(1.0 / streams as f64, &m_sam);
    let m_gd = nvec::scale(1.0 / streams as f64, &m_gd);

    let d_sam = nvec::sub(&m_sam, w_bar);
    let d_gd = nvec::sub(&m_gd, w_bar);
    let empirical_sam_error = nvec::norm_sq(&d_sam);
    let empirical_gd_error = nvec::norm_sq(&d_gd);

    // Influence of stream i on the difference of squared norms, linearized
    // around the means.
    let infl: Vec<f64> = finals
        .iter()
        .map(|(s, g)| 2.0 * nvec::dot(&d_sam, s) - 2.0 * nvec::dot(&d_gd, g))
        .collect();
    let (_, infl_std) = mean_std(&infl);

    let predicted =
        stochastic_error_difference(p, cfg, k as u64, nvec::norm_sq(w_bar))?;
    Ok(PerSampleLawReport {
        empirical_difference: empirical_sam_error - empirical_gd_error,
        empirical_se: infl_std / (streams as f64).sqrt(),
        empirical_sam_error,
        empirical_gd_error,
        predicted,
        streams,
    })
}
