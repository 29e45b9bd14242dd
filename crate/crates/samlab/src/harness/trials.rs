//! Per-trial execution of the three data scenarios. Each trial draws its own
//! dataset from `base_seed + trial_index`, runs GD and SAM on exactly the
//! same data from the same starting point, and records the held-out
//! validation error at every iteration.
//!
//! Trial seeds are shared across sigma levels (common random numbers), so
//! comparisons between noise levels see the same designs. Validation data
//! comes from the trial seed XOR a fixed constant when `redraw_validation`
//! is set, and from the base seed XOR the same constant otherwise (one
//! shared validation design; its noiseless targets still use each trial's
//! coefficients).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, feature_expand, gram, kernel_sam_step, KernelSpec};
use crate::models::{Dataset, LinearModel, NoiseModel, RegressionProblem};
use crate::numerics::{cholesky, sym_eig, thin_svd, vec as nvec, Matrix};
use crate::optimizer::{
    run_quadratic_trajectory, stochastic_sam_run, OptimConfig, DIVERGENCE_GUARD,
};
use crate::rng::Rng;

use super::{
    aggregate, with_pool, AggregateResult, EtaRule, ExperimentConfig, OptimizerRecord, RhoRule,
    Scenario, TrialResult,
};

/// Mixed into a trial seed to derive its validation-data seed.
const VALIDATION_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;
/// Mixed into a trial seed to derive the feature-expansion pair seed.
const PAIR_SEED_MIX: u64 = 0xD1B5_4A32_D192_ED03;

/// Covariance with entries `0.5^|i - j|`.
fn exponential_covariance(p: usize) -> Matrix {
    let mut s = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            s.set(i, j, 0.5f64.powi((i as i32 - j as i32).abs()));
        }
    }
    s
}

/// Draw `n` rows from `Normal(0, Sigma)` given the Cholesky factor of Sigma.
fn draw_design(rng: &mut Rng, n: usize, chol: &Matrix) -> Result<Matrix> {
    let p = chol.rows();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z = rng.normal_vec(p, 1.0);
        rows.push(chol.matvec(&z)?);
    }
    Matrix::from_rows(&rows)
}

/// Coordinates drawn uniformly from `[0, 1)`, then normalized to unit norm.
fn draw_unit_uniform(rng: &mut Rng, dim: usize) -> Vec<f64> {
    let w = rng.uniform_vec(dim);
    let norm = nvec::norm(&w);
    if norm > 0.0 {
        nvec::scale(1.0 / norm, &w)
    } else {
        w
    }
}

fn validation_seed(cfg: &ExperimentConfig, trial_seed: u64) -> u64 {
    if cfg.redraw_validation {
        trial_seed ^ VALIDATION_SEED_MIX
    } else {
        cfg.base_seed ^ VALIDATION_SEED_MIX
    }
}

/// Resolve the step size for one trial's design matrix.
fn resolve_eta(rule: &EtaRule, x: &Matrix) -> Result<f64> {
    match rule {
        EtaRule::Fixed(v) => Ok(*v),
        EtaRule::Spectral => {
            let smax = thin_svd(x)?.sigma_max();
            if !(smax.is_finite() && smax > 0.0) {
                return Err(Error::NonFinite {
                    context: "largest singular value of the design",
                });
            }
            Ok(1.0 / (2.0 * smax * smax))
        }
    }
}

fn resolve_rho(rule: &RhoRule, eta: f64) -> f64 {
    match rule {
        RhoRule::Fixed(v) => *v,
        RhoRule::EtaOverSix => eta / 6.0,
    }
}

/// Mean squared prediction error of `w` on held-out linear data.
fn linear_validation_error(x_test: &Matrix, y_test: &[f64], w: &[f64]) -> f64 {
    match x_test.matvec(w) {
        Ok(pred) => nvec::norm_sq(&nvec::sub(y_test, &pred)) / y_test.len() as f64,
        Err(_) => f64::NAN,
    }
}

fn require_scenario(cfg: &ExperimentConfig, want: Scenario, name: &str) -> Result<()> {
    cfg.validate()?;
    if cfg.scenario != want {
        return Err(Error::Config(format!("{name} requires the matching scenario")));
    }
    Ok(())
}

/// All (sigma index, trial index) jobs in deterministic sigma-major order.
fn job_list(cfg: &ExperimentConfig) -> Vec<(usize, u64)> {
    let mut jobs = Vec::with_capacity(cfg.sigmas.len() * cfg.repetitions);
    for si in 0..cfg.sigmas.len() {
        for t in 0..cfg.repetitions {
            jobs.push((si, t as u64));
        }
    }
    jobs
}

/// Group ordered trial results by sigma level and aggregate each group.
fn assemble(cfg: &ExperimentConfig, trials: Vec<TrialResult>) -> Result<AggregateResult> {
    let mut per_sigma = Vec::with_capacity(cfg.sigmas.len());
    let mut warnings = Vec::new();
    for (si, chunk) in trials.chunks(cfg.repetitions).enumerate() {
        for t in chunk {
            warnings.extend(t.warnings.iter().cloned());
        }
        per_sigma.push(aggregate(cfg.sigmas[si], chunk)?);
    }
    Ok(AggregateResult {
        per_sigma,
        warnings,
    })
}

/// Data shared by the full-batch and stochastic linear trials.
struct LinearTrialData {
    trial_seed: u64,
    x: Matrix,
    w_bar: Vec<f64>,
    y_star: Vec<f64>,
    eps: Vec<f64>,
    x_test: Matrix,
    y_test: Vec<f64>,
    eta: f64,
    rho: f64,
}

/// Draw one linear trial's training and validation data. Draw order per
/// trial: design rows, coefficients, noise. Bit-identical for a given
/// (config, sigma, trial index).
fn draw_linear_trial(
    cfg: &ExperimentConfig,
    chol: &Matrix,
    sigma: f64,
    trial: u64,
) -> Result<LinearTrialData> {
    let trial_seed = cfg.base_seed.wrapping_add(trial);
    let mut rng = Rng::new(trial_seed);
    let x = draw_design(&mut rng, cfg.n, chol)?;
    let w_bar = draw_unit_uniform(&mut rng, cfg.p);
    let eps = rng.normal_vec(cfg.n, sigma);
    let y_star = x.matvec(&w_bar)?;

    let mut vrng = Rng::new(validation_seed(cfg, trial_seed));
    let x_test = draw_design(&mut vrng, cfg.validation_count, chol)?;
    let y_test = x_test.matvec(&w_bar)?;

    let eta = resolve_eta(&cfg.eta, &x)?;
    let rho = resolve_rho(&cfg.rho, eta);
    Ok(LinearTrialData {
        trial_seed,
        x,
        w_bar,
        y_star,
        eps,
        x_test,
        y_test,
        eta,
        rho,
    })
}

fn fullbatch_trial(
    cfg: &ExperimentConfig,
    chol: &Matrix,
    sigma: f64,
    trial: u64,
) -> Result<TrialResult> {
    let data = draw_linear_trial(cfg, chol, sigma, trial)?;
    let y = nvec::add(&data.y_star, &data.eps);
    let dataset = Dataset {
        y_star: data.y_star.clone(),
        eps: data.eps.clone(),
        y,
        seed: data.trial_seed,
    };
    let model = LinearModel::new(
        data.x.clone(),
        data.w_bar.clone(),
        vec![0.0; cfg.p],
        NoiseModel::new(sigma)?,
    )?;
    let loss = model.to_quadratic(&dataset)?;
    let err_fn = |w: &[f64]| linear_validation_error(&data.x_test, &data.y_test, w);

    let run = |rho: f64| -> Result<OptimizerRecord> {
        let traj = run_quadratic_trajectory(
            &loss,
            &model.w0,
            &OptimConfig::new(data.eta, rho, cfg.k_max)?,
            Some(&err_fn),
        )?;
        Ok(OptimizerRecord::from_trajectory(traj))
    };
    let gd = run(0.0)?;
    let sam = run(data.rho)?;
    Ok(TrialResult {
        seed: data.trial_seed,
        gd,
        sam,
        warnings: vec![],
    })
}

/// Full-batch paired GD/SAM on linear regression with exponential-covariance
/// Gaussian inputs, aggregated per sigma level. `workers = 0` uses the
/// ambient thread context; any other value bounds the pool size. Results are
/// independent of `workers`.
pub fn run_linear_fullbatch(cfg: &ExperimentConfig, workers: usize) -> Result<AggregateResult> {
    require_scenario(cfg, Scenario::LinearFullbatch, "run_linear_fullbatch")?;
    let chol = cholesky(&exponential_covariance(cfg.p))?;
    let jobs = job_list(cfg);
    let trials = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(si, t)| fullbatch_trial(cfg, &chol, cfg.sigmas[si], t))
            .collect::<Result<Vec<_>>>()
    })??;
    assemble(cfg, trials)
}

fn stochastic_trial(
    cfg: &ExperimentConfig,
    chol: &Matrix,
    sigma: f64,
    trial: u64,
) -> Result<TrialResult> {
    let data = draw_linear_trial(cfg, chol, sigma, trial)?;
    let y = nvec::add(&data.y_star, &data.eps);
    // Visit order for the epoch is drawn after the data, from the same
    // generator, so it is part of the trial's deterministic draw sequence.
    let mut rng = Rng::new(data.trial_seed ^ 0x5851_F42D_4C95_7F2D);
    let mut order: Vec<usize> = (0..cfg.n).collect();
    rng.shuffle(&mut order);

    let w0 = vec![0.0; cfg.p];
    let run = |rho: f64| -> Result<OptimizerRecord> {
        let mut errors = Vec::with_capacity(cfg.n + 1);
        let outcome = stochastic_sam_run(
            &w0,
            &OptimConfig::new(data.eta, rho, cfg.n.max(1))?,
            cfg.n,
            |k| (data.x.row(order[k]).to_vec(), y[order[k]]),
            |_, w| errors.push(linear_validation_error(&data.x_test, &data.y_test, w)),
        );
        match outcome {
            Ok(_) => Ok(OptimizerRecord::new(errors, None)),
            Err(Error::Diverged { iteration }) => {
                Ok(OptimizerRecord::new(errors, Some(iteration)))
            }
            Err(e) => Err(e),
        }
    };
    let gd = run(0.0)?;
    let sam = run(data.rho)?;
    Ok(TrialResult {
        seed: data.trial_seed,
        gd,
        sam,
        warnings: vec![],
    })
}

/// One epoch (exactly `n` single-sample steps, in a shuffled order shared by
/// both optimizers) of stochastic GD/SAM on the linear model. The
/// configuration's `k_max` is ignored: the epoch length is the sample count.
pub fn run_linear_stochastic(cfg: &ExperimentConfig, workers: usize) -> Result<AggregateResult> {
    require_scenario(cfg, Scenario::LinearStochastic, "run_linear_stochastic")?;
    let chol = cholesky(&exponential_covariance(cfg.p))?;
    let jobs = job_list(cfg);
    let trials = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(si, t)| stochastic_trial(cfg, &chol, cfg.sigmas[si], t))
            .collect::<Result<Vec<_>>>()
    })??;
    assemble(cfg, trials)
}

fn kernel_trial(
    cfg: &ExperimentConfig,
    chol: &Matrix,
    spec: &KernelSpec,
    sigma: f64,
    trial: u64,
) -> Result<TrialResult> {
    let trial_seed = cfg.base_seed.wrapping_add(trial);
    let pair_seed = trial_seed ^ PAIR_SEED_MIX;
    let mut rng = Rng::new(trial_seed);
    let x = draw_design(&mut rng, cfg.n, chol)?;
    let expanded = feature_expand(&x, cfg.pair_count, pair_seed)?;
    let w_bar = draw_unit_uniform(&mut rng, expanded.cols());
    let eps = rng.normal_vec(cfg.n, sigma);
    let y = nvec::add(&expanded.matvec(&w_bar)?, &eps);

    let mut vrng = Rng::new(validation_seed(cfg, trial_seed));
    let x_test = draw_design(&mut vrng, cfg.validation_count, chol)?;
    // The same pair seed reproduces the same interaction pairs, so train and
    // validation rows live in the same expanded feature space.
    let expanded_test = feature_expand(&x_test, cfg.pair_count, pair_seed)?;
    let y_test = expanded_test.matvec(&w_bar)?;

    // Step size from the raw design, matching the linear scenarios.
    let eta = resolve_eta(&cfg.eta, &x)?;
    let rho = resolve_rho(&cfg.rho, eta);

    let g = gram(spec, &x)?;
    let mut warnings = Vec::new();
    let eig = sym_eig(&g.matrix)?;
    let dmax = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    if eig.eigenvalues.iter().any(|d| d.abs() <= 1e-12 * dmax) {
        warnings.push(format!(
            "trial {trial}, sigma {sigma}: gram matrix numerically singular"
        ));
    }
    let k_cross = cross_gram(spec, &x_test, &x)?;
    let val_err = |w: &[f64]| -> f64 {
        match k_cross.matvec(w) {
            Ok(pred) => nvec::norm_sq(&nvec::sub(&y_test, &pred)) / y_test.len() as f64,
            Err(_) => f64::NAN,
        }
    };

    let run = |rho: f64| -> Result<OptimizerRecord> {
        let ocfg = OptimConfig::new(eta, rho, cfg.k_max)?;
        let mut w = vec![0.0; cfg.n];
        let mut errors = Vec::with_capacity(cfg.k_max + 1);
        errors.push(val_err(&w));
        let mut diverged_at = None;
        for k in 0..cfg.k_max {
            w = kernel_sam_step(&w, &g, &y, &ocfg)?;
            if !nvec::all_finite(&w) || nvec::norm(&w) >= DIVERGENCE_GUARD {
                diverged_at = Some(k + 1);
                break;
            }
            errors.push(val_err(&w));
        }
        Ok(OptimizerRecord::new(errors, diverged_at))
    };
    let gd = run(0.0)?;
    let sam = run(rho)?;
    Ok(TrialResult {
        seed: trial_seed,
        gd,
        sam,
        warnings,
    })
}

/// Indefinite-kernel regression: targets come from a polynomial feature
/// expansion of Gaussian inputs, training runs on the (generally indefinite)
/// Gaussian-minus-exponential Gram matrix, and validation uses the
/// cross-Gram against held-out inputs. Divergence under GD is an expected
/// outcome here; it is recorded per trial, not treated as a failure.
pub fn run_kernel_indefinite(cfg: &ExperimentConfig, workers: usize) -> Result<AggregateResult> {
    require_scenario(cfg, Scenario::KernelIndefinite, "run_kernel_indefinite")?;
    let chol = cholesky(&exponential_covariance(cfg.p))?;
    let spec = KernelSpec::gaussian_minus_exponential();
    let jobs = job_list(cfg);
    let trials = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(si, t)| kernel_trial(cfg, &chol, &spec, cfg.sigmas[si], t))
            .collect::<Result<Vec<_>>>()
    })??;
    assemble(cfg, trials)
}
