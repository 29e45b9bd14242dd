//! Seeded Monte Carlo experiment runner: scenario configuration, trial
//! execution with paired GD/SAM runs on identical data, aggregation across
//! repetitions, and theory-vs-simulation cross-checks.
//!
//! Every scenario is deterministic given its configuration: trial `t` draws
//! from a generator seeded with `base_seed + t`, validation data comes from a
//! separate derived seed, and results are collected in trial order regardless
//! of how many workers execute them.

mod mc;
mod trials;

pub use mc::{mc_decomposition, run_per_sample_law_check, McDecomposition, PerSampleLawReport};
pub use trials::{run_kernel_indefinite, run_linear_fullbatch, run_linear_stochastic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{OptimConfig, Trajectory};
use crate::theory::{
    check_condition_kernel, check_condition_linear, epsilon_for_window, kernel_error_curve,
    ErrorCurve, Spectrum, SpectrumFlavor,
};

/// Which experiment a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Full-batch GD/SAM on linear regression with exponential-covariance
    /// Gaussian inputs; validation error recorded per iteration.
    LinearFullbatch,
    /// One epoch of per-sample (batch size 1) GD/SAM on the same model.
    LinearStochastic,
    /// Indefinite-kernel regression trained on the raw-input Gram matrix
    /// while targets come from expanded polynomial features.
    KernelIndefinite,
    /// Closed-form curve pair for the one-eigenvalue noiseless demonstration.
    ToyNoiseless,
    /// Closed-form curve pair for the two-eigenvalue noisy demonstration.
    ToyNoisy,
    /// Feasibility grid of the dominance conditions over an (eta, rho) grid.
    RegionSweep,
}

/// How the step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    /// Use this value directly.
    Fixed(f64),
    /// Data-dependent `1 / (2 sigma_max(X)^2)` computed per trial.
    Spectral,
}

/// How the perturbation radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoRule {
    /// Use this value directly.
    Fixed(f64),
    /// `eta / 6`, tracking whatever step size the eta rule produced.
    EtaOverSix,
}

fn default_eta_rule() -> EtaRule {
    EtaRule::Spectral
}

fn default_rho_rule() -> RhoRule {
    RhoRule::EtaOverSix
}

fn default_repetitions() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_pair_count() -> usize {
    400
}

/// Full description of one experiment. Serializable so the CLI can load it
/// from a config file and echo it into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Which experiment to run.
    pub scenario: Scenario,
    /// Training sample count (data scenarios).
    #[serde(default)]
    pub n: usize,
    /// Raw input dimension (data scenarios).
    #[serde(default)]
    pub p: usize,
    /// Held-out sample count for the per-iteration validation error.
    #[serde(default)]
    pub validation_count: usize,
    /// Noise standard deviations to sweep (data scenarios; first entry
    /// overrides the built-in sigma for toys).
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Step-size rule.
    #[serde(default = "default_eta_rule")]
    pub eta: EtaRule,
    /// Perturbation-radius rule for the SAM run (GD always uses zero).
    #[serde(default = "default_rho_rule")]
    pub rho: RhoRule,
    /// Iteration budget (ignored by the stochastic scenario, which always
    /// runs exactly one epoch of `n` steps).
    #[serde(default)]
    pub k_max: usize,
    /// Independent repetitions per sigma level.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Seed from which every trial seed is derived.
    #[serde(default)]
    pub base_seed: u64,
    /// Redraw validation data per repetition (default) or share one
    /// validation design across repetitions.
    #[serde(default = "default_true")]
    pub redraw_validation: bool,
    /// Interaction-pair count of the kernel scenario's feature expansion.
    #[serde(default = "default_pair_count")]
    pub pair_count: usize,
    /// Step-size grid (region sweep only).
    #[serde(default)]
    pub eta_grid: Vec<f64>,
    /// Radius grid (region sweep only).
    #[serde(default)]
    pub rho_grid: Vec<f64>,
    /// Eigenvalues of the spectrum whose dominance conditions are swept
    /// (region sweep only; sorted descending internally).
    #[serde(default)]
    pub sweep_d: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::ToyNoiseless,
            n: 0,
            p: 0,
            validation_count: 0,
            sigmas: Vec::new(),
            eta: default_eta_rule(),
            rho: default_rho_rule(),
            k_max: 0,
            repetitions: default_repetitions(),
            base_seed: 0,
            redraw_validation: true,
            pair_count: default_pair_count(),
            eta_grid: Vec::new(),
            rho_grid: Vec::new(),
            sweep_d: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Check scenario-required fields, returning a message that names the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if let EtaRule::Fixed(v) = self.eta {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("eta.fixed must be positive, got {v}")));
            }
        }
        if let RhoRule::Fixed(v) = self.rho {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "rho.fixed must be nonnegative, got {v}"
                )));
            }
        }
        match self.scenario {
            Scenario::LinearFullbatch | Scenario::LinearStochastic | Scenario::KernelIndefinite => {
                if self.n == 0 {
                    return Err(Error::Config("n must be at least 1".into()));
                }
                if self.p == 0 {
                    return Err(Error::Config("p must be at least 1".into()));
                }
                if self.validation_count == 0 {
                    return Err(Error::Config("validation_count must be at least 1".into()));
                }
                if self.sigmas.is_empty() {
                    return Err(Error::Config("sigmas must be nonempty".into()));
                }
                if self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::Config(
                        "sigmas must all be finite and nonnegative".into(),
                    ));
                }
                if self.scenario != Scenario::LinearStochastic && self.k_max == 0 {
                    return Err(Error::Config("k_max must be at least 1".into()));
                }
                if self.scenario == Scenario::KernelIndefinite {
                    let max_pairs = self.p * (self.p.saturating_sub(1)) / 2;
                    if self.pair_count > max_pairs {
                        return Err(Error::Config(format!(
                            "pair_count {} exceeds the {} distinct pairs of {} features",
                            self.pair_count, max_pairs, self.p
                        )));
                    }
                }
            }
            Scenario::ToyNoiseless | Scenario::ToyNoisy => {
                if self.k_max == 0 {
                    return Err(Error::Config("k_max must be at least 1".into()));
                }
            }
            Scenario::RegionSweep => {
                if self.eta_grid.is_empty() || self.rho_grid.is_empty() {
                    return Err(Error::Config(
                        "eta_grid and rho_grid must be nonempty".into(),
                    ));
                }
                if self.sweep_d.is_empty() {
                    return Err(Error::Config("sweep_d must be nonempty".into()));
                }
            }
        }
        Ok(())
    }
}

/// One optimizer's record within a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerRecord {
    /// Validation error per iteration, starting at the initial point. May be
    /// shorter than `k_max + 1` when the divergence guard tripped.
    pub errors: Vec<f64>,
    /// Smallest finite error in the trajectory.
    pub best_error: f64,
    /// First iteration attaining `best_error`.
    pub best_iter: usize,
    /// Iteration at which the divergence guard tripped, if it did.
    pub diverged_at: Option<usize>,
}

impl OptimizerRecord {
    /// Build a record from a recorded error trajectory, locating the first
    /// smallest finite entry.
    pub fn new(errors: Vec<f64>, diverged_at: Option<usize>) -> Self {
        let mut best = f64::INFINITY;
        let mut best_iter = 0;
        for (i, &e) in errors.iter().enumerate() {
            if e.is_finite() && e < best {
                best = e;
                best_iter = i;
            }
        }
        OptimizerRecord {
            errors,
            best_error: best,
            best_iter,
            diverged_at,
        }
    }

    pub(crate) fn from_trajectory(t: Trajectory) -> Self {
        OptimizerRecord::new(t.errors.unwrap_or_default(), t.diverged_at)
    }
}

/// Paired GD and SAM records for one repetition: both consumed the same
/// dataset, the same starting point, and the same step size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    /// Seed the trial's data was drawn from.
    pub seed: u64,
    /// Plain gradient descent (`rho = 0`).
    pub gd: OptimizerRecord,
    /// SAM with the configured radius.
    pub sam: OptimizerRecord,
    /// Anything unusual the trial noticed (for the run manifest).
    pub warnings: Vec<String>,
}

/// Summary over the repetitions of one sigma level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaAggregate {
    pub sigma: f64,
    /// Mean and standard deviation of the per-trial best-error ratio
    /// `best_gd / best_sam`.
    pub mean_ratio: f64,
    pub std_ratio: f64,
    /// Mean and standard deviation of `best_iter_gd - best_iter_sam`.
    pub mean_iter_gap: f64,
    pub std_iter_gap: f64,
    pub mean_best_gd: f64,
    pub std_best_gd: f64,
    pub mean_best_sam: f64,
    pub std_best_sam: f64,
    /// Per-iteration mean/std of the validation error across trials; entries
    /// where no trial has a finite value are NaN (serialized as null).
    pub gd_mean: Vec<f64>,
    pub gd_std: Vec<f64>,
    pub sam_mean: Vec<f64>,
    pub sam_std: Vec<f64>,
    pub gd_divergence_count: usize,
    pub sam_divergence_count: usize,
}

/// All sigma levels of a scenario run, plus collected warnings, in
/// deterministic (configuration) order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub per_sigma: Vec<SigmaAggregate>,
    pub warnings: Vec<String>,
}

/// Mean and sample standard deviation (`n - 1` denominator); a single value
/// has standard deviation zero by convention.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate the repetitions of one sigma level: per-trial summary statistics
/// and per-iteration trajectory means, in trial order.
pub fn aggregate(sigma: f64, trials: &[TrialResult]) -> Result<SigmaAggregate> {
    if trials.is_empty() {
        return Err(Error::EmptyInput {
            context: "aggregate over trials",
        });
    }
    let ratios: Vec<f64> = trials
        .iter()
        .map(|t| t.gd.best_error / t.sam.best_error)
        .collect();
    let gaps: Vec<f64> = trials
        .iter()
        .map(|t| t.gd.best_iter as f64 - t.sam.best_iter as f64)
        .collect();
    let best_gd: Vec<f64> = trials.iter().map(|t| t.gd.best_error).collect();
    let best_sam: Vec<f64> = trials.iter().map(|t| t.sam.best_error).collect();

    let (mean_ratio, std_ratio) = mean_std(&ratios);
    let (mean_iter_gap, std_iter_gap) = mean_std(&gaps);
    let (mean_best_gd, std_best_gd) = mean_std(&best_gd);
    let (mean_best_sam, std_best_sam) = mean_std(&best_sam);

    let k_len = trials
        .iter()
        .map(|t| t.gd.errors.len().max(t.sam.errors.len()))
        .max()
        .unwrap_or(0);
    let per_k = |pick: fn(&TrialResult) -> &OptimizerRecord| {
        let mut means = Vec::with_capacity(k_len);
        let mut stds = Vec::with_capacity(k_len);
        for k in 0..k_len {
            let xs: Vec<f64> = trials
                .iter()
                .filter_map(|t| pick(t).errors.get(k).copied())
                .filter(|e| e.is_finite())
                .collect();
            if xs.is_empty() {
                means.push(f64::NAN);
                stds.push(f64::NAN);
            } else {
                let (m, s) = mean_std(&xs);
                means.push(m);
                stds.push(s);
            }
        }
        (means, stds)
    };
    let (gd_mean, gd_std) = per_k(|t| &t.gd);
    let (sam_mean, sam_std) = per_k(|t| &t.sam);

    Ok(SigmaAggregate {
        sigma,
        mean_ratio,
        std_ratio,
        mean_iter_gap,
        std_iter_gap,
        mean_best_gd,
        std_best_gd,
        mean_best_sam,
        std_best_sam,
        gd_mean,
        gd_std,
        sam_mean,
        sam_std,
        gd_divergence_count: trials.iter().filter(|t| t.gd.diverged_at.is_some()).count(),
        sam_divergence_count: trials.iter().filter(|t| t.sam.diverged_at.is_some()).count(),
    })
}

/// Run `f` on a bounded worker pool. `workers = 0` keeps the ambient rayon
/// context (its default pool, or whatever pool the caller installed).
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Closed-form error-curve pair (GD first, SAM second) for the two built-in
/// demonstration problems; no simulation is involved.
///
/// The noiseless demonstration is a single unit eigenvalue with unit signal,
/// step size 0.015, SAM radius 1, and no noise; the noisy one has
/// eigenvalues `1` and `-0.0007/0.0045` with unit signals, `n = 2`, noise
/// variance 0.2, step size 0.0045, and SAM radius `-1/d_2` (which freezes
/// the negative direction exactly). A `Fixed` eta/rho rule overrides the
/// built-in value; the rules' non-fixed variants select the built-ins. The
/// first `sigmas` entry, when present, overrides the built-in noise level.
pub fn run_toy(cfg: &ExperimentConfig) -> Result<(ErrorCurve, ErrorCurve)> {
    cfg.validate()?;
    let (d, u, n, eta_default, rho_default, sigma_default) = match cfg.scenario {
        Scenario::ToyNoiseless => (vec![1.0], vec![1.0], 1, 0.015, 1.0, 0.0),
        Scenario::ToyNoisy => {
            let eta = 0.0045;
            let d2 = -0.0007 / eta;
            (vec![1.0, d2], vec![1.0, 1.0], 2, eta, -1.0 / d2, 0.2f64.sqrt())
        }
        _ => {
            return Err(Error::Config(
                "run_toy requires the toy_noiseless or toy_noisy scenario".into(),
            ))
        }
    };
    let eta = match cfg.eta {
        EtaRule::Fixed(v) => v,
        EtaRule::Spectral => eta_default,
    };
    let rho = match cfg.rho {
        RhoRule::Fixed(v) => v,
        RhoRule::EtaOverSix => rho_default,
    };
    let sigma = cfg.sigmas.first().copied().unwrap_or(sigma_default);
    let s = Spectrum::new(d, u, n, SpectrumFlavor::Kernel)?;
    let gd = kernel_error_curve(&s, &OptimConfig::new(eta, 0.0, cfg.k_max)?, sigma, cfg.k_max)?;
    let sam = kernel_error_curve(&s, &OptimConfig::new(eta, rho, cfg.k_max)?, sigma, cfg.k_max)?;
    Ok((gd, sam))
}

/// One cell of a dominance-condition feasibility grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub eta: f64,
    pub rho: f64,
    pub feasible: bool,
    pub c0_lo: Option<f64>,
    pub c0_hi: Option<f64>,
}

/// Evaluate the dominance condition on every `(eta, rho)` grid point for the
/// configured spectrum (eta-major order). Spectra with a negative eigenvalue
/// use the indefinite-kernel checker with the window-opening epsilon
/// `2^(1/20) - 1`; all-positive spectra use the positive-definite checker.
pub fn run_region_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    if cfg.scenario != Scenario::RegionSweep {
        return Err(Error::Config(
            "run_region_sweep requires the region_sweep scenario".into(),
        ));
    }
    let mut d = cfg.sweep_d.clone();
    d.sort_by(|a, b| b.partial_cmp(a).ok_or(()).unwrap_or(std::cmp::Ordering::Equal));
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("sweep_d must be finite".into()));
    }
    let n = d.len();
    let has_negative = d.iter().any(|&x| x < 0.0);
    let flavor = if has_negative {
        SpectrumFlavor::Kernel
    } else {
        SpectrumFlavor::Relu
    };
    let s = Spectrum::new(d, vec![1.0; n], n, flavor)?;
    let epsilon = epsilon_for_window(20.0);

    let mut cells = Vec::with_capacity(cfg.eta_grid.len() * cfg.rho_grid.len());
    for &eta in &cfg.eta_grid {
        for &rho in &cfg.rho_grid {
            let ocfg = OptimConfig::new(eta, rho, 1)
                .map_err(|e| Error::Config(format!("grid point eta={eta}, rho={rho}: {e}")))?;
            let report = if has_negative {
                check_condition_kernel(&s, &ocfg, epsilon)?
            } else {
                check_condition_linear(&s, &ocfg)?
            };
            let (c0_lo, c0_hi) = match report.c0_interval {
                Some((lo, hi)) => (Some(lo), Some(hi)),
                None => (None, None),
            };
            cells.push(SweepCell {
                eta,
                rho,
                feasible: report.feasible,
                c0_lo,
                c0_hi,
            });
        }
    }
    Ok(cells)
}
