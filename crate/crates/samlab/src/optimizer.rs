//! Iterative SAM and GD engines: the general two-evaluation step, the exact
//! quadratic step, the spectral closed-form trajectory, the per-sample
//! stochastic step, and activation-pattern monitoring for ReLU runs.

use crate::error::{Error, Result};
use crate::models::{activation_pattern, Dataset, QuadraticLoss, RegressionProblem, ReluNetModel};
use crate::numerics::{contraction_pow, one_minus_contraction_pow, vec as nvec};

/// Norm at which a trajectory is declared divergent and truncated.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Step-size, perturbation-radius, and horizon settings. `rho = 0` makes
/// every engine a plain gradient-descent engine.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    /// Step size, strictly positive.
    pub eta: f64,
    /// Perturbation radius, nonnegative.
    pub rho: f64,
    /// Number of steps a trajectory runs.
    pub k_max: usize,
}

impl OptimConfig {
    /// Validated constructor.
    pub fn new(eta: f64, rho: f64, k_max: usize) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                requirement: "must be positive and finite",
            });
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho,
                requirement: "must be nonnegative and finite",
            });
        }
        Ok(OptimConfig { eta, rho, k_max })
    }
}

/// A recorded optimization run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Iterates `w_0 .. w_k`; length `k_max + 1` unless truncated by the
    /// divergence guard, in which case `iterates.len() == diverged_at`.
    pub iterates: Vec<Vec<f64>>,
    /// Per-iterate error values, aligned with `iterates`, when recording was
    /// requested.
    pub errors: Option<Vec<f64>>,
    /// First iteration whose activation pattern differs from the starting
    /// pattern (ReLU runs only).
    pub pattern_break_at: Option<usize>,
    /// Iteration at which the norm guard tripped; the offending iterate is
    /// not stored.
    pub diverged_at: Option<usize>,
}

/// One SAM step `w - eta * grad(w + rho * grad(w))` for an arbitrary
/// gradient function. Exactly two gradient evaluations.
pub fn sam_step_general<F>(w: &[f64], gradient: F, cfg: &OptimConfig) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let g1 = gradient(w);
    if !nvec::all_finite(&g1) {
        return Err(Error::NonFiniteGradient);
    }
    let mut inner = w.to_vec();
    nvec::axpy(cfg.rho, &g1, &mut inner);
    let g2 = gradient(&inner);
    if !nvec::all_finite(&g2) {
        return Err(Error::NonFiniteGradient);
    }
    let mut out = w.to_vec();
    nvec::axpy(-cfg.eta, &g2, &mut out);
    Ok(out)
}

/// One SAM step on a quadratic loss, algebraically
/// `(I - eta H - eta rho H^2) w + eta (I + rho H)(H anchor - g)`, evaluated
/// with two matrix-vector products (H^2 is never formed).
pub fn sam_step_quadratic(w: &[f64], loss: &QuadraticLoss, cfg: &OptimConfig) -> Result<Vec<f64>> {
    let grad = loss.gradient(w)?;
    let mut inner = w.to_vec();
    nvec::axpy(cfg.rho, &grad, &mut inner);
    let grad2 = loss.gradient(&inner)?;
    let mut out = w.to_vec();
    nvec::axpy(-cfg.eta, &grad2, &mut out);
    Ok(out)
}

/// Closed-form trajectory of SAM on a quadratic loss, evaluated spectrally.
///
/// One eigendecomposition at construction buys every iterate in `O(n^2)`.
/// In the eigenbasis, coordinate `j` after `k` steps is
/// `w0_j * m_j^k + t_j * (1 - m_j^k)` with `m_j = 1 - eta d_j - eta rho d_j^2`
/// and fixed point `t_j = anchor_j - g_j / d_j`; directions with `d_j = 0`
/// accumulate the explicit sum `w0_j - eta k g_j`. The powers are computed
/// from `c_j = eta d_j + eta rho d_j^2` directly so that `1 - m^k` keeps full
/// relative accuracy when `m` is within round-off of one.
#[derive(Debug, Clone)]
pub struct ClosedFormSolver {
    d: Vec<f64>,
    w0_hat: Vec<f64>,
    anchor_hat: Vec<f64>,
    g_hat: Vec<f64>,
    basis: crate::numerics::SymEig,
    eta: f64,
    rho: f64,
}

impl ClosedFormSolver {
    /// Decompose the loss once; `iterate` is then cheap for any `k`.
    pub fn new(loss: &QuadraticLoss, w0: &[f64], cfg: &OptimConfig) -> Result<Self> {
        if !nvec::all_finite(w0) {
            return Err(Error::NonFinite {
                context: "closed-form initial point",
            });
        }
        let eig = crate::numerics::sym_eig(&loss.h)?;
        let w0_hat = eig.to_eigenbasis(w0)?;
        let anchor_hat = eig.to_eigenbasis(&loss.anchor)?;
        let g_hat = eig.to_eigenbasis(&loss.g)?;
        Ok(ClosedFormSolver {
            d: eig.eigenvalues.clone(),
            w0_hat,
            anchor_hat,
            g_hat,
            basis: eig,
            eta: cfg.eta,
            rho: cfg.rho,
        })
    }

    /// Iterate `w_k` in the eigenbasis of the loss curvature.
    ///
    /// The form `w0 m^k + t (1 - m^k)` is used rather than
    /// `t + (w0 - t) m^k`: for tiny eigenvalues the fixed point `t` is huge,
    /// but `t (1 - m^k)` stays `O(k eta)` because `1 - m^k ~ k eta d` cancels
    /// the `g / d` blow-up analytically, and the stable `1 - m^k` keeps that
    /// cancellation in floating point.
    pub fn iterate_coords(&self, k: u64) -> Vec<f64> {
        (0..self.d.len())
            .map(|j| {
                let d = self.d[j];
                if d == 0.0 {
                    self.w0_hat[j] - self.eta * k as f64 * self.g_hat[j]
                } else {
                    let c = self.eta * d + self.eta * self.rho * d * d;
                    let t = self.anchor_hat[j] - self.g_hat[j] / d;
                    self.w0_hat[j] * contraction_pow(c, k)
                        + t * one_minus_contraction_pow(c, k)
                }
            })
            .collect()
    }

    /// Iterate `w_k` in the original coordinates.
    pub fn iterate(&self, k: u64) -> Vec<f64> {
        self.basis
            .from_eigenbasis(&self.iterate_coords(k))
            .expect("coordinate count fixed at construction")
    }
}

/// The `k`-th iterate of SAM on a quadratic loss, in closed form. Equals `k`
/// applications of [`sam_step_quadratic`] within 1e-8 relative.
pub fn closed_form_iterate(
    loss: &QuadraticLoss,
    w0: &[f64],
    cfg: &OptimConfig,
    k: u64,
) -> Result<Vec<f64>> {
    Ok(ClosedFormSolver::new(loss, w0, cfg)?.iterate(k))
}

/// Run `cfg.k_max` quadratic SAM steps from `w0`, optionally recording an
/// error value per iterate. The norm guard truncates divergent runs.
pub fn run_quadratic_trajectory(
    loss: &QuadraticLoss,
    w0: &[f64],
    cfg: &OptimConfig,
    error_fn: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<Trajectory> {
    let mut iterates = Vec::with_capacity(cfg.k_max + 1);
    let mut errors = error_fn.map(|_| Vec::with_capacity(cfg.k_max + 1));
    let mut diverged_at = None;

    let mut w = w0.to_vec();
    record(&w, error_fn, &mut errors);
    iterates.push(w.clone());
    for k in 0..cfg.k_max {
        w = match sam_step_quadratic(&w, loss, cfg) {
            Ok(next) => next,
            Err(Error::NonFiniteGradient) => {
                diverged_at = Some(k + 1);
                break;
            }
            Err(e) => return Err(e),
        };
        if !nvec::all_finite(&w) || nvec::norm(&w) >= DIVERGENCE_GUARD {
            diverged_at = Some(k + 1);
            break;
        }
        record(&w, error_fn, &mut errors);
        iterates.push(w.clone());
    }

    Ok(Trajectory {
        iterates,
        errors,
        pattern_break_at: None,
        diverged_at,
    })
}

fn record(w: &[f64], error_fn: Option<&dyn Fn(&[f64]) -> f64>, errors: &mut Option<Vec<f64>>) {
    if let (Some(f), Some(es)) = (error_fn, errors.as_mut()) {
        es.push(f(w));
    }
}

/// Run `cfg.k_max` SAM steps on the raw ReLU least-squares loss, starting
/// from the model's `w0`. The gradient re-derives the activation pattern at
/// every evaluation point (inner points included), so this is the honest
/// nonconvex dynamic; `pattern_break_at` reports the first iterate whose
/// pattern differs from the starting one. With `record_error`, the error
/// against the noiseless targets is stored per iterate.
pub fn run_relu_trajectory(
    model: &ReluNetModel,
    dataset: &Dataset,
    cfg: &OptimConfig,
    record_error: bool,
) -> Result<Trajectory> {
    let grad = model.loss_gradient_fn(dataset)?;
    let mut iterates = Vec::with_capacity(cfg.k_max + 1);
    let mut errors = record_error.then(|| Vec::with_capacity(cfg.k_max + 1));
    let mut diverged_at = None;

    let mut w = model.w0.clone();
    if let Some(es) = errors.as_mut() {
        es.push(model.empirical_error(&w, dataset)?);
    }
    iterates.push(w.clone());
    for k in 0..cfg.k_max {
        w = match sam_step_general(&w, &grad, cfg) {
            Ok(next) => next,
            Err(Error::NonFiniteGradient) => {
                diverged_at = Some(k + 1);
                break;
            }
            Err(e) => return Err(e),
        };
        if !nvec::all_finite(&w) || nvec::norm(&w) >= DIVERGENCE_GUARD {
            diverged_at = Some(k + 1);
            break;
        }
        if let Some(es) = errors.as_mut() {
            es.push(model.empirical_error(&w, dataset)?);
        }
        iterates.push(w.clone());
    }

    let mut trajectory = Trajectory {
        iterates,
        errors,
        pattern_break_at: None,
        diverged_at,
    };
    trajectory.pattern_break_at = detect_pattern_break(model, &trajectory)?;
    Ok(trajectory)
}

/// First iteration whose activation pattern differs from the pattern of the
/// trajectory's starting point, if any.
pub fn detect_pattern_break(model: &ReluNetModel, trajectory: &Trajectory) -> Result<Option<usize>> {
    let Some(first) = trajectory.iterates.first() else {
        return Ok(None);
    };
    let reference = activation_pattern(first, &model.x)?;
    for (k, w) in trajectory.iterates.iter().enumerate().skip(1) {
        if activation_pattern(w, &model.x)? != reference {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Per-sample (batch size 1) SAM on the squared loss `0.5 (x^T w - y)^2`.
///
/// Each step costs rank-1 work only: with residual `s = x^T w - y`, the step
/// is `w - eta s (1 + rho ||x||^2) x`. `sample(k)` supplies the `k`-th pair
/// `(x_k, y_k)`; `recorder` observes `(k, w_k)` for every iterate starting
/// with `(0, w0)`. `cfg.k_max` is ignored in favor of `sample_count`.
pub fn stochastic_sam_run<F, R>(
    w0: &[f64],
    cfg: &OptimConfig,
    sample_count: usize,
    mut sample: F,
    mut recorder: R,
) -> Result<Vec<f64>>
where
    F: FnMut(usize) -> (Vec<f64>, f64),
    R: FnMut(usize, &[f64]),
{
    let mut w = w0.to_vec();
    recorder(0, &w);
    for k in 0..sample_count {
        let (x, y) = sample(k);
        if x.len() != w.len() {
            return Err(Error::Dimension {
                context: "stochastic sample",
                expected: w.len(),
                got: x.len(),
            });
        }
        let s = nvec::dot(&x, &w) - y;
        let factor = cfg.eta * s * (1.0 + cfg.rho * nvec::norm_sq(&x));
        if !factor.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
        nvec::axpy(-factor, &x, &mut w);
        if nvec::norm(&w) >= DIVERGENCE_GUARD {
            return Err(Error::Diverged { iteration: k + 1 });
        }
        recorder(k + 1, &w);
    }
    Ok(w)
}
