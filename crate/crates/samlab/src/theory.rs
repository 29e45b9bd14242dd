//! Closed-form statistical predictions and provable-condition checkers:
//! bias/variance/error curves, dominance conditions with admissible-constant
//! intervals and iteration bounds, exact sharpness with its gap lower bound,
//! and the expected-error law of per-sample SAM on isotropic Gaussian data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::QuadraticLoss;
use crate::numerics::{
    ball_quadratic_max, contraction_pow, one_minus_contraction_pow, sym_eig, vec as nvec, Matrix,
};
use crate::optimizer::{ClosedFormSolver, OptimConfig};
use crate::rng::Rng;

/// Which bias weighting a spectrum carries. The ReLU/linear theory weights
/// the bias by `d_i u_i^2`; the kernel theory weights it by `d_i^2 u_i^2`.
/// The tag makes the two curve formulas impossible to mix up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFlavor {
    /// Curvature `H = A'A` of a (pattern-fixed) ReLU or linear problem;
    /// signal coordinates are those of `w_bar - w0`.
    Relu,
    /// Curvature `K` of a kernel problem; signal coordinates are those of
    /// `w_bar` (runs start from zero coefficients).
    Kernel,
}

/// Eigenvalues of the curvature operator with the signal expressed in its
/// eigenbasis — everything the closed-form error curves depend on.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Eigenvalues, descending.
    pub d: Vec<f64>,
    /// Signal coordinates, aligned with `d` (only their squares enter).
    pub u: Vec<f64>,
    /// Sample count `n` that normalizes the error.
    pub n: usize,
    /// Which curve formula applies.
    pub flavor: SpectrumFlavor,
}

impl Spectrum {
    /// Validated constructor: `d` descending and finite, `u` aligned, `n >= 1`.
    pub fn new(d: Vec<f64>, u: Vec<f64>, n: usize, flavor: SpectrumFlavor) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyInput {
                context: "spectrum eigenvalues",
            });
        }
        if u.len() != d.len() {
            return Err(Error::Dimension {
                context: "spectrum signal coordinates",
                expected: d.len(),
                got: u.len(),
            });
        }
        if !nvec::all_finite(&d) || !nvec::all_finite(&u) {
            return Err(Error::NonFinite { context: "spectrum" });
        }
        if d.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Precondition {
                inequality: "eigenvalues sorted descending",
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                requirement: "must be at least 1",
            });
        }
        Ok(Spectrum { d, u, n, flavor })
    }

    /// ReLU/linear spectrum of a design (or pattern) matrix: eigenvalues of
    /// `A'A` with the signal `w_bar - w0` in the eigenbasis.
    pub fn relu_from_design(design: &Matrix, w_bar: &[f64], w0: &[f64]) -> Result<Spectrum> {
        let eig = sym_eig(&design.gram())?;
        let diff = nvec::sub(w_bar, w0);
        let u = eig.to_eigenbasis(&diff)?;
        Spectrum::new(eig.eigenvalues, u, design.rows(), SpectrumFlavor::Relu)
    }

    /// Kernel spectrum of a Gram matrix: its eigenvalues with the representer
    /// coefficients `w_bar` in the eigenbasis.
    pub fn kernel_from_gram(k: &Matrix, w_bar: &[f64]) -> Result<Spectrum> {
        let eig = sym_eig(k)?;
        let u = eig.to_eigenbasis(w_bar)?;
        Spectrum::new(eig.eigenvalues, u, k.rows(), SpectrumFlavor::Kernel)
    }

    /// Count of strictly positive eigenvalues.
    pub fn r(&self) -> usize {
        self.d.iter().filter(|&&x| x > 0.0).count()
    }

    /// Squared norm of the mapped signal: `||A (w_bar - w0)||^2 = sum d u^2`
    /// for the ReLU flavor, `||K w_bar||^2 = sum d^2 u^2` for the kernel
    /// flavor. This is the numerator of the signal-to-noise ratio.
    pub fn signal_norm_sq(&self) -> f64 {
        match self.flavor {
            SpectrumFlavor::Relu => self
                .d
                .iter()
                .zip(&self.u)
                .map(|(d, u)| d * u * u)
                .sum(),
            SpectrumFlavor::Kernel => self
                .d
                .iter()
                .zip(&self.u)
                .map(|(d, u)| d * d * u * u)
                .sum(),
        }
    }
}

/// Bias/variance/error values for every iteration `0..=k_max`. The variance
/// is split into the contributions of positive and negative eigenvalues;
/// `var` and `error` are derived sums, so the decomposition is exact by
/// construction.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    /// Squared bias per iteration.
    pub bias_sq: Vec<f64>,
    /// Variance from positive-eigenvalue directions per iteration.
    pub var_plus: Vec<f64>,
    /// Variance from negative-eigenvalue directions per iteration (zero for
    /// the ReLU flavor).
    pub var_minus: Vec<f64>,
    /// Set when a positive-eigenvalue contraction factor left `(0, 1)`, the
    /// regime the closed form is proved in. The curve is still returned.
    pub range_warning: bool,
}

impl ErrorCurve {
    /// Number of tabulated iterations (`k_max + 1`).
    pub fn len(&self) -> usize {
        self.bias_sq.len()
    }

    /// True when no iterations are tabulated.
    pub fn is_empty(&self) -> bool {
        self.bias_sq.is_empty()
    }

    /// Total variance at iteration `k`.
    pub fn var(&self, k: usize) -> f64 {
        self.var_plus[k] + self.var_minus[k]
    }

    /// Total error `bias_sq + var` at iteration `k`.
    pub fn error(&self, k: usize) -> f64 {
        self.bias_sq[k] + self.var(k)
    }
}

/// Outcome of a dominance-condition check. `k_lower`/`k_upper` are filled by
/// the iteration-bound operations when a caller composes a full report.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// Whether every required inequality admits a constant.
    pub feasible: bool,
    /// Admissible interval for the comparison constant, intersected with
    /// `(1, inf)` and reported only when feasible. The lower endpoint is
    /// exclusive whenever it equals 1.
    pub c0_interval: Option<(f64, f64)>,
    /// Kernel checks only: whether `1 + epsilon <= 1 - eta d_j` holds for
    /// every negative eigenvalue.
    pub epsilon_ok: Option<bool>,
    /// Iteration upper bound, when one has been attached.
    pub k_upper: Option<f64>,
    /// Iteration lower bound (kernel window), when one has been attached.
    pub k_lower: Option<f64>,
}

/// Iteration bound attached to a dominance claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationBound {
    /// No noise: dominance holds at every iteration, no bound needed.
    Noiseless,
    /// The bound's own preconditions fail (signal-to-noise ratio below one,
    /// or the logarithms have the wrong signs); nothing is asserted.
    NotAsserted,
    /// Dominance asserted for all iterations `k <=` this value.
    UpTo(f64),
}

/// Iteration window attached to a kernel dominance claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationWindow {
    /// No noise: no finite window needed.
    Noiseless,
    /// The window's preconditions fail; nothing is asserted.
    NotAsserted,
    /// Dominance asserted for `k_lower <= k <= k_upper`; `nonempty` records
    /// whether the window contains any iteration.
    Window {
        k_lower: f64,
        k_upper: f64,
        nonempty: bool,
    },
}

fn require_flavor(s: &Spectrum, flavor: SpectrumFlavor, what: &'static str) -> Result<()> {
    if s.flavor != flavor {
        return Err(Error::Precondition { inequality: what });
    }
    Ok(())
}

/// Contraction increment `c = eta d + eta rho d^2`, so the per-step factor is
/// `m = 1 - c`. Working with `c` keeps `1 - m^k` accurate when `m` is within
/// round-off of one.
fn increment(d: f64, cfg: &OptimConfig) -> f64 {
    cfg.eta * d + cfg.eta * cfg.rho * d * d
}

/// Closed-form error curve of the ReLU/linear theory.
///
/// Only the `r` positive eigenvalues enter. Per iteration,
/// `bias_sq = (1/n) sum m_i^{2k} d_i u_i^2` and
/// `var = (sigma^2/n) sum (1 - m_i^k)^2` with
/// `m_i = 1 - eta d_i - eta rho d_i^2`; the negative-eigenvalue variance slot
/// is identically zero. A contraction factor outside `(0, 1)` sets
/// `range_warning` instead of failing, so curves outside the proved regime
/// can still be tabulated.
pub fn relu_error_curve(
    s: &Spectrum,
    cfg: &OptimConfig,
    sigma: f64,
    k_max: usize,
) -> Result<ErrorCurve> {
    require_flavor(s, SpectrumFlavor::Relu, "spectrum flavor is relu")?;
    let r = s.r();
    let n = s.n as f64;
    let cs: Vec<f64> = s.d[..r].iter().map(|&d| increment(d, cfg)).collect();
    let range_warning = cs.iter().any(|&c| !(0.0 < c && c < 1.0));

    let mut bias_sq = Vec::with_capacity(k_max + 1);
    let mut var_plus = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max as u64 {
        let mut b = 0.0;
        let mut v = 0.0;
        for (i, &c) in cs.iter().enumerate() {
            b += contraction_pow(c, 2 * k) * s.d[i] * s.u[i] * s.u[i];
            let omp = one_minus_contraction_pow(c, k);
            v += omp * omp;
        }
        bias_sq.push(b / n);
        var_plus.push(sigma * sigma * v / n);
    }
    let var_minus = vec![0.0; k_max + 1];
    Ok(ErrorCurve {
        bias_sq,
        var_plus,
        var_minus,
        range_warning,
    })
}

/// Closed-form error curve of the kernel theory.
///
/// All `n` eigenvalues enter (a zero eigenvalue is an error: the theory
/// assumes a full-rank Gram matrix). Per iteration,
/// `bias_sq = (1/n) sum m_i^{2k} d_i^2 u_i^2`, and the variance splits into
/// `(sigma^2/n) sum (1 - m_i^k)^2` over positive-eigenvalue indices
/// (`var_plus`) and negative-eigenvalue indices (`var_minus`).
pub fn kernel_error_curve(
    s: &Spectrum,
    cfg: &OptimConfig,
    sigma: f64,
    k_max: usize,
) -> Result<ErrorCurve> {
    require_flavor(s, SpectrumFlavor::Kernel, "spectrum flavor is kernel")?;
    for (i, &d) in s.d.iter().enumerate() {
        if d == 0.0 {
            return Err(Error::ZeroEigenvalue { index: i, value: d });
        }
    }
    let n = s.n as f64;
    let cs: Vec<f64> = s.d.iter().map(|&d| increment(d, cfg)).collect();

    let mut bias_sq = Vec::with_capacity(k_max + 1);
    let mut var_plus = Vec::with_capacity(k_max + 1);
    let mut var_minus = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max as u64 {
        let mut b = 0.0;
        let mut vp = 0.0;
        let mut vm = 0.0;
        for (i, &c) in cs.iter().enumerate() {
            let d = s.d[i];
            b += contraction_pow(c, 2 * k) * d * d * s.u[i] * s.u[i];
            let omp = one_minus_contraction_pow(c, k);
            if d > 0.0 {
                vp += omp * omp;
            } else {
                vm += omp * omp;
            }
        }
        bias_sq.push(b / n);
        var_plus.push(sigma * sigma * vp / n);
        var_minus.push(sigma * sigma * vm / n);
    }
    Ok(ErrorCurve {
        bias_sq,
        var_plus,
        var_minus,
        range_warning: false,
    })
}

/// Largest and smallest positive eigenvalues, or an error if none are
/// positive.
fn positive_extremes(s: &Spectrum) -> Result<(f64, f64)> {
    let r = s.r();
    if r == 0 {
        return Err(Error::MissingEigenvalueSign { need: "positive" });
    }
    Ok((s.d[0], s.d[r - 1]))
}

/// Admissible-constant interval from the positive part of the spectrum:
/// `lo = (1 - eta d_r) / (1 - eta d_1 - eta rho d_1^2)` and
/// `hi = ((1 - eta d_1) / (1 - eta d_r - eta rho d_r^2))^2`, feasible when
/// both denominators and `1 - eta d_1` are positive and `[lo, hi]` meets
/// `(1, inf)`.
fn c0_interval(d1: f64, dr: f64, cfg: &OptimConfig) -> (bool, Option<(f64, f64)>) {
    let den1 = 1.0 - increment(d1, cfg);
    let den2 = 1.0 - increment(dr, cfg);
    let top = 1.0 - cfg.eta * dr;
    let mid = 1.0 - cfg.eta * d1;
    if den1 <= 0.0 || den2 <= 0.0 || mid <= 0.0 {
        return (false, None);
    }
    let lo = top / den1;
    let hi = (mid / den2) * (mid / den2);
    if hi > 1.0 && hi >= lo {
        (true, Some((lo.max(1.0), hi)))
    } else {
        (false, None)
    }
}

/// Dominance condition for the positive-definite (ReLU/linear) theory: is
/// there a constant `c0 > 1` with `1 - eta d_r <= c0 (1 - eta d_1 -
/// eta rho d_1^2)` and `1 - eta d_1 >= sqrt(c0) (1 - eta d_r -
/// eta rho d_r^2)`? The admissible interval is reported when nonempty.
pub fn check_condition_linear(s: &Spectrum, cfg: &OptimConfig) -> Result<ConditionReport> {
    let (d1, dr) = positive_extremes(s)?;
    let (feasible, interval) = c0_interval(d1, dr, cfg);
    Ok(ConditionReport {
        feasible,
        c0_interval: interval,
        epsilon_ok: None,
        k_upper: None,
        k_lower: None,
    })
}

/// Dominance condition for the indefinite kernel theory: the positive-part
/// interval must be nonempty, and every negative eigenvalue `d_j` must
/// satisfy `m_j <= 1` and `1 + epsilon <= 1 - eta d_j`.
pub fn check_condition_kernel(
    s: &Spectrum,
    cfg: &OptimConfig,
    epsilon: f64,
) -> Result<ConditionReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            requirement: "must be positive and finite",
        });
    }
    if !s.d.iter().any(|&d| d < 0.0) {
        return Err(Error::MissingEigenvalueSign { need: "negative" });
    }
    let (d1, dr) = positive_extremes(s)?;
    let (pos_feasible, interval) = c0_interval(d1, dr, cfg);

    let mut m_ok = true;
    let mut epsilon_ok = true;
    for &d in s.d.iter().filter(|&&d| d < 0.0) {
        if 1.0 - increment(d, cfg) > 1.0 {
            m_ok = false;
        }
        if 1.0 + epsilon > 1.0 - cfg.eta * d {
            epsilon_ok = false;
        }
    }

    Ok(ConditionReport {
        feasible: pos_feasible && m_ok && epsilon_ok,
        c0_interval: interval,
        epsilon_ok: Some(epsilon_ok),
        k_upper: None,
        k_lower: None,
    })
}

/// Iteration budget within which the positive-definite dominance claim is
/// asserted: `k* = log[2 / (SNR + 1)] / log[(1 - eta d_1 - eta rho d_1^2)^2
/// / (1 - eta d_r - eta rho d_r^2)]` with
/// `SNR = signal_norm_sq / (r sigma^2)`. Noiseless problems dominate at
/// every iteration; an SNR below one or logarithms of the wrong sign assert
/// nothing.
pub fn iteration_bound_linear(
    s: &Spectrum,
    cfg: &OptimConfig,
    sigma: f64,
    signal_norm_sq: f64,
) -> Result<IterationBound> {
    if sigma == 0.0 {
        return Ok(IterationBound::Noiseless);
    }
    let r = s.r();
    if r == 0 {
        return Err(Error::MissingEigenvalueSign { need: "positive" });
    }
    let (d1, dr) = positive_extremes(s)?;
    let snr = signal_norm_sq / (r as f64 * sigma * sigma);
    if !(snr >= 1.0) {
        return Ok(IterationBound::NotAsserted);
    }
    let a = 1.0 - increment(d1, cfg);
    let b = 1.0 - increment(dr, cfg);
    let ratio = a * a / b;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Ok(IterationBound::NotAsserted);
    }
    let num = (2.0 / (snr + 1.0)).ln(); // <= 0 since SNR >= 1
    let k = num / ratio.ln();
    Ok(IterationBound::UpTo(if k == 0.0 { 0.0 } else { k }))
}

/// Iteration window for the kernel dominance claim: lower endpoint
/// `log 2 / log(1 + epsilon)`, upper endpoint as in the positive-definite
/// bound with `SNR = signal_norm_sq / (r sigma^2)`.
pub fn iteration_window_kernel(
    s: &Spectrum,
    cfg: &OptimConfig,
    sigma: f64,
    epsilon: f64,
    signal_norm_sq: f64,
) -> Result<IterationWindow> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            requirement: "must be positive and finite",
        });
    }
    if sigma == 0.0 {
        return Ok(IterationWindow::Noiseless);
    }
    let k_lower = std::f64::consts::LN_2 / epsilon.ln_1p();
    match iteration_bound_linear(s, cfg, sigma, signal_norm_sq)? {
        IterationBound::Noiseless => unreachable!("sigma > 0 checked above"),
        IterationBound::NotAsserted => Ok(IterationWindow::NotAsserted),
        IterationBound::UpTo(k_upper) => Ok(IterationWindow::Window {
            k_lower,
            k_upper,
            nonempty: k_upper >= k_lower,
        }),
    }
}

/// The `epsilon` whose kernel iteration window opens exactly at `k_lower`
/// iterations: `2^(1/k_lower) - 1`, inverting
/// `k_lower = log 2 / log(1 + epsilon)`.
pub fn epsilon_for_window(k_lower: f64) -> f64 {
    2f64.powf(1.0 / k_lower) - 1.0
}

/// Sharpness at a noise-averaged iterate: the exact maximum increase of the
/// mean quadratic over a perturbation ball of radius `rho0`,
/// `max_{||e|| <= rho0} 0.5 e' H e + (H (w_mean - anchor)) . e`.
///
/// Only the curvature and anchor of `loss` enter: its linear term is a
/// single noise draw whose mean is zero, and sharpness is defined for the
/// noise-averaged objective.
pub fn sharpness(loss: &QuadraticLoss, w_mean: &[f64], rho0: f64) -> Result<f64> {
    let diff = nvec::sub(w_mean, &loss.anchor);
    let g = loss.h.matvec(&diff)?;
    Ok(ball_quadratic_max(&loss.h, &g, rho0)?.value)
}

/// Sharpness along the noise-averaged trajectory from `w0`: the mean iterate
/// is the closed form of the loss with its noise term zeroed, and the
/// sharpness at each requested iteration is computed exactly.
pub fn sharpness_curve(
    loss: &QuadraticLoss,
    w0: &[f64],
    cfg: &OptimConfig,
    ks: &[u64],
    rho0: f64,
) -> Result<Vec<f64>> {
    let mean_loss = QuadraticLoss::new(
        loss.h.clone(),
        vec![0.0; loss.g.len()],
        loss.anchor.clone(),
    )?;
    let solver = ClosedFormSolver::new(&mean_loss, w0, cfg)?;
    ks.iter()
        .map(|&k| sharpness(&mean_loss, &solver.iterate(k), rho0))
        .collect()
}

/// Explicit lower bound on the sharpness gap (plain GD minus SAM) after `k`
/// iterations on a positive-definite spectrum:
/// `rho0^2 (d_r - d_1) / 2 + rho0 (sqrt(sum (1 - eta d_i)^{2k} d_i^2 u_i^2)
/// - sqrt(sum m_i^{2k} d_i^2 u_i^2))` over the positive eigenvalues.
pub fn sharpness_gap_lower_bound(
    s: &Spectrum,
    cfg: &OptimConfig,
    rho0: f64,
    k: u64,
) -> Result<f64> {
    require_flavor(s, SpectrumFlavor::Relu, "spectrum flavor is relu")?;
    let (d1, dr) = positive_extremes(s)?;
    let r = s.r();
    let mut gd_sum = 0.0;
    let mut sam_sum = 0.0;
    for i in 0..r {
        let d = s.d[i];
        let w = d * d * s.u[i] * s.u[i];
        gd_sum += contraction_pow(cfg.eta * d, 2 * k) * w;
        let c = increment(d, cfg);
        sam_sum += contraction_pow(c, 2 * k) * w;
    }
    Ok(rho0 * rho0 * (dr - d1) / 2.0 + rho0 * (gd_sum.sqrt() - sam_sum.sqrt()))
}

/// Expected-error law of per-sample SAM on isotropic Gaussian inputs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StochasticErrorLaw {
    /// Expected SAM error minus expected GD error after `k` steps,
    /// `[(1 - eta - eta rho (p+2))^{2k} - (1 - eta)^{2k}] ||w_bar||^2`.
    /// Never positive under the checked preconditions.
    pub difference: f64,
    /// The SAM term alone, `(1 - eta - eta rho (p+2))^{2k} ||w_bar||^2`.
    pub sam_error: f64,
}

/// Evaluate the per-sample expected-error law after `k` steps in dimension
/// `p`, for a signal of squared norm `w_bar_norm_sq`, checking the law's
/// precondition `0 < 1 - eta - eta rho (p+2) <= 1 - eta < 1` and naming the
/// failed inequality.
pub fn stochastic_error_difference(
    p: usize,
    cfg: &OptimConfig,
    k: u64,
    w_bar_norm_sq: f64,
) -> Result<StochasticErrorLaw> {
    let c_gd = cfg.eta;
    let c_sam = cfg.eta + cfg.eta * cfg.rho * (p as f64 + 2.0);
    if !(1.0 - c_sam > 0.0) {
        return Err(Error::Precondition {
            inequality: "0 < 1 - eta - eta rho (p + 2)",
        });
    }
    if !(c_sam >= c_gd) {
        return Err(Error::Precondition {
            inequality: "1 - eta - eta rho (p + 2) <= 1 - eta",
        });
    }
    if !(1.0 - c_gd < 1.0) {
        return Err(Error::Precondition {
            inequality: "1 - eta < 1",
        });
    }
    let sam_pow = contraction_pow(c_sam, 2 * k);
    let gd_pow = contraction_pow(c_gd, 2 * k);
    Ok(StochasticErrorLaw {
        difference: (sam_pow - gd_pow) * w_bar_norm_sq,
        sam_error: sam_pow * w_bar_norm_sq,
    })
}

/// Monte Carlo check of the isotropic fourth-moment identity
/// `E[x x' x x'] = (p + 2) I` for `x ~ Normal(0, I_p)`.
#[derive(Debug, Clone, Copy)]
pub struct FourthMomentCheck {
    /// Largest entrywise deviation of the estimate from `(p + 2) I`.
    pub max_abs_deviation: f64,
    /// Mean of the estimated diagonal (should be near `p + 2`).
    pub diag_mean: f64,
}

/// Estimate `E[x x' x x'] = E[||x||^2 x x']` from `sample_count` draws.
pub fn fourth_moment_check(p: usize, sample_count: usize, seed: u64) -> Result<FourthMomentCheck> {
    if p == 0 || sample_count == 0 {
        return Err(Error::EmptyInput {
            context: "fourth-moment check",
        });
    }
    let mut rng = Rng::new(seed);
    let mut acc = vec![0.0; p * p];
    for _ in 0..sample_count {
        let x = rng.normal_vec(p, 1.0);
        let nsq = nvec::norm_sq(&x);
        for i in 0..p {
            let f = nsq * x[i];
            for j in 0..p {
                acc[i * p + j] += f * x[j];
            }
        }
    }
    let scale = 1.0 / sample_count as f64;
    let target = p as f64 + 2.0;
    let mut max_dev = 0.0f64;
    let mut diag = 0.0;
    for i in 0..p {
        for j in 0..p {
            let est = acc[i * p + j] * scale;
            let want = if i == j { target } else { 0.0 };
            max_dev = max_dev.max((est - want).abs());
            if i == j {
                diag += est;
            }
        }
    }
    Ok(FourthMomentCheck {
        max_abs_deviation: max_dev,
        diag_mean: diag / p as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eta: f64, rho: f64) -> OptimConfig {
        OptimConfig::new(eta, rho, 1).unwrap()
    }

    fn relu_spectrum(d: Vec<f64>, u: Vec<f64>, n: usize) -> Spectrum {
        Spectrum::new(d, u, n, SpectrumFlavor::Relu).unwrap()
    }

    fn kernel_spectrum(d: Vec<f64>, u: Vec<f64>, n: usize) -> Spectrum {
        Spectrum::new(d, u, n, SpectrumFlavor::Kernel).unwrap()
    }

    /// The two-eigenvalue noisy demonstration problem: unit top eigenvalue,
    /// small negative second eigenvalue, radius tuned so SAM freezes the
    /// negative direction.
    fn noisy_toy() -> (Spectrum, f64, f64, f64) {
        let eta = 0.0045;
        let d2 = -0.0007 / eta;
        let rho = -1.0 / d2;
        let s = kernel_spectrum(vec![1.0, d2], vec![1.0, 1.0], 2);
        let sigma = 0.2f64.sqrt();
        (s, eta, rho, sigma)
    }

    #[test]
    fn spectrum_validation_and_counts() {
        assert!(Spectrum::new(vec![], vec![], 1, SpectrumFlavor::Relu).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![0.0; 2], 1, SpectrumFlavor::Relu).is_err());
        assert!(Spectrum::new(vec![1.0], vec![0.0; 2], 1, SpectrumFlavor::Relu).is_err());
        assert!(Spectrum::new(vec![1.0], vec![0.0], 0, SpectrumFlavor::Relu).is_err());
        let s = relu_spectrum(vec![2.0, 1.0, 0.0, -1.0], vec![1.0; 4], 4);
        assert_eq!(s.r(), 2);
    }

    #[test]
    fn signal_norm_matches_flavor() {
        let s = relu_spectrum(vec![2.0, 1.0], vec![3.0, 1.0], 2);
        assert_eq!(s.signal_norm_sq(), 2.0 * 9.0 + 1.0);
        let s = kernel_spectrum(vec![2.0, 1.0], vec![3.0, 1.0], 2);
        assert_eq!(s.signal_norm_sq(), 4.0 * 9.0 + 1.0);
    }

    #[test]
    fn spectrum_from_design_matches_hand_decomposition() {
        // Diagonal design: X'X = diag(4, 1); w_bar - w0 = (1, 2).
        let x = Matrix::from_diag(&[2.0, 1.0]).unwrap();
        let s = Spectrum::relu_from_design(&x, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(s.d, vec![4.0, 1.0]);
        assert!((s.u[0] - 1.0).abs() < 1e-12);
        assert!((s.u[1] - 2.0).abs() < 1e-12);
        assert_eq!(s.n, 2);
    }

    #[test]
    fn relu_curve_at_zero_iterations() {
        let s = relu_spectrum(vec![2.0, 1.0], vec![1.0, 3.0], 4);
        let c = relu_error_curve(&s, &cfg(0.01, 0.5), 0.7, 3).unwrap();
        assert!((c.bias_sq[0] - (2.0 + 9.0) / 4.0).abs() < 1e-15);
        assert_eq!(c.var(0), 0.0);
        assert_eq!(c.len(), 4);
        assert!(!c.range_warning);
    }

    #[test]
    fn one_dim_toy_error_after_one_step() {
        let s = relu_spectrum(vec![1.0], vec![1.0], 1);
        let sam = relu_error_curve(&s, &cfg(0.015, 1.0), 0.0, 1).unwrap();
        assert!((sam.error(1) - 0.9409).abs() < 1e-12);
        let gd = relu_error_curve(&s, &cfg(0.015, 0.0), 0.0, 1).unwrap();
        assert!((gd.error(1) - 0.970225).abs() < 1e-12);
    }

    #[test]
    fn variance_saturates_at_sigma_sq_r_over_n() {
        let s = relu_spectrum(vec![1.5, 1.0, 0.5], vec![1.0; 3], 5);
        let sigma = 0.9;
        let c = relu_error_curve(&s, &cfg(0.05, 0.3), sigma, 5000).unwrap();
        let want = sigma * sigma * 3.0 / 5.0;
        assert!((c.var(5000) - want).abs() < 1e-6);
        assert!(!c.range_warning);
    }

    #[test]
    fn range_warning_outside_contraction_regime() {
        let s = relu_spectrum(vec![1.0], vec![1.0], 1);
        // eta d + eta rho d^2 = 1.2 >= 1: factor is negative.
        let c = relu_error_curve(&s, &cfg(0.6, 1.0), 0.0, 2).unwrap();
        assert!(c.range_warning);
    }

    #[test]
    fn relu_curve_rejects_kernel_flavor() {
        let s = kernel_spectrum(vec![1.0], vec![1.0], 1);
        assert!(relu_error_curve(&s, &cfg(0.01, 0.0), 0.0, 1).is_err());
        let s = relu_spectrum(vec![1.0], vec![1.0], 1);
        assert!(kernel_error_curve(&s, &cfg(0.01, 0.0), 0.0, 1).is_err());
    }

    #[test]
    fn kernel_curve_at_zero_iterations_uses_squared_weights() {
        let s = kernel_spectrum(vec![2.0, -1.0], vec![1.0, 3.0], 2);
        let c = kernel_error_curve(&s, &cfg(0.01, 0.1), 0.5, 2).unwrap();
        assert!((c.bias_sq[0] - (4.0 + 9.0) / 2.0).abs() < 1e-15);
        assert_eq!(c.var(0), 0.0);
    }

    #[test]
    fn kernel_curve_rejects_zero_eigenvalue() {
        let s = kernel_spectrum(vec![1.0, 0.0], vec![1.0, 1.0], 2);
        assert!(matches!(
            kernel_error_curve(&s, &cfg(0.01, 0.0), 0.1, 1),
            Err(Error::ZeroEigenvalue { index: 1, .. })
        ));
    }

    #[test]
    fn kernel_variance_splits_by_sign() {
        let s = kernel_spectrum(vec![1.0, -0.5], vec![1.0, 1.0], 2);
        let c = kernel_error_curve(&s, &cfg(0.01, 0.0), 1.0, 10).unwrap();
        assert!(c.var_plus[10] > 0.0);
        assert!(c.var_minus[10] > 0.0);
        // Positive direction contracts toward (1-m^k)^2 -> below 1-ish;
        // negative direction's factor exceeds 1 so (1-m^k)^2 grows.
        let c_long = kernel_error_curve(&s, &cfg(0.01, 0.0), 1.0, 2000).unwrap();
        assert!(c_long.var_minus[2000] > c_long.var_plus[2000]);
    }

    #[test]
    fn noisy_toy_sam_freezes_negative_direction() {
        let (s, eta, rho, sigma) = noisy_toy();
        let sam = kernel_error_curve(&s, &cfg(eta, rho), sigma, 10_000).unwrap();
        // The negative-direction bias term is d2^2 u2^2 / n at k = 0 and must
        // stay there: total bias at large k is exactly that constant once the
        // positive direction has decayed.
        let d2 = s.d[1];
        let frozen = d2 * d2 / 2.0;
        assert!((sam.bias_sq[10_000] - frozen).abs() <= 1e-10 * frozen.max(1.0));

        // GD's negative-direction factor 1.0007 compounds without bound.
        let gd = kernel_error_curve(&s, &cfg(eta, 0.0), sigma, 10_000).unwrap();
        assert!(gd.error(10_000) > 1e4 * sam.error(10_000));
    }

    #[test]
    fn gd_error_unbounded_and_eventually_monotone_with_negative_eigenvalue() {
        let s = kernel_spectrum(vec![1.0, -0.3], vec![1.0, 1.0], 2);
        let c = kernel_error_curve(&s, &cfg(0.02, 0.0), 0.4, 4000).unwrap();
        assert!(c.error(4000) > 1e6 * c.error(0));
        for k in 3900..4000 {
            assert!(c.error(k + 1) > c.error(k));
        }
    }

    #[test]
    fn sam_bias_below_gd_bias_and_variance_above() {
        // Exhaustive small grid; the orderings must hold at every k.
        let spectra = [
            relu_spectrum(vec![2.0, 1.0, 0.3], vec![1.0, -0.5, 2.0], 3),
            relu_spectrum(vec![1.0, 1.0], vec![0.7, 0.7], 2),
            relu_spectrum(vec![3.0, 0.1], vec![0.2, 1.5], 5),
        ];
        for s in &spectra {
            for &eta in &[0.005, 0.02, 0.1] {
                for &rho in &[0.1, 0.5, 1.5] {
                    let sam = relu_error_curve(s, &cfg(eta, rho), 0.8, 500).unwrap();
                    let gd = relu_error_curve(s, &cfg(eta, 0.0), 0.8, 500).unwrap();
                    if sam.range_warning || gd.range_warning {
                        continue;
                    }
                    for k in 0..=500 {
                        let scale = gd.bias_sq[k].max(1e-300);
                        assert!(
                            sam.bias_sq[k] <= gd.bias_sq[k] + 1e-14 * scale,
                            "bias ordering at k={k}"
                        );
                        let vscale = sam.var(k).max(1e-300);
                        assert!(
                            sam.var(k) + 1e-14 * vscale >= gd.var(k),
                            "variance ordering at k={k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn linear_condition_equal_eigenvalues_interval() {
        let s = relu_spectrum(vec![1.0, 1.0], vec![1.0, 1.0], 2);
        let rep = check_condition_linear(&s, &cfg(0.1, 1.0)).unwrap();
        assert!(rep.feasible);
        let (lo, hi) = rep.c0_interval.unwrap();
        assert!((lo - 1.125).abs() < 1e-12);
        assert!((hi - 1.265625).abs() < 1e-12);
        assert!(rep.epsilon_ok.is_none());
    }

    #[test]
    fn linear_condition_gd_infeasible_on_flat_spectrum() {
        let s = relu_spectrum(vec![1.0, 1.0], vec![1.0, 1.0], 2);
        let rep = check_condition_linear(&s, &cfg(0.1, 0.0)).unwrap();
        assert!(!rep.feasible);
        assert!(rep.c0_interval.is_none());
    }

    #[test]
    fn linear_condition_interval_collapses_as_eta_vanishes() {
        let s = relu_spectrum(vec![1.0, 1.0], vec![1.0, 1.0], 2);
        let mut last_width = f64::INFINITY;
        for &eta in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let rep = check_condition_linear(&s, &cfg(eta, 1.0)).unwrap();
            assert!(rep.feasible, "eta={eta} still admits constants");
            let (_, hi) = rep.c0_interval.unwrap();
            let width = hi - 1.0;
            assert!(width < last_width, "upper endpoint must approach 1");
            last_width = width;
        }
        // At float resolution the interval degenerates and feasibility is lost.
        let rep = check_condition_linear(&s, &cfg(1e-17, 1.0)).unwrap();
        assert!(!rep.feasible);
    }

    #[test]
    fn linear_condition_infeasible_when_step_too_large() {
        // eta d_1 (1 + rho d_1) >= 1: denominator not positive.
        let s = relu_spectrum(vec![2.0, 1.0], vec![1.0, 1.0], 2);
        let rep = check_condition_linear(&s, &cfg(0.3, 1.0)).unwrap();
        assert!(!rep.feasible);
    }

    #[test]
    fn kernel_condition_examples() {
        // Negative side m_j > 1: infeasible even though epsilon fits.
        let s = kernel_spectrum(vec![1.0, -1.0], vec![1.0, 1.0], 2);
        let rep = check_condition_kernel(&s, &cfg(0.05, 0.05), 0.03).unwrap();
        assert!(!rep.feasible);
        assert_eq!(rep.epsilon_ok, Some(true));

        // rho = 1/|d_j| makes the SAM factor exactly one on the negative side.
        let rep = check_condition_kernel(&s, &cfg(0.05, 1.0), 0.03).unwrap();
        assert!(rep.feasible, "boundary radius is admissible");
        assert_eq!(rep.epsilon_ok, Some(true));

        // epsilon too large for the negative eigenvalue.
        let rep = check_condition_kernel(&s, &cfg(0.05, 1.0), 0.06).unwrap();
        assert!(!rep.feasible);
        assert_eq!(rep.epsilon_ok, Some(false));

        // Sign preconditions.
        let pos_only = kernel_spectrum(vec![1.0, 0.5], vec![1.0, 1.0], 2);
        assert!(matches!(
            check_condition_kernel(&pos_only, &cfg(0.05, 1.0), 0.03),
            Err(Error::MissingEigenvalueSign { need: "negative" })
        ));
        assert!(check_condition_kernel(&s, &cfg(0.05, 1.0), 0.0).is_err());
    }

    #[test]
    fn iteration_bound_examples() {
        let s = relu_spectrum(vec![1.0, 1.0], vec![1.0, 1.0], 2);
        let c = cfg(0.1, 0.5);

        // Noiseless: dominance at every iteration.
        assert_eq!(
            iteration_bound_linear(&s, &c, 0.0, 2.0).unwrap(),
            IterationBound::Noiseless
        );

        // SNR = 1 gives a zero budget. r = 2, sigma = 1: signal = 2.
        match iteration_bound_linear(&s, &c, 1.0, 2.0).unwrap() {
            IterationBound::UpTo(k) => assert_eq!(k, 0.0),
            other => panic!("expected a bound, got {other:?}"),
        }

        // SNR = 3 on a flat unit spectrum: k* = log(1/2) / log(0.85).
        match iteration_bound_linear(&s, &c, 1.0, 6.0).unwrap() {
            IterationBound::UpTo(k) => {
                let want = 0.5f64.ln() / 0.85f64.ln();
                assert!((k - want).abs() < 1e-12, "got {k}, want {want}");
                assert!((k - 4.265).abs() < 2e-3);
            }
            other => panic!("expected a bound, got {other:?}"),
        }

        // SNR below one asserts nothing.
        assert_eq!(
            iteration_bound_linear(&s, &c, 10.0, 2.0).unwrap(),
            IterationBound::NotAsserted
        );
    }

    #[test]
    fn iteration_window_lower_endpoints() {
        let s = kernel_spectrum(vec![1.0, -0.04], vec![1.0, 1.0], 2);
        let c = cfg(0.05, 1.0);
        let signal = s.signal_norm_sq();
        // epsilon = 1: lower endpoint 1.
        match iteration_window_kernel(&s, &c, 0.5, 1.0, signal).unwrap() {
            IterationWindow::Window { k_lower, .. } => {
                assert!((k_lower - 1.0).abs() < 1e-12)
            }
            other => panic!("expected window, got {other:?}"),
        }
        // epsilon = 2^(1/20) - 1: lower endpoint 20.
        let eps = epsilon_for_window(20.0);
        assert!((eps - (2f64.powf(0.05) - 1.0)).abs() < 1e-15);
        match iteration_window_kernel(&s, &c, 0.5, eps, signal).unwrap() {
            IterationWindow::Window { k_lower, .. } => {
                assert!((k_lower - 20.0).abs() < 1e-9)
            }
            other => panic!("expected window, got {other:?}"),
        }
        // Tiny signal: SNR >= 1 fails before any window forms.
        assert_eq!(
            iteration_window_kernel(&s, &c, 10.0, 1.0, 1e-6).unwrap(),
            IterationWindow::NotAsserted
        );
        // Empty window is reported, not an error: make k_upper < 1 by
        // pushing SNR just above 1 with epsilon = 1 (k_lower = 1).
        let sigma = (signal / s.r() as f64 / 1.05).sqrt();
        match iteration_window_kernel(&s, &c, sigma, 1.0, signal).unwrap() {
            IterationWindow::Window {
                k_lower,
                k_upper,
                nonempty,
            } => {
                assert!(k_upper < k_lower);
                assert!(!nonempty);
            }
            other => panic!("expected window, got {other:?}"),
        }
        assert_eq!(
            iteration_window_kernel(&s, &c, 0.0, 1.0, signal).unwrap(),
            IterationWindow::Noiseless
        );
    }

    #[test]
    fn sharpness_at_anchor() {
        let loss = QuadraticLoss::new(Matrix::identity(2), vec![0.0; 2], vec![1.0, -1.0]).unwrap();
        let k = sharpness(&loss, &[1.0, -1.0], 1.0).unwrap();
        assert!((k - 0.5).abs() < 1e-12);

        let loss = QuadraticLoss::new(
            Matrix::from_diag(&[1.0, -1.0]).unwrap(),
            vec![0.0; 2],
            vec![0.0; 2],
        )
        .unwrap();
        let k = sharpness(&loss, &[0.0, 0.0], 1.0).unwrap();
        assert!((k - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sharpness_ignores_single_draw_noise_term() {
        let loss = QuadraticLoss::new(Matrix::identity(2), vec![5.0, -3.0], vec![0.0; 2]).unwrap();
        let k = sharpness(&loss, &[0.0, 0.0], 1.0).unwrap();
        assert!((k - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sharpness_curve_on_one_dim_toy() {
        // d = 1, u = 1: mean iterate 1 - m^k; gap at k=1 equals the bound.
        let loss = QuadraticLoss::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let rho0 = 0.1;
        let sam = sharpness_curve(&loss, &[0.0], &cfg(0.015, 1.0), &[1], rho0).unwrap();
        let gd = sharpness_curve(&loss, &[0.0], &cfg(0.015, 0.0), &[1], rho0).unwrap();
        // kappa = 0.5 rho0^2 + rho0 * |w_mean - anchor| in one dimension.
        assert!((gd[0] - (0.005 + 0.1 * 0.985)).abs() < 1e-12);
        assert!((sam[0] - (0.005 + 0.1 * 0.97)).abs() < 1e-12);

        let s = relu_spectrum(vec![1.0], vec![1.0], 1);
        let bound = sharpness_gap_lower_bound(&s, &cfg(0.015, 1.0), rho0, 1).unwrap();
        assert!((bound - 0.0015).abs() < 1e-12);
        assert!(bound <= gd[0] - sam[0] + 1e-12);
    }

    #[test]
    fn gap_bound_examples() {
        let s = relu_spectrum(vec![2.0, 0.5], vec![1.0, 1.0], 2);
        let c = cfg(0.01, 0.5);
        // k = 0: square roots coincide, only the curvature-spread term stays.
        let b0 = sharpness_gap_lower_bound(&s, &c, 0.2, 0).unwrap();
        assert!((b0 - 0.2 * 0.2 * (0.5 - 2.0) / 2.0).abs() < 1e-15);

        // Flat spectrum: bound is nonnegative for all k.
        let flat = relu_spectrum(vec![1.0, 1.0], vec![0.5, 2.0], 2);
        for k in [0u64, 1, 5, 50, 500] {
            let b = sharpness_gap_lower_bound(&flat, &c, 0.3, k).unwrap();
            assert!(b >= 0.0, "k={k}: {b}");
        }
    }

    #[test]
    fn gap_bound_below_true_gap_on_valid_instances() {
        // Diagonal losses where the closed form and the ball maximum are both
        // exact; the displayed bound must sit below the computed gap.
        let cases = [
            (vec![2.0, 1.0, 0.5], vec![1.0, -0.7, 0.4], 0.01, 0.5, 0.2),
            (vec![1.5, 1.2], vec![0.3, 0.9], 0.02, 1.0, 0.5),
            (vec![3.0, 0.2], vec![1.0, 1.0], 0.005, 2.0, 0.05),
        ];
        for (d, u, eta, rho, rho0) in cases {
            let n = d.len();
            let s = relu_spectrum(d.clone(), u.clone(), n);
            let anchor = vec![0.0; n];
            let w0: Vec<f64> = u.iter().map(|x| -x).collect(); // u = anchor - w0
            let loss =
                QuadraticLoss::new(Matrix::from_diag(&d).unwrap(), vec![0.0; n], anchor).unwrap();
            for k in [0u64, 1, 3, 10, 40, 200] {
                let sam = sharpness_curve(&loss, &w0, &cfg(eta, rho), &[k], rho0).unwrap()[0];
                let gd = sharpness_curve(&loss, &w0, &cfg(eta, 0.0), &[k], rho0).unwrap()[0];
                let bound = sharpness_gap_lower_bound(&s, &cfg(eta, rho), rho0, k).unwrap();
                assert!(
                    bound <= gd - sam + 1e-9,
                    "k={k}: bound {bound} vs gap {}",
                    gd - sam
                );
            }
        }
    }

    #[test]
    fn stochastic_law_examples() {
        let law = stochastic_error_difference(10, &cfg(0.01, 0.0), 7, 1.0).unwrap();
        assert_eq!(law.difference, 0.0);
        let law = stochastic_error_difference(10, &cfg(0.01, 0.5), 0, 1.0).unwrap();
        assert_eq!(law.difference, 0.0);
        let law = stochastic_error_difference(10, &cfg(0.01, 0.5), 10, 1.0).unwrap();
        assert!((law.difference - (-0.5836674)).abs() < 1e-6);
        assert!((law.sam_error - 0.93f64.powi(20)).abs() < 1e-12);
        assert!(law.difference <= 0.0);
    }

    #[test]
    fn stochastic_law_names_failed_precondition() {
        // eta (1 + rho (p+2)) >= 1.
        let r = stochastic_error_difference(10, &cfg(0.1, 1.0), 1, 1.0);
        match r {
            Err(Error::Precondition { inequality }) => {
                assert!(inequality.contains("1 - eta - eta rho"))
            }
            other => panic!("expected precondition failure, got {other:?}"),
        }
    }

    #[test]
    fn fourth_moment_scalar_case() {
        let chk = fourth_moment_check(1, 1_000_000, 11).unwrap();
        assert!((chk.diag_mean - 3.0).abs() < 0.05, "{}", chk.diag_mean);
    }

    #[test]
    fn fourth_moment_matrix_case() {
        let chk = fourth_moment_check(5, 1_000_000, 1).unwrap();
        assert!(chk.max_abs_deviation <= 0.15, "{}", chk.max_abs_deviation);
        assert!((chk.diag_mean - 7.0).abs() < 0.05);
    }

    #[test]
    fn dominance_holds_through_the_asserted_budget() {
        // Whenever the condition is feasible and SNR >= 1, the SAM error must
        // sit below the GD error for every k up to the bound.
        let spectra = [
            relu_spectrum(vec![1.0, 1.0], vec![1.0, 1.0], 2),
            relu_spectrum(vec![1.2, 0.9], vec![0.8, 1.3], 3),
            relu_spectrum(vec![2.0, 1.7, 1.5], vec![1.0, 0.5, 0.8], 4),
        ];
        let mut checked = 0;
        for s in &spectra {
            for &eta in &[0.02, 0.05, 0.1] {
                for &rho in &[0.3, 1.0] {
                    let c = cfg(eta, rho);
                    let rep = check_condition_linear(s, &c).unwrap();
                    if !rep.feasible {
                        continue;
                    }
                    for &snr in &[1.0, 2.0, 5.0] {
                        let signal = s.signal_norm_sq();
                        let sigma = (signal / (s.r() as f64 * snr)).sqrt();
                        let bound = iteration_bound_linear(s, &c, sigma, signal).unwrap();
                        let IterationBound::UpTo(k_star) = bound else {
                            continue;
                        };
                        let k_int = k_star.floor() as usize;
                        let sam = relu_error_curve(s, &c, sigma, k_int).unwrap();
                        let gd = relu_error_curve(s, &cfg(eta, 0.0), sigma, k_int).unwrap();
                        for k in 0..=k_int {
                            assert!(
                                sam.error(k) <= gd.error(k) + 1e-12 * gd.error(k).abs(),
                                "eta={eta} rho={rho} snr={snr} k={k}"
                            );
                        }
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked >= 10, "grid produced only {checked} asserted cases");
    }

    #[test]
    fn sam_error_bounded_by_envelope_on_feasible_indefinite_spectra() {
        let (s, eta, rho, sigma) = noisy_toy();
        let c = cfg(eta, rho);
        let curve = kernel_error_curve(&s, &c, sigma, 10_000).unwrap();
        let envelope = s
            .d
            .iter()
            .zip(&s.u)
            .map(|(d, u)| d * d * u * u)
            .sum::<f64>()
            / s.n as f64
            + 4.0 * sigma * sigma;
        for k in 0..=10_000 {
            assert!(curve.error(k) <= envelope + 1e-12, "k={k}");
        }
    }
}
