//! Configuration documents for the `predict` and `check` subcommands, and
//! the shared explicit-spectrum plumbing. (`simulate` reads the experiment
//! configuration type defined next to the harness.)

use serde::{Deserialize, Serialize};

use samlab::theory::{Spectrum, SpectrumFlavor};
use samlab::{Error, Result};

/// Which closed-form curve family an explicit spectrum belongs to. The two
/// differ in how signal coordinates weight the bias (eigenvalue-linear for
/// the network/linear family, eigenvalue-squared for the kernel family) and
/// in whether negative eigenvalues contribute variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveModel {
    Relu,
    Kernel,
}

/// Configuration of `predict`: an explicit spectrum plus optimizer settings.
///
/// `u` defaults to all ones, `n` to the number of eigenvalues, and `model`
/// to `kernel` when any eigenvalue is negative (`relu` otherwise).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    /// Eigenvalues of the curvature spectrum (any order; sorted internally).
    pub d: Vec<f64>,
    /// Signal coordinates in the eigenbasis, aligned with `d`.
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    /// Sample count normalizing the curves.
    #[serde(default)]
    pub n: Option<usize>,
    /// Step size.
    pub eta: f64,
    /// SAM perturbation radius (the GD curve always uses zero).
    pub rho: f64,
    /// Noise standard deviation.
    #[serde(default)]
    pub sigma: f64,
    /// Last tabulated iteration (0 tabulates only the starting point).
    pub k_max: usize,
    /// Curve family; see the type-level default rule.
    #[serde(default)]
    pub model: Option<CurveModel>,
    /// Also emit a minimal SVG overlay plot of the two error curves.
    #[serde(default)]
    pub svg: bool,
}

/// Configuration of `check`: an explicit spectrum plus the `(eta, rho,
/// sigma)` triple whose dominance condition is reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Eigenvalues of the curvature spectrum (any order; sorted internally).
    pub d: Vec<f64>,
    /// Signal coordinates in the eigenbasis, aligned with `d`.
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    /// Sample count (enters only through the signal-to-noise normalization
    /// conventions of the spectrum type).
    #[serde(default)]
    pub n: Option<usize>,
    pub eta: f64,
    pub rho: f64,
    #[serde(default)]
    pub sigma: f64,
}

/// Default curve family for a spectrum: kernel when any eigenvalue is
/// negative, the network/linear family otherwise.
pub fn default_model(d: &[f64]) -> CurveModel {
    if d.iter().any(|&x| x < 0.0) {
        CurveModel::Kernel
    } else {
        CurveModel::Relu
    }
}

/// Assemble a spectrum from config fields: pair `d` with `u` (ones when
/// omitted), sort pairs by eigenvalue descending, and default `n` to the
/// eigenvalue count.
pub fn build_spectrum(
    d: &[f64],
    u: &Option<Vec<f64>>,
    n: Option<usize>,
    model: CurveModel,
) -> Result<Spectrum> {
    if d.is_empty() {
        return Err(Error::Config("d must be nonempty".into()));
    }
    let u = match u {
        Some(u) => {
            if u.len() != d.len() {
                return Err(Error::Config(format!(
                    "u has {} entries but d has {}",
                    u.len(),
                    d.len()
                )));
            }
            u.clone()
        }
        None => vec![1.0; d.len()],
    };
    let mut pairs: Vec<(f64, f64)> = d.iter().copied().zip(u).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let (d, u): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let n = n.unwrap_or(d.len());
    let flavor = match model {
        CurveModel::Relu => SpectrumFlavor::Relu,
        CurveModel::Kernel => SpectrumFlavor::Kernel,
    };
    Spectrum::new(d, u, n, flavor)
}
