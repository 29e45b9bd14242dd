//! The three statistical problems (linear least squares, one-hidden-layer
//! ReLU networks, kernel regression), synthetic data generation, and the
//! reduction of each problem to a canonical quadratic loss.
//!
//! The kernel reduction drops the constant term `anchor . eps` from the
//! objective; gradients, iterates, and sharpness differences are unaffected.

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};
use crate::numerics::{vec as nvec, Matrix};
use crate::rng::Rng;

/// Centered Gaussian observation noise with standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Noise standard deviation, nonnegative.
    pub sigma: f64,
}

impl NoiseModel {
    /// Validated constructor.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                requirement: "must be nonnegative and finite",
            });
        }
        Ok(NoiseModel { sigma })
    }
}

/// Ordinary least squares: targets `y = X w_bar + eps`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    /// Design matrix, one sample per row (`n x d`).
    pub x: Matrix,
    /// True coefficients (`d`).
    pub w_bar: Vec<f64>,
    /// Optimizer starting point (`d`).
    pub w0: Vec<f64>,
    /// Observation noise.
    pub noise: NoiseModel,
}

impl LinearModel {
    /// Validated constructor.
    pub fn new(x: Matrix, w_bar: Vec<f64>, w0: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        let d = x.cols();
        for (name, v) in [("w_bar", &w_bar), ("w0", &w0)] {
            if v.len() != d {
                return Err(Error::Dimension {
                    context: "linear model coefficients",
                    expected: d,
                    got: v.len(),
                });
            }
            if !nvec::all_finite(v) {
                return Err(Error::NonFinite { context: name });
            }
        }
        Ok(LinearModel { x, w_bar, w0, noise })
    }
}

/// One hidden ReLU layer with all output weights fixed to one:
/// `phi(w; x) = sum_l max(0, x . w_l)` over `neurons` blocks of width `d`.
#[derive(Debug, Clone)]
pub struct ReluNetModel {
    /// Design matrix (`n x d`).
    pub x: Matrix,
    /// Hidden-layer width `L`; the parameter dimension is `p = d * L`.
    pub neurons: usize,
    /// True parameters (`p`), per-neuron blocks concatenated.
    pub w_bar: Vec<f64>,
    /// Optimizer starting point (`p`).
    pub w0: Vec<f64>,
    /// Observation noise.
    pub noise: NoiseModel,
}

impl ReluNetModel {
    /// Validated constructor (`w_bar`, `w0` of length `d * neurons`).
    pub fn new(
        x: Matrix,
        neurons: usize,
        w_bar: Vec<f64>,
        w0: Vec<f64>,
        noise: NoiseModel,
    ) -> Result<Self> {
        if neurons == 0 {
            return Err(Error::InvalidParameter {
                name: "neurons",
                value: 0.0,
                requirement: "must be at least 1",
            });
        }
        let p = x.cols() * neurons;
        for (name, v) in [("w_bar", &w_bar), ("w0", &w0)] {
            if v.len() != p {
                return Err(Error::Dimension {
                    context: "ReLU model parameters",
                    expected: p,
                    got: v.len(),
                });
            }
            if !nvec::all_finite(v) {
                return Err(Error::NonFinite { context: name });
            }
        }
        Ok(ReluNetModel {
            x,
            neurons,
            w_bar,
            w0,
            noise,
        })
    }

    /// Whether `w_bar` and `w0` induce the same activation pattern — the
    /// standing assumption under which the problem is exactly quadratic.
    pub fn patterns_match(&self) -> Result<bool> {
        Ok(activation_pattern(&self.w_bar, &self.x)? == activation_pattern(&self.w0, &self.x)?)
    }

    /// Smallest `|x_i . w_l|` over all samples and neurons: the margin by
    /// which the activation pattern of `w` is stable.
    pub fn activation_margin(&self, w: &[f64]) -> Result<f64> {
        let d = self.x.cols();
        if w.len() != d * self.neurons {
            return Err(Error::Dimension {
                context: "activation margin",
                expected: d * self.neurons,
                got: w.len(),
            });
        }
        let mut margin = f64::INFINITY;
        for i in 0..self.x.rows() {
            let xi = self.x.row(i);
            for l in 0..self.neurons {
                let s = nvec::dot(xi, &w[l * d..(l + 1) * d]);
                margin = margin.min(s.abs());
            }
        }
        Ok(margin)
    }

    /// Gradient of the raw (pattern-re-deriving) least-squares loss
    /// `0.5 sum_i (phi(w; x_i) - y_i)^2` as a reusable closure.
    pub fn loss_gradient_fn<'a>(
        &'a self,
        dataset: &Dataset,
    ) -> Result<impl Fn(&[f64]) -> Vec<f64> + 'a> {
        let n = self.x.rows();
        if dataset.y.len() != n {
            return Err(Error::Dimension {
                context: "ReLU gradient targets",
                expected: n,
                got: dataset.y.len(),
            });
        }
        let y = dataset.y.clone();
        let d = self.x.cols();
        let neurons = self.neurons;
        Ok(move |w: &[f64]| {
            debug_assert_eq!(w.len(), d * neurons);
            let mut grad = vec![0.0; w.len()];
            for i in 0..n {
                let xi = self.x.row(i);
                let mut active = vec![false; neurons];
                let mut pred = 0.0;
                for l in 0..neurons {
                    let s = nvec::dot(xi, &w[l * d..(l + 1) * d]);
                    if s > 0.0 {
                        active[l] = true;
                        pred += s;
                    }
                }
                let r = pred - y[i];
                if r == 0.0 {
                    continue;
                }
                for (l, is_active) in active.iter().enumerate() {
                    if *is_active {
                        nvec::axpy(r, xi, &mut grad[l * d..(l + 1) * d]);
                    }
                }
            }
            grad
        })
    }
}

/// Kernel regression in representer form: targets `y = K w_bar + eps` on the
/// training Gram matrix `K` of `kernel` over the rows of `x`.
#[derive(Debug, Clone)]
pub struct KernelModel {
    /// Training points (`n x d`).
    pub x: Matrix,
    /// The kernel, possibly indefinite.
    pub kernel: KernelSpec,
    /// True representer coefficients (`n`).
    pub w_bar: Vec<f64>,
    /// Observation noise.
    pub noise: NoiseModel,
}

impl KernelModel {
    /// Validated constructor.
    pub fn new(x: Matrix, kernel: KernelSpec, w_bar: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        if w_bar.len() != x.rows() {
            return Err(Error::Dimension {
                context: "kernel model coefficients",
                expected: x.rows(),
                got: w_bar.len(),
            });
        }
        if !nvec::all_finite(&w_bar) {
            return Err(Error::NonFinite { context: "w_bar" });
        }
        Ok(KernelModel {
            x,
            kernel,
            w_bar,
            noise,
        })
    }
}

/// One draw of observations: noiseless targets, the noise vector, their sum,
/// and the seed that produced the noise.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Noiseless targets `y*`.
    pub y_star: Vec<f64>,
    /// Noise draw `eps`.
    pub eps: Vec<f64>,
    /// Observed targets, exactly `y_star + eps` componentwise.
    pub y: Vec<f64>,
    /// Seed of the generator that drew `eps`.
    pub seed: u64,
}

/// The canonical quadratic `f(w) = 0.5 (w - anchor)' H (w - anchor)
/// + g . (w - anchor)` that all three problems reduce to.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    /// Symmetric curvature matrix.
    pub h: Matrix,
    /// Linear term (the gradient at the anchor).
    pub g: Vec<f64>,
    /// Expansion point, the true parameter in all three reductions.
    pub anchor: Vec<f64>,
}

impl QuadraticLoss {
    /// Validated constructor: `h` symmetric, dimensions consistent, values
    /// finite.
    pub fn new(h: Matrix, g: Vec<f64>, anchor: Vec<f64>) -> Result<Self> {
        h.require_symmetric()?;
        let n = h.rows();
        for (name, v) in [("g", &g), ("anchor", &anchor)] {
            if v.len() != n {
                return Err(Error::Dimension {
                    context: "quadratic loss vectors",
                    expected: n,
                    got: v.len(),
                });
            }
            if !nvec::all_finite(v) {
                return Err(Error::NonFinite { context: name });
            }
        }
        Ok(QuadraticLoss { h, g, anchor })
    }

    /// `H (w - anchor) + g`, one matvec.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let diff = nvec::sub(w, &self.anchor);
        let mut out = self.h.matvec(&diff)?;
        for (o, gi) in out.iter_mut().zip(&self.g) {
            *o += gi;
        }
        Ok(out)
    }

    /// Loss value at `w`.
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        let diff = nvec::sub(w, &self.anchor);
        let hd = self.h.matvec(&diff)?;
        Ok(0.5 * nvec::dot(&diff, &hd) + nvec::dot(&self.g, &diff))
    }
}

/// Activation-pattern matrix of a ReLU parameter vector on a design: row `i`,
/// block `l` (width `d`) equals `x_i` when `x_i . w_l > 0` and zero
/// otherwise. The boundary `x_i . w_l = 0` counts as inactive.
pub fn activation_pattern(w: &[f64], x: &Matrix) -> Result<Matrix> {
    let d = x.cols();
    if w.is_empty() || w.len() % d != 0 {
        return Err(Error::Dimension {
            context: "activation pattern parameters",
            expected: d,
            got: w.len(),
        });
    }
    let neurons = w.len() / d;
    let n = x.rows();
    let mut a = Matrix::zeros(n, w.len());
    for i in 0..n {
        let xi = x.row(i);
        for l in 0..neurons {
            if nvec::dot(xi, &w[l * d..(l + 1) * d]) > 0.0 {
                for (c, &v) in xi.iter().enumerate() {
                    a.set(i, l * d + c, v);
                }
            }
        }
    }
    Ok(a)
}

/// ReLU network output `sum_l max(0, x . w_l)` for a single input point.
pub fn relu_forward(w: &[f64], x: &[f64], neurons: usize) -> Result<f64> {
    let d = x.len();
    if w.len() != d * neurons {
        return Err(Error::Dimension {
            context: "ReLU forward parameters",
            expected: d * neurons,
            got: w.len(),
        });
    }
    let mut out = 0.0;
    for l in 0..neurons {
        let s = nvec::dot(x, &w[l * d..(l + 1) * d]);
        if s > 0.0 {
            out += s;
        }
    }
    Ok(out)
}

/// Common behavior of the three problems: noiseless targets, seeded data
/// generation, training-point predictions, error against the noiseless
/// targets, and the quadratic reduction.
pub trait RegressionProblem {
    /// Number of observations `n`.
    fn sample_count(&self) -> usize;

    /// The observation-noise model.
    fn noise(&self) -> &NoiseModel;

    /// Noiseless targets `y*`.
    fn y_star(&self) -> Result<Vec<f64>>;

    /// Model predictions at the training points.
    fn predictions(&self, w: &[f64]) -> Result<Vec<f64>>;

    /// Starting point of optimization runs on this problem (the model's `w0`;
    /// zero coefficients for the kernel problem).
    fn initial_point(&self) -> Vec<f64>;

    /// Reduce to the canonical quadratic. For the ReLU problem the pattern
    /// matrix is built from the model's `w0`.
    fn to_quadratic(&self, dataset: &Dataset) -> Result<QuadraticLoss>;

    /// Draw `eps ~ Normal(0, sigma^2 I)` from a generator seeded with `seed`
    /// and assemble the observations. Bit-identical across runs for a seed.
    fn generate_dataset(&self, seed: u64) -> Result<Dataset> {
        let y_star = self.y_star()?;
        let eps = Rng::new(seed).normal_vec(self.sample_count(), self.noise().sigma);
        let y = nvec::add(&y_star, &eps);
        Ok(Dataset {
            y_star,
            eps,
            y,
            seed,
        })
    }

    /// Average squared error of predictions against the noiseless targets:
    /// `(1/n) sum_i (y*_i - pred_i)^2`.
    fn empirical_error(&self, w: &[f64], dataset: &Dataset) -> Result<f64> {
        let preds = self.predictions(w)?;
        if preds.len() != dataset.y_star.len() {
            return Err(Error::Dimension {
                context: "empirical error",
                expected: dataset.y_star.len(),
                got: preds.len(),
            });
        }
        let n = preds.len() as f64;
        Ok(preds
            .iter()
            .zip(&dataset.y_star)
            .map(|(p, t)| (t - p) * (t - p))
            .sum::<f64>()
            / n)
    }
}

impl RegressionProblem for LinearModel {
    fn sample_count(&self) -> usize {
        self.x.rows()
    }

    fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn y_star(&self) -> Result<Vec<f64>> {
        self.x.matvec(&self.w_bar)
    }

    fn predictions(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.x.matvec(w)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.w0.clone()
    }

    fn to_quadratic(&self, dataset: &Dataset) -> Result<QuadraticLoss> {
        let h = self.x.gram();
        let mut g = vec![0.0; self.x.cols()];
        for i in 0..self.x.rows() {
            nvec::axpy(-dataset.eps[i], self.x.row(i), &mut g);
        }
        QuadraticLoss::new(h, g, self.w_bar.clone())
    }
}

impl RegressionProblem for ReluNetModel {
    fn sample_count(&self) -> usize {
        self.x.rows()
    }

    fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn y_star(&self) -> Result<Vec<f64>> {
        self.predictions(&self.w_bar)
    }

    fn predictions(&self, w: &[f64]) -> Result<Vec<f64>> {
        (0..self.x.rows())
            .map(|i| relu_forward(w, self.x.row(i), self.neurons))
            .collect()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.w0.clone()
    }

    fn to_quadratic(&self, dataset: &Dataset) -> Result<QuadraticLoss> {
        let a = activation_pattern(&self.w0, &self.x)?;
        let h = a.gram();
        let mut g = vec![0.0; a.cols()];
        for i in 0..a.rows() {
            nvec::axpy(-dataset.eps[i], a.row(i), &mut g);
        }
        QuadraticLoss::new(h, g, self.w_bar.clone())
    }
}

impl RegressionProblem for KernelModel {
    fn sample_count(&self) -> usize {
        self.x.rows()
    }

    fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn y_star(&self) -> Result<Vec<f64>> {
        let k = gram(&self.kernel, &self.x)?;
        k.matrix.matvec(&self.w_bar)
    }

    fn predictions(&self, w: &[f64]) -> Result<Vec<f64>> {
        let k = gram(&self.kernel, &self.x)?;
        k.matrix.matvec(w)
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.x.rows()]
    }

    fn to_quadratic(&self, dataset: &Dataset) -> Result<QuadraticLoss> {
        let k = gram(&self.kernel, &self.x)?;
        let g: Vec<f64> = dataset.eps.iter().map(|e| -e).collect();
        QuadraticLoss::new(k.matrix, g, self.w_bar.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eig;

    fn noise(sigma: f64) -> NoiseModel {
        NoiseModel::new(sigma).unwrap()
    }

    #[test]
    fn pattern_active_and_inactive_blocks() {
        let x = Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        let a = activation_pattern(&[1.0, 0.0], &x).unwrap();
        assert_eq!(a.row(0), &[1.0, -1.0]);
        let a = activation_pattern(&[0.0, 1.0], &x).unwrap();
        assert_eq!(a.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn pattern_two_neurons_one_dim() {
        let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let a = activation_pattern(&[2.0, -3.0], &x).unwrap();
        assert_eq!(a.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn pattern_boundary_is_inactive() {
        let x = Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        let a = activation_pattern(&[1.0, 1.0], &x).unwrap();
        assert_eq!(a.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn forward_examples() {
        assert_eq!(
            relu_forward(&[1.0, 0.0, -1.0, 0.0], &[1.0, 2.0], 2).unwrap(),
            1.0
        );
        assert_eq!(relu_forward(&[0.0; 4], &[1.0, 2.0], 2).unwrap(), 0.0);
    }

    #[test]
    fn forward_equals_pattern_row_dot_w() {
        let mut rng = Rng::new(11);
        for _ in 0..50 {
            let d = 2 + (rng.next_u64() % 3) as usize;
            let neurons = 1 + (rng.next_u64() % 3) as usize;
            let n = 4;
            let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.normal(1.0)).collect()).unwrap();
            let w = rng.normal_vec(d * neurons, 1.0);
            let a = activation_pattern(&w, &x).unwrap();
            for i in 0..n {
                let via_pattern = nvec::dot(a.row(i), &w);
                let direct = relu_forward(&w, x.row(i), neurons).unwrap();
                assert!((via_pattern - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dataset_examples() {
        let m = LinearModel::new(
            Matrix::identity(2),
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            noise(0.0),
        )
        .unwrap();
        let ds = m.generate_dataset(7).unwrap();
        assert_eq!(ds.y_star, vec![1.0, 2.0]);
        assert_eq!(ds.y, ds.y_star, "no noise, y equals y*");
        assert_eq!(ds.eps, vec![0.0, 0.0]);
        assert_eq!(ds.seed, 7);

        let km = KernelModel::new(
            Matrix::identity(2),
            KernelSpec::Linear,
            vec![1.0, 0.0],
            noise(0.0),
        )
        .unwrap();
        let ds = km.generate_dataset(1).unwrap();
        assert_eq!(ds.y_star, vec![1.0, 0.0]);
    }

    #[test]
    fn dataset_noise_is_seed_deterministic_and_additive() {
        let m = LinearModel::new(
            Matrix::identity(3),
            vec![1.0, 2.0, 3.0],
            vec![0.0; 3],
            noise(0.8),
        )
        .unwrap();
        let a = m.generate_dataset(42).unwrap();
        let b = m.generate_dataset(42).unwrap();
        assert_eq!(a.eps, b.eps);
        let c = m.generate_dataset(43).unwrap();
        assert_ne!(a.eps, c.eps);
        for i in 0..3 {
            assert_eq!(a.y[i], a.y_star[i] + a.eps[i]);
        }
    }

    #[test]
    fn dataset_noise_moments() {
        let n = 100_000;
        let sigma = 0.7;
        let m = LinearModel::new(
            Matrix::zeros(n, 1),
            vec![0.0],
            vec![0.0],
            noise(sigma),
        )
        .unwrap();
        let ds = m.generate_dataset(2024).unwrap();
        let mean: f64 = ds.eps.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 * sigma / (n as f64).sqrt());
        let var: f64 = ds.eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
        assert!((var - sigma * sigma).abs() <= 0.05 * sigma * sigma);
    }

    #[test]
    fn linear_quadratic_reduction() {
        let m = LinearModel::new(
            Matrix::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap(),
            vec![0.5, -0.5],
            vec![0.0; 2],
            noise(0.0),
        )
        .unwrap();
        let ds = m.generate_dataset(1).unwrap();
        let q = m.to_quadratic(&ds).unwrap();
        assert_eq!(q.g, vec![0.0, 0.0], "no noise, no linear term");
        assert_eq!(q.anchor, m.w_bar);
        // H = X'X.
        let expect = m.x.gram();
        assert_eq!(q.h, expect);
    }

    #[test]
    fn relu_quadratic_reduction_is_psd() {
        let mut rng = Rng::new(14);
        let x = Matrix::from_vec(5, 2, (0..10).map(|_| rng.normal(1.0)).collect()).unwrap();
        let w0 = rng.normal_vec(4, 1.0);
        let m = ReluNetModel::new(x, 2, rng.normal_vec(4, 1.0), w0, noise(0.3)).unwrap();
        let ds = m.generate_dataset(3).unwrap();
        let q = m.to_quadratic(&ds).unwrap();
        q.h.require_symmetric().unwrap();
        let eig = sym_eig(&q.h).unwrap();
        assert!(*eig.eigenvalues.last().unwrap() >= -1e-10);
    }

    #[test]
    fn kernel_quadratic_reduction_can_be_indefinite() {
        let mut rng = Rng::new(3);
        let x = Matrix::from_vec(50, 2, (0..100).map(|_| 2.0 * rng.uniform() - 1.0).collect())
            .unwrap();
        let m = KernelModel::new(
            x,
            KernelSpec::gaussian_minus_exponential(),
            rng.normal_vec(50, 1.0),
            noise(0.2),
        )
        .unwrap();
        let ds = m.generate_dataset(9).unwrap();
        let q = m.to_quadratic(&ds).unwrap();
        for (gi, ei) in q.g.iter().zip(&ds.eps) {
            assert_eq!(*gi, -ei);
        }
        let eig = sym_eig(&q.h).unwrap();
        assert!(*eig.eigenvalues.last().unwrap() < 0.0);
    }

    /// Central-difference gradient of a scalar function.
    fn finite_diff(f: &dyn Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
        let step = 1e-6 * (1.0 + nvec::norm(w));
        (0..w.len())
            .map(|i| {
                let mut hi = w.to_vec();
                hi[i] += step;
                let mut lo = w.to_vec();
                lo[i] -= step;
                (f(&hi) - f(&lo)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn quadratic_gradient_matches_raw_loss_finite_differences() {
        let mut rng = Rng::new(55);

        // Linear: raw loss 0.5 ||y - Xw||^2.
        let x = Matrix::from_vec(6, 3, (0..18).map(|_| rng.normal(1.0)).collect()).unwrap();
        let lm = LinearModel::new(x, rng.normal_vec(3, 1.0), vec![0.0; 3], noise(0.4)).unwrap();
        let ds = lm.generate_dataset(5).unwrap();
        let q = lm.to_quadratic(&ds).unwrap();
        let raw = {
            let x = lm.x.clone();
            let y = ds.y.clone();
            move |w: &[f64]| {
                let r = nvec::sub(&x.matvec(w).unwrap(), &y);
                0.5 * nvec::norm_sq(&r)
            }
        };
        for _ in 0..40 {
            let w = rng.normal_vec(3, 1.0);
            let fd = finite_diff(&raw, &w);
            let an = q.gradient(&w).unwrap();
            let scale = nvec::norm(&an).max(1e-8);
            assert!(nvec::norm(&nvec::sub(&fd, &an)) <= 1e-5 * scale);
        }

        // ReLU: raw loss with the pattern re-derived at each point; probe
        // near w0 where margins keep the pattern stable.
        let x = Matrix::from_vec(5, 2, (0..10).map(|_| 1.0 + rng.uniform()).collect()).unwrap();
        let w0 = vec![1.0, 1.0, 0.5, 1.5];
        let w_bar = vec![1.2, 0.9, 0.6, 1.4];
        let rm = ReluNetModel::new(x, 2, w_bar, w0.clone(), noise(0.3)).unwrap();
        assert!(rm.patterns_match().unwrap());
        let ds = rm.generate_dataset(6).unwrap();
        let q = rm.to_quadratic(&ds).unwrap();
        let raw = {
            let m = rm.clone();
            let y = ds.y.clone();
            move |w: &[f64]| {
                let preds = m.predictions(w).unwrap();
                0.5 * nvec::norm_sq(&nvec::sub(&preds, &y))
            }
        };
        for _ in 0..30 {
            let mut w = w0.clone();
            for v in w.iter_mut() {
                *v += 0.05 * rng.normal(1.0);
            }
            if activation_pattern(&w, &rm.x).unwrap()
                != activation_pattern(&rm.w0, &rm.x).unwrap()
            {
                continue;
            }
            let fd = finite_diff(&raw, &w);
            let an = q.gradient(&w).unwrap();
            let scale = nvec::norm(&an).max(1e-8);
            assert!(nvec::norm(&nvec::sub(&fd, &an)) <= 1e-5 * scale);
        }

        // Kernel: raw loss 0.5 w'Kw - w'y, whose gradient is Kw - y.
        let x = Matrix::from_vec(6, 2, (0..12).map(|_| rng.normal(1.0)).collect()).unwrap();
        let km = KernelModel::new(
            x,
            KernelSpec::gaussian_minus_exponential(),
            rng.normal_vec(6, 1.0),
            noise(0.4),
        )
        .unwrap();
        let ds = km.generate_dataset(8).unwrap();
        let q = km.to_quadratic(&ds).unwrap();
        let k = gram(&km.kernel, &km.x).unwrap();
        let raw = {
            let y = ds.y.clone();
            move |w: &[f64]| {
                let kw = k.matrix.matvec(w).unwrap();
                0.5 * nvec::dot(w, &kw) - nvec::dot(w, &y)
            }
        };
        for _ in 0..30 {
            let w = rng.normal_vec(6, 1.0);
            let fd = finite_diff(&raw, &w);
            let an = q.gradient(&w).unwrap();
            let scale = nvec::norm(&an).max(1e-8);
            assert!(nvec::norm(&nvec::sub(&fd, &an)) <= 1e-5 * scale);
        }
    }

    #[test]
    fn empirical_error_examples() {
        let m = LinearModel::new(
            Matrix::identity(2),
            vec![1.0, 2.0],
            vec![0.0; 2],
            noise(0.0),
        )
        .unwrap();
        let ds = m.generate_dataset(0).unwrap();
        assert_eq!(m.empirical_error(&m.w_bar.clone(), &ds).unwrap(), 0.0);
        assert_eq!(m.empirical_error(&[0.0, 0.0], &ds).unwrap(), 2.5);
    }

    #[test]
    fn empirical_error_on_pattern_boundary_uses_inactive_branch() {
        // x . w = 0 exactly: the neuron contributes nothing.
        let x = Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        let m = ReluNetModel::new(x, 1, vec![2.0, 1.0], vec![2.0, 1.0], noise(0.0)).unwrap();
        let ds = m.generate_dataset(0).unwrap();
        // y* = max(0, 2 - 1) = 1; boundary w predicts 0.
        let err = m.empirical_error(&[1.0, 1.0], &ds).unwrap();
        assert_eq!(err, 1.0);
    }

    #[test]
    fn activation_margin_reports_smallest_preactivation() {
        let x = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let m = ReluNetModel::new(x, 1, vec![0.5], vec![0.5], noise(0.0)).unwrap();
        let margin = m.activation_margin(&[0.5]).unwrap();
        assert_eq!(margin, 0.5);
    }

    #[test]
    fn constructors_validate() {
        assert!(NoiseModel::new(-0.1).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
        assert!(LinearModel::new(Matrix::identity(2), vec![1.0], vec![0.0; 2], noise(0.0)).is_err());
        assert!(ReluNetModel::new(Matrix::identity(2), 0, vec![], vec![], noise(0.0)).is_err());
        assert!(
            KernelModel::new(Matrix::identity(2), KernelSpec::Linear, vec![1.0], noise(0.0))
                .is_err()
        );
        let bad = QuadraticLoss::new(
            Matrix::from_vec(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap(),
            vec![0.0; 2],
            vec![0.0; 2],
        );
        assert!(matches!(bad, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn quadratic_gradient_and_value() {
        let q = QuadraticLoss::new(
            Matrix::from_diag(&[2.0, 1.0]).unwrap(),
            vec![0.5, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        // gradient at w = (2, 3): H (1, 2) + g = (2.5, 2).
        assert_eq!(q.gradient(&[2.0, 3.0]).unwrap(), vec![2.5, 2.0]);
        // value: 0.5 (1,2) H (1,2)' + g.(1,2) = 0.5*(2+4) + 0.5 = 3.5.
        assert_eq!(q.value(&[2.0, 3.0]).unwrap(), 3.5);
    }

    #[test]
    fn initial_points_per_problem() {
        let lin =
            LinearModel::new(Matrix::identity(2), vec![1.0, 2.0], vec![0.3, 0.4], noise(0.0))
                .unwrap();
        assert_eq!(lin.initial_point(), vec![0.3, 0.4]);
        let ker = KernelModel::new(
            Matrix::identity(3),
            KernelSpec::Linear,
            vec![1.0; 3],
            noise(0.0),
        )
        .unwrap();
        assert_eq!(ker.initial_point(), vec![0.0; 3]);
    }
}
