//! Kernel algebra: positive-definite and indefinite kernels, Gram matrices,
//! representer-form SAM updates, polynomial feature expansion, and
//! out-of-sample prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{vec as nvec, Matrix};
use crate::optimizer::OptimConfig;
use crate::rng::Rng;

/// Declarative description of a symmetric kernel. Weighted sums with negative
/// weights may be indefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-||x-y||^2 / (2 * bandwidth_sq))`.
    Gaussian { bandwidth_sq: f64 },
    /// `exp(-||x-y||)`.
    Exponential,
    /// `x . y`.
    Linear,
    /// `sum_i weight_i * K_i(x, y)`.
    WeightedSum(Vec<(f64, KernelSpec)>),
}

impl KernelSpec {
    /// A wide Gaussian minus 0.8 times an exponential: a standard indefinite
    /// example whose Gram matrices on generic designs carry both positive and
    /// negative eigenvalues. Evaluates to 0.2 on the diagonal.
    pub fn gaussian_minus_exponential() -> KernelSpec {
        KernelSpec::WeightedSum(vec![
            (1.0, KernelSpec::Gaussian { bandwidth_sq: 100.0 }),
            (-0.8, KernelSpec::Exponential),
        ])
    }
}

/// Gram matrix of a kernel on a set of points, keeping the kernel and the
/// points so the fitted coefficients can later predict out of sample.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    /// The `n x n` Gram matrix, exactly symmetric (upper triangle mirrored).
    pub matrix: Matrix,
    /// Kernel that produced the matrix.
    pub spec: KernelSpec,
    /// The `n x d` point set, one row per point.
    pub points: Matrix,
}

/// Evaluate a kernel on a pair of points.
///
/// Symmetric bit-exactly in `(x, y)` for every variant: squared distances,
/// distances, and dot products are computed from expressions invariant under
/// the swap.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            context: "kernel evaluation",
            expected: x.len(),
            got: y.len(),
        });
    }
    match spec {
        KernelSpec::Gaussian { bandwidth_sq } => {
            if !(*bandwidth_sq > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "bandwidth_sq",
                    value: *bandwidth_sq,
                    requirement: "must be positive",
                });
            }
            Ok((-dist_sq(x, y) / (2.0 * bandwidth_sq)).exp())
        }
        KernelSpec::Exponential => Ok((-dist_sq(x, y).sqrt()).exp()),
        KernelSpec::Linear => Ok(nvec::dot(x, y)),
        KernelSpec::WeightedSum(parts) => {
            let mut acc = 0.0;
            for (w, k) in parts {
                acc += w * eval_kernel(k, x, y)?;
            }
            Ok(acc)
        }
    }
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Gram matrix of `spec` on the rows of `x`. The upper triangle is computed
/// once and mirrored, so the result is symmetric to the bit.
pub fn gram(spec: &KernelSpec, x: &Matrix) -> Result<GramMatrix> {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = eval_kernel(spec, x.row(i), x.row(j))?;
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    Ok(GramMatrix {
        matrix: k,
        spec: spec.clone(),
        points: x.clone(),
    })
}

/// Rectangular kernel matrix between two point sets: entry `(i, j)` is
/// `K(queries_i, points_j)`, so a row times representer coefficients gives
/// the predicted value at that query point in one dot product.
pub fn cross_gram(spec: &KernelSpec, queries: &Matrix, points: &Matrix) -> Result<Matrix> {
    if queries.cols() != points.cols() {
        return Err(Error::Dimension {
            context: "cross kernel point dimension",
            expected: points.cols(),
            got: queries.cols(),
        });
    }
    let mut k = Matrix::zeros(queries.rows(), points.rows());
    for i in 0..queries.rows() {
        for j in 0..points.rows() {
            k.set(i, j, eval_kernel(spec, queries.row(i), points.row(j))?);
        }
    }
    Ok(k)
}

/// One SAM step on the representer coefficients:
/// `w' = w - eta * (I + rho K)(K w - y)`, computed with two `K`-matvecs.
/// `rho = 0` recovers plain gradient descent.
pub fn kernel_sam_step(
    w: &[f64],
    k: &GramMatrix,
    y: &[f64],
    cfg: &OptimConfig,
) -> Result<Vec<f64>> {
    let n = k.matrix.rows();
    if w.len() != n {
        return Err(Error::Dimension {
            context: "kernel step coefficients",
            expected: n,
            got: w.len(),
        });
    }
    if y.len() != n {
        return Err(Error::Dimension {
            context: "kernel step targets",
            expected: n,
            got: y.len(),
        });
    }
    let mut t = k.matrix.matvec(w)?;
    for (ti, yi) in t.iter_mut().zip(y) {
        *ti -= yi;
    }
    let kt = k.matrix.matvec(&t)?;
    let mut out = w.to_vec();
    for i in 0..n {
        out[i] -= cfg.eta * (t[i] + cfg.rho * kt[i]);
    }
    Ok(out)
}

/// Value at `x_query` of the function with representer coefficients `w` on
/// training points `x_train`: `sum_j w_j K(x_j, x_query)`. Linear in `w`.
pub fn predict_h(w: &[f64], x_train: &Matrix, spec: &KernelSpec, x_query: &[f64]) -> Result<f64> {
    if w.len() != x_train.rows() {
        return Err(Error::Dimension {
            context: "prediction coefficients",
            expected: x_train.rows(),
            got: w.len(),
        });
    }
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        if *wj == 0.0 {
            continue;
        }
        acc += wj * eval_kernel(spec, x_train.row(j), x_query)?;
    }
    Ok(acc)
}

/// Polynomial feature expansion: the `p` original columns, then the `p`
/// squares, then the `p` cubes, then `pair_count` products `x_i * x_j`
/// (`i < j`) drawn without replacement from the seeded generator, in draw
/// order. Output width is `3p + pair_count`.
pub fn feature_expand(x: &Matrix, pair_count: usize, seed: u64) -> Result<Matrix> {
    let (n, p) = (x.rows(), x.cols());
    let max_pairs = p * (p - 1) / 2;
    if pair_count > max_pairs {
        return Err(Error::PairCountTooLarge {
            requested: pair_count,
            max: max_pairs,
        });
    }
    let pairs = draw_pairs(p, pair_count, seed);
    let width = 3 * p + pair_count;
    let mut out = Matrix::zeros(n, width);
    for r in 0..n {
        let row = x.row(r);
        for (c, &v) in row.iter().enumerate() {
            out.set(r, c, v);
            out.set(r, p + c, v * v);
            out.set(r, 2 * p + c, v * v * v);
        }
        for (t, &(i, j)) in pairs.iter().enumerate() {
            out.set(r, 3 * p + t, row[i] * row[j]);
        }
    }
    Ok(out)
}

/// Draw `count` distinct index pairs `(i, j)`, `i < j < p`, by a partial
/// Fisher–Yates pass over the lexicographic enumeration.
fn draw_pairs(p: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(p * (p.saturating_sub(1)) / 2);
    for i in 0..p {
        for j in i + 1..p {
            pairs.push((i, j));
        }
    }
    let mut rng = Rng::new(seed);
    let total = pairs.len();
    for t in 0..count.min(total) {
        let pick = t + (rng.next_u64() % (total - t) as u64) as usize;
        pairs.swap(t, pick);
    }
    pairs.truncate(count);
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eig;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_points(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        let data: Vec<f64> = (0..n * d).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn gaussian_is_one_at_coincident_points() {
        let k = KernelSpec::Gaussian { bandwidth_sq: 100.0 };
        let x = [0.3, -1.2];
        assert_eq!(eval_kernel(&k, &x, &x).unwrap(), 1.0);
    }

    #[test]
    fn difference_kernel_diagonal_value() {
        let k = KernelSpec::gaussian_minus_exponential();
        let x = [5.0, 5.0, 5.0];
        let v = eval_kernel(&k, &x, &x).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn difference_kernel_at_distance_five() {
        // ||x-y|| = 5: exp(-25/200) - 0.8 exp(-5).
        let k = KernelSpec::gaussian_minus_exponential();
        let v = eval_kernel(&k, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 0.8771065449853271).abs() < 1e-12);
    }

    #[test]
    fn linear_kernel_is_dot_product() {
        let v = eval_kernel(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(v, 11.0);
    }

    #[test]
    fn rejects_dimension_mismatch_and_bad_bandwidth() {
        assert!(matches!(
            eval_kernel(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            eval_kernel(&KernelSpec::Gaussian { bandwidth_sq: 0.0 }, &[1.0], &[1.0]),
            Err(Error::InvalidParameter { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn symmetric_bit_exactly(
            xs in prop::collection::vec(-10.0..10.0f64, 1..6),
            ys in prop::collection::vec(-10.0..10.0f64, 1..6),
        ) {
            prop_assume!(xs.len() == ys.len());
            for spec in [
                KernelSpec::Gaussian { bandwidth_sq: 3.0 },
                KernelSpec::Exponential,
                KernelSpec::Linear,
                KernelSpec::gaussian_minus_exponential(),
            ] {
                let a = eval_kernel(&spec, &xs, &ys).unwrap();
                let b = eval_kernel(&spec, &ys, &xs).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn prediction_linear_in_coefficients(
            a in -3.0..3.0f64,
            b in -3.0..3.0f64,
            seed in 0u64..50,
        ) {
            let x = random_points(5, 2, seed);
            let mut rng = Rng::new(seed ^ 7);
            let w1: Vec<f64> = (0..5).map(|_| rng.normal(1.0)).collect();
            let w2: Vec<f64> = (0..5).map(|_| rng.normal(1.0)).collect();
            let combo: Vec<f64> = w1.iter().zip(&w2).map(|(p, q)| a * p + b * q).collect();
            let q = [0.1, -0.4];
            let spec = KernelSpec::gaussian_minus_exponential();
            let lhs = predict_h(&combo, &x, &spec, &q).unwrap();
            let rhs = a * predict_h(&w1, &x, &spec, &q).unwrap()
                + b * predict_h(&w2, &x, &spec, &q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn gram_linear_on_identity_design() {
        let g = gram(&KernelSpec::Linear, &Matrix::identity(2)).unwrap();
        assert_eq!(g.matrix, Matrix::identity(2));
    }

    #[test]
    fn gram_gaussian_unit_diagonal_and_matches_eval() {
        let x = random_points(8, 3, 5);
        let spec = KernelSpec::Gaussian { bandwidth_sq: 2.0 };
        let g = gram(&spec, &x).unwrap();
        g.matrix.require_symmetric().unwrap();
        for i in 0..8 {
            assert_eq!(g.matrix.get(i, i), 1.0);
            for j in 0..8 {
                let want = eval_kernel(&spec, x.row(i), x.row(j)).unwrap();
                assert_eq!(g.matrix.get(i, j), want);
            }
        }
    }

    #[test]
    fn difference_kernel_gram_is_indefinite() {
        let x = random_points(50, 2, 3);
        let g = gram(&KernelSpec::gaussian_minus_exponential(), &x).unwrap();
        let eig = sym_eig(&g.matrix).unwrap();
        let min = *eig.eigenvalues.last().unwrap();
        let max = eig.eigenvalues[0];
        assert!(min < 0.0, "expected a negative eigenvalue, min = {min}");
        assert!(max > 0.0);
    }

    #[test]
    fn gaussian_and_exponential_grams_are_psd() {
        for (seed, spec) in [
            (11u64, KernelSpec::Gaussian { bandwidth_sq: 1.5 }),
            (12, KernelSpec::Exponential),
        ] {
            let x = random_points(60, 3, seed);
            let g = gram(&spec, &x).unwrap();
            let eig = sym_eig(&g.matrix).unwrap();
            let min = *eig.eigenvalues.last().unwrap();
            assert!(min >= -1e-8, "{spec:?}: min eigenvalue {min}");
        }
    }

    #[test]
    fn step_from_zero_coefficients() {
        // w = 0: w' = eta (I + rho K) y.
        let x = random_points(6, 2, 21);
        let g = gram(&KernelSpec::gaussian_minus_exponential(), &x).unwrap();
        let mut rng = Rng::new(22);
        let y = rng.normal_vec(6, 1.0);
        let cfg = OptimConfig::new(0.05, 0.7, 1).unwrap();
        let got = kernel_sam_step(&vec![0.0; 6], &g, &y, &cfg).unwrap();
        let ky = g.matrix.matvec(&y).unwrap();
        for i in 0..6 {
            let want = 0.05 * (y[i] + 0.7 * ky[i]);
            assert!((got[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn step_on_identity_gram() {
        let g = gram(&KernelSpec::Linear, &Matrix::identity(3)).unwrap();
        let y = vec![1.0; 3];
        let cfg = OptimConfig::new(0.1, 1.0, 1).unwrap();
        let got = kernel_sam_step(&vec![0.0; 3], &g, &y, &cfg).unwrap();
        for v in got {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_gram_rows_reproduce_predictions() {
        let spec = KernelSpec::gaussian_minus_exponential();
        let train = random_points(7, 3, 41);
        let queries = random_points(4, 3, 42);
        let cross = cross_gram(&spec, &queries, &train).unwrap();
        assert_eq!((cross.rows(), cross.cols()), (4, 7));
        for i in 0..4 {
            for j in 0..7 {
                let want = eval_kernel(&spec, queries.row(i), train.row(j)).unwrap();
                assert_eq!(cross.get(i, j), want);
            }
        }
        let mut rng = Rng::new(43);
        let w = rng.normal_vec(7, 1.0);
        let via_matrix = cross.matvec(&w).unwrap();
        for i in 0..4 {
            let direct = predict_h(&w, &train, &spec, queries.row(i)).unwrap();
            assert!((via_matrix[i] - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
        // Query dimension must match the training dimension.
        assert!(cross_gram(&spec, &random_points(2, 2, 44), &train).is_err());
    }

    #[test]
    fn representer_step_matches_quadratic_step() {
        use crate::models::QuadraticLoss;
        use crate::optimizer::sam_step_quadratic;

        let x = random_points(12, 2, 9);
        let g = gram(&KernelSpec::gaussian_minus_exponential(), &x).unwrap();
        let mut rng = Rng::new(90);
        let w_bar = rng.normal_vec(12, 1.0);
        let eps = rng.normal_vec(12, 0.3);
        let mut y = g.matrix.matvec(&w_bar).unwrap();
        for (yi, ei) in y.iter_mut().zip(&eps) {
            *yi += ei;
        }
        let neg_eps: Vec<f64> = eps.iter().map(|e| -e).collect();
        let loss = QuadraticLoss::new(g.matrix.clone(), neg_eps, w_bar.clone()).unwrap();
        let cfg = OptimConfig::new(0.02, 0.5, 100).unwrap();

        let mut w_rep = rng.normal_vec(12, 1.0);
        let mut w_quad = w_rep.clone();
        for _ in 0..100 {
            w_rep = kernel_sam_step(&w_rep, &g, &y, &cfg).unwrap();
            w_quad = sam_step_quadratic(&w_quad, &loss, &cfg).unwrap();
            let scale = w_quad.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in w_rep.iter().zip(&w_quad) {
                assert!((a - b).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn prediction_examples() {
        let x = random_points(5, 2, 31);
        let spec = KernelSpec::Gaussian { bandwidth_sq: 1.0 };
        let mut w = vec![0.0; 5];
        w[2] = 1.0;
        let v = predict_h(&w, &x, &spec, x.row(2)).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(predict_h(&vec![0.0; 5], &x, &spec, &[0.0, 0.0]).unwrap(), 0.0);

        let g = gram(&spec, &x).unwrap();
        let mut rng = Rng::new(32);
        let coef = rng.normal_vec(5, 1.0);
        let kw = g.matrix.matvec(&coef).unwrap();
        for i in 0..5 {
            let p = predict_h(&coef, &x, &spec, x.row(i)).unwrap();
            assert!((p - kw[i]).abs() <= 1e-12 * kw[i].abs().max(1.0));
        }
    }

    #[test]
    fn expansion_of_small_row() {
        let x = Matrix::from_vec(1, 2, vec![2.0, 3.0]).unwrap();
        // With p = 2 there is exactly one pair, (0, 1), whatever the seed.
        let out = feature_expand(&x, 1, 123).unwrap();
        assert_eq!(out.cols(), 7);
        assert_eq!(out.row(0), &[2.0, 3.0, 4.0, 9.0, 8.0, 27.0, 6.0]);
    }

    #[test]
    fn expansion_widths() {
        let x = random_points(2, 200, 8);
        let out = feature_expand(&x, 400, 1).unwrap();
        assert_eq!(out.cols(), 1000);
        let none = feature_expand(&x, 0, 1).unwrap();
        assert_eq!(none.cols(), 600);
    }

    #[test]
    fn expansion_rejects_too_many_pairs() {
        let x = random_points(1, 4, 2);
        assert!(matches!(
            feature_expand(&x, 7, 0),
            Err(Error::PairCountTooLarge { requested: 7, max: 6 })
        ));
    }

    #[test]
    fn drawn_pairs_distinct_ordered_and_deterministic() {
        for seed in 0..5u64 {
            let pairs = draw_pairs(10, 20, seed);
            assert_eq!(pairs.len(), 20);
            for &(i, j) in &pairs {
                assert!(i < j && j < 10);
            }
            let mut dedup = pairs.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), 20, "pairs must be distinct");
            assert_eq!(pairs, draw_pairs(10, 20, seed));
        }
    }

    #[test]
    fn expansion_deterministic_across_calls() {
        let x = random_points(3, 6, 77);
        let a = feature_expand(&x, 5, 42).unwrap();
        let b = feature_expand(&x, 5, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_spec_serde_roundtrip() {
        let spec = KernelSpec::gaussian_minus_exponential();
        let json = serde_json::to_string(&spec).unwrap();
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
