//! Estimator behaviour on data from the benchmark models, checked against
//! ground truth, simulation oracles, and the normal-equations closed form.

use causalbench::inference::{ar_fit, check_assumptions, ols_fit, FitOptions, RegressionSpec, INTERCEPT};
use causalbench::linalg::correlation;
use causalbench::scm::{model_a, model_b, sample, sample_with_noise, NoiseDist};
use causalbench::PanelDataset;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian_a() -> causalbench::scm::ScmSpec {
    model_a(NoiseDist::gaussian(0.0, 0.5)).unwrap()
}

fn y_ar_spec() -> RegressionSpec {
    RegressionSpec::new("y", &[("y", 1), ("x1", 0), ("x2", 0)])
}

/// Normal equations solved by Gaussian elimination with partial pivoting;
/// independent of the QR path.
fn normal_equations(x: &Array2<f64>, y: &Array1<f64>) -> Vec<f64> {
    let p = x.ncols();
    let xtx = x.t().dot(x);
    let xty = x.t().dot(y);
    let mut a: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| xtx[[i, j]]).chain([xty[i]]).collect()).collect();
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (v, pv) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *v -= f * pv;
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

#[test]
fn model_a_cross_sectional_recovery() {
    let data = sample(&gaussian_a(), 10_000, 1).unwrap();
    let x1 = ols_fit(&data, &RegressionSpec::new("x1", &[("z1", 0), ("z2", 0)])).unwrap();
    let x2 = ols_fit(&data, &RegressionSpec::new("x2", &[("z2", 0)])).unwrap();
    for (r, t) in [(&x1, "z1"), (&x1, "z2"), (&x2, "z2")] {
        let b = r.coefficient(t).unwrap();
        let se = r.standard_error(t).unwrap();
        assert!((b - 1.0).abs() < 4.0 * se, "{t}: {b} ± {se}");
    }
}

#[test]
fn model_a_ar_coefficient_within_three_se() {
    let data = sample(&gaussian_a(), 10_000, 2).unwrap();
    let r = ar_fit(&data, &y_ar_spec(), FitOptions::default()).unwrap();
    let a = r.coefficient("y[t-1]").unwrap();
    let se = r.standard_error("y[t-1]").unwrap();
    assert!((a - 0.5).abs() < 3.0 * se, "{a} ± {se}");
    assert_eq!(r.n_used, 9_999);
}

#[test]
fn simulated_ar1_recovers_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5000;
    let mut y = Array2::zeros((n, 1));
    let mut prev = 0.0;
    for i in 0..n {
        prev = 0.8 * prev + rng.random_range(-1.0..1.0);
        y[[i, 0]] = prev;
    }
    let data = PanelDataset::new(vec!["y".into()], y, true).unwrap();
    let r = ar_fit(&data, &RegressionSpec::new("y", &[("y", 1)]), FitOptions::default()).unwrap();
    let a = r.coefficient("y[t-1]").unwrap();
    assert!((a - 0.8).abs() < 3.0 * r.standard_error("y[t-1]").unwrap());
}

#[test]
fn shuffling_destroys_the_lag_signal() {
    let data = sample(&gaussian_a(), 10_000, 3).unwrap();
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let shuffled = data.permute_rows(&order).unwrap();
    let r = ar_fit(&shuffled, &y_ar_spec(), FitOptions::forced()).unwrap();
    let a = r.coefficient("y[t-1]").unwrap();
    assert!(a.abs() < 3.0 * r.standard_error("y[t-1]").unwrap(), "{a}");
    // cross-sectional estimates do not care about row order
    let spec = RegressionSpec::new("x1", &[("z1", 0), ("z2", 0)]);
    let before = ols_fit(&data, &spec).unwrap();
    let after = ols_fit(&shuffled, &spec).unwrap();
    for (a, b) in before.coefficients.iter().zip(&after.coefficients) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn qr_agrees_with_normal_equations() {
    let data = sample(&gaussian_a(), 2000, 4).unwrap();
    let r = ols_fit(&data, &RegressionSpec::new("y", &[("x1", 0), ("x2", 0), ("z1", 0)])).unwrap();
    let m = data.rows();
    let mut x = Array2::ones((m.nrows(), 4));
    for (j, c) in [1, 2, 3].iter().enumerate() {
        x.column_mut(j).assign(&m.column(*c));
    }
    let y = m.column(0).to_owned();
    let oracle = normal_equations(&x, &y);
    for (a, b) in r.coefficients.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn diagnostics_on_correct_and_misspecified_models() {
    let data = sample(&gaussian_a(), 10_000, 6).unwrap();
    let x1_spec = RegressionSpec::new("x1", &[("z1", 0), ("z2", 0)]);
    let x1 = ols_fit(&data, &x1_spec).unwrap();
    let d = check_assumptions(&data, &x1_spec, &x1, FitOptions::default()).unwrap();
    assert!(d["residual_mean"].abs() < 1e-10);
    assert!(d["heteroskedasticity_stat"] < 1.2);

    let spec = y_ar_spec();
    let r = ar_fit(&data, &spec, FitOptions::default()).unwrap();
    let d = check_assumptions(&data, &spec, &r, FitOptions::default()).unwrap();
    assert!(d["residual_lag1_autocorr"].abs() < 0.05, "{}", d["residual_lag1_autocorr"]);

    let omitted = RegressionSpec::new("y", &[("x1", 0), ("x2", 0)]);
    let r = ols_fit(&data, &omitted).unwrap();
    let d = check_assumptions(&data, &omitted, &r, FitOptions::default()).unwrap();
    assert!(d["residual_lag1_autocorr"] > 0.2, "{}", d["residual_lag1_autocorr"]);
}

#[test]
fn model_b_static_regression_doubles_coefficients() {
    // y_t = sum_k 0.5^k (x1 + x2 + e)_{t-k}; with slowly moving x this is ~2 x1 + 2 x2
    let data = sample(&model_b().unwrap(), 10_000, 7).unwrap();
    let r = ols_fit(&data, &RegressionSpec::new("y", &[("x1", 0), ("x2", 0)])).unwrap();
    for t in ["x1", "x2"] {
        let b = r.coefficient(t).unwrap();
        assert!((b - 2.0).abs() < 0.2, "{t}: {b}");
    }
}

#[test]
fn exogenous_roots_are_uncorrelated() {
    let spec = gaussian_a();
    let ok = (0..20)
        .filter(|&s| {
            let d = sample(&spec, 10_000, 100 + s).unwrap();
            correlation(d.column("z1").unwrap(), d.column("z2").unwrap()).abs() < 0.05
        })
        .count();
    assert!(ok >= 19, "{ok}/20");
}

#[test]
fn root_variance_matches_noise_law() {
    let d = sample(&gaussian_a(), 200_000, 8).unwrap();
    let z1 = d.column("z1").unwrap();
    let mean = z1.mean().unwrap();
    let var = z1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z1.len() - 1) as f64;
    assert!((var / 0.25 - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn random_walk_variance_grows_linearly() {
    // variance of z1 at step t across independent paths is t * var(eps)
    let spec = model_b().unwrap();
    let paths = 2000;
    let checkpoints = [25usize, 50, 100];
    let mut sums = [0.0f64; 3];
    for p in 0..paths {
        let d = sample(&spec, 100, 10_000 + p).unwrap();
        let z1 = d.column("z1").unwrap();
        for (i, &t) in checkpoints.iter().enumerate() {
            sums[i] += z1[t - 1].powi(2);
        }
    }
    for (i, &t) in checkpoints.iter().enumerate() {
        let var = sums[i] / paths as f64;
        let expected = t as f64 * 0.25;
        assert!((var / expected - 1.0).abs() < 0.1, "t={t}: {var} vs {expected}");
    }
}

#[test]
fn stored_noise_reproduces_every_column() {
    for spec in [gaussian_a(), model_b().unwrap(), model_a(NoiseDist::uniform(-1.0, 1.0)).unwrap()] {
        let s = sample_with_noise(&spec, 500, 9).unwrap();
        let m = s.data.rows();
        for (v, var) in spec.variables().iter().enumerate() {
            for t in 0..m.nrows() {
                let mut acc = 0.0;
                for term in spec.equation(var).unwrap() {
                    let p = spec.index_of(&term.parent).unwrap();
                    let value = if term.lag == 0 {
                        m[[t, p]]
                    } else if t > 0 {
                        m[[t - 1, p]]
                    } else {
                        // the step before the first kept row is not stored;
                        // Model B starts from zero, Model A has burn-in
                        if spec.burn_in() > 0 {
                            continue;
                        }
                        0.0
                    };
                    acc += term.coef * value;
                }
                if t == 0 && spec.burn_in() > 0 && spec.equation(var).unwrap().iter().any(|t| t.lag == 1) {
                    continue;
                }
                assert_eq!(acc + s.noise[[t, v]], m[[t, v]], "{var} at {t}");
            }
        }
    }
}

#[test]
fn residuals_sum_to_zero_with_intercept() {
    let data = sample(&gaussian_a(), 5000, 10).unwrap();
    let spec = RegressionSpec::new("y", &[("x1", 0), ("x2", 0)]);
    let r = ols_fit(&data, &spec).unwrap();
    let m = data.rows();
    let sum: f64 = (0..m.nrows())
        .map(|t| m[[t, 0]] - r.coefficients[0] * m[[t, 1]] - r.coefficients[1] * m[[t, 2]] - r.coefficient(INTERCEPT).unwrap())
        .sum();
    let sd = data.column("y").unwrap().std(1.0);
    assert!(sum.abs() < 1e-8 * m.nrows() as f64 * sd, "{sum}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_a_regressor_rescales_its_coefficient(seed in 0u64..1000, c in prop_oneof![0.01f64..0.5, 2.0f64..50.0]) {
        let data = sample(&gaussian_a(), 400, seed).unwrap();
        let spec = RegressionSpec::new("x1", &[("z1", 0), ("z2", 0)]);
        let base = ols_fit(&data, &spec).unwrap();
        let mut rows = data.rows().clone();
        rows.column_mut(3).mapv_inplace(|v| v * c);
        let scaled = PanelDataset::new(data.columns().to_vec(), rows, true).unwrap();
        let r = ols_fit(&scaled, &spec).unwrap();
        let (b0, b1) = (base.coefficient("z1").unwrap(), r.coefficient("z1").unwrap());
        prop_assert!((b1 * c - b0).abs() <= 1e-9 * b0.abs().max(1.0));
        let (s0, s1) = (base.standard_error("z1").unwrap(), r.standard_error("z1").unwrap());
        prop_assert!((s1 * c - s0).abs() <= 1e-9 * s0);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), n in 2usize..200) {
        let spec = gaussian_a();
        prop_assert_eq!(sample(&spec, n, seed).unwrap(), sample(&spec, n, seed).unwrap());
    }
}
