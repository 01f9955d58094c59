use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_sym, symmetric_eigen};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcaConfig {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig { tolerance: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct IcaResult {
    /// Unmixing matrix acting on centered data: `sources = (x - mean) W^T`.
    pub unmixing: Array2<f64>,
    /// Orthonormal rotation found in whitened space (rows unit norm).
    pub rotation: Array2<f64>,
    pub whitening: Array2<f64>,
    pub mean: Array1<f64>,
    pub sources: Array2<f64>,
    pub iterations: usize,
    /// Excess kurtosis of each recovered source.
    pub source_kurtosis: Vec<f64>,
    /// False when two or more sources look Gaussian, in which case the
    /// rotation is not identified.
    pub identifiable: bool,
}

/// Excess kurtosis below which a source (of unit variance) is treated as
/// Gaussian. Roughly four standard errors at n = 10 000.
const GAUSSIAN_KURTOSIS: f64 = 0.2;

/// Symmetric FastICA with the log-cosh contrast.
pub fn fastica(data: ArrayView2<f64>, seed: u64, cfg: IcaConfig) -> Result<IcaResult> {
    let (n, k) = data.dim();
    if k < 2 {
        return Err(Error::Shape(format!("ICA needs at least 2 columns, got {k}")));
    }
    if n <= k {
        return Err(Error::Shape(format!("ICA needs more rows than columns ({n} x {k})")));
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let xc = &data - &mean;
    let cov = xc.t().dot(&xc) / n as f64;
    let (vals, vecs) = symmetric_eigen(cov.view());
    if vals[k - 1] <= 1e-12 * vals[0].max(f64::MIN_POSITIVE) {
        return Err(Error::Shape("data covariance is singular; cannot whiten".into()));
    }
    // whitening = D^{-1/2} E^T
    let mut whitening = vecs.t().to_owned();
    for (i, mut row) in whitening.rows_mut().into_iter().enumerate() {
        row /= vals[i].sqrt();
    }
    let z = xc.dot(&whitening.t());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Array2::from_shape_simple_fn((k, k), || StandardNormal.sample(&mut rng));
    let mut w = decorrelate(&init);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let u = z.dot(&w.t());
        let g = u.mapv(f64::tanh);
        let g_prime_mean = g.mapv(|v| 1.0 - v * v).mean_axis(Axis(0)).expect("non-empty");
        let mut w_new = g.t().dot(&z) / n as f64;
        for i in 0..k {
            let wi = w.row(i).to_owned();
            w_new.row_mut(i).scaled_add(-g_prime_mean[i], &wi);
        }
        let w_new = decorrelate(&w_new);
        let change = (0..k)
            .map(|i| (w_new.row(i).dot(&w.row(i)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        trace.push(change);
        w = w_new;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            last_change: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        });
    }
    let unmixing = w.dot(&whitening);
    let sources = xc.dot(&unmixing.t());
    let source_kurtosis: Vec<f64> = sources
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.mean().unwrap_or(0.0);
            let m2 = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            let m4 = c.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n as f64;
            m4 / (m2 * m2) - 3.0
        })
        .collect();
    let gaussian_like = source_kurtosis.iter().filter(|k| k.abs() < GAUSSIAN_KURTOSIS).count();
    let identifiable = gaussian_like < 2;
    if !identifiable {
        log::warn!("{gaussian_like} ICA sources look Gaussian; unmixing is not identified");
    }
    Ok(IcaResult { unmixing, rotation: w, whitening, mean, sources, iterations, source_kurtosis, identifiable })
}

/// `W <- (W W^T)^{-1/2} W`
fn decorrelate(w: &Array2<f64>) -> Array2<f64> {
    inv_sqrt_sym(w.dot(&w.t()).view()).dot(w)
}
