use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

const CLAMP: f64 = 1e-7;

/// Mean binary cross entropy of probabilities against 0/1 labels, with the
/// gradient with respect to the predictions.
pub fn bce_loss(predictions: &Array2<f64>, labels: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if predictions.dim() != labels.dim() {
        return Err(Error::Shape("predictions and labels differ in shape".into()));
    }
    if predictions.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    if let Some(p) = predictions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::NonFinite(format!("prediction {p} outside (0,1)")));
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::Shape("labels must be 0 or 1".into()));
    }
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(predictions.raw_dim());
    Zip::from(&mut grad).and(predictions).and(labels).for_each(|g, &p, &l| {
        let p = p.clamp(CLAMP, 1.0 - CLAMP);
        loss -= l * p.ln() + (1.0 - l) * (1.0 - p).ln();
        *g = -(l / p - (1.0 - l) / (1.0 - p)) / n;
    });
    Ok((loss / n, grad))
}

/// Mean over rows of the Euclidean distance between `a` and `b`, with the
/// gradient with respect to `a`. Rows at distance zero get a zero gradient.
pub fn mean_l2_distance(a: &Array2<f64>, b: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if a.dim() != b.dim() {
        return Err(Error::Shape("operands differ in shape".into()));
    }
    let n = a.nrows().max(1) as f64;
    let diff = a - b;
    let mut grad = Array2::zeros(a.raw_dim());
    let mut total = 0.0;
    for (i, row) in diff.rows().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        total += norm;
        if norm > 1e-12 {
            grad.row_mut(i).assign(&(&row / (norm * n)));
        }
    }
    Ok((total / n, grad))
}
