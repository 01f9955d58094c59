use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// A `[steps, batch, features]` block of reals. Row `t * batch + b` of the
/// backing matrix holds sample `b` at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    steps: usize,
    data: Array2<f64>,
}

impl Tensor {
    /// A plain `batch x features` matrix (one step).
    pub fn from_matrix(data: Array2<f64>) -> Self {
        Tensor { steps: 1, data }
    }

    pub fn from_sequence(steps: usize, data: Array2<f64>) -> Result<Self> {
        if steps == 0 || !data.nrows().is_multiple_of(steps) {
            return Err(Error::Shape(format!("{} rows do not split into {steps} steps", data.nrows())));
        }
        Ok(Tensor { steps, data })
    }

    /// Builds a sequence tensor from `batch` windows of `steps x features`.
    pub fn from_windows(windows: &[ArrayView2<f64>]) -> Result<Self> {
        let first = windows.first().ok_or_else(|| Error::Shape("no windows".into()))?;
        let (steps, feats) = first.dim();
        let batch = windows.len();
        let mut data = Array2::zeros((steps * batch, feats));
        for (b, w) in windows.iter().enumerate() {
            if w.dim() != (steps, feats) {
                return Err(Error::Shape("ragged windows".into()));
            }
            for t in 0..steps {
                data.row_mut(t * batch + b).assign(&w.row(t));
            }
        }
        Tensor::from_sequence(steps, data)
    }

    /// Inverse of [`Tensor::from_windows`].
    pub fn to_windows(&self) -> Vec<Array2<f64>> {
        let batch = self.batch();
        (0..batch)
            .map(|b| {
                let mut w = Array2::zeros((self.steps, self.features()));
                for t in 0..self.steps {
                    w.row_mut(t).assign(&self.data.row(t * batch + b));
                }
                w
            })
            .collect()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn batch(&self) -> usize {
        self.data.nrows() / self.steps
    }

    pub fn features(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.steps, self.batch(), self.features()]
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// All samples at step `t`.
    pub fn step(&self, t: usize) -> ArrayView2<'_, f64> {
        let b = self.batch();
        self.data.slice(s![t * b..(t + 1) * b, ..])
    }

    /// Same layout, different payload.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self> {
        if data.nrows() != self.data.nrows() {
            return Err(Error::Shape("row count changed".into()));
        }
        Ok(Tensor { steps: self.steps, data })
    }

    /// Feature-wise concatenation of two tensors with identical step/batch layout.
    pub fn concat_features(&self, other: &Tensor) -> Result<Self> {
        if self.steps != other.steps || self.data.nrows() != other.data.nrows() {
            return Err(Error::Shape("cannot concatenate tensors with different layouts".into()));
        }
        let data = ndarray::concatenate(ndarray::Axis(1), &[self.data.view(), other.data.view()])
            .expect("row counts checked");
        Ok(Tensor { steps: self.steps, data })
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}
