//! Small dense linear algebra kernels: Householder QR and a Jacobi
//! eigensolver for symmetric matrices. Problem sizes here are tiny
//! (a handful of columns), so clarity wins over blocking.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// Thin QR factorization of an `n x p` matrix (`n >= p`).
pub struct Qr {
    /// Householder vectors, one per column, stored below the diagonal.
    reflectors: Array2<f64>,
    betas: Vec<f64>,
    /// Upper-triangular `p x p` factor.
    pub r: Array2<f64>,
}

impl Qr {
    pub fn new(a: ArrayView2<f64>) -> Self {
        let (n, p) = a.dim();
        assert!(n >= p, "QR needs at least as many rows as columns");
        let mut m = a.to_owned();
        let mut betas = Vec::with_capacity(p);
        for k in 0..p {
            let norm = m.slice(ndarray::s![k.., k]).dot(&m.slice(ndarray::s![k.., k])).sqrt();
            if norm == 0.0 {
                betas.push(0.0);
                continue;
            }
            let alpha = if m[[k, k]] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, stored in place; v_k kept separately via scaling
            let v0 = m[[k, k]] - alpha;
            m[[k, k]] = alpha;
            for i in k + 1..n {
                m[[i, k]] /= v0;
            }
            // v = [1, m[k+1.., k]], beta = -v0 / alpha
            let beta = -v0 / alpha;
            betas.push(beta);
            for j in k + 1..p {
                let mut s = m[[k, j]];
                for i in k + 1..n {
                    s += m[[i, k]] * m[[i, j]];
                }
                s *= beta;
                m[[k, j]] -= s;
                for i in k + 1..n {
                    let vik = m[[i, k]];
                    m[[i, j]] -= s * vik;
                }
            }
        }
        let mut r = Array2::zeros((p, p));
        for i in 0..p {
            for j in i..p {
                r[[i, j]] = m[[i, j]];
            }
        }
        Qr { reflectors: m, betas, r }
    }

    /// Applies `Q^T` to `b` and returns the leading `p` entries.
    pub fn qt_mul(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let (n, p) = self.reflectors.dim();
        let mut y = b.to_owned();
        for k in 0..p {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let mut s = y[k];
            for i in k + 1..n {
                s += self.reflectors[[i, k]] * y[i];
            }
            s *= beta;
            y[k] -= s;
            for i in k + 1..n {
                y[i] -= s * self.reflectors[[i, k]];
            }
        }
        y.slice(ndarray::s![..p]).to_owned()
    }

    /// Index of the first column whose diagonal entry of `R` falls below
    /// `rel_tol` times the largest diagonal magnitude.
    pub fn deficient_column(&self, rel_tol: f64) -> Option<usize> {
        let diag: Vec<f64> = self.r.diag().iter().map(|v| v.abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        diag.iter().position(|&d| d <= rel_tol * max || !d.is_finite())
    }
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn solve_upper(r: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let p = r.nrows();
    let mut x = Array1::zeros(p);
    for i in (0..p).rev() {
        let mut s = b[i];
        for j in i + 1..p {
            s -= r[[i, j]] * x[j];
        }
        x[i] = s / r[[i, i]];
    }
    x
}

/// Inverse of an upper-triangular matrix.
pub fn invert_upper(r: &Array2<f64>) -> Array2<f64> {
    let p = r.nrows();
    let mut inv = Array2::zeros((p, p));
    for col in 0..p {
        let mut e = Array1::zeros(p);
        e[col] = 1.0;
        let x = solve_upper(r, &e);
        inv.column_mut(col).assign(&x);
    }
    inv
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        let scale: f64 = m.diag().iter().map(|d| d * d).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

/// `A^{-1/2}` for a symmetric positive-definite matrix.
pub fn inv_sqrt_sym(a: ArrayView2<f64>) -> Array2<f64> {
    let (vals, vecs) = symmetric_eigen(a);
    let d = Array2::from_diag(&vals.mapv(|l| 1.0 / l.max(1e-300).sqrt()));
    vecs.dot(&d).dot(&vecs.t())
}

/// Sample covariance (n-1 denominator) of the columns of `x`.
pub fn covariance(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    centered.t().dot(&centered) / (n - 1.0)
}

/// Pearson correlation of two equal-length slices.
pub fn correlation(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Mean and sample standard deviation (n-1 denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
