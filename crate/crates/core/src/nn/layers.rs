use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

const LEAKY_SLOPE: f64 = 0.2;

impl Activation {
    pub(crate) fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::LeakyRelu => z.mapv_inplace(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v }),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if a > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Architecture descriptor of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense { input: usize, output: usize, activation: Activation },
    /// Gated recurrent unit returning the hidden state at every step.
    Gru { input: usize, hidden: usize },
}

impl LayerSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { input, .. } | LayerSpec::Gru { input, .. } => input,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { output, .. } => output,
            LayerSpec::Gru { hidden, .. } => hidden,
        }
    }

    /// Shapes of the parameter matrices, in storage order.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        match *self {
            LayerSpec::Dense { input, output, .. } => vec![(input, output), (1, output)],
            LayerSpec::Gru { input, hidden } => vec![(input, 3 * hidden), (hidden, 3 * hidden), (1, 3 * hidden)],
        }
    }

    pub(crate) fn init<R: Rng>(&self, rng: &mut R) -> Vec<Array2<f64>> {
        let bound = match *self {
            LayerSpec::Dense { input, .. } => 1.0 / (input as f64).sqrt(),
            LayerSpec::Gru { hidden, .. } => 1.0 / (hidden as f64).sqrt(),
        };
        let dist = Uniform::new_inclusive(-bound, bound).expect("positive bound");
        let shapes = self.param_shapes();
        let last = shapes.len() - 1;
        shapes
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                if i == last {
                    Array2::zeros(shape)
                } else {
                    Array2::from_shape_simple_fn(shape, || rng.sample(dist))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    Dense { input: Array2<f64>, output: Array2<f64> },
    Gru { input: Array2<f64>, h_prev: Array2<f64>, z: Array2<f64>, r: Array2<f64>, n: Array2<f64> },
}

pub(crate) fn dense_forward(
    w: &Array2<f64>,
    b: &Array2<f64>,
    act: Activation,
    input: &Array2<f64>,
) -> (Array2<f64>, LayerCache) {
    let mut out = input.dot(w) + b;
    act.apply(&mut out);
    let cache = LayerCache::Dense { input: input.clone(), output: out.clone() };
    (out, cache)
}

/// Returns `(d_input, [dW, db])`.
pub(crate) fn dense_backward(
    w: &Array2<f64>,
    act: Activation,
    input: &Array2<f64>,
    output: &Array2<f64>,
    d_out: &Array2<f64>,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let mut dz = d_out.clone();
    if act != Activation::Identity {
        ndarray::Zip::from(&mut dz).and(output).for_each(|d, &a| *d *= act.derivative_from_output(a));
    }
    let dw = input.t().dot(&dz);
    let db = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx = dz.dot(&w.t());
    (dx, vec![dw, db])
}

pub(crate) fn gru_forward(
    wx: &Array2<f64>,
    wh: &Array2<f64>,
    b: &Array2<f64>,
    hidden: usize,
    steps: usize,
    input: &Array2<f64>,
) -> (Array2<f64>, LayerCache) {
    let rows = input.nrows();
    let batch = rows / steps;
    let xw = input.dot(wx) + b;
    let uzr = wh.slice(s![.., ..2 * hidden]);
    let un = wh.slice(s![.., 2 * hidden..]);
    let mut out = Array2::zeros((rows, hidden));
    let mut h_prev_all = Array2::zeros((rows, hidden));
    let mut z_all = Array2::zeros((rows, hidden));
    let mut r_all = Array2::zeros((rows, hidden));
    let mut n_all = Array2::zeros((rows, hidden));
    let mut h = Array2::<f64>::zeros((batch, hidden));
    for t in 0..steps {
        let rs = t * batch..(t + 1) * batch;
        let xw_t = xw.slice(s![rs.clone(), ..]);
        let mut zr = &xw_t.slice(s![.., ..2 * hidden]) + &h.dot(&uzr);
        zr.mapv_inplace(sigmoid);
        let z = zr.slice(s![.., ..hidden]).to_owned();
        let r = zr.slice(s![.., hidden..]).to_owned();
        let rh = &r * &h;
        let mut n = &xw_t.slice(s![.., 2 * hidden..]) + &rh.dot(&un);
        n.mapv_inplace(f64::tanh);
        let h_new = &n + &(&z * &(&h - &n));
        h_prev_all.slice_mut(s![rs.clone(), ..]).assign(&h);
        z_all.slice_mut(s![rs.clone(), ..]).assign(&z);
        r_all.slice_mut(s![rs.clone(), ..]).assign(&r);
        n_all.slice_mut(s![rs.clone(), ..]).assign(&n);
        out.slice_mut(s![rs, ..]).assign(&h_new);
        h = h_new;
    }
    let cache = LayerCache::Gru { input: input.clone(), h_prev: h_prev_all, z: z_all, r: r_all, n: n_all };
    (out, cache)
}

/// Backpropagation through time. Returns `(d_input, [dWx, dWh, db])`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward(
    wx: &Array2<f64>,
    wh: &Array2<f64>,
    hidden: usize,
    steps: usize,
    input: &Array2<f64>,
    h_prev: &Array2<f64>,
    z: &Array2<f64>,
    r: &Array2<f64>,
    n: &Array2<f64>,
    d_out: &Array2<f64>,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let rows = input.nrows();
    let batch = rows / steps;
    let uz = wh.slice(s![.., ..hidden]);
    let ur = wh.slice(s![.., hidden..2 * hidden]);
    let un = wh.slice(s![.., 2 * hidden..]);
    let mut d_xw = Array2::zeros((rows, 3 * hidden));
    let mut d_wh = Array2::zeros((hidden, 3 * hidden));
    let mut dh_next = Array2::<f64>::zeros((batch, hidden));
    for t in (0..steps).rev() {
        let rs = t * batch..(t + 1) * batch;
        let hp = h_prev.slice(s![rs.clone(), ..]);
        let zt = z.slice(s![rs.clone(), ..]);
        let rt = r.slice(s![rs.clone(), ..]);
        let nt = n.slice(s![rs.clone(), ..]);
        let dh = &d_out.slice(s![rs.clone(), ..]) + &dh_next;

        let dn_pre = &dh * &zt.mapv(|v| 1.0 - v) * &nt.mapv(|v| 1.0 - v * v);
        let dz_pre = &dh * &(&hp - &nt) * &zt.mapv(|v| v * (1.0 - v));
        let rh = &rt * &hp;
        let d_rh = dn_pre.dot(&un.t());
        let dr_pre = &d_rh * &hp * &rt.mapv(|v| v * (1.0 - v));

        let mut dh_prev = &dh * &zt;
        dh_prev += &(&d_rh * &rt);
        dh_prev += &dz_pre.dot(&uz.t());
        dh_prev += &dr_pre.dot(&ur.t());

        {
            let mut g = d_wh.slice_mut(s![.., ..hidden]);
            g += &hp.t().dot(&dz_pre);
        }
        {
            let mut g = d_wh.slice_mut(s![.., hidden..2 * hidden]);
            g += &hp.t().dot(&dr_pre);
        }
        {
            let mut g = d_wh.slice_mut(s![.., 2 * hidden..]);
            g += &rh.t().dot(&dn_pre);
        }
        let mut dxw_t = d_xw.slice_mut(s![rs, ..]);
        dxw_t.slice_mut(s![.., ..hidden]).assign(&dz_pre);
        dxw_t.slice_mut(s![.., hidden..2 * hidden]).assign(&dr_pre);
        dxw_t.slice_mut(s![.., 2 * hidden..]).assign(&dn_pre);
        dh_next = dh_prev;
    }
    let d_wx = input.t().dot(&d_xw);
    let d_b = d_xw.sum_axis(Axis(0)).insert_axis(Axis(0));
    let d_input = d_xw.dot(&wx.t());
    (d_input, vec![d_wx, d_wh, d_b])
}
