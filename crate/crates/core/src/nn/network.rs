use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::layers::{dense_backward, dense_forward, gru_backward, gru_forward, LayerCache, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Weights of a layer stack plus its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    architecture: Vec<LayerSpec>,
    /// Flattened per-layer parameter matrices in layer order.
    weights: Vec<Array2<f64>>,
}

/// Everything a backward pass needs from the matching forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    steps: usize,
    out_rows: usize,
    out_features: usize,
    caches: Vec<LayerCache>,
}

/// Gradient with respect to every parameter matrix, same shapes as the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Array2<f64>>);

impl Gradients {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Gradients(net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect())
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.0 {
            *g *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flat_map(|g| g.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl NetworkParams {
    /// Randomly initialized network; consecutive layers must chain.
    pub fn new<R: Rng>(architecture: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        validate_architecture(&architecture)?;
        let weights = architecture.iter().flat_map(|l| l.init(rng)).collect();
        Ok(NetworkParams { architecture, weights })
    }

    pub fn from_parts(architecture: Vec<LayerSpec>, weights: Vec<Array2<f64>>) -> Result<Self> {
        validate_architecture(&architecture)?;
        let shapes: Vec<(usize, usize)> = architecture.iter().flat_map(|l| l.param_shapes()).collect();
        if shapes.len() != weights.len() || shapes.iter().zip(&weights).any(|(s, w)| *s != w.dim()) {
            return Err(Error::Shape("weights do not match the architecture".into()));
        }
        if weights.iter().flat_map(|w| w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights".into()));
        }
        Ok(NetworkParams { architecture, weights })
    }

    pub fn architecture(&self) -> &[LayerSpec] {
        &self.architecture
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.architecture[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.architecture.last().expect("non-empty").output_dim()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Trace)> {
        if input.features() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} input features, got {}",
                self.input_dim(),
                input.features()
            )));
        }
        input.check_finite("network input")?;
        let steps = input.steps();
        let mut x = input.data().clone();
        let mut caches = Vec::with_capacity(self.architecture.len());
        let mut wi = 0;
        for layer in &self.architecture {
            let (out, cache) = match *layer {
                LayerSpec::Dense { activation, .. } => {
                    dense_forward(&self.weights[wi], &self.weights[wi + 1], activation, &x)
                }
                LayerSpec::Gru { hidden, .. } => gru_forward(
                    &self.weights[wi],
                    &self.weights[wi + 1],
                    &self.weights[wi + 2],
                    hidden,
                    steps,
                    &x,
                ),
            };
            wi += layer.param_shapes().len();
            caches.push(cache);
            x = out;
        }
        let out = Tensor::from_sequence(steps, x)?;
        out.check_finite("network output")?;
        let trace = Trace { steps, out_rows: out.data().nrows(), out_features: out.features(), caches };
        Ok((out, trace))
    }

    /// Forward pass without keeping a trace.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Returns the gradient with respect to the input and to every weight.
    pub fn backward(&self, trace: &Trace, loss_grad: &Tensor) -> Result<(Tensor, Gradients)> {
        if loss_grad.data().dim() != (trace.out_rows, trace.out_features) || loss_grad.steps() != trace.steps {
            return Err(Error::Shape("loss gradient does not match the forward output".into()));
        }
        let mut grads: Vec<Vec<Array2<f64>>> = Vec::with_capacity(self.architecture.len());
        let mut offsets = Vec::with_capacity(self.architecture.len());
        let mut wi = 0;
        for l in &self.architecture {
            offsets.push(wi);
            wi += l.param_shapes().len();
        }
        let mut d = loss_grad.data().clone();
        for (li, layer) in self.architecture.iter().enumerate().rev() {
            let w = offsets[li];
            let (dx, g) = match (layer, &trace.caches[li]) {
                (LayerSpec::Dense { activation, .. }, LayerCache::Dense { input, output }) => {
                    dense_backward(&self.weights[w], *activation, input, output, &d)
                }
                (LayerSpec::Gru { hidden, .. }, LayerCache::Gru { input, h_prev, z, r, n }) => gru_backward(
                    &self.weights[w],
                    &self.weights[w + 1],
                    *hidden,
                    trace.steps,
                    input,
                    h_prev,
                    z,
                    r,
                    n,
                    &d,
                ),
                _ => return Err(Error::Shape("trace does not belong to this network".into())),
            };
            grads.push(g);
            d = dx;
        }
        grads.reverse();
        let grads = Gradients(grads.into_iter().flatten().collect());
        if grads.0.iter().flat_map(|g| g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok((Tensor::from_sequence(trace.steps, d)?, grads))
    }
}

fn validate_architecture(arch: &[LayerSpec]) -> Result<()> {
    if arch.is_empty() {
        return Err(Error::Shape("empty architecture".into()));
    }
    for l in arch {
        if l.input_dim() == 0 || l.output_dim() == 0 {
            return Err(Error::Shape(format!("zero-width layer {l:?}")));
        }
    }
    for pair in arch.windows(2) {
        if pair[0].output_dim() != pair[1].input_dim() {
            return Err(Error::Shape(format!("layer {:?} does not feed {:?}", pair[0], pair[1])));
        }
    }
    Ok(())
}

/// A network that remembers its last forward pass, for callers that run
/// strictly alternating forward/backward.
#[derive(Debug, Clone)]
pub struct TrainableNetwork {
    pub params: NetworkParams,
    trace: Option<Trace>,
}

impl TrainableNetwork {
    pub fn new(params: NetworkParams) -> Self {
        TrainableNetwork { params, trace: None }
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (out, trace) = self.params.forward(input)?;
        self.trace = Some(trace);
        Ok(out)
    }

    /// Consumes the stored forward pass.
    pub fn backward(&mut self, loss_grad: &Tensor) -> Result<(Tensor, Gradients)> {
        let trace = self.trace.take().ok_or(Error::NoForwardPass)?;
        self.params.backward(&trace, loss_grad)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredNetwork {
    architecture: Vec<LayerSpec>,
    param_count: usize,
    weights: Vec<StoredMatrix>,
}

impl Serialize for NetworkParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StoredNetwork {
            architecture: self.architecture.clone(),
            param_count: self.param_count(),
            weights: self
                .weights
                .iter()
                .map(|w| StoredMatrix { rows: w.nrows(), cols: w.ncols(), data: w.iter().copied().collect() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetworkParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let stored = StoredNetwork::deserialize(d)?;
        let weights = stored
            .weights
            .into_iter()
            .map(|m| Array2::from_shape_vec((m.rows, m.cols), m.data).map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let net = NetworkParams::from_parts(stored.architecture, weights).map_err(D::Error::custom)?;
        if net.param_count() != stored.param_count {
            return Err(D::Error::custom("param_count disagrees with stored weights"));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::super::Activation;
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(input: usize, output: usize, activation: Activation) -> LayerSpec {
        LayerSpec::Dense { input, output, activation }
    }

    #[test]
    fn zero_weights_give_bias() {
        let arch = vec![dense(3, 2, Activation::Identity)];
        let net = NetworkParams::from_parts(arch, vec![Array2::zeros((3, 2)), array![[0.25, -1.5]]]).unwrap();
        let out = net.predict(&Tensor::from_matrix(array![[1.0, 2.0, 3.0], [-4.0, 0.0, 9.0]])).unwrap();
        assert_eq!(out.data(), &array![[0.25, -1.5], [0.25, -1.5]]);
    }

    #[test]
    fn scalar_linear_layer() {
        let arch = vec![dense(1, 1, Activation::Identity)];
        let net = NetworkParams::from_parts(arch, vec![array![[2.0]], array![[0.0]]]).unwrap();
        let out = net.predict(&Tensor::from_matrix(array![[3.0]])).unwrap();
        assert_eq!(out.data()[[0, 0]], 6.0);
    }

    #[test]
    fn input_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = NetworkParams::new(vec![dense(2, 1, Activation::Sigmoid)], &mut rng).unwrap();
        assert!(matches!(net.predict(&Tensor::from_matrix(array![[1.0, 2.0, 3.0]])), Err(Error::Shape(_))));
        assert!(matches!(net.predict(&Tensor::from_matrix(array![[1.0, f64::NAN]])), Err(Error::NonFinite(_))));
        assert!(NetworkParams::new(vec![dense(2, 3, Activation::Relu), dense(4, 1, Activation::Relu)], &mut rng).is_err());
    }

    #[test]
    fn backward_requires_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = NetworkParams::new(vec![dense(2, 1, Activation::Sigmoid)], &mut rng).unwrap();
        let mut net = TrainableNetwork::new(params);
        let g = Tensor::from_matrix(array![[1.0]]);
        assert!(matches!(net.backward(&g), Err(Error::NoForwardPass)));
        net.forward(&Tensor::from_matrix(array![[0.1, 0.2]])).unwrap();
        assert!(net.backward(&g).is_ok());
        assert!(matches!(net.backward(&g), Err(Error::NoForwardPass)));
    }

    #[test]
    fn checkpoint_json_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = NetworkParams::new(
            vec![LayerSpec::Gru { input: 3, hidden: 4 }, dense(4, 2, Activation::Tanh)],
            &mut rng,
        )
        .unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: NetworkParams = serde_json::from_str(&json).unwrap();
        for (a, b) in net.weights().iter().zip(back.weights()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.param_count(), 3 * 12 + 4 * 12 + 12 + 4 * 2 + 2);
    }
}
