use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Fully connected layer computing `act(x · W + b)`; `weights` is `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    /// Uniform fan-in initialisation in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn uniform<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let weights = Array2::from_shape_fn((input, output), |_| rng.random_range(-bound..=bound));
        let bias = Array1::from_shape_fn(output, |_| rng.random_range(-bound..=bound));
        Self { weights, bias, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Feedforward network. Parameters are stored per layer; gradients mirror
/// that layout through [`Gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Intermediates recorded by [`Network::forward_cached`] and consumed by
/// [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache of a non-empty network")
    }
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Dimension("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(NnError::Dimension(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(NnError::Dimension(format!(
                    "layer {i} bias has length {} for {} outputs",
                    layer.bias.len(),
                    layer.output_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Multilayer perceptron with `hidden` activation on every layer but the
    /// last, which uses `output`.
    pub fn mlp<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::Dimension("mlp needs input and output sizes".into()));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                Layer::uniform(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn same_architecture(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.dim() == b.weights.dim() && a.activation == b.activation
            })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let batch = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| NnError::Dimension(e.to_string()))?;
        Ok(self.forward_batch(&batch)?.into_raw_vec_and_offset().0)
    }

    /// Row-per-sample forward pass.
    pub fn forward_batch(&self, input: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            x = z;
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &Array2<f64>) -> Result<ForwardCache, NnError> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            inputs.push(x);
            pre_activations.push(z);
            x = a.clone();
            outputs.push(a);
        }
        Ok(ForwardCache { inputs, pre_activations, outputs })
    }

    /// Backpropagates `grad_output = dL/d(output)` through the recorded pass.
    /// Returns parameter gradients (summed over the batch) and `dL/d(input)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>), NnError> {
        let out = cache.output();
        if grad_output.dim() != out.dim() {
            return Err(NnError::Dimension(format!(
                "output gradient shape {:?} does not match output {:?}",
                grad_output.dim(),
                out.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[i];
            let a = &cache.outputs[i];
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(z)
                .and(a)
                .for_each(|d, &zv, &av| *d *= layer.activation.derivative(zv, av));
            let dw = cache.inputs[i].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            upstream = dz.dot(&layer.weights.t());
            grads.push(LayerGrad { weights: dw, bias: db });
        }
        grads.reverse();
        let grads = Gradients { layers: grads };
        grads.check_finite()?;
        Ok((grads, upstream))
    }

    fn check_input(&self, input: &Array2<f64>) -> Result<(), NnError> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::Dimension(format!(
                "input width {} but network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Parameters flattened layer by layer (weights row-major, then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(NnError::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }
}

/// Polyak averaging: `target <- (1 - tau) * target + tau * online`.
pub fn soft_update(target: &mut Network, online: &Network, tau: f64) -> Result<(), NnError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::Dimension(format!("soft-update rate {tau} outside [0, 1]")));
    }
    if !target.same_architecture(online) {
        return Err(NnError::Dimension("soft update between different architectures".into()));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        ndarray::Zip::from(&mut t.weights)
            .and(&o.weights)
            .for_each(|t, &o| *t = (1.0 - tau) * *t + tau * o);
        ndarray::Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = (1.0 - tau) * *t + tau * o);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// One gradient per parameter, laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn matches(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.bias *= factor;
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter().copied());
            out.extend(g.bias.iter().copied());
        }
        out
    }

    pub fn check_finite(&self) -> Result<(), NnError> {
        for (layer, g) in self.layers.iter().enumerate() {
            if let Some(index) = g.weights.iter().position(|v| !v.is_finite()) {
                return Err(NnError::NonFinite { layer, param: "weights", index });
            }
            if let Some(index) = g.bias.iter().position(|v| !v.is_finite()) {
                return Err(NnError::NonFinite { layer, param: "bias", index });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_return_bias() {
        let mut layer = Layer::zeros(3, 2, Activation::Linear);
        layer.bias = array![0.5, -1.25];
        let net = Network::from_layers(vec![layer]).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, -1.25]);
    }

    #[test]
    fn scalar_affine_layer() {
        let mut layer = Layer::zeros(1, 1, Activation::Linear);
        layer.weights[[0, 0]] = 2.0;
        layer.bias[0] = 1.0;
        let net = Network::from_layers(vec![layer]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn two_layer_relu_matches_hand_products() {
        let l1 = Layer {
            weights: array![[0.1, -0.2, 0.3], [0.4, 0.5, -0.6]],
            bias: array![0.01, 0.02, -0.03],
            activation: Activation::Relu,
        };
        let l2 = Layer {
            weights: array![[0.7], [-0.8], [0.9]],
            bias: array![0.05],
            activation: Activation::Linear,
        };
        let net = Network::from_layers(vec![l1.clone(), l2.clone()]).unwrap();
        let x = [1.5, -0.5];
        // hand matrix products
        let mut hidden = [0.0; 3];
        for j in 0..3 {
            let mut s = l1.bias[j];
            for i in 0..2 {
                s += x[i] * l1.weights[[i, j]];
            }
            hidden[j] = s.max(0.0);
        }
        let mut y = l2.bias[0];
        for j in 0..3 {
            y += hidden[j] * l2.weights[[j, 0]];
        }
        let out = net.forward(&x).unwrap();
        assert!((out[0] - y).abs() < 1e-12);
    }

    #[test]
    fn input_width_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::mlp(&[3, 4, 1], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(NnError::Dimension(_))));
    }

    #[test]
    fn incompatible_layers_are_rejected() {
        let a = Layer::zeros(2, 3, Activation::Relu);
        let b = Layer::zeros(4, 1, Activation::Linear);
        assert!(Network::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::mlp(&[2, 5, 3], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let x = array![[0.3, -0.7]];
        let cache = net.forward_cached(&x).unwrap();
        let (grads, dx) = net.backward(&cache, &Array2::zeros((1, 3))).unwrap();
        assert!(grads.flat().iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn quadratic_loss_on_single_weight() {
        // L = (w - 3)^2 with the network computing y = w * 1
        let mut layer = Layer::zeros(1, 1, Activation::Linear);
        layer.weights[[0, 0]] = 1.0;
        let net = Network::from_layers(vec![layer]).unwrap();
        let cache = net.forward_cached(&array![[1.0]]).unwrap();
        let y = cache.output()[[0, 0]];
        let (grads, _) = net.backward(&cache, &array![[2.0 * (y - 3.0)]]).unwrap();
        assert_eq!(grads.layers[0].weights[[0, 0]], -4.0);
    }

    #[test]
    fn non_finite_gradient_reports_location() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::mlp(&[2, 2, 1], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let cache = net.forward_cached(&array![[0.1, 0.2]]).unwrap();
        let err = net.backward(&cache, &array![[f64::NAN]]).unwrap_err();
        assert!(matches!(err, NnError::NonFinite { layer: 0, .. }));
    }

    #[test]
    fn soft_update_endpoints_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let online = Network::mlp(&[2, 3, 1], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        let original = Network::mlp(&[2, 3, 1], Activation::Relu, Activation::Linear, &mut rng).unwrap();

        let mut t = original.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, original);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);

        let mut a = Layer::zeros(1, 1, Activation::Linear);
        let mut b = Layer::zeros(1, 1, Activation::Linear);
        b.weights[[0, 0]] = 1.0;
        a.weights[[0, 0]] = 0.0;
        let mut target = Network::from_layers(vec![a]).unwrap();
        let online = Network::from_layers(vec![b]).unwrap();
        soft_update(&mut target, &online, 0.5).unwrap();
        assert_eq!(target.layers()[0].weights[[0, 0]], 0.5);
    }

    #[test]
    fn soft_update_rejects_mismatched_architectures() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = Network::mlp(&[2, 3, 1], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        let b = Network::mlp(&[2, 4, 1], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        assert!(soft_update(&mut a, &b, 0.5).is_err());
    }
}
