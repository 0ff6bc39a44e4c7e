//! Small fully connected networks with exactly the derivatives the surrogates need:
//! reverse-mode parameter gradients, a forward-mode derivative with respect to one
//! input coordinate (the time input of the displacement surrogate), and gradients
//! of losses that depend on that derivative.
//!
//! Parameters live in one flat buffer, layer by layer, each layer as a row-major
//! `out x in` weight block followed by its `out` biases. Gradients and Adam
//! moments share the same layout.
//!
//! Batched evaluation stacks `B` value rows on top of `B` tangent rows so that
//! one GEMM per layer carries both the activations and their derivatives with
//! respect to the tracked input.

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Offset added after the softplus output transform.
pub const OUTPUT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Softplus,
    Sigmoid,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Sigmoid, Activation::Softplus, Activation::Tanh];

    /// Value, first and second derivative at `z`.
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                (t, d1, -2.0 * t * d1)
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                let d1 = s * (1.0 - s);
                (s, d1, d1 * (1.0 - 2.0 * s))
            }
            Activation::Softplus => {
                let s = sigmoid(z);
                (softplus(z), s, s * (1.0 - s))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "softplus" => Ok(Activation::Softplus),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTransform {
    Identity,
    SoftplusPlusEpsilon,
}

impl OutputTransform {
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            OutputTransform::Identity => (z, 1.0, 0.0),
            OutputTransform::SoftplusPlusEpsilon => {
                let (v, d1, d2) = Activation::Softplus.eval(z);
                (v + OUTPUT_EPSILON, d1, d2)
            }
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_transform: OutputTransform,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    offsets.push(0);
    for w in sizes.windows(2) {
        acc += w[1] * w[0] + w[1];
        offsets.push(acc);
    }
    offsets
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument(format!("layer sizes must be positive, got {sizes:?}")));
    }
    Ok(())
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_transform: OutputTransform,
        seed: u64,
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let offsets = layer_offsets(layer_sizes);
        let mut params = vec![0.0; *offsets.last().unwrap()];
        let mut rng = rng::stream_rng(seed, 0);
        for l in 0..layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let bound = glorot_bound(fan_in, fan_out);
            for w in &mut params[offsets[l]..offsets[l] + fan_in * fan_out] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(Network {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_transform,
            params,
            offsets,
        })
    }

    /// Builds a network from per-layer row-major weights and biases.
    pub fn from_parts(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_transform: OutputTransform,
        weights: &[Vec<f64>],
        biases: &[Vec<f64>],
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let n_layers = layer_sizes.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::DimensionMismatch {
                what: "layer count",
                expected: n_layers,
                actual: weights.len().min(biases.len()),
            });
        }
        let offsets = layer_offsets(layer_sizes);
        let mut params = Vec::with_capacity(*offsets.last().unwrap());
        for l in 0..n_layers {
            let (i, o) = (layer_sizes[l], layer_sizes[l + 1]);
            if weights[l].len() != i * o {
                return Err(Error::DimensionMismatch {
                    what: "weight matrix",
                    expected: i * o,
                    actual: weights[l].len(),
                });
            }
            if biases[l].len() != o {
                return Err(Error::DimensionMismatch {
                    what: "bias vector",
                    expected: o,
                    actual: biases[l].len(),
                });
            }
            params.extend_from_slice(&weights[l]);
            params.extend_from_slice(&biases[l]);
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite parameter at flat index {i}")));
        }
        Ok(Network {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_transform,
            params,
            offsets,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output_transform
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let n = self.layer_sizes[l] * self.layer_sizes[l + 1];
        self.offsets[l]..self.offsets[l] + n
    }

    fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.weight_range(l).end;
        start..start + self.layer_sizes[l + 1]
    }

    /// Weights of layer `l` as an `out x in` view.
    pub fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        self.view_weights(&self.params, l)
    }

    pub fn biases(&self, l: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[self.bias_range(l)])
    }

    /// Interprets a flat buffer with this network's layout (e.g. a gradient) as
    /// the weight block of layer `l`.
    pub fn view_weights<'a>(&self, flat: &'a [f64], l: usize) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.layer_sizes[l + 1], self.layer_sizes[l]), &flat[self.weight_range(l)])
            .expect("layout is consistent by construction")
    }

    pub fn view_biases<'a>(&self, flat: &'a [f64], l: usize) -> ArrayView1<'a, f64> {
        ArrayView1::from(&flat[self.bias_range(l)])
    }

    fn activation_for(&self, l: usize) -> Box<dyn Fn(f64) -> (f64, f64, f64)> {
        if l + 1 == self.n_layers() {
            let t = self.output_transform;
            Box::new(move |z| t.eval(z))
        } else {
            let a = self.hidden_activation;
            Box::new(move |z| a.eval(z))
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(x)?.row(0).to_vec())
    }

    /// Row-wise forward pass over a `B x input_dim` batch.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.eval_batch(x, None)?.values)
    }

    /// Forward pass that records what `backward` needs. With `time_index`, the
    /// derivative of every output with respect to that input coordinate is
    /// propagated alongside the values.
    pub fn eval_batch(&self, x: ArrayView2<f64>, time_index: Option<usize>) -> Result<BatchEval> {
        self.check_input(x.ncols())?;
        if let Some(t) = time_index {
            if t >= self.input_dim() {
                return Err(Error::InvalidArgument(format!(
                    "time index {t} out of range for input dim {}",
                    self.input_dim()
                )));
            }
        }
        let b = x.nrows();
        let tangent = time_index.is_some();
        let rows = if tangent { 2 * b } else { b };

        let mut s = Array2::<f64>::zeros((rows, self.input_dim()));
        s.slice_mut(s![..b, ..]).assign(&x);
        if let Some(t) = time_index {
            for i in 0..b {
                s[[b + i, t]] = 1.0;
            }
        }

        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let mut z = s.dot(&self.weights(l).t());
            if !z.is_standard_layout() {
                z = z.as_standard_layout().into_owned();
            }
            let bias = self.biases(l);
            z.slice_mut(s![..b, ..]).rows_mut().into_iter().for_each(|mut row| row += &bias);
            let act = self.activation_for(l);
            let out = z.ncols();
            let mut next = Array2::<f64>::zeros((rows, out));
            {
                let zs = z.as_slice().expect("standard layout");
                let ns = next.as_slice_mut().expect("standard layout");
                for idx in 0..b * out {
                    let (v, d1, _) = act(zs[idx]);
                    ns[idx] = v;
                    if tangent {
                        ns[b * out + idx] = d1 * zs[b * out + idx];
                    }
                }
            }
            inputs.push(s);
            pre.push(z);
            s = next;
        }

        let (values, tangents) = if tangent {
            (s.slice(s![..b, ..]).to_owned(), Some(s.slice(s![b.., ..]).to_owned()))
        } else {
            (s, None)
        };
        Ok(BatchEval {
            values,
            tangents,
            batch: b,
            inputs,
            pre,
        })
    }

    /// Gradient of `sum(value_grad * values) + sum(tangent_grad * tangents)` with
    /// respect to every parameter, in the flat parameter layout.
    pub fn backward(
        &self,
        eval: &BatchEval,
        value_grad: ArrayView2<f64>,
        tangent_grad: Option<ArrayView2<f64>>,
    ) -> Result<Vec<f64>> {
        Ok(self.backward_impl(eval, value_grad, tangent_grad, false)?.0)
    }

    fn backward_impl(
        &self,
        eval: &BatchEval,
        value_grad: ArrayView2<f64>,
        tangent_grad: Option<ArrayView2<f64>>,
        want_input_grad: bool,
    ) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
        let b = eval.batch;
        let out = self.output_dim();
        let tangent = eval.tangents.is_some();
        if value_grad.dim() != (b, out) {
            return Err(Error::DimensionMismatch {
                what: "upstream value gradient",
                expected: b * out,
                actual: value_grad.len(),
            });
        }
        if tangent_grad.is_some() && !tangent {
            return Err(Error::InvalidArgument(
                "tangent gradient given but the evaluation did not track a time input".into(),
            ));
        }
        if let Some(tg) = tangent_grad {
            if tg.dim() != (b, out) {
                return Err(Error::DimensionMismatch {
                    what: "upstream tangent gradient",
                    expected: b * out,
                    actual: tg.len(),
                });
            }
        }
        let rows = if tangent { 2 * b } else { b };
        let last = self.n_layers() - 1;

        // Adjoints of the stacked pre-activations of the output layer.
        let mut g = Array2::<f64>::zeros((rows, out));
        {
            let z = &eval.pre[last];
            for i in 0..b {
                for j in 0..out {
                    let (_, d1, d2) = self.output_transform.eval(z[[i, j]]);
                    let mut gz = value_grad[[i, j]] * d1;
                    if tangent {
                        let gt = tangent_grad.map_or(0.0, |tg| tg[[i, j]]);
                        gz += gt * d2 * z[[b + i, j]];
                        g[[b + i, j]] = gt * d1;
                    }
                    g[[i, j]] = gz;
                }
            }
        }

        let mut grads = vec![0.0; self.num_params()];
        let mut input_grad = None;
        for l in (0..self.n_layers()).rev() {
            let dw = g.t().dot(&eval.inputs[l]);
            grads[self.weight_range(l)].copy_from_slice(dw.as_standard_layout().as_slice().expect("standard layout"));
            let db = g.slice(s![..b, ..]).sum_axis(Axis(0));
            grads[self.bias_range(l)].copy_from_slice(db.as_slice().expect("contiguous"));

            if l == 0 && !want_input_grad {
                break;
            }
            let ds = g.dot(&self.weights(l));
            if l == 0 {
                input_grad = Some(ds.slice(s![..b, ..]).to_owned());
                break;
            }
            let ds = ds.as_standard_layout();
            let z = &eval.pre[l - 1];
            let width = z.ncols();
            let mut next = Array2::<f64>::zeros((rows, width));
            {
                let zs = z.as_slice().expect("standard layout");
                let dss = ds.as_slice().expect("standard layout");
                let ns = next.as_slice_mut().expect("standard layout");
                for idx in 0..b * width {
                    let (_, d1, d2) = self.hidden_activation.eval(zs[idx]);
                    if tangent {
                        let t_idx = b * width + idx;
                        ns[idx] = dss[idx] * d1 + dss[t_idx] * d2 * zs[t_idx];
                        ns[t_idx] = dss[t_idx] * d1;
                    } else {
                        ns[idx] = dss[idx] * d1;
                    }
                }
            }
            g = next;
        }
        Ok((grads, input_grad))
    }

    /// Exact gradient of `upstream . forward(input)` with respect to every parameter.
    pub fn grad_params(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "upstream gradient",
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let eval = self.eval_batch(x, None)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        self.backward(&eval, up, None)
    }

    /// Reverse-mode gradient of a scalar output with respect to the input vector.
    pub fn input_gradient(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.require_scalar_output()?;
        self.check_input(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let eval = self.eval_batch(x, None)?;
        let one = Array2::from_elem((1, 1), 1.0);
        let (_, ig) = self.backward_impl(&eval, one.view(), None, true)?;
        Ok(ig.expect("requested").row(0).to_vec())
    }

    fn require_scalar_output(&self) -> Result<()> {
        if self.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                what: "scalar network output",
                expected: 1,
                actual: self.output_dim(),
            });
        }
        Ok(())
    }

    /// d output / d input[time_index] by dual-number propagation.
    pub fn dvalue_dtime(&self, input: &[f64], time_index: usize) -> Result<f64> {
        self.require_scalar_output()?;
        self.check_input(input.len())?;
        if time_index >= input.len() {
            return Err(Error::InvalidArgument(format!(
                "time index {time_index} out of range for input dim {}",
                input.len()
            )));
        }
        let mut a: Vec<Dual> = input
            .iter()
            .enumerate()
            .map(|(i, &x)| Dual {
                re: x,
                eps: if i == time_index { 1.0 } else { 0.0 },
            })
            .collect();
        for l in 0..self.n_layers() {
            let w = self.weights(l);
            let bias = self.biases(l);
            let act = self.activation_for(l);
            a = w
                .rows()
                .into_iter()
                .zip(bias.iter())
                .map(|(row, &bj)| {
                    let z = row.iter().zip(&a).fold(Dual { re: bj, eps: 0.0 }, |acc, (&wij, ai)| Dual {
                        re: acc.re + wij * ai.re,
                        eps: acc.eps + wij * ai.eps,
                    });
                    let (v, d1, _) = act(z.re);
                    Dual { re: v, eps: d1 * z.eps }
                })
                .collect();
        }
        Ok(a[0].eps)
    }
}

#[derive(Clone, Copy, Debug)]
struct Dual {
    re: f64,
    eps: f64,
}

/// Result of `Network::eval_batch`; keeps the per-layer caches for `backward`.
#[derive(Clone, Debug)]
pub struct BatchEval {
    pub values: Array2<f64>,
    /// d values / d input[time_index], when a time index was tracked.
    pub tangents: Option<Array2<f64>>,
    batch: usize,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// On-disk model format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_transform: OutputTransform,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&Network> for NetworkRecord {
    fn from(net: &Network) -> Self {
        let n = net.n_layers();
        NetworkRecord {
            layer_sizes: net.layer_sizes.clone(),
            hidden_activation: net.hidden_activation,
            output_transform: net.output_transform,
            weights: (0..n).map(|l| net.params[net.weight_range(l)].to_vec()).collect(),
            biases: (0..n).map(|l| net.params[net.bias_range(l)].to_vec()).collect(),
        }
    }
}

impl TryFrom<NetworkRecord> for Network {
    type Error = Error;
    fn try_from(r: NetworkRecord) -> Result<Self> {
        Network::from_parts(&r.layer_sizes, r.hidden_activation, r.output_transform, &r.weights, &r.biases)
    }
}

impl Network {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&NetworkRecord::from(self)).map_err(|e| Error::json("network", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: NetworkRecord = serde_json::from_str(text).map_err(|e| Error::json("network", e))?;
        Network::try_from(rec)
    }
}

/// Adam moments and hyperparameters for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            what: "adam parameters/gradients/moments",
            expected: params.len(),
            actual: if grads.len() != params.len() { grads.len() } else { state.m.len() },
        });
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powf(t);
    let c2 = 1.0 - b2.powf(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream_rng(seed, 9);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Network::init(&[3, 2, 1], Activation::Tanh, OutputTransform::Identity, 0).unwrap();
        let b = Network::init(&[3, 2, 1], Activation::Tanh, OutputTransform::Identity, 0).unwrap();
        assert_eq!(a, b);
        let net = Network::init(&[7, 16, 5, 1], Activation::Tanh, OutputTransform::Identity, 4).unwrap();
        for l in 0..net.n_layers() {
            let bound = glorot_bound(net.layer_sizes()[l], net.layer_sizes()[l + 1]);
            assert!(net.weights(l).iter().all(|w| w.abs() <= bound));
            assert!(net.biases(l).iter().all(|&b| b == 0.0));
        }
        assert!(Network::init(&[3], Activation::Tanh, OutputTransform::Identity, 0).is_err());
        assert!(Network::init(&[3, 0, 1], Activation::Tanh, OutputTransform::Identity, 0).is_err());
    }

    fn zeroed(sizes: &[usize], out: OutputTransform) -> Network {
        let mut net = Network::init(sizes, Activation::Tanh, out, 0).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        net
    }

    #[test]
    fn zero_network_outputs() {
        let id = zeroed(&[4, 3, 1], OutputTransform::Identity);
        assert_eq!(id.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0]);
        let sp = zeroed(&[4, 3, 1], OutputTransform::SoftplusPlusEpsilon);
        let y = sp.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap()[0];
        assert!((y - (2f64.ln() + 1e-6)).abs() < 1e-15);
        assert!(id.forward(&[1.0]).is_err());
    }

    #[test]
    fn single_linear_layer_gradients() {
        let net = Network::from_parts(
            &[3, 1],
            Activation::Tanh,
            OutputTransform::Identity,
            &[vec![0.5, -1.0, 2.0]],
            &[vec![0.25]],
        )
        .unwrap();
        let x = [0.3, -0.7, 1.1];
        let g = net.grad_params(&x, &[1.0]).unwrap();
        assert_eq!(&g[..3], &x);
        assert_eq!(g[3], 1.0);
        assert!(net.grad_params(&x, &[0.0]).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(net.dvalue_dtime(&x, 2).unwrap(), 2.0);
        assert!(net.dvalue_dtime(&x, 3).is_err());
    }

    #[test]
    fn softplus_output_stays_positive() {
        let net = Network::init(&[2, 8, 1], Activation::Softplus, OutputTransform::SoftplusPlusEpsilon, 1).unwrap();
        for x in [-1e3, -1e6, -1e12] {
            let y = net.forward(&[x, -x]).unwrap()[0];
            assert!(y > 0.0 && y >= 0.999e-6, "{y}");
        }
    }

    #[test]
    fn forward_and_reverse_time_derivatives_agree() {
        for act in Activation::ALL {
            let net = Network::init(&[5, 6, 6, 1], act, OutputTransform::SoftplusPlusEpsilon, 3).unwrap();
            let x = random_input(5, 2);
            let ig = net.input_gradient(&x).unwrap();
            for t in 0..5 {
                let fwd = net.dvalue_dtime(&x, t).unwrap();
                assert!((fwd - ig[t]).abs() <= 1e-10 * (1.0 + fwd.abs()));
            }
        }
    }

    #[test]
    fn batched_tangent_matches_dual_path() {
        let net = Network::init(&[4, 7, 7, 1], Activation::Tanh, OutputTransform::Identity, 8).unwrap();
        let rows: Vec<Vec<f64>> = (0..5).map(|k| random_input(4, 100 + k)).collect();
        let flat: Vec<f64> = rows.concat();
        let x = ArrayView2::from_shape((5, 4), &flat).unwrap();
        let eval = net.eval_batch(x, Some(3)).unwrap();
        let tangents = eval.tangents.as_ref().unwrap();
        for (i, r) in rows.iter().enumerate() {
            assert!((eval.values[[i, 0]] - net.forward(r).unwrap()[0]).abs() < 1e-14);
            assert!((tangents[[i, 0]] - net.dvalue_dtime(r, 3).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let net = Network::init(&[3, 5, 2], Activation::Sigmoid, OutputTransform::SoftplusPlusEpsilon, 77).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut st = AdamState::new(3, 0.1);
        adam_step(&mut p, &[0.0; 3], &mut st).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step_count(), 1);
        assert!(adam_step(&mut p, &[0.0; 2], &mut st).is_err());
    }

    #[test]
    fn adam_on_quadratic() {
        // f(p) = p^2, p0 = 1, lr = 0.1: g = 2, m_hat = 2, v_hat = 4, step = 0.1 * 2 / (2 + 1e-8)
        let mut p = vec![1.0];
        let mut st = AdamState::new(1, 0.1);
        adam_step(&mut p, &[2.0], &mut st).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - 0.9).abs() < 1e-6);
        for _ in 1..200 {
            let g = 2.0 * p[0];
            adam_step(&mut p, &[g], &mut st).unwrap();
        }
        assert!(p[0].abs() < 0.05, "{}", p[0]);
    }
}
