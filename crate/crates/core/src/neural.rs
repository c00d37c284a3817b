//! Feed-forward perceptrons trained by minibatch SGD with momentum.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_width, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    #[default]
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation value `a`.
    #[inline]
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            _ => Err(Error::InvalidInput(format!("unknown activation {s:?}"))),
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

/// Output unit: identity for regression, logistic for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Linear,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `(y_hat - y)^2`
    SquaredError,
    /// `-y ln y_hat - (1 - y) ln(1 - y_hat)`
    CrossEntropy,
}

impl Loss {
    fn value(self, out: f64, y: f64) -> f64 {
        match self {
            Loss::SquaredError => (out - y).powi(2),
            Loss::CrossEntropy => {
                let p = out.clamp(1e-15, 1.0 - 1e-15);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub activation: Activation,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 1,
            hidden_units: 10,
            activation: Activation::Tanh,
            max_epochs: 100,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.hidden_units == 0 {
            return Err(Error::InvalidInput("hidden layers and units must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Dense layer, weights stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(w, b)| b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()),
        );
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub head: Head,
}

/// Same shape as the model; one partial derivative per parameter.
pub type Gradients = Vec<Layer>;

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn init_mlp(config: &MlpConfig, input_width: usize, head: Head) -> Result<MlpModel> {
    config.validate()?;
    if input_width == 0 {
        return Err(Error::InvalidInput("input width must be positive".into()));
    }
    let mut r = rng::seeded(config.seed);
    let mut dims = vec![input_width];
    dims.extend(std::iter::repeat_n(config.hidden_units, config.hidden_layers));
    dims.push(1);
    let layers = dims
        .windows(2)
        .map(|w| {
            let limit = glorot_limit(w[0], w[1]);
            let mut layer = Layer::zeros(w[0], w[1]);
            for v in &mut layer.weights {
                *v = r.random_range(-limit..limit);
            }
            layer
        })
        .collect();
    Ok(MlpModel { layers, activation: config.activation, head })
}

impl MlpModel {
    /// Builds a model from explicit layers, checking the dimension chain.
    pub fn from_layers(layers: Vec<Layer>, activation: Activation, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("no layers".into()));
        }
        for l in &layers {
            if l.inputs == 0 || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::InvalidInput("layer shape inconsistent".into()));
            }
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::InvalidInput("layer dimensions do not chain".into()));
            }
        }
        if layers.last().map(|l| l.outputs) != Some(1) {
            return Err(Error::InvalidInput("output layer must have one unit".into()));
        }
        Ok(Self { layers, activation, head })
    }

    pub fn width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params().copied()).collect()
    }

    /// Activations of every layer, input first; the last entry holds the
    /// head output.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(&acts[k], &mut z);
            if k < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            } else if self.head == Head::Sigmoid {
                z[0] = sigmoid(z[0]);
            }
            acts.push(z);
        }
        acts
    }

    fn output_unchecked(&self, x: &[f64]) -> f64 {
        self.trace(x).last().expect("output layer")[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_width(self.width(), x.len())?;
        Ok(self.output_unchecked(x))
    }

    /// Classification: success iff the sigmoid output exceeds one half.
    pub fn predict_class(&self, x: &[f64]) -> Result<bool> {
        Ok(self.forward(x)? > 0.5)
    }

    /// Mean loss over the rows of `x`.
    pub fn loss(&self, x: &Matrix, y: &[f64], loss: Loss) -> Result<f64> {
        check_width(self.width(), x.cols())?;
        if x.rows() == 0 {
            return Err(Error::Empty("batch"));
        }
        let total: f64 = x.iter_rows().zip(y).map(|(row, &t)| loss.value(self.output_unchecked(row), t)).sum();
        Ok(total / x.rows() as f64)
    }

    fn zero_gradients(&self) -> Gradients {
        self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect()
    }

    /// Adds the per-sample gradient into `grads`; returns the sample loss.
    fn accumulate(&self, x: &[f64], y: f64, loss: Loss, grads: &mut Gradients) -> f64 {
        let acts = self.trace(x);
        let out = acts.last().expect("output")[0];
        // dL/dz at the output pre-activation
        let head_slope = match self.head {
            Head::Linear => 1.0,
            Head::Sigmoid => out * (1.0 - out),
        };
        let d_out = match (self.head, loss) {
            (Head::Sigmoid, Loss::CrossEntropy) => out - y,
            (_, Loss::SquaredError) => 2.0 * (out - y) * head_slope,
            (Head::Linear, Loss::CrossEntropy) => (out - y) / (out * (1.0 - out)),
        };
        let mut delta = vec![d_out];
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &acts[k];
            let g = &mut grads[k];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if k == 0 {
                break;
            }
            let mut next = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, w) in next.iter_mut().zip(w) {
                    *n += d * w;
                }
            }
            for (n, a) in next.iter_mut().zip(input) {
                *n *= self.activation.slope(*a);
            }
            delta = next;
        }
        loss.value(out, y)
    }

    /// Analytic gradient of the mean loss over the rows of `x`.
    pub fn backprop_grad(&self, x: &Matrix, y: &[f64], loss: Loss) -> Result<Gradients> {
        check_width(self.width(), x.cols())?;
        if x.rows() == 0 {
            return Err(Error::Empty("batch"));
        }
        let mut grads = self.zero_gradients();
        for (row, &t) in x.iter_rows().zip(y) {
            self.accumulate(row, t, loss, &mut grads);
        }
        let scale = 1.0 / x.rows() as f64;
        for g in &mut grads {
            g.params_mut().for_each(|v| *v *= scale);
        }
        Ok(grads)
    }
}

/// Largest relative discrepancy between `analytic` and central differences
/// of the mean loss with step `h`.
pub fn grad_check_against(
    model: &MlpModel,
    x: &Matrix,
    y: &[f64],
    loss: Loss,
    analytic: &Gradients,
    h: f64,
) -> Result<f64> {
    model.loss(x, y, loss)?;
    let flat: Vec<f64> = analytic.iter().flat_map(|l| l.params().copied()).collect();
    if flat.len() != model.n_params() {
        return Err(Error::InvalidInput("gradient shape differs from model".into()));
    }
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for li in 0..probe.layers.len() {
        let n = probe.layers[li].weights.len() + probe.layers[li].bias.len();
        for pi in 0..n {
            let original = *probe.layers[li].params_mut().nth(pi).expect("param");
            *probe.layers[li].params_mut().nth(pi).expect("param") = original + h;
            let plus = probe.loss(x, y, loss)?;
            *probe.layers[li].params_mut().nth(pi).expect("param") = original - h;
            let minus = probe.loss(x, y, loss)?;
            *probe.layers[li].params_mut().nth(pi).expect("param") = original;
            let numeric = (plus - minus) / (2.0 * h);
            let a = flat[k];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
            k += 1;
        }
    }
    Ok(worst)
}

pub fn grad_check(model: &MlpModel, x: &Matrix, y: &[f64], loss: Loss) -> Result<f64> {
    let analytic = model.backprop_grad(x, y, loss)?;
    grad_check_against(model, x, y, loss, &analytic, 1e-5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFit {
    pub model: MlpModel,
    /// Mean training loss over the full set after each epoch.
    pub losses: Vec<f64>,
}

/// Epoch-shuffled minibatch SGD with classical momentum.
pub fn train_sgd(mut model: MlpModel, x: &Matrix, y: &[f64], config: &MlpConfig, loss: Loss) -> Result<MlpFit> {
    config.validate()?;
    check_width(model.width(), x.cols())?;
    if x.rows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("target count differs from row count".into()));
    }
    // a separate stream so shuffling does not depend on how init drew
    let mut r = rng::seeded(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut velocity = model.zero_gradients();
    let mut losses = Vec::with_capacity(config.max_epochs);
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut r);
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_gradients();
            for &i in batch {
                model.accumulate(x.row(i), y[i], loss, &mut grads);
            }
            let step = config.learning_rate / batch.len() as f64;
            for ((layer, v), g) in model.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                for ((p, v), g) in layer.params_mut().zip(v.params_mut()).zip(g.params()) {
                    *v = config.momentum * *v - step * g;
                    *p += *v;
                }
            }
        }
        let l = model.loss(x, y, loss)?;
        if !l.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1, loss: l });
        }
        losses.push(l);
    }
    Ok(MlpFit { model, losses })
}

/// Initialises and trains in one go. Classification uses a sigmoid head
/// with cross-entropy on 0/1 targets; regression a linear head with
/// squared error.
pub fn fit_mlp(x: &Matrix, y: &[f64], config: &MlpConfig, classification: bool) -> Result<MlpFit> {
    let (head, loss) =
        if classification { (Head::Sigmoid, Loss::CrossEntropy) } else { (Head::Linear, Loss::SquaredError) };
    let model = init_mlp(config, x.cols(), head)?;
    train_sgd(model, x, y, config, loss)
}

pub fn write_loss_csv<W: Write>(mut out: W, losses: &[f64]) -> Result<()> {
    writeln!(out, "epoch,loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(out, "{},{l}", i + 1)?;
    }
    Ok(())
}
