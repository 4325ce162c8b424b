//! Verb-score regressor: a small feedforward network over precomputed video
//! features, trained with softmax cross-entropy for single-label schemes and
//! sigmoid binary cross-entropy for multi-label schemes.
//!
//! Hidden layers use `tanh`. Both losses are evaluated in logit space
//! (log-sum-exp and softplus) so they stay finite for any finite logits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::LabelBundle;
use crate::error::{read_to_string, write_file, Error, Result};
use crate::scalar::{sigmoid, softmax, softplus, Scalar};
use crate::vocab::VerbVocabulary;

/// Labelling scheme a model is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    SV,
    VN,
    MV,
    SAMV,
}

impl Scheme {
    pub fn loss(self) -> LossKind {
        match self {
            Scheme::SV | Scheme::VN => LossKind::SingleLabel,
            Scheme::MV | Scheme::SAMV => LossKind::MultiLabel,
        }
    }

    pub fn head(self) -> Head {
        self.loss().head()
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::SV => "SV",
            Scheme::VN => "VN",
            Scheme::MV => "MV",
            Scheme::SAMV => "SAMV",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SV" => Ok(Scheme::SV),
            "VN" => Ok(Scheme::VN),
            "MV" => Ok(Scheme::MV),
            "SAMV" => Ok(Scheme::SAMV),
            _ => Err(Error::Parse(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Softmax cross-entropy against a one-hot target.
    SingleLabel,
    /// Sigmoid binary cross-entropy against targets in `[0, 1]`.
    MultiLabel,
}

impl LossKind {
    pub fn head(self) -> Head {
        match self {
            LossKind::SingleLabel => Head::Softmax,
            LossKind::MultiLabel => Head::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub video_id: String,
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(video_id: impl Into<String>, values: Vec<T>) -> Result<Self> {
        let video_id = video_id.into();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature vector of `{video_id}`")));
        }
        Ok(Self { video_id, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub logits: Vec<T>,
    pub scores: Vec<T>,
    pub head: Head,
}

impl<T: Scalar> Prediction<T> {
    pub fn from_logits(logits: Vec<T>, head: Head) -> Self {
        let scores = match head {
            Head::Softmax => softmax(&logits),
            Head::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        Self {
            logits,
            scores,
            head,
        }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }
}

/// Fully connected layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    /// Uniform in `±1/sqrt(inputs)` for weights and biases.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || T::from_f64_lossy(rng.random_range(-bound..=bound));
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    fn check(&self) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(Error::Invalid(format!(
                "layer {}x{} has {} weights and {} biases",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameter".into()));
        }
        Ok(())
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// The verb-score map: `tanh` hidden layers followed by a linear output layer
/// whose scores are read through a softmax or sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
    head: Head,
}

/// Parameter-shaped gradient of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn flatten(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// Output-layer bias gradient: the batch mean of the logit gradients.
    pub fn output_bias(&self) -> &[T] {
        &self.layers.last().expect("at least one layer").bias
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn from_layers(layers: Vec<Dense<T>>, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layer list"));
        }
        for l in &layers {
            l.check()?;
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs,
                    got: pair[1].inputs,
                });
            }
        }
        Ok(Self { layers, head })
    }

    pub fn random<R: Rng>(
        input: usize,
        hidden: &[usize],
        output: usize,
        head: Head,
        rng: &mut R,
    ) -> Self {
        let sizes: Vec<usize> = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(output))
            .collect();
        let layers = sizes
            .windows(2)
            .map(|w| Dense::random(w[0], w[1], rng))
            .collect();
        Self { layers, head }
    }

    pub fn zeros(input: usize, hidden: &[usize], output: usize, head: Head) -> Self {
        let sizes: Vec<usize> = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(output))
            .collect();
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, head }
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Parameters in layer order, weights before biases.
    pub fn flatten(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn param_mut(&mut self, mut i: usize) -> &mut T {
        for l in &mut self.layers {
            if i < l.weights.len() {
                return &mut l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return &mut l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Pre-activations of every layer; the last entry is the logit vector.
    fn activations(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(acts.last().expect("nonempty"));
            if k + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let logits = self.activations(x).pop().expect("nonempty");
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("logit".into()));
        }
        Ok(logits)
    }

    pub fn forward(&self, x: &[T]) -> Result<Prediction<T>> {
        Ok(Prediction::from_logits(self.logits(x)?, self.head))
    }

    pub fn predict(&self, x: &FeatureVector<T>) -> Result<Prediction<T>> {
        self.forward(&x.values)
    }

    /// Mean loss over a batch and its analytic gradient (backpropagation).
    pub fn gradient(&self, batch: &[(&[T], &[T])], loss: LossKind) -> Result<(T, Gradients<T>)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut grads = Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        };
        let mut total = T::zero();
        for &(x, target) in batch {
            if x.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            let acts = self.activations(x);
            let logits = acts.last().expect("nonempty");
            total += loss_value(loss, logits, target)?;
            let mut delta = output_gradient(loss, logits, target)?;
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let input = &acts[k];
                let g = &mut grads.layers[k];
                for (o, &d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &xi) in row.iter_mut().zip(input) {
                        *gw += d * xi;
                    }
                }
                if k > 0 {
                    let mut back = vec![T::zero(); layer.inputs];
                    for (o, &d) in delta.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (b, &w) in back.iter_mut().zip(row) {
                            *b += w * d;
                        }
                    }
                    // input[i] = tanh(pre), derivative 1 - tanh²
                    for (b, &a) in back.iter_mut().zip(input) {
                        *b *= T::one() - a * a;
                    }
                    delta = back;
                }
            }
        }
        let n = T::from_usize_lossy(batch.len());
        for g in &mut grads.layers {
            g.weights.iter_mut().chain(g.bias.iter_mut()).for_each(|v| *v = *v / n);
        }
        Ok((total / n, grads))
    }

    /// Mean loss over a dataset without computing gradients.
    pub fn mean_loss(&self, batch: &[(&[T], &[T])], loss: LossKind) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut total = T::zero();
        for &(x, t) in batch {
            total += loss_value(loss, &self.logits(x)?, t)?;
        }
        Ok(total / T::from_usize_lossy(batch.len()))
    }
}

fn check_width<T>(logits: &[T], target: &[T]) -> Result<()> {
    if logits.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            got: target.len(),
        });
    }
    Ok(())
}

fn one_hot_class<T: Scalar>(target: &[T]) -> Result<usize> {
    let mut class = None;
    for (j, &t) in target.iter().enumerate() {
        if t == T::one() && class.is_none() {
            class = Some(j);
        } else if t != T::zero() {
            return Err(Error::InvalidTarget("target is not one-hot".into()));
        }
    }
    class.ok_or_else(|| Error::InvalidTarget("target is not one-hot".into()))
}

fn check_unit_interval<T: Scalar>(target: &[T]) -> Result<()> {
    if target.iter().all(|&t| t >= T::zero() && t <= T::one()) {
        Ok(())
    } else {
        Err(Error::InvalidTarget("multi-label target outside [0, 1]".into()))
    }
}

/// Softmax cross-entropy `-Σ_j t_j log softmax(z)_j` for a one-hot target.
pub fn loss_sl<T: Scalar>(logits: &[T], target: &[T]) -> Result<T> {
    check_width(logits, target)?;
    let class = one_hot_class(target)?;
    // (max - z_c) + ln(1 + Σ_{j≠argmax} e^{z_j - max}) keeps precision when
    // the target class dominates.
    let top = crate::scalar::argsort_desc(logits)[0];
    let max = logits[top];
    let rest: T = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != top)
        .map(|(_, &z)| (z - max).exp())
        .sum();
    Ok((max - logits[class]) + rest.ln_1p())
}

/// Sigmoid binary cross-entropy `-Σ_j [y_j log S(z_j) + (1-y_j) log(1-S(z_j))]`,
/// computed as `Σ_j softplus(z_j) - y_j z_j`.
pub fn loss_ml<T: Scalar>(logits: &[T], target: &[T]) -> Result<T> {
    check_width(logits, target)?;
    check_unit_interval(target)?;
    Ok(logits
        .iter()
        .zip(target)
        .map(|(&z, &y)| softplus(z) - y * z)
        .sum())
}

pub fn loss_value<T: Scalar>(loss: LossKind, logits: &[T], target: &[T]) -> Result<T> {
    match loss {
        LossKind::SingleLabel => loss_sl(logits, target),
        LossKind::MultiLabel => loss_ml(logits, target),
    }
}

/// Derivative of the per-sample loss with respect to the logits:
/// `softmax(z) - t` or `S(z) - y`.
pub fn output_gradient<T: Scalar>(loss: LossKind, logits: &[T], target: &[T]) -> Result<Vec<T>> {
    check_width(logits, target)?;
    match loss {
        LossKind::SingleLabel => {
            one_hot_class(target)?;
            Ok(softmax(logits)
                .into_iter()
                .zip(target)
                .map(|(p, &t)| p - t)
                .collect())
        }
        LossKind::MultiLabel => {
            check_unit_interval(target)?;
            Ok(logits
                .iter()
                .zip(target)
                .map(|(&z, &y)| sigmoid(z) - y)
                .collect())
        }
    }
}

/// Optimisation settings. The architecture is `hidden` tanh layers between the
/// feature input and the label-width output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Output width for the VN scheme; inferred from the labels when unset.
    #[serde(default)]
    pub vn_classes: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256],
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            vn_classes: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Mlp<T>,
    /// Mean training loss over the full set after each epoch.
    pub epoch_losses: Vec<T>,
}

/// Training target of one bundle under `scheme`, `width` entries wide.
pub fn scheme_target<T: Scalar>(bundle: &LabelBundle, scheme: Scheme, width: usize) -> Result<Vec<T>> {
    let one_hot = |class: usize| -> Result<Vec<T>> {
        if class >= width {
            return Err(Error::VerbIndexOutOfRange { index: class, len: width });
        }
        let mut t = vec![T::zero(); width];
        t[class] = T::one();
        Ok(t)
    };
    let target = match scheme {
        Scheme::SV => one_hot(bundle.sv)?,
        Scheme::VN => one_hot(bundle.vn.ok_or_else(|| {
            Error::InvalidTarget(format!("video `{}` has no VN class", bundle.video_id))
        })?)?,
        Scheme::MV => bundle.mv.to_vec(),
        Scheme::SAMV => bundle.samv.scores(),
    };
    if target.len() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: target.len(),
        });
    }
    Ok(target)
}

/// Trains a fresh network for `scheme` on `(features, labels)` pairs.
pub fn train<T: Scalar>(
    data: &[(FeatureVector<T>, LabelBundle)],
    scheme: Scheme,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let first = data.first().ok_or(Error::Empty("training data"))?;
    let width = match scheme {
        Scheme::VN => match cfg.vn_classes {
            Some(n) => n,
            None => {
                data.iter()
                    .map(|(_, b)| b.vn.map_or(0, |c| c + 1))
                    .max()
                    .unwrap_or(0)
            }
        },
        _ => first.1.samv.len(),
    };
    let inputs: Vec<Vec<T>> = data.iter().map(|(f, _)| f.values.clone()).collect();
    let targets = data
        .iter()
        .map(|(_, b)| scheme_target(b, scheme, width))
        .collect::<Result<Vec<_>>>()?;
    fit(&inputs, &targets, scheme.loss(), cfg)
}

/// Mini-batch gradient descent with optional momentum on raw vectors.
pub fn fit<T: Scalar>(
    inputs: &[Vec<T>],
    targets: &[Vec<T>],
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let dim = inputs[0].len();
    let width = targets[0].len();
    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        if t.len() != width {
            return Err(Error::DimensionMismatch { expected: width, got: t.len() });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Mlp::random(dim, &cfg.hidden, width, loss.head(), &mut rng);
    let mut velocity: Vec<Dense<T>> = model
        .layers
        .iter()
        .map(|l| Dense::zeros(l.inputs, l.outputs))
        .collect();
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let mu = T::from_f64_lossy(cfg.momentum);
    let pairs: Vec<(&[T], &[T])> = inputs
        .iter()
        .zip(targets)
        .map(|(x, t)| (x.as_slice(), t.as_slice()))
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], &[T])> = chunk.iter().map(|&i| pairs[i]).collect();
            let (batch_loss, grads) = model.gradient(&batch, loss)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            for ((layer, vel), g) in model.layers.iter_mut().zip(&mut velocity).zip(&grads.layers) {
                let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                let vels = vel.weights.iter_mut().chain(vel.bias.iter_mut());
                let gs = g.weights.iter().chain(&g.bias);
                for ((p, v), &gi) in params.zip(vels).zip(gs) {
                    *v = mu * *v - lr * gi;
                    *p += *v;
                }
            }
        }
        let epoch_loss = model.mean_loss(&pairs, loss)?;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: loss {epoch_loss}");
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainOutcome { model, epoch_losses })
}

const CHECKPOINT_FORMAT: &str = "verbspace-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model with the metadata needed to use it safely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub scheme: Scheme,
    pub vocab_fingerprint: String,
    pub config: TrainConfig,
    pub model: Mlp<f64>,
}

impl Checkpoint {
    pub fn new<T: Scalar>(
        model: &Mlp<T>,
        scheme: Scheme,
        vocab: &VerbVocabulary,
        config: TrainConfig,
    ) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| Dense {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights.iter().map(|w| w.as_f64()).collect(),
                bias: l.bias.iter().map(|b| b.as_f64()).collect(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scheme,
            vocab_fingerprint: vocab.fingerprint(),
            config,
            model: Mlp {
                layers,
                head: model.head,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_json()?)
    }

    /// Parses a checkpoint and rejects it unless it was written against `vocab`.
    pub fn from_json(text: &str, vocab: &VerbVocabulary) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        vocab.check_fingerprint(&ck.vocab_fingerprint)?;
        let model = Mlp::from_layers(ck.model.layers, ck.model.head)?;
        Ok(Self { model, ..ck })
    }

    pub fn load(path: impl AsRef<Path>, vocab: &VerbVocabulary) -> Result<Self> {
        Self::from_json(&read_to_string(path.as_ref())?, vocab)
    }

    pub fn model<T: Scalar>(&self) -> Mlp<T> {
        Mlp {
            layers: self
                .model
                .layers
                .iter()
                .map(|l| Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&w| T::from_f64_lossy(w)).collect(),
                    bias: l.bias.iter().map(|&b| T::from_f64_lossy(b)).collect(),
                })
                .collect(),
            head: self.model.head,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_gives_neutral_scores() {
        let m = Mlp::<f64>::zeros(3, &[4], 5, Head::Sigmoid);
        let p = m.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(p.logits, vec![0.0; 5]);
        assert_eq!(p.scores, vec![0.5; 5]);
        let m = Mlp::<f64>::zeros(3, &[], 4, Head::Softmax);
        let p = m.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.scores, vec![0.25; 4]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let n = 4;
        let mut layer = Dense::<f64>::zeros(n, n);
        for i in 0..n {
            layer.weights[i * n + i] = 1.0;
        }
        let m = Mlp::from_layers(vec![layer], Head::Sigmoid).unwrap();
        let x = [0.3, -1.2, 4.0, 0.0];
        assert_eq!(m.forward(&x).unwrap().logits, x.to_vec());
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let m = Mlp::<f64>::zeros(3, &[], 2, Head::Sigmoid);
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn from_layers_checks_shapes() {
        let a = Dense::<f64>::zeros(3, 4);
        let b = Dense::<f64>::zeros(5, 2);
        assert!(Mlp::from_layers(vec![a, b], Head::Sigmoid).is_err());
        assert!(Mlp::<f64>::from_layers(vec![], Head::Sigmoid).is_err());
    }

    #[test]
    fn single_label_loss_examples() {
        for n in [2usize, 3, 10] {
            let mut t = vec![0.0; n];
            t[n - 1] = 1.0;
            assert!((loss_sl(&vec![0.0; n], &t).unwrap() - (n as f64).ln()).abs() < 1e-12);
        }
        let l = loss_sl(&[10.0, -10.0], &[1.0, 0.0]).unwrap();
        // ln(1 + e^-20)
        assert!((l - (-20.0f64).exp().ln_1p()).abs() < 1e-22);
        assert!((l - 2.061_153_620_314_380_7e-9).abs() < 1e-22);
        assert!((loss_sl(&[0.0f64, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap() - 1.098_612_288_668_109_8).abs() < 1e-12);
        assert!(loss_sl(&[0.0, 0.0], &[0.5, 0.5]).is_err());
        assert!(loss_sl(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(loss_sl(&[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn multi_label_loss_examples() {
        assert!((loss_ml(&[0.0], &[0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        // term-by-term evaluation of the textbook form
        let (z, y) = ([2.0f64, -1.0], [0.9f64, 0.1]);
        let naive: f64 = z
            .iter()
            .zip(&y)
            .map(|(&z, &y)| {
                let s = 1.0 / (1.0 + (-z).exp());
                -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
            })
            .sum();
        assert!((loss_ml(&z, &y).unwrap() - naive).abs() < 1e-9);
        assert!(loss_ml(&[0.0], &[1.5]).is_err());
        assert!(loss_ml(&[0.0], &[-0.1]).is_err());
        assert!(loss_ml(&[800.0f64, -800.0], &[0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn multi_label_gradient_vanishes_at_target() {
        for &y in &[0.1f64, 0.3, 0.5, 0.77] {
            let z = (y / (1.0 - y)).ln();
            let g = output_gradient(LossKind::MultiLabel, &[z], &[y]).unwrap();
            assert!(g[0].abs() < 1e-12);
            let binary_entropy = -(y * y.ln() + (1.0 - y) * (1.0 - y).ln());
            assert!((loss_ml(&[z], &[y]).unwrap() - binary_entropy).abs() < 1e-12);
            assert!(binary_entropy > 0.0);
        }
    }

    #[test]
    fn single_linear_layer_softmax_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::<f64>::random(2, &[], 3, Head::Softmax, &mut rng);
        let x = [1.0, 0.0];
        let t = [0.0, 1.0, 0.0];
        let (_, g) = m.gradient(&[(&x, &t)], LossKind::SingleLabel).unwrap();
        let p = m.forward(&x).unwrap().scores;
        for j in 0..3 {
            assert!((g.output_bias()[j] - (p[j] - t[j])).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_rejects_mixed_width_batches() {
        let m = Mlp::<f64>::zeros(2, &[], 2, Head::Sigmoid);
        let a = [0.0, 1.0];
        let b = [0.0, 1.0, 2.0];
        assert!(m.gradient(&[(&a, &[0.5, 0.5]), (&b, &[0.5, 0.5])], LossKind::MultiLabel).is_err());
        assert!(m.gradient(&[(&a, &[0.5, 0.5, 0.5])], LossKind::MultiLabel).is_err());
        assert!(m.gradient(&[], LossKind::MultiLabel).is_err());
    }

    #[test]
    fn train_config_validation() {
        let x = vec![vec![0.0]];
        let t = vec![vec![1.0]];
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(matches!(fit::<f64>(&x, &t, LossKind::MultiLabel, &cfg), Err(Error::Config(_))));
        }
        assert!(fit::<f64>(&[], &[], LossKind::MultiLabel, &TrainConfig::default()).is_err());
    }

    #[test]
    fn zero_learning_rate_leaves_initialisation_unchanged() {
        let x = vec![vec![0.5, -0.5], vec![1.0, 2.0]];
        let t = vec![vec![0.2, 0.9], vec![0.7, 0.1]];
        let cfg = TrainConfig { hidden: vec![3], learning_rate: 0.0, epochs: 5, seed: 11, ..Default::default() };
        let out = fit::<f64>(&x, &t, LossKind::MultiLabel, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init = Mlp::<f64>::random(2, &[3], 2, Head::Sigmoid, &mut rng);
        assert_eq!(out.model, init);
    }

    #[test]
    fn scheme_parsing_and_losses() {
        assert_eq!("samv".parse::<Scheme>().unwrap(), Scheme::SAMV);
        assert_eq!(Scheme::SV.loss(), LossKind::SingleLabel);
        assert_eq!(Scheme::MV.head(), Head::Sigmoid);
        assert!("XY".parse::<Scheme>().is_err());
    }

    #[test]
    fn f32_forward_works() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::<f32>::random(3, &[5], 2, Head::Sigmoid, &mut rng);
        let p = m.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!(p.scores.iter().all(|&s| s > 0.0 && s < 1.0));
    }
}
