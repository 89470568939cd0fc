//! Feed-forward classifier trained with Adam.
//!
//! Hidden layers are affine → leaky ReLU → inverted dropout; the output layer
//! is affine → softmax, trained on mean categorical cross-entropy. All
//! arithmetic is `f64`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::spectra::MaterialClass;

/// Lower bound applied to probabilities inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
}

impl MlpArchitecture {
    /// 64-64-32-32 hidden units, five outputs, slope 0.3, dropout 0.25.
    pub fn standard(input_dim: usize) -> Self {
        MlpArchitecture {
            input_dim,
            hidden: vec![64, 64, 32, 32],
            output_dim: MaterialClass::COUNT,
            leaky_slope: 0.3,
            dropout_rate: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_dim == 0 || self.output_dim == 0 {
            return bad("input and output dimensions must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty with positive widths".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope.is_finite()) {
            return bad(format!("leaky slope {} must be non-negative", self.leaky_slope));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_epsilon >= 0.0
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad training configuration {self:?}")))
        }
    }
}

/// One dense layer; `weights` is `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weights: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Trainable parameters. Also used for gradients and Adam moments, which
/// share the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros(arch: &MlpArchitecture) -> Self {
        MlpParams {
            layers: arch
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self, arch: &MlpArchitecture) -> Result<()> {
        let shapes = arch.layer_shapes();
        let ok = shapes.len() == self.layers.len()
            && shapes
                .iter()
                .zip(&self.layers)
                .all(|(&(i, o), l)| l.weights.dim() == (o, i) && l.bias.len() == o);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "parameter shapes do not match architecture".into(),
            ))
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

/// Uniform Glorot weights, zero biases.
pub fn init_params(arch: &MlpArchitecture, seed_value: u64) -> Result<MlpParams> {
    arch.validate()?;
    let mut rng = seed::derived_rng(seed_value, &[STREAM_INIT]);
    let layers = arch
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit));
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (the batch itself first).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pub pre_activations: Vec<Array2<f64>>,
    /// Dropout multipliers (0 or 1/(1-rate)) per hidden layer, train mode only.
    pub masks: Vec<Option<Array2<f64>>>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `batch × output_dim` softmax probabilities.
    pub probs: Array2<f64>,
    pub cache: ForwardCache,
}

fn leaky(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

fn affine(x: &ArrayView2<f64>, layer: &Layer) -> Array2<f64> {
    let mut z = x.dot(&layer.weights.t());
    z += &layer.bias;
    z
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Runs a batch (`rows × input_dim`) through the network. Train mode needs
/// an rng whenever dropout is active; one mask per hidden layer is drawn.
pub fn forward(
    params: &MlpParams,
    arch: &MlpArchitecture,
    x: ArrayView2<f64>,
    mode: Mode,
    mut rng: Option<&mut Rng>,
) -> Result<ForwardPass> {
    if x.ncols() != arch.input_dim {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim,
            actual: x.ncols(),
        });
    }
    params.check_shapes(arch)?;
    let dropout = mode == Mode::Train && arch.dropout_rate > 0.0;
    let keep = 1.0 - arch.dropout_rate;
    let (hidden_layers, output_layer) = params.layers.split_at(params.layers.len() - 1);

    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(params.layers.len()),
        pre_activations: Vec::with_capacity(hidden_layers.len()),
        masks: Vec::with_capacity(hidden_layers.len()),
    };
    let mut h = x.to_owned();
    for layer in hidden_layers {
        let z = affine(&h.view(), layer);
        let mut a = z.mapv(|v| leaky(v, arch.leaky_slope));
        let mask = if dropout {
            let rng = rng
                .as_deref_mut()
                .ok_or_else(|| Error::InvalidConfig("train mode with dropout needs an rng".into()))?;
            let m = Array2::from_shape_simple_fn(a.dim(), || {
                if rng.random::<f64>() < arch.dropout_rate {
                    0.0
                } else {
                    1.0 / keep
                }
            });
            a *= &m;
            Some(m)
        } else {
            None
        };
        cache.inputs.push(h);
        cache.pre_activations.push(z);
        cache.masks.push(mask);
        h = a;
    }
    let mut probs = affine(&h.view(), &output_layer[0]);
    cache.inputs.push(h);
    softmax_rows(&mut probs);
    Ok(ForwardPass { probs, cache })
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            actual: labels.len(),
        });
    }
    if rows == 0 {
        return Err(Error::InvalidData("empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidData(format!("label {bad} out of range 0..{classes}")));
    }
    Ok(())
}

pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -probs[[r, l]].max(PROB_FLOOR).ln())
        .sum();
    total / labels.len() as f64
}

/// Mean cross-entropy over the batch and its gradient by backpropagation.
pub fn loss_and_grads(
    params: &MlpParams,
    arch: &MlpArchitecture,
    x: ArrayView2<f64>,
    labels: &[usize],
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Result<(f64, MlpParams)> {
    check_labels(labels, x.nrows(), arch.output_dim)?;
    let pass = forward(params, arch, x, mode, rng)?;
    let loss = cross_entropy(&pass.probs, labels);

    let rows = labels.len() as f64;
    let mut delta = pass.probs;
    for (r, &l) in labels.iter().enumerate() {
        delta[[r, l]] -= 1.0;
    }
    delta.mapv_inplace(|v| v / rows);

    let n_layers = params.layers.len();
    let mut grads: Vec<Option<Layer>> = vec![None; n_layers];
    for li in (0..n_layers).rev() {
        let input = &pass.cache.inputs[li];
        grads[li] = Some(Layer {
            weights: delta.t().dot(input),
            bias: delta.sum_axis(Axis(0)),
        });
        if li == 0 {
            break;
        }
        // Back through the previous hidden layer's dropout and activation.
        let mut upstream = delta.dot(&params.layers[li].weights);
        if let Some(mask) = &pass.cache.masks[li - 1] {
            upstream *= mask;
        }
        Zip::from(&mut upstream)
            .and(&pass.cache.pre_activations[li - 1])
            .for_each(|g, &z| {
                if z < 0.0 {
                    *g *= arch.leaky_slope;
                }
            });
        delta = upstream;
    }
    let layers = grads.into_iter().map(|g| g.expect("every layer visited")).collect();
    Ok((loss, MlpParams { layers }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(arch: &MlpArchitecture) -> Self {
        AdamState {
            m: MlpParams::zeros(arch),
            v: MlpParams::zeros(arch),
            t: 0,
        }
    }
}

fn adam_update(
    theta: &mut ndarray::ArrayViewMutD<f64>,
    g: &ndarray::ArrayViewD<f64>,
    m: &mut ndarray::ArrayViewMutD<f64>,
    v: &mut ndarray::ArrayViewMutD<f64>,
    cfg: &TrainConfig,
    corr1: f64,
    corr2: f64,
) {
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.adam_epsilon);
    Zip::from(theta).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    });
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::InvalidData("non-finite gradient".into()));
    }
    if grads.layers.len() != params.layers.len() || state.m.layers.len() != params.layers.len() {
        return Err(Error::InvalidConfig("gradient shapes do not match parameters".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let corr1 = 1.0 - cfg.beta1.powi(t);
    let corr2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m.layers)
        .zip(&mut state.v.layers)
    {
        if p.weights.dim() != g.weights.dim() || p.bias.len() != g.bias.len() {
            return Err(Error::InvalidConfig("gradient shapes do not match parameters".into()));
        }
        adam_update(
            &mut p.weights.view_mut().into_dyn(),
            &g.weights.view().into_dyn(),
            &mut m.weights.view_mut().into_dyn(),
            &mut v.weights.view_mut().into_dyn(),
            cfg,
            corr1,
            corr2,
        );
        adam_update(
            &mut p.bias.view_mut().into_dyn(),
            &g.bias.view().into_dyn(),
            &mut m.bias.view_mut().into_dyn(),
            &mut v.bias.view_mut().into_dyn(),
            cfg,
            corr1,
            corr2,
        );
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub architecture: MlpArchitecture,
    pub params: MlpParams,
    pub config: TrainConfig,
    /// Sample-weighted mean training loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch Adam training. Fully determined by `cfg.seed`.
pub fn train(
    features: ArrayView2<f64>,
    labels: &[usize],
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    arch.validate()?;
    cfg.validate()?;
    if features.nrows() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if features.ncols() != arch.input_dim {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim,
            actual: features.ncols(),
        });
    }
    check_labels(labels, features.nrows(), arch.output_dim)?;

    let mut params = init_params(arch, cfg.seed)?;
    let mut state = AdamState::new(arch);
    let mut shuffle_rng = seed::derived_rng(cfg.seed, &[STREAM_SHUFFLE]);
    let mut dropout_rng = seed::derived_rng(cfg.seed, &[STREAM_DROPOUT]);
    let n = features.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = features.select(Axis(0), chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = loss_and_grads(
                &params,
                arch,
                batch.view(),
                &batch_labels,
                Mode::Train,
                Some(&mut dropout_rng),
            )?;
            adam_step(&mut params, &grads, &mut state, cfg)?;
            total += loss * chunk.len() as f64;
        }
        epoch_losses.push(total / n as f64);
    }

    Ok(MlpModel {
        architecture: arch.clone(),
        params,
        config: cfg.clone(),
        epoch_losses,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    /// Class probabilities for every row, eval mode.
    pub fn probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(forward(&self.params, &self.architecture, x, Mode::Eval, None)?.probs)
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let probs = self.probabilities(x)?;
        Ok(probs
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("standard layout")))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MlpModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MlpModelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

pub fn predict(model: &MlpModel, x: &[f64]) -> Result<(MaterialClass, Vec<f64>)> {
    let row = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::InvalidData(e.to_string()))?;
    let probs = model.probabilities(row)?.row(0).to_vec();
    let class = MaterialClass::from_code(argmax(&probs))
        .ok_or_else(|| Error::InvalidData("output dimension exceeds material count".into()))?;
    Ok((class, probs))
}

pub const MLP_MODEL_KIND: &str = "mlp";

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// On-disk layout: weight matrices are row-major, one row per output unit.
#[derive(Serialize, Deserialize)]
struct MlpModelFile {
    model_kind: String,
    architecture: MlpArchitecture,
    train_config: TrainConfig,
    seed: u64,
    layers: Vec<LayerFile>,
    epoch_losses: Vec<f64>,
}

impl From<&MlpModel> for MlpModelFile {
    fn from(m: &MlpModel) -> Self {
        MlpModelFile {
            model_kind: MLP_MODEL_KIND.to_string(),
            architecture: m.architecture.clone(),
            train_config: m.config.clone(),
            seed: m.config.seed,
            layers: m
                .params
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            epoch_losses: m.epoch_losses.clone(),
        }
    }
}

impl TryFrom<MlpModelFile> for MlpModel {
    type Error = Error;

    fn try_from(f: MlpModelFile) -> Result<Self> {
        if f.model_kind != MLP_MODEL_KIND {
            return Err(Error::InvalidData(format!(
                "model_kind `{}` is not `mlp`",
                f.model_kind
            )));
        }
        f.architecture.validate()?;
        let layers = f
            .layers
            .into_iter()
            .map(|l| {
                let rows = l.weights.len();
                let cols = l.weights.first().map_or(0, Vec::len);
                let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
                let weights = Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| Error::InvalidData(format!("ragged weight matrix: {e}")))?;
                Ok(Layer {
                    weights,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = MlpParams { layers };
        params.check_shapes(&f.architecture)?;
        if !params.is_finite() {
            return Err(Error::InvalidData("non-finite parameter".into()));
        }
        let mut config = f.train_config;
        config.seed = f.seed;
        Ok(MlpModel {
            architecture: f.architecture,
            params,
            config,
            epoch_losses: f.epoch_losses,
        })
    }
}
