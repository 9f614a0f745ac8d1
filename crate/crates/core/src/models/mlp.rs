//! Fully connected feed-forward network with leaky-ReLU hidden layers, a
//! sigmoid output, and Adam on binary cross-entropy.
//!
//! Parameters live as f64 internally (so the finite-difference gradient
//! check is meaningful) and serialize as base64 little-endian f32 blocks.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::forest::mix_seed;
use super::{ModelError, TrainConfig};
use crate::features::FeatureMatrix;

/// Inputs are expected normalized to [0, 1]; this is the tolerance band
/// before training refuses the matrix.
pub const INPUT_RANGE: (f32, f32) = (-0.01, 1.01);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a monitor-accuracy improvement of `min_delta` before
    /// training stops.
    pub patience: usize,
    pub min_delta: f64,
    pub leaky_slope: f64,
    /// Training fraction carved out as the early-stopping monitor when no
    /// explicit monitor set is supplied.
    pub monitor_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64, 32, 32, 32, 16, 16, 16],
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 25_000,
            max_epochs: 500,
            patience: 50,
            min_delta: 1e-4,
            leaky_slope: 0.01,
            monitor_fraction: 0.1,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::BadConfig(msg.into()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, epochs and patience must be positive");
        }
        if !(self.min_delta >= 0.0) {
            return bad("min delta must be non-negative");
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope < 0.0 {
            return bad("leaky slope must be non-negative");
        }
        if !(0.0..1.0).contains(&self.monitor_fraction) {
            return bad("monitor fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerWire", into = "LayerWire")]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerWire {
    n_in: usize,
    n_out: usize,
    weights: String,
    biases: String,
}

fn encode_f32(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_f32(text: &str, expected: usize) -> Result<Vec<f64>, String> {
    let bytes = BASE64.decode(text).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() != expected * 4 {
        return Err(format!("expected {} bytes, found {}", expected * 4, bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

impl From<Layer> for LayerWire {
    fn from(layer: Layer) -> Self {
        LayerWire {
            n_in: layer.n_in,
            n_out: layer.n_out,
            weights: encode_f32(&layer.w),
            biases: encode_f32(&layer.b),
        }
    }
}

impl TryFrom<LayerWire> for Layer {
    type Error = String;

    fn try_from(wire: LayerWire) -> Result<Self, String> {
        let w = decode_f32(&wire.weights, wire.n_in * wire.n_out)?;
        let b = decode_f32(&wire.biases, wire.n_out)?;
        Ok(Layer { n_in: wire.n_in, n_out: wire.n_out, w, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub monitor_accuracy: f64,
}

/// Identifies a contiguous block of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBlock {
    pub layer: usize,
    pub biases: bool,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_inputs: usize,
    pub leaky_slope: f64,
    pub layers: Vec<Layer>,
    pub epochs: Vec<EpochStats>,
}

impl MlpModel {
    /// He-initialized network: weights ~ N(0, 2/fan_in), zero biases.
    pub fn init(n_inputs: usize, hidden: &[usize], leaky_slope: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = n_inputs;
        for &n_out in hidden.iter().chain(std::iter::once(&1)) {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sigma");
            let w: Vec<f64> = (0..fan_in * n_out).map(|_| normal.sample(&mut rng)).collect();
            layers.push(Layer { n_in: fan_in, n_out, w, b: vec![0.0; n_out] });
            fan_in = n_out;
        }
        MlpModel { n_inputs, leaky_slope, layers, epochs: Vec::new() }
    }

    fn leaky(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.leaky_slope * z
        }
    }

    fn leaky_grad(&self, z: f64) -> f64 {
        if z > 0.0 {
            1.0
        } else {
            self.leaky_slope
        }
    }

    /// Forward pass keeping pre-activations; returns the output probability.
    /// `zs[l]` holds layer l pre-activations, `acts[l]` its activations
    /// (acts[0] is the input).
    fn forward_trace(&self, row: &[f32], zs: &mut Vec<Vec<f64>>, acts: &mut Vec<Vec<f64>>) -> f64 {
        zs.clear();
        acts.clear();
        acts.push(row.iter().map(|&v| f64::from(v)).collect());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = &acts[l];
            let mut z = vec![0.0; layer.n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let row_w = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                *zo = layer.b[o] + row_w.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
            }
            let act = if l == last {
                vec![sigmoid(z[0])]
            } else {
                z.iter().map(|&v| self.leaky(v)).collect()
            };
            zs.push(z);
            acts.push(act);
        }
        acts[last + 1][0]
    }

    pub fn proba(&self, row: &[f32]) -> f64 {
        let mut zs = Vec::new();
        let mut acts = Vec::new();
        self.forward_trace(row, &mut zs, &mut acts)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn param_layout(&self) -> Vec<ParamBlock> {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            blocks.push(ParamBlock { layer: i, biases: false, offset, len: layer.w.len() });
            offset += layer.w.len();
            blocks.push(ParamBlock { layer: i, biases: true, offset, len: layer.b.len() });
            offset += layer.b.len();
        }
        blocks
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.w);
            flat.extend_from_slice(&layer.b);
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.n_params() {
            return Err(ModelError::BadConfig(format!(
                "parameter vector has {} entries, network needs {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let (nw, nb) = (layer.w.len(), layer.b.len());
            layer.w.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            layer.b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Mean binary cross-entropy over the batch and its gradient in flat
    /// parameter order.
    pub fn loss_and_gradients(&self, rows: &[&[f32]], targets: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(rows.len(), targets.len());
        assert!(!rows.is_empty());
        let scale = 1.0 / rows.len() as f64;
        let mut grads = vec![0.0f64; self.n_params()];
        let mut loss = 0.0;
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut acts: Vec<Vec<f64>> = Vec::new();
        let layout = self.param_layout();

        for (&row, &y) in rows.iter().zip(targets) {
            let p = self.forward_trace(row, &mut zs, &mut acts);
            let pc = p.clamp(1e-12, 1.0 - 1e-12);
            loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();

            // Output delta for sigmoid + BCE.
            let mut delta = vec![p - y];
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let w_block = &layout[2 * l];
                let b_block = &layout[2 * l + 1];
                let input = &acts[l];
                for (o, &d) in delta.iter().enumerate() {
                    let base = w_block.offset + o * layer.n_in;
                    for (i, &a) in input.iter().enumerate() {
                        grads[base + i] += scale * d * a;
                    }
                    grads[b_block.offset + o] += scale * d;
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.n_in];
                    for (o, &d) in delta.iter().enumerate() {
                        let row_w = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                        for (i, &w) in row_w.iter().enumerate() {
                            prev[i] += w * d;
                        }
                    }
                    for (i, p) in prev.iter_mut().enumerate() {
                        *p *= self.leaky_grad(zs[l - 1][i]);
                    }
                    delta = prev;
                }
            }
        }
        (loss * scale, grads)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn check_normalized(x: &FeatureMatrix) -> Result<(), ModelError> {
    for row in 0..x.n_rows() {
        for (col, &v) in x.row(row).iter().enumerate() {
            if !(INPUT_RANGE.0..=INPUT_RANGE.1).contains(&v) {
                return Err(ModelError::NonNormalizedInput { row, feature: col, value: v });
            }
        }
    }
    Ok(())
}

fn mean_loss(model: &MlpModel, x: &FeatureMatrix, labels: &[bool]) -> f64 {
    let n = x.n_rows() as f64;
    (0..x.n_rows())
        .map(|i| {
            let p = model.proba(x.row(i)).clamp(1e-12, 1.0 - 1e-12);
            if labels[i] {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

fn accuracy_on(model: &MlpModel, x: &FeatureMatrix, rows: &[usize], labels: &[bool]) -> f64 {
    let hits = rows.iter().filter(|&&i| (model.proba(x.row(i)) >= 0.5) == labels[i]).count();
    hits as f64 / rows.len() as f64
}

/// Trains with Adam. Early stopping watches `monitor` when given (paper-style
/// evaluation) and otherwise a seeded carve-out of the training rows; sets
/// too small to carve are monitored whole.
pub(crate) fn train_mlp(
    x: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
    monitor: Option<(&FeatureMatrix, &[bool])>,
) -> Result<MlpModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != n {
        return Err(ModelError::LengthMismatch { rows: n, labels: labels.len() });
    }
    let params = &config.mlp;
    params.validate()?;
    check_normalized(x)?;
    if let Some((mx, ml)) = monitor {
        if ml.len() != mx.n_rows() {
            return Err(ModelError::LengthMismatch { rows: mx.n_rows(), labels: ml.len() });
        }
        if mx.n_features() != x.n_features() {
            return Err(ModelError::SchemaMismatch {
                expected: x.n_features(),
                got: mx.n_features(),
            });
        }
        if mx.n_rows() == 0 {
            return Err(ModelError::EmptyTraining);
        }
        check_normalized(mx)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x6D6C70));
    let mut model = MlpModel::init(
        x.n_features(),
        &params.hidden,
        params.leaky_slope,
        mix_seed(config.seed, 0x696E6974),
    );

    // Split off the monitor rows unless an external set was provided.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let carve = ((n as f64 * params.monitor_fraction).round() as usize).min(n.saturating_sub(1));
    let (monitor_rows, train_rows): (Vec<usize>, Vec<usize>) = if monitor.is_some() || carve == 0 {
        (order.clone(), order.clone())
    } else {
        (order[..carve].to_vec(), order[carve..].to_vec())
    };

    let n_params = model.n_params();
    let mut m = vec![0.0f64; n_params];
    let mut v = vec![0.0f64; n_params];
    let mut theta = model.params_flat();
    let mut step = 0u32;

    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut stale_epochs = 0usize;
    let mut epoch_order = train_rows.clone();

    for epoch in 0..params.max_epochs {
        epoch_order.shuffle(&mut rng);
        for batch in epoch_order.chunks(params.batch_size) {
            let rows: Vec<&[f32]> = batch.iter().map(|&i| x.row(i)).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let (_, grads) = model.loss_and_gradients(&rows, &ys);

            step += 1;
            let bc1 = 1.0 - params.beta1.powi(step as i32);
            let bc2 = 1.0 - params.beta2.powi(step as i32);
            for i in 0..n_params {
                m[i] = params.beta1 * m[i] + (1.0 - params.beta1) * grads[i];
                v[i] = params.beta2 * v[i] + (1.0 - params.beta2) * grads[i] * grads[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= params.learning_rate * m_hat / (v_hat.sqrt() + params.adam_epsilon);
            }
            model.set_params_flat(&theta)?;
        }

        let train_loss = mean_loss(&model, x, labels);
        let monitor_accuracy = match monitor {
            Some((mx, ml)) => {
                let rows: Vec<usize> = (0..mx.n_rows()).collect();
                accuracy_on(&model, mx, &rows, ml)
            }
            None => accuracy_on(&model, x, &monitor_rows, labels),
        };
        model.epochs.push(EpochStats { epoch, train_loss, monitor_accuracy });

        if monitor_accuracy - best_accuracy >= params.min_delta {
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
        }
        best_accuracy = best_accuracy.max(monitor_accuracy);
        if stale_epochs >= params.patience {
            break;
        }
    }

    Ok(model)
}
