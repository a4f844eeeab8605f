//! Desk-scale training of the float classifier with surrogate-gradient BPTT,
//! post-training quantization, and labeled-dataset construction by replay.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ebbi::{extract_sequence, EbbiStack, PatchSequence, WindowMode};
use crate::error::{Error, Result};
use crate::event::{EventStream, Label};
use crate::metrics::{roc_from_scores, RocCurve};
use crate::snn::QuantizedFcsnn;

const FLOAT_MAGIC: &[u8; 7] = b"SNNFF32";
const FLOAT_VERSION: u16 = 1;

/// Full-precision classifier trained before quantization. Weights are kept in
/// f64 for stable gradients and stored as f32 on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatFcsnn {
    input_dim: usize,
    n_hidden: usize,
    w1: Vec<f64>,
    w2: Vec<f64>,
    beta: f64,
    v_th: f64,
}

impl FloatFcsnn {
    pub fn new(
        input_dim: usize,
        n_hidden: usize,
        w1: Vec<f64>,
        w2: Vec<f64>,
        beta: f64,
        v_th: f64,
    ) -> Result<Self> {
        if input_dim == 0 || n_hidden == 0 {
            return Err(Error::Shape(
                "input_dim and n_hidden must be positive".into(),
            ));
        }
        if w1.len() != n_hidden * input_dim || w2.len() != n_hidden {
            return Err(Error::Shape(format!(
                "weight shapes {}/{} do not match {n_hidden}x{input_dim}",
                w1.len(),
                w2.len()
            )));
        }
        if !w1.iter().chain(&w2).all(|w| w.is_finite()) {
            return Err(Error::Validation("weights must be finite".into()));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Validation(format!(
                "beta must be in (0, 1], got {beta}"
            )));
        }
        if !v_th.is_finite() {
            return Err(Error::Validation("v_th must be finite".into()));
        }
        Ok(Self {
            input_dim,
            n_hidden,
            w1,
            w2,
            beta,
            v_th,
        })
    }

    /// Small random uniform initialization scaled by fan-in.
    pub fn init(input_dim: usize, n_hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = 1.0 / (input_dim as f64).sqrt();
        let r2 = 1.0 / (n_hidden as f64).sqrt();
        let w1 = (0..n_hidden * input_dim)
            .map(|_| rng.random_range(-r1..r1))
            .collect();
        let w2 = (0..n_hidden).map(|_| rng.random_range(-r2..r2)).collect();
        Self::new(input_dim, n_hidden, w1, w2, 0.5, 1.0)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }
}

/// How spikes are produced during a float forward pass.
///
/// `Heaviside` is the real binary-spiking network. `Ramp` replaces the step
/// with the antiderivative of the boxcar surrogate (a clipped linear ramp), so
/// the whole forward pass is differentiable and backprop is its exact
/// gradient — which is what makes finite-difference checking meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    Heaviside,
    Ramp,
}

fn spike_value(mode: SpikeMode, v: f64, v_th: f64, slope: f64) -> f64 {
    match mode {
        SpikeMode::Heaviside => {
            if v >= v_th {
                1.0
            } else {
                0.0
            }
        }
        SpikeMode::Ramp => slope * (v - v_th + 0.5).clamp(0.0, 1.0),
    }
}

/// Boxcar surrogate: d(spike)/d(membrane) is `slope` within half a unit of
/// threshold, zero outside.
fn surrogate_deriv(v: f64, v_th: f64, slope: f64) -> f64 {
    if (v - v_th).abs() < 0.5 {
        slope
    } else {
        0.0
    }
}

struct ForwardTrace {
    /// Membranes per step, row-major: vs[k * n_hidden + j].
    vs: Vec<f64>,
    /// Spike values per step (binary or soft depending on mode).
    ss: Vec<f64>,
    score: f64,
}

fn forward(net: &FloatFcsnn, seq: &PatchSequence, slope: f64, mode: SpikeMode) -> ForwardTrace {
    let h = net.n_hidden;
    let k_steps = seq.len();
    let mut vs = vec![0.0; k_steps * h];
    let mut ss = vec![0.0; k_steps * h];
    for k in 0..k_steps {
        let active: Vec<usize> = seq.get(k).iter_ones().collect();
        for j in 0..h {
            let carry = if k == 0 {
                0.0
            } else {
                net.beta * vs[(k - 1) * h + j] * (1.0 - ss[(k - 1) * h + j])
            };
            let row = &net.w1[j * net.input_dim..(j + 1) * net.input_dim];
            let mut v = carry;
            for &i in &active {
                v += row[i];
            }
            vs[k * h + j] = v;
            ss[k * h + j] = spike_value(mode, v, net.v_th, slope);
        }
    }
    let score = if k_steps == 0 {
        0.0
    } else {
        (0..h).map(|j| net.w2[j] * ss[(k_steps - 1) * h + j]).sum()
    };
    ForwardTrace { vs, ss, score }
}

/// Raw classification score of the binary-spiking float network.
pub fn float_score(net: &FloatFcsnn, seq: &PatchSequence) -> f64 {
    forward(net, seq, 1.0, SpikeMode::Heaviside).score
}

#[derive(Debug, Clone)]
pub struct FloatGrads {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl FloatGrads {
    fn zeros(net: &FloatFcsnn) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            w2: vec![0.0; net.w2.len()],
        }
    }

    fn scale(&mut self, f: f64) {
        self.w1.iter_mut().for_each(|g| *g *= f);
        self.w2.iter_mut().for_each(|g| *g *= f);
    }
}

/// Backpropagate d(loss)/d(score) through time, accumulating into `grads`.
/// The spike derivative is the boxcar surrogate; the reset and leak paths are
/// differentiated through as-is.
fn backward(
    net: &FloatFcsnn,
    seq: &PatchSequence,
    trace: &ForwardTrace,
    slope: f64,
    d_score: f64,
    grads: &mut FloatGrads,
) {
    let h = net.n_hidden;
    let k_steps = seq.len();
    if k_steps == 0 {
        return;
    }
    for j in 0..h {
        grads.w2[j] += d_score * trace.ss[(k_steps - 1) * h + j];
    }
    // lambda[j] = dL/d(membrane at the step currently being processed).
    let mut lambda_next = vec![0.0; h];
    for k in (0..k_steps).rev() {
        let mut lambda = vec![0.0; h];
        for j in 0..h {
            let v = trace.vs[k * h + j];
            let s = trace.ss[k * h + j];
            let d_spike = if k == k_steps - 1 {
                d_score * net.w2[j]
            } else {
                // s_k gates the reset of v_{k+1}.
                lambda_next[j] * (-net.beta * v)
            };
            let d_carry = if k == k_steps - 1 {
                0.0
            } else {
                lambda_next[j] * net.beta * (1.0 - s)
            };
            lambda[j] = d_spike * surrogate_deriv(v, net.v_th, slope) + d_carry;
        }
        for i in seq.get(k).iter_ones() {
            for j in 0..h {
                grads.w1[j * net.input_dim + i] += lambda[j];
            }
        }
        lambda_next = lambda;
    }
}

/// Per-class loss weights; inverse-frequency weighting keeps an imbalanced
/// stream from collapsing to the majority class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub signal: f64,
    pub noise: f64,
}

impl ClassWeights {
    pub fn uniform() -> Self {
        Self {
            signal: 1.0,
            noise: 1.0,
        }
    }

    pub fn balanced(samples: &[LabeledSample]) -> Result<Self> {
        let n_signal = samples.iter().filter(|s| s.label == Label::Signal).count();
        let n_noise = samples.len() - n_signal;
        if n_signal == 0 || n_noise == 0 {
            return Err(Error::Validation(format!(
                "need both classes to balance, got {n_signal} signal / {n_noise} noise"
            )));
        }
        let total = samples.len() as f64;
        Ok(Self {
            signal: total / (2.0 * n_signal as f64),
            noise: total / (2.0 * n_noise as f64),
        })
    }

    fn of(&self, label: Label) -> f64 {
        match label {
            Label::Signal => self.signal,
            _ => self.noise,
        }
    }
}

/// Numerically stable weighted binary cross-entropy of sigmoid(score).
fn bce_loss(score: f64, target: f64, weight: f64) -> f64 {
    weight * (score.max(0.0) - score * target + (-score.abs()).exp().ln_1p())
}

fn bce_dscore(score: f64, target: f64, weight: f64) -> f64 {
    let sigmoid = 1.0 / (1.0 + (-score).exp());
    weight * (sigmoid - target)
}

fn target_of(label: Label) -> f64 {
    if label == Label::Signal {
        1.0
    } else {
        0.0
    }
}

/// Mean weighted loss over the samples under the given spike mode.
pub fn batch_loss(
    net: &FloatFcsnn,
    samples: &[LabeledSample],
    slope: f64,
    mode: SpikeMode,
    weights: &ClassWeights,
) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| {
            let trace = forward(net, &s.sequence, slope, mode);
            bce_loss(trace.score, target_of(s.label), weights.of(s.label))
        })
        .sum();
    total / samples.len() as f64
}

/// Mean loss and its gradient over the samples.
pub fn batch_gradients(
    net: &FloatFcsnn,
    samples: &[LabeledSample],
    slope: f64,
    mode: SpikeMode,
    weights: &ClassWeights,
) -> (f64, FloatGrads) {
    let mut grads = FloatGrads::zeros(net);
    let mut loss = 0.0;
    for s in samples {
        let trace = forward(net, &s.sequence, slope, mode);
        let target = target_of(s.label);
        let weight = weights.of(s.label);
        loss += bce_loss(trace.score, target, weight);
        let d_score = bce_dscore(trace.score, target, weight);
        backward(net, &s.sequence, &trace, slope, d_score, &mut grads);
    }
    let inv = 1.0 / samples.len() as f64;
    grads.scale(inv);
    (loss * inv, grads)
}

/// One event's classifier input with its ground truth and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sequence: PatchSequence,
    pub label: Label,
    pub t: u64,
}

/// Chronologically split dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

/// Replay parameters that fix the classifier input shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub n_ebbi: usize,
    pub window: WindowMode,
    /// Patch size n (odd).
    pub patch: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            n_ebbi: 2,
            window: WindowMode::FixedTime { t_e_us: 25_000 },
            patch: 5,
        }
    }
}

/// Replay the stream through an EBBI stack, emitting one sample per event.
/// The event is written to the active image before its sequence is extracted,
/// mirroring inference.
pub fn build_samples(stream: &EventStream, cfg: &ReplayConfig) -> Result<Vec<LabeledSample>> {
    let mut stack = EbbiStack::new(stream.geometry(), cfg.n_ebbi, cfg.window)?;
    let mut samples = Vec::with_capacity(stream.len());
    for e in stream.iter() {
        if e.label == Label::Unlabeled {
            return Err(Error::Validation(format!(
                "unlabeled event at t={} cannot enter a training set",
                e.t
            )));
        }
        stack.process_event(e)?;
        let sequence = extract_sequence(&stack, e, cfg.patch)?;
        samples.push(LabeledSample {
            sequence,
            label: e.label,
            t: e.t,
        });
    }
    Ok(samples)
}

/// Build samples and split them chronologically, earliest fraction for
/// training.
pub fn build_dataset(
    stream: &EventStream,
    cfg: &ReplayConfig,
    train_fraction: f64,
) -> Result<Dataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut samples = build_samples(stream, cfg)?;
    let split = (samples.len() as f64 * train_fraction).floor() as usize;
    let test = samples.split_off(split);
    Ok(Dataset {
        train: samples,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub surrogate_slope: f64,
    pub train_fraction: f64,
    pub n_hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 20,
            batch_size: 32,
            surrogate_slope: 1.0,
            train_fraction: 0.8,
            n_hidden: 30,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.surrogate_slope <= 0.0 {
            return Err(Error::Config("surrogate_slope must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        if self.n_hidden == 0 {
            return Err(Error::Config("n_hidden must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_auc: Option<f64>,
}

/// CSV rendering of the log: `epoch,train_loss,test_auc`.
pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,test_auc\n");
    for l in log {
        let auc = l.test_auc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", l.epoch, l.train_loss, auc));
    }
    out
}

/// SGD training with inverse-frequency class weighting. `test` is only scored
/// for the log, never trained on.
pub fn train_with_log(
    train: &[LabeledSample],
    test: Option<&[LabeledSample]>,
    config: &TrainConfig,
) -> Result<(FloatFcsnn, Vec<EpochLog>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let weights = ClassWeights::balanced(train)?;
    let input_dim = train[0].sequence.input_dim();
    let k_steps = train[0].sequence.len();
    for s in train {
        if s.sequence.input_dim() != input_dim || s.sequence.len() != k_steps {
            return Err(Error::Shape(
                "all training sequences must share one shape".into(),
            ));
        }
    }

    let mut net = FloatFcsnn::init(input_dim, config.n_hidden, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    let mut batch: Vec<LabeledSample> = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (loss, grads) =
                batch_gradients(&net, &batch, config.surrogate_slope, SpikeMode::Heaviside, &weights);
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
            for (w, g) in net.w1.iter_mut().zip(&grads.w1) {
                *w -= config.learning_rate * g;
            }
            for (w, g) in net.w2.iter_mut().zip(&grads.w2) {
                *w -= config.learning_rate * g;
            }
        }
        let test_auc = test.and_then(|t| {
            let scores: Vec<f64> = t.iter().map(|s| float_score(&net, &s.sequence)).collect();
            let labels: Vec<Label> = t.iter().map(|s| s.label).collect();
            roc_from_scores(&scores, &labels).ok().map(|c| c.auc)
        });
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / seen as f64,
            test_auc,
        });
    }
    Ok((net, log))
}

pub fn train(train_set: &[LabeledSample], config: &TrainConfig) -> Result<FloatFcsnn> {
    train_with_log(train_set, None, config).map(|(net, _)| net)
}

fn tensor_scale(w: &[f64]) -> f64 {
    let max = w.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max == 0.0 {
        1.0
    } else {
        max / 127.0
    }
}

fn quantize_tensor(w: &[f64], scale: f64) -> Vec<i8> {
    w.iter()
        .map(|&v| (v / scale).round().clamp(-127.0, 127.0) as i8)
        .collect()
}

/// Per-tensor symmetric post-training quantization to 8-bit weights; the
/// firing threshold moves into the integer domain with the hidden-layer scale.
pub fn quantize(net: &FloatFcsnn) -> Result<QuantizedFcsnn> {
    let shift = (-(1.0 - net.beta).log2()).round();
    if !(1.0..=31.0).contains(&shift) || ((1.0 - 2f64.powi(-(shift as i32))) - net.beta).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "beta {} is not of the form 1 - 2^-k required by the integer engine",
            net.beta
        )));
    }
    let s1 = tensor_scale(&net.w1);
    let s2 = tensor_scale(&net.w2);
    let w1 = quantize_tensor(&net.w1, s1);
    let w2 = quantize_tensor(&net.w2, s2);
    let v_th = ((net.v_th / s1).round() as i32).max(1);
    QuantizedFcsnn::new(
        net.input_dim,
        net.n_hidden,
        w1,
        w2,
        v_th,
        shift as u8,
        s1 as f32,
        s2 as f32,
    )
}

/// Lift a quantized network back to floats (weights times their scale).
pub fn dequantize(net: &QuantizedFcsnn) -> Result<FloatFcsnn> {
    let (s1, s2) = net.scales();
    let w1 = net.w1().iter().map(|&v| v as f64 * s1 as f64).collect();
    let w2 = net.w2().iter().map(|&v| v as f64 * s2 as f64).collect();
    FloatFcsnn::new(
        net.input_dim(),
        net.n_hidden(),
        w1,
        w2,
        1.0 - 2f64.powi(-(net.beta_shift() as i32)),
        net.v_th() as f64 * s1 as f64,
    )
}

/// Score every sample with the quantized network and sweep the decision
/// threshold into a ROC curve.
pub fn sweep_threshold(net: &QuantizedFcsnn, samples: &[LabeledSample]) -> Result<RocCurve> {
    let mut scores = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        scores.push(crate::snn::score_sequence(net, &s.sequence)? as f64);
        labels.push(s.label);
    }
    roc_from_scores(&scores, &labels)
}

/// Write the float checkpoint: magic `SNNFF32`, u16 version, u16 input_dim,
/// u16 n_hidden, f32 v_th, f32 beta, then w1 and w2 as little-endian f32.
pub fn save_float_network(net: &FloatFcsnn, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(FLOAT_MAGIC)?;
    w.write_u16::<LittleEndian>(FLOAT_VERSION)?;
    w.write_u16::<LittleEndian>(net.input_dim as u16)?;
    w.write_u16::<LittleEndian>(net.n_hidden as u16)?;
    w.write_f32::<LittleEndian>(net.v_th as f32)?;
    w.write_f32::<LittleEndian>(net.beta as f32)?;
    for &v in &net.w1 {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    for &v in &net.w2 {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn load_float_network(path: &Path) -> Result<FloatFcsnn> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic).map_err(|_| Error::Format {
        offset: 0,
        msg: "file too short for magic".into(),
    })?;
    if &magic != FLOAT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {FLOAT_MAGIC:?}"),
        });
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != FLOAT_VERSION {
        return Err(Error::Format {
            offset: 7,
            msg: format!("unsupported version {version}"),
        });
    }
    let input_dim = r.read_u16::<LittleEndian>()? as usize;
    let n_hidden = r.read_u16::<LittleEndian>()? as usize;
    let v_th = r.read_f32::<LittleEndian>()? as f64;
    let beta = r.read_f32::<LittleEndian>()? as f64;
    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(r.read_f32::<LittleEndian>().map_err(|_| Error::Format {
                offset: 0,
                msg: "truncated weight block".into(),
            })? as f64);
        }
        Ok(out)
    };
    let w1 = read_block(n_hidden * input_dim)?;
    let w2 = read_block(n_hidden)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format {
            offset: 0,
            msg: "trailing bytes after network weights".into(),
        });
    }
    FloatFcsnn::new(input_dim, n_hidden, w1, w2, beta, v_th)
}
