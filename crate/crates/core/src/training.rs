//! Adam, mini-batch sampling and the training loops.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{grad_check, GradCheckReport, Parameter, Tape, Tensor, Var};
use crate::channel::{Channel, ChannelConfig, NoiseSource};
use crate::error::{Error, Result};
use crate::eval::rates::{estimate_rates, SweepRecord};
use crate::link::{center_labels, sample_messages, Link, Receiver, Trainable};
use crate::rng::{Purpose, SimRng, StreamId};
use crate::transceiver::{one_hot_batch, Message, ModelConfig, ModelParams, ReceiverNet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates, keyed by parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    /// One bias-corrected update of every parameter from its `grad` field.
    pub fn update<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for p in params {
            let (m, v) = self
                .moments
                .entry(p.name.clone())
                .or_insert_with(|| (vec![0.0; p.value.len()], vec![0.0; p.value.len()]));
            let g = p.grad.re();
            for (i, w) in p.value.re_mut().iter_mut().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Iterations between validation runs and log rows.
    pub validation_interval: usize,
    /// Blocks per validation run.
    pub validation_size: usize,
    pub distance_mean_km: f64,
    /// Standard deviation of the per-sequence distance; 0 trains at a fixed
    /// distance.
    pub distance_std_km: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            batch_size: 250,
            validation_interval: 5000,
            validation_size: 15_000_000,
            distance_mean_km: 20.0,
            distance_std_km: 0.0,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.validation_interval == 0 {
            return Err(Error::Config(
                "validation_interval must be at least 1".into(),
            ));
        }
        if !(self.distance_std_km >= 0.0) || !(self.distance_mean_km >= 0.0) {
            return Err(Error::Config(format!(
                "distance mean {} and std {} must be non-negative",
                self.distance_mean_km, self.distance_std_km
            )));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.adam.lr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    /// Mean training loss since the previous row.
    pub loss: f64,
    pub validation_bler: f64,
    pub validation_ber: f64,
    pub elapsed_s: f64,
}

pub const LOG_HEADER: &str = "iteration,loss,validation_bler,validation_ber,elapsed_s";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    /// Mini-batch loss of every iteration.
    pub losses: Vec<f64>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        self.csv(true)
    }

    /// The log without the wall-clock column, identical across reruns.
    pub fn to_csv_reproducible(&self) -> String {
        self.csv(false)
    }

    fn csv(&self, timing: bool) -> String {
        let header = if timing {
            LOG_HEADER
        } else {
            LOG_HEADER.trim_end_matches(",elapsed_s")
        };
        let mut s = format!("{header}\n");
        for r in &self.rows {
            s.push_str(&r.csv_row(timing));
            s.push('\n');
        }
        s
    }
}

impl LogRow {
    pub fn csv_row(&self, timing: bool) -> String {
        use crate::eval::rates::fmt17;
        let mut s = format!(
            "{},{},{},{}",
            self.iteration,
            fmt17(self.loss),
            fmt17(self.validation_bler),
            fmt17(self.validation_ber)
        );
        if timing {
            s.push_str(&format!(",{:.3}", self.elapsed_s));
        }
        s
    }
}

/// Truncated-normal weights and zero biases from the seed's init stream.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut rng = StreamId::new(seed, Purpose::Init, 0).rng(0);
    ModelParams::init(cfg, &mut rng)
}

/// `batch_size` sequences of `N` uniform messages, row-major, with the
/// central message of each sequence as its label.
pub fn sample_training_sequence(
    rng: &mut SimRng,
    messages: usize,
    blocks: usize,
    batch_size: usize,
) -> (Vec<Message>, Vec<Message>) {
    let seq = sample_messages(rng, messages, blocks * batch_size);
    let labels = center_labels(&seq, blocks);
    (seq, labels)
}

/// One distance per sequence: `max(0, N(μ, σ))`, or `μ` when `σ = 0`.
pub fn sample_distances(rng: &mut SimRng, mean: f64, std: f64, count: usize) -> Vec<f64> {
    if std == 0.0 {
        return vec![mean];
    }
    let normal = Normal::new(mean, std).expect("std checked non-negative");
    (0..count).map(|_| normal.sample(rng).max(0.0)).collect()
}

/// Runs `train.iterations` Adam steps on the parts of `link` chosen by
/// `which`. Validation runs at the mean distance every
/// `validation_interval` iterations and after the last one.
pub fn train_link(
    link: &mut Link,
    channel_cfg: &ChannelConfig,
    train: &TrainConfig,
    which: Trainable,
) -> Result<TrainLog> {
    train_link_observed(link, channel_cfg, train, which, &mut |_| {})
}

/// [`train_link`] that hands every log row to `on_row` as it is produced.
pub fn train_link_observed(
    link: &mut Link,
    channel_cfg: &ChannelConfig,
    train: &TrainConfig,
    which: Trainable,
    on_row: &mut dyn FnMut(&LogRow),
) -> Result<TrainLog> {
    train.validate()?;
    link.model.validate()?;
    let channel = Channel::new(channel_cfg, link.model.seq_len())?;
    if let Receiver::Ffe(_) = link.rx {
        return Err(Error::Usage(
            "equalizer receivers are fitted, not trained".into(),
        ));
    }
    let mut adam = AdamState::new(train.adam);
    let mut log = TrainLog::default();
    let started = Instant::now();
    let mut interval_loss = 0.0;
    let mut interval_len = 0usize;

    for it in 0..train.iterations {
        let mut rng = StreamId::new(train.seed, Purpose::Train, it as u64).rng(0);
        let (seq, labels) = sample_training_sequence(
            &mut rng,
            link.model.messages,
            link.model.blocks,
            train.batch_size,
        );
        let distances = sample_distances(
            &mut rng,
            train.distance_mean_km,
            train.distance_std_km,
            train.batch_size,
        );
        let target = one_hot_batch(&labels, link.model.messages)?;
        let mut tape = Tape::new();
        let (probs, _) = link.record(
            &mut tape,
            &channel,
            &seq,
            &distances,
            NoiseSource::Random(&mut rng),
        )?;
        let loss = tape.cross_entropy(&target, probs)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                loss: value,
            });
        }
        let grads = tape.backward(loss)?;
        let mut params = link.params_mut(which);
        for p in params.iter_mut() {
            p.load_grad(&grads);
        }
        adam.update(params);

        log.losses.push(value);
        interval_loss += value;
        interval_len += 1;
        let done = it + 1;
        if done % train.validation_interval == 0 || done == train.iterations {
            let round = (done - 1) / train.validation_interval;
            let rec = validate(link, channel_cfg, train, round as u64)?;
            let row = LogRow {
                iteration: done,
                loss: interval_loss / interval_len as f64,
                validation_bler: rec.bler,
                validation_ber: rec.ber,
                elapsed_s: started.elapsed().as_secs_f64(),
            };
            on_row(&row);
            log.rows.push(row);
            interval_loss = 0.0;
            interval_len = 0;
        }
    }
    Ok(log)
}

/// BLER/BER on fresh sequences at the mean training distance.
pub fn validate(
    link: &Link,
    channel_cfg: &ChannelConfig,
    train: &TrainConfig,
    round: u64,
) -> Result<SweepRecord> {
    let stream = StreamId::new(train.seed, Purpose::Validate, round);
    estimate_rates(
        link,
        channel_cfg,
        train.distance_mean_km,
        train.validation_size.max(1),
        stream,
    )
}

/// End-to-end training of a freshly initialized autoencoder.
pub fn train(
    model: &ModelConfig,
    channel_cfg: &ChannelConfig,
    train: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    train_observed(model, channel_cfg, train, &mut |_| {})
}

/// [`train`] with a callback for every log row.
pub fn train_observed(
    model: &ModelConfig,
    channel_cfg: &ChannelConfig,
    train: &TrainConfig,
    on_row: &mut dyn FnMut(&LogRow),
) -> Result<(ModelParams, TrainLog)> {
    let mut link = Link::autoencoder(model, init_params(model, train.seed))?;
    let log = train_link_observed(&mut link, channel_cfg, train, Trainable::BOTH, on_row)?;
    let params = link.model_params().expect("autoencoder link");
    Ok((params, log))
}

/// Setup of the end-to-end gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub batch_size: usize,
    pub distance_km: f64,
    pub step: f64,
    pub coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            distance_km: 20.0,
            step: 1e-5,
            coords: 200,
            seed: 0,
        }
    }
}

/// Reverse-mode gradients of the batch cross-entropy against central
/// differences, with one noise realization frozen for every evaluation.
pub fn grad_check_link(
    model: &ModelConfig,
    channel_cfg: &ChannelConfig,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    model.validate()?;
    let channel = Channel::new(channel_cfg, model.seq_len())?;
    let template = init_params(model, cfg.seed);
    let mut rng = StreamId::new(cfg.seed, Purpose::GradCheck, 0).rng(0);
    let (seq, labels) =
        sample_training_sequence(&mut rng, model.messages, model.blocks, cfg.batch_size);
    let target = one_hot_batch(&labels, model.messages)?;
    let link = Link::autoencoder(model, template.clone())?;
    let mut tape = Tape::new();
    let distances = [cfg.distance_km];
    let (_, noise) = link.record(
        &mut tape,
        &channel,
        &seq,
        &distances,
        NoiseSource::Random(&mut rng),
    )?;

    let params: Vec<Parameter> = template.params().cloned().collect();
    let build = |tape: &mut Tape, values: &[Parameter]| -> Result<Var> {
        let mut p = template.clone();
        for (dst, src) in p.params_mut().zip(values) {
            dst.value = src.value.clone();
        }
        let link = Link::autoencoder(model, p)?;
        let (probs, _) = link.record(
            tape,
            &channel,
            &seq,
            &distances,
            NoiseSource::Frozen(&noise),
        )?;
        tape.cross_entropy(&target, probs)
    };
    let mut pick = StreamId::new(cfg.seed, Purpose::GradCheck, 1).rng(0);
    grad_check(&params, build, cfg.step, cfg.coords, &mut pick)
}

/// Labeled received central blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceFile {
    pub block_len: usize,
    pub records: Vec<(Message, Vec<f64>)>,
}

impl TraceFile {
    pub fn new(block_len: usize, records: Vec<(Message, Vec<f64>)>) -> Result<Self> {
        if let Some(i) = records.iter().position(|(_, b)| b.len() != block_len) {
            return Err(Error::format(
                format!("trace record {i}"),
                format!("{} samples, expected {block_len}", records[i].1.len()),
            ));
        }
        Ok(Self { block_len, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Consecutive 75 / 12.5 / 12.5 % train, validation and test parts.
    pub fn split(&self) -> (TraceFile, TraceFile, TraceFile) {
        let n = self.records.len();
        let a = n * 3 / 4;
        let b = a + (n - a) / 2;
        let part = |r: &[(Message, Vec<f64>)]| TraceFile {
            block_len: self.block_len,
            records: r.to_vec(),
        };
        (
            part(&self.records[..a]),
            part(&self.records[a..b]),
            part(&self.records[b..]),
        )
    }
}

/// Central received blocks of a link at `distance_km`, one per sequence.
pub fn generate_traces(
    link: &Link,
    channel_cfg: &ChannelConfig,
    distance_km: f64,
    count: usize,
    seed: u64,
) -> Result<TraceFile> {
    let channel = Channel::new(channel_cfg, link.model.seq_len())?;
    let stream = StreamId::new(seed, Purpose::Traces, 0);
    let n = link.model.block_len;
    let mut records = Vec::with_capacity(count);
    let chunk = crate::eval::rates::EVAL_CHUNK;
    for c in 0..count.div_ceil(chunk) {
        let rows = chunk.min(count - c * chunk);
        let mut rng = stream.rng(c as u64);
        let seq = link.sample_messages(&mut rng, rows);
        let mut tape = Tape::new();
        let x = link.record_tx(&mut tape, &seq)?;
        let (center, _) = channel.forward_center(
            &mut tape,
            x,
            link.model.blocks,
            &[distance_km],
            NoiseSource::Random(&mut rng),
        )?;
        let v = tape.value(center);
        for (r, label) in center_labels(&seq, link.model.blocks)
            .into_iter()
            .enumerate()
        {
            records.push((label, v.row(r).to_vec()));
        }
    }
    TraceFile::new(n, records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Start from the current receiver weights.
    FineTune,
    /// Re-draw the receiver weights before training.
    Randomize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub init_mode: InitMode,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4,
            batch_size: 250,
            adam: AdamConfig::default(),
            seed: 0,
            init_mode: InitMode::FineTune,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrainReport {
    /// Test-split BLER of the receiver before retraining.
    pub initial_test_bler: f64,
    /// Validation-split BLER after each epoch.
    pub epoch_validation_bler: Vec<f64>,
    pub test_bler: f64,
    pub test_blocks: usize,
}

/// Fraction of trace records the receiver decides wrongly.
pub fn trace_bler(rx: &ReceiverNet, traces: &TraceFile) -> Result<f64> {
    if traces.is_empty() {
        return Ok(0.0);
    }
    let mut errors = 0usize;
    for chunk in traces.records.chunks(crate::eval::rates::EVAL_CHUNK) {
        let data: Vec<f64> = chunk.iter().flat_map(|(_, b)| b.iter().copied()).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::matrix(chunk.len(), traces.block_len, data)?);
        let y = rx.record(&mut tape, x)?;
        let p = tape.value(y);
        errors += chunk
            .iter()
            .enumerate()
            .filter(|(r, (m, _))| crate::transceiver::decide(p.row(*r)) != *m)
            .count();
    }
    Ok(errors as f64 / traces.len() as f64)
}

/// Trains the receiver of `params` on labeled traces with the transmitter
/// held fixed. The traces are split 75/12.5/12.5 into training, validation
/// and test sets.
pub fn train_receiver_only(
    params: &ModelParams,
    traces: &TraceFile,
    cfg: &RetrainConfig,
) -> Result<(ModelParams, RetrainReport)> {
    let n = params.rx.block_len();
    let messages = params.rx.messages();
    if traces.block_len != n {
        return Err(Error::format(
            "trace block length",
            format!("{} samples, receiver expects {n}", traces.block_len),
        ));
    }
    if let Some((m, _)) = traces.records.iter().find(|(m, _)| m.get() > messages) {
        return Err(Error::format(
            "trace label",
            format!("{m} outside 1..={messages}"),
        ));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let (train_set, val_set, test_set) = traces.split();
    if train_set.is_empty() {
        return Err(Error::Config("too few traces to retrain on".into()));
    }
    let initial_test_bler = trace_bler(&params.rx, &test_set)?;

    let mut out = params.clone();
    if cfg.init_mode == InitMode::Randomize {
        let mut rng = StreamId::new(cfg.seed, Purpose::Init, 1).rng(0);
        out.rx = ReceiverNet::init(messages, n, &mut rng);
    }
    let mut adam = AdamState::new(cfg.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epoch_validation_bler = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = StreamId::new(cfg.seed, Purpose::Shuffle, epoch as u64).rng(0);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut data = Vec::with_capacity(batch.len() * n);
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let (m, b) = &train_set.records[i];
                data.extend_from_slice(b);
                labels.push(*m);
            }
            let target = one_hot_batch(&labels, messages)?;
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::matrix(batch.len(), n, data)?);
            let y = out.rx.record(&mut tape, x)?;
            let loss = tape.cross_entropy(&target, y)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Diverged {
                    iteration: epoch,
                    loss: value,
                });
            }
            let grads = tape.backward(loss)?;
            let mut ps: Vec<&mut Parameter> = out.rx.params_mut().collect();
            for p in ps.iter_mut() {
                p.load_grad(&grads);
            }
            adam.update(ps);
        }
        epoch_validation_bler.push(trace_bler(&out.rx, &val_set)?);
    }
    let test_bler = trace_bler(&out.rx, &test_set)?;
    Ok((
        out,
        RetrainReport {
            initial_test_bler,
            epoch_validation_bler,
            test_bler,
            test_blocks: test_set.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transceiver::nominal_eps;

    fn small() -> ModelConfig {
        ModelConfig::new(8, 16, 3, 0.01).unwrap()
    }

    fn quick(iterations: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            iterations,
            batch_size: 50,
            validation_interval: iterations,
            validation_size: 500,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Parameter::new("w", Tensor::vector(vec![0.5, -0.5, 2.0]));
        p.grad = Tensor::vector(vec![1.0, -3.0, 0.0]);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.update([&mut p]);
        // bias correction makes the first step lr · g / (|g| + ε)
        let v = p.value.re();
        assert!((v[0] - (0.5 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((v[1] - (-0.5 + 1e-3 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(v[2], 2.0);
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        let report = grad_check_link(
            &small(),
            &ChannelConfig::default(),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(report.coords_checked, 200);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn gradients_match_with_distance_spread_and_no_noise() {
        let mut ch = ChannelConfig::default();
        ch.stages = ch.stages.noiseless();
        let cfg = GradCheckConfig {
            distance_km: 60.0,
            coords: 100,
            seed: 3,
            ..GradCheckConfig::default()
        };
        let report = grad_check_link(&small(), &ch, &cfg).unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn truncated_normal_init_statistics() {
        let p = init_params(&ModelConfig::default(), 5);
        let w: Vec<f64> = p
            .params()
            .filter(|q| q.value.shape().len() == 2)
            .flat_map(|q| q.value.re().to_vec())
            .collect();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        // N(0, 0.1²) cut at ±0.2: std = 0.1 · sqrt(1 - 2·2φ(2) / (2Φ(2) - 1))
        let phi2 = (-2.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mass = simpson(
            |x| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -2.0,
            2.0,
        );
        let expected = 0.1 * (1.0 - 4.0 * phi2 / mass).sqrt();
        assert!((std / expected - 1.0).abs() < 0.05, "{std} vs {expected}");
        assert!(w.iter().all(|v| v.abs() <= 0.2));
        assert!(p.params().filter(|q| q.value.shape().len() == 1).all(|q| q
            .value
            .re()
            .iter()
            .all(|&b| b == 0.0)));
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 10_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn training_is_deterministic() {
        let ch = ChannelConfig::default();
        let (a, la) = train(&small(), &ch, &quick(5, 9)).unwrap();
        let (b, lb) = train(&small(), &ch, &quick(5, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(la.losses, lb.losses);
        let (c, _) = train(&small(), &ch, &quick(5, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn untrained_model_guesses() {
        let model = small();
        let ch = ChannelConfig::default();
        let (_, log) = train(&model, &ch, &quick(1, 2)).unwrap();
        // near-uniform softmax output at initialization
        assert!(
            (log.losses[0] - (8f64).ln()).abs() < 0.1,
            "{}",
            log.losses[0]
        );
        let bler = log.rows[0].validation_bler;
        assert!((bler - 7.0 / 8.0).abs() < 0.1, "{bler}");
    }

    #[test]
    fn short_training_reduces_loss() {
        let model = ModelConfig::new(16, 16, 3, nominal_eps(6.0)).unwrap();
        let (_, log) = train(&model, &ChannelConfig::default(), &quick(400, 4)).unwrap();
        let head: f64 = log.losses[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = log.losses[380..].iter().sum::<f64>() / 20.0;
        assert!(tail < 0.75 * head, "{head} -> {tail}");
    }

    #[test]
    fn distance_sampling() {
        let mut rng = StreamId::new(0, Purpose::Train, 0).rng(0);
        assert_eq!(sample_distances(&mut rng, 20.0, 0.0, 5), vec![20.0]);
        let d = sample_distances(&mut rng, 40.0, 4.0, 20_000);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((mean - 40.0).abs() < 0.1);
        assert!(sample_distances(&mut rng, 0.0, 4.0, 1000)
            .iter()
            .all(|&x| x >= 0.0));
    }

    #[test]
    fn frozen_transmitter_is_untouched() {
        let model = small();
        let ch = ChannelConfig::default();
        let mut link = Link::autoencoder(&model, init_params(&model, 1)).unwrap();
        let before = link.model_params().unwrap();
        train_link(&mut link, &ch, &quick(3, 1), Trainable::RX).unwrap();
        let after = link.model_params().unwrap();
        assert_eq!(before.tx, after.tx);
        assert_ne!(before.rx, after.rx);
    }
}
