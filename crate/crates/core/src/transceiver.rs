//! Block transmitter and receiver networks.
//!
//! A message `m ∈ {1..M}` is one-hot encoded and mapped by three dense layers
//! (ReLU, ReLU, clipping) to a block of `n` drive samples. `N` blocks are
//! concatenated into one sequence for the channel. The receiver takes the
//! central received block through three dense layers (ReLU, ReLU, softmax)
//! and decides for the most probable message.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Parameter, Tape, Tensor, Var};
use crate::channel::quantization_noise_variance;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Standard deviation of the weight initializer.
pub const INIT_STD: f64 = 0.1;

/// How the clipping margin `eps` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsMode {
    /// Half the DAC quantization-noise standard deviation for a drive signal
    /// uniform on `[0, π/4]`.
    Nominal,
    Fixed(f64),
}

impl EpsMode {
    pub fn resolve(self, enob: f64) -> f64 {
        match self {
            EpsMode::Nominal => nominal_eps(enob),
            EpsMode::Fixed(eps) => eps,
        }
    }
}

/// `σ_q / 2` with `P = (π/4)² / 3`.
pub fn nominal_eps(enob: f64) -> f64 {
    if !enob.is_finite() {
        return 0.0;
    }
    let power = FRAC_PI_4 * FRAC_PI_4 / 3.0;
    quantization_noise_variance(power, enob).sqrt() / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Alphabet size `M`.
    pub messages: usize,
    /// Samples per block `n`.
    pub block_len: usize,
    /// Blocks per transmitted sequence `N`.
    pub blocks: usize,
    pub oversampling: usize,
    /// Clipping margin of the transmitter output.
    pub eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            messages: 64,
            block_len: 48,
            blocks: 11,
            oversampling: 4,
            eps: nominal_eps(6.0),
        }
    }
}

impl ModelConfig {
    pub fn new(messages: usize, block_len: usize, blocks: usize, eps: f64) -> Result<Self> {
        let cfg = Self {
            messages,
            block_len,
            blocks,
            eps,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages < 2 || !self.messages.is_power_of_two() {
            return Err(Error::Config(format!(
                "M must be a power of two >= 2, got {}",
                self.messages
            )));
        }
        if self.oversampling == 0
            || self.block_len == 0
            || !self.block_len.is_multiple_of(self.oversampling)
        {
            return Err(Error::Config(format!(
                "n = {} must be a positive multiple of the oversampling factor {}",
                self.block_len, self.oversampling
            )));
        }
        if self.blocks.is_multiple_of(2) {
            return Err(Error::Config(format!("N must be odd, got {}", self.blocks)));
        }
        if !(0.0..FRAC_PI_4 / 2.0).contains(&self.eps) {
            return Err(Error::Config(format!(
                "eps must lie in [0, π/8), got {}",
                self.eps
            )));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.messages.trailing_zeros() as usize
    }

    pub fn seq_len(&self) -> usize {
        self.blocks * self.block_len
    }

    /// Index of the block handed to the receiver.
    pub fn center(&self) -> usize {
        self.blocks / 2
    }

    /// Blocks per second at the given simulation sample rate.
    pub fn symbol_rate(&self, sample_rate: f64) -> f64 {
        sample_rate / self.block_len as f64
    }

    /// Upper end of the transmitter output range.
    pub fn drive_max(&self) -> f64 {
        FRAC_PI_4 - 2.0 * self.eps
    }
}

/// One of the `M` messages, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message(u32);

impl Message {
    pub fn new(m: usize, messages: usize) -> Result<Self> {
        if m == 0 || m > messages {
            return Err(Error::Config(format!("message {m} outside 1..={messages}")));
        }
        Ok(Self(m as u32))
    }

    pub fn from_index(index: usize) -> Self {
        Self(index as u32 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Zero-based position.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Fully connected layer with `weight: [in, out]` and `bias: [out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn init(index: usize, n_in: usize, n_out: usize, rng: &mut SimRng) -> Self {
        Self::init_named(&format!("W{index}"), &format!("b{index}"), n_in, n_out, rng)
    }

    pub fn init_named(w: &str, b: &str, n_in: usize, n_out: usize, rng: &mut SimRng) -> Self {
        let weights = (0..n_in * n_out)
            .map(|_| truncated_normal(rng, INIT_STD))
            .collect();
        Self {
            weight: Parameter::new(w, Tensor::matrix(n_in, n_out, weights).expect("sized")),
            bias: Parameter::new(b, Tensor::vector(vec![0.0; n_out])),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn record(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        tape.affine(x, w, b)
    }

    fn params(&self) -> [&Parameter; 2] {
        [&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Draw from `N(0, std²)` truncated to `±2·std` by rejection.
pub fn truncated_normal(rng: &mut SimRng, std: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return std * z;
        }
    }
}

/// Layers `W1,b1` (M→2M), `W2,b2` (2M→2M), `W3,b3` (2M→n).
#[derive(Clone, Debug, PartialEq)]
pub struct TransmitterNet {
    pub layers: [Dense; 3],
}

impl TransmitterNet {
    pub fn init(messages: usize, block_len: usize, rng: &mut SimRng) -> Self {
        let hidden = 2 * messages;
        Self {
            layers: [
                Dense::init(1, messages, hidden, rng),
                Dense::init(2, hidden, hidden, rng),
                Dense::init(3, hidden, block_len, rng),
            ],
        }
    }

    pub fn messages(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn block_len(&self) -> usize {
        self.layers[2].n_out()
    }

    /// Records the network on rows of one-hot inputs `[.., M]`.
    pub fn record(&self, tape: &mut Tape, one_hot: Var, eps: f64) -> Result<Var> {
        let h = self.layers[0].record(tape, one_hot)?;
        let h = tape.relu(h)?;
        let h = self.layers[1].record(tape, h)?;
        let h = tape.relu(h)?;
        let h = self.layers[2].record(tape, h)?;
        tape.clipping(h, eps)
    }

    /// All `M` transmit blocks as a `[M, n]` look-up table.
    pub fn record_table(&self, tape: &mut Tape, eps: f64) -> Result<Var> {
        let eye = tape.constant(Tensor::identity(self.messages()));
        self.record(tape, eye, eps)
    }

    /// Look-up table evaluated outside any training graph.
    pub fn table(&self, eps: f64) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let t = self.record_table(&mut tape, eps)?;
        let v = tape.value(t);
        Ok((0..v.rows()).map(|r| v.row(r).to_vec()).collect())
    }

    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        self.layers.iter().flat_map(Dense::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers.iter_mut().flat_map(Dense::params_mut)
    }
}

/// Layers `W4,b4` (n→2M), `W5,b5` (2M→2M), `W6,b6` (2M→M).
#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverNet {
    pub layers: [Dense; 3],
}

impl ReceiverNet {
    pub fn init(messages: usize, block_len: usize, rng: &mut SimRng) -> Self {
        let hidden = 2 * messages;
        Self {
            layers: [
                Dense::init(4, block_len, hidden, rng),
                Dense::init(5, hidden, hidden, rng),
                Dense::init(6, hidden, messages, rng),
            ],
        }
    }

    pub fn messages(&self) -> usize {
        self.layers[2].n_out()
    }

    pub fn block_len(&self) -> usize {
        self.layers[0].n_in()
    }

    /// Records the network on received blocks `[.., n]`, producing
    /// probability vectors `[.., M]`.
    pub fn record(&self, tape: &mut Tape, blocks: Var) -> Result<Var> {
        let h = self.layers[0].record(tape, blocks)?;
        let h = tape.relu(h)?;
        let h = self.layers[1].record(tape, h)?;
        let h = tape.relu(h)?;
        let h = self.layers[2].record(tape, h)?;
        tape.softmax(h)
    }

    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        self.layers.iter().flat_map(Dense::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers.iter_mut().flat_map(Dense::params_mut)
    }
}

/// The six weight matrices and bias vectors of transmitter and receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tx: TransmitterNet,
    pub rx: ReceiverNet,
}

impl ModelParams {
    /// Truncated-normal weights, zero biases.
    pub fn init(cfg: &ModelConfig, rng: &mut SimRng) -> Self {
        Self {
            tx: TransmitterNet::init(cfg.messages, cfg.block_len, rng),
            rx: ReceiverNet::init(cfg.messages, cfg.block_len, rng),
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        self.tx.params().chain(self.rx.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.tx.params_mut().chain(self.rx.params_mut())
    }

    /// Checks every layer against the dimensions implied by `(M, n)`.
    pub fn check_dims(&self, messages: usize, block_len: usize) -> Result<()> {
        let h = 2 * messages;
        let expected = [
            (messages, h),
            (h, h),
            (h, block_len),
            (block_len, h),
            (h, h),
            (h, messages),
        ];
        let layers = self.tx.layers.iter().chain(self.rx.layers.iter());
        for (i, (layer, (rows, cols))) in layers.zip(expected).enumerate() {
            if layer.weight.value.shape() != [rows, cols] || layer.bias.value.len() != cols {
                return Err(Error::Shape(format!(
                    "layer {} is {:?}/{:?}, expected [{rows}, {cols}]/[{cols}]",
                    i + 1,
                    layer.weight.value.shape(),
                    layer.bias.value.shape()
                )));
            }
        }
        Ok(())
    }
}

pub fn one_hot(m: Message, messages: usize) -> Result<Tensor> {
    if m.get() > messages {
        return Err(Error::Config(format!("message {m} outside 1..={messages}")));
    }
    let mut v = vec![0.0; messages];
    v[m.index()] = 1.0;
    Ok(Tensor::vector(v))
}

/// One-hot rows for a batch of messages, `[len, M]`.
pub fn one_hot_batch(messages: &[Message], m: usize) -> Result<Tensor> {
    let mut v = vec![0.0; messages.len() * m];
    for (r, msg) in messages.iter().enumerate() {
        if msg.get() > m {
            return Err(Error::Config(format!("message {msg} outside 1..={m}")));
        }
        v[r * m + msg.index()] = 1.0;
    }
    Tensor::matrix(messages.len(), m, v)
}

/// Transmit block for one message.
pub fn transmit(m: Message, tx: &TransmitterNet, eps: f64) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(one_hot(m, tx.messages())?);
    let y = tx.record(&mut tape, x, eps)?;
    Ok(tape.value(y).re().to_vec())
}

/// Concatenated transmit blocks of `messages`, in order.
pub fn serialize(messages: &[Message], tx: &TransmitterNet, eps: f64) -> Result<Vec<f64>> {
    let table = tx.table(eps)?;
    let mut out = Vec::with_capacity(messages.len() * tx.block_len());
    for m in messages {
        let row = table
            .get(m.index())
            .ok_or_else(|| Error::Config(format!("message {m} outside 1..={}", table.len())))?;
        out.extend_from_slice(row);
    }
    Ok(out)
}

/// Records serialization of `rows × N` messages through a `[M, n]` table.
pub fn record_serialize(
    tape: &mut Tape,
    table: Var,
    messages: &[Message],
    blocks: usize,
) -> Result<Var> {
    let idx: Vec<usize> = messages.iter().map(|m| m.index()).collect();
    tape.gather(table, &idx, blocks)
}

/// Probability vector for one received block.
pub fn receive(block: &[f64], rx: &ReceiverNet) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(block.to_vec()));
    let y = rx.record(&mut tape, x)?;
    Ok(tape.value(y).re().to_vec())
}

/// Most probable message; ties go to the lowest index.
pub fn decide(y: &[f64]) -> Message {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > y[best] {
            best = i;
        }
    }
    Message::from_index(best)
}

/// Reflected binary Gray code of `m - 1`, most significant bit first.
pub fn gray_bits(m: Message, messages: usize) -> Vec<u8> {
    let width = messages.trailing_zeros();
    let b = m.index() as u64;
    let g = b ^ (b >> 1);
    (0..width).rev().map(|k| ((g >> k) & 1) as u8).collect()
}

/// Inverse of [`gray_bits`].
pub fn message_from_gray_bits(bits: &[u8]) -> Message {
    let g = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
    let mut b = g;
    let mut shift = g >> 1;
    while shift != 0 {
        b ^= shift;
        shift >>= 1;
    }
    Message::from_index(b as usize)
}

/// Hamming distance between the Gray labels of two messages.
pub fn count_bit_errors(m: Message, decided: Message, messages: usize) -> u32 {
    let gm = m.index() ^ (m.index() >> 1);
    let gd = decided.index() ^ (decided.index() >> 1);
    let mask = messages - 1;
    ((gm ^ gd) & mask).count_ones()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamId};

    fn msg(m: usize) -> Message {
        Message::new(m, 64).unwrap()
    }

    #[test]
    fn one_hot_examples() {
        let v = one_hot(Message::new(3, 4).unwrap(), 4).unwrap();
        assert_eq!(v.re(), &[0.0, 0.0, 1.0, 0.0]);
        let v = one_hot(Message::new(1, 2).unwrap(), 2).unwrap();
        assert_eq!(v.re(), &[1.0, 0.0]);
        assert!(Message::new(0, 4).is_err());
        assert!(Message::new(5, 4).is_err());
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(&[0.1, 0.7, 0.2]).get(), 2);
        assert_eq!(decide(one_hot(msg(5), 64).unwrap().re()).get(), 5);
        assert_eq!(decide(&[0.5, 0.5]).get(), 1);
    }

    #[test]
    fn gray_examples() {
        assert_eq!(gray_bits(msg(1), 64), vec![0, 0, 0, 0, 0, 0]);
        assert_eq!(gray_bits(msg(4), 64), vec![0, 0, 0, 0, 1, 0]);
        for i in 1..64 {
            let (a, b) = (msg(i), msg(i + 1));
            assert_eq!(count_bit_errors(a, b, 64), 1);
            assert_eq!(message_from_gray_bits(&gray_bits(a, 64)), a);
        }
        assert_eq!(count_bit_errors(msg(9), msg(9), 64), 0);
    }

    #[test]
    fn transmit_respects_clipping_range() {
        let cfg = ModelConfig::default();
        let mut rng = StreamId::new(3, Purpose::Init, 0).rng(0);
        let p = ModelParams::init(&cfg, &mut rng);
        for m in 1..=64 {
            let block = transmit(msg(m), &p.tx, cfg.eps).unwrap();
            assert_eq!(block.len(), 48);
            assert!(block.iter().all(|&v| (0.0..=cfg.drive_max()).contains(&v)));
            assert_eq!(block, transmit(msg(m), &p.tx, cfg.eps).unwrap());
        }
    }

    #[test]
    fn serializer_concatenates_shared_blocks() {
        let cfg = ModelConfig::default();
        let mut rng = StreamId::new(4, Purpose::Init, 0).rng(0);
        let p = ModelParams::init(&cfg, &mut rng);
        let single = serialize(&[msg(7)], &p.tx, cfg.eps).unwrap();
        assert_eq!(single, transmit(msg(7), &p.tx, cfg.eps).unwrap());

        let seq: Vec<Message> = (1..=11).map(msg).collect();
        let out = serialize(&seq, &p.tx, cfg.eps).unwrap();
        assert_eq!(out.len(), 528);
        let mut rev = seq.clone();
        rev.reverse();
        let out_rev = serialize(&rev, &p.tx, cfg.eps).unwrap();
        for k in 0..11 {
            assert_eq!(
                out[k * 48..(k + 1) * 48],
                out_rev[(10 - k) * 48..(11 - k) * 48]
            );
        }
    }

    #[test]
    fn receive_gives_probabilities() {
        let cfg = ModelConfig::default();
        let mut rng = StreamId::new(5, Purpose::Init, 0).rng(0);
        let p = ModelParams::init(&cfg, &mut rng);
        let y = receive(&[0.3; 48], &p.rx).unwrap();
        assert_eq!(y.len(), 64);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // zero input: only the bias path, which is zero at init -> uniform
        let y0 = receive(&[0.0; 48], &p.rx).unwrap();
        assert!(y0.iter().all(|&v| (v - 1.0 / 64.0).abs() < 1e-15));
    }

    #[test]
    fn config_invariants() {
        assert!(ModelConfig::new(64, 48, 10, 0.0).is_err());
        assert!(ModelConfig::new(48, 48, 11, 0.0).is_err());
        assert!(ModelConfig::new(64, 46, 11, 0.0).is_err());
        assert!(ModelConfig::new(256, 48, 11, 0.0).is_ok());
        assert_eq!(ModelConfig::default().bits_per_symbol(), 6);
    }
}
