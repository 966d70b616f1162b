//! A complete transmitter → channel → receiver chain.
//!
//! The end-to-end autoencoder and every reference system share this type,
//! so training and Monte-Carlo evaluation are written once.

use rand::Rng;

use crate::autodiff::{Parameter, Tape, Tensor, Var};
use crate::channel::{Channel, FrozenNoise, NoiseSource};
use crate::error::{Error, Result};
use crate::eval::ffe::Ffe;
use crate::eval::pam::{pam_modulate, PamFormat};
use crate::rng::SimRng;
use crate::transceiver::{
    decide, gray_bits, message_from_gray_bits, record_serialize, Dense, Message, ModelConfig,
    ModelParams, ReceiverNet, TransmitterNet,
};

/// Single affine layer followed by softmax, `y = softmax(W_R x + b_R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassPerceptron {
    pub layer: Dense,
}

impl MulticlassPerceptron {
    pub fn init(block_len: usize, messages: usize, rng: &mut SimRng) -> Self {
        Self {
            layer: Dense::init_named("WR", "bR", block_len, messages, rng),
        }
    }

    pub fn record(&self, tape: &mut Tape, blocks: Var) -> Result<Var> {
        let h = self.layer.record(tape, blocks)?;
        tape.softmax(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Transmitter {
    Ann(TransmitterNet),
    /// Fixed PAM waveform for the Gray bits of each message.
    Pam(PamFormat),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Receiver {
    Ann(ReceiverNet),
    Perceptron(MulticlassPerceptron),
    /// Equalizer with symbol-by-symbol decisions; only valid behind a PAM
    /// transmitter.
    Ffe(Ffe),
}

/// Which parts of a link receive optimizer updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trainable {
    pub tx: bool,
    pub rx: bool,
}

impl Trainable {
    pub const BOTH: Self = Self { tx: true, rx: true };
    pub const RX: Self = Self {
        tx: false,
        rx: true,
    };
    pub const TX: Self = Self {
        tx: true,
        rx: false,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub model: ModelConfig,
    pub tx: Transmitter,
    pub rx: Receiver,
}

impl Link {
    pub fn autoencoder(model: &ModelConfig, params: ModelParams) -> Result<Self> {
        params.check_dims(model.messages, model.block_len)?;
        Ok(Self {
            model: model.clone(),
            tx: Transmitter::Ann(params.tx),
            rx: Receiver::Ann(params.rx),
        })
    }

    /// Transmitter and receiver networks, if both are the autoencoder's.
    pub fn model_params(&self) -> Option<ModelParams> {
        match (&self.tx, &self.rx) {
            (Transmitter::Ann(tx), Receiver::Ann(rx)) => Some(ModelParams {
                tx: tx.clone(),
                rx: rx.clone(),
            }),
            _ => None,
        }
    }

    /// Parameters selected by `which`, in a fixed order.
    pub fn params_mut(&mut self, which: Trainable) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        if which.tx {
            if let Transmitter::Ann(tx) = &mut self.tx {
                out.extend(tx.params_mut());
            }
        }
        if which.rx {
            match &mut self.rx {
                Receiver::Ann(rx) => out.extend(rx.params_mut()),
                Receiver::Perceptron(p) => out.extend([&mut p.layer.weight, &mut p.layer.bias]),
                Receiver::Ffe(_) => {}
            }
        }
        out
    }

    /// Uniform i.i.d. messages for `rows` sequences of `N` blocks, row-major.
    pub fn sample_messages(&self, rng: &mut SimRng, rows: usize) -> Vec<Message> {
        sample_messages(rng, self.model.messages, self.model.blocks * rows)
    }

    /// Serialized drive waveforms `[rows, N·n]` for `rows · N` messages.
    pub fn record_tx(&self, tape: &mut Tape, messages: &[Message]) -> Result<Var> {
        let n_blocks = self.model.blocks;
        if messages.is_empty() || !messages.len().is_multiple_of(n_blocks) {
            return Err(Error::Shape(format!(
                "{} messages do not form sequences of {n_blocks} blocks",
                messages.len()
            )));
        }
        match &self.tx {
            Transmitter::Ann(net) => {
                let table = net.record_table(tape, self.model.eps)?;
                record_serialize(tape, table, messages, n_blocks)
            }
            Transmitter::Pam(format) => {
                let rows = messages.len() / n_blocks;
                let mut data = Vec::with_capacity(rows * self.model.seq_len());
                for seq in messages.chunks(n_blocks) {
                    let bits: Vec<u8> = seq
                        .iter()
                        .flat_map(|&m| gray_bits(m, self.model.messages))
                        .collect();
                    data.extend(pam_modulate(&bits, *format, &self.model)?);
                }
                Ok(tape.constant(Tensor::matrix(rows, self.model.seq_len(), data)?))
            }
        }
    }

    /// Probability vectors `[rows, M]` for received central blocks.
    pub fn record_rx(&self, tape: &mut Tape, blocks: Var) -> Result<Var> {
        match &self.rx {
            Receiver::Ann(net) => net.record(tape, blocks),
            Receiver::Perceptron(p) => p.record(tape, blocks),
            Receiver::Ffe(_) => Err(Error::Usage(
                "the equalizer receiver makes hard decisions only".into(),
            )),
        }
    }

    /// Records transmitter, channel and receiver; returns the probability
    /// vectors of the central blocks and the realized noise.
    pub fn record(
        &self,
        tape: &mut Tape,
        channel: &Channel,
        messages: &[Message],
        distances_km: &[f64],
        noise: NoiseSource<'_>,
    ) -> Result<(Var, FrozenNoise)> {
        let x = self.record_tx(tape, messages)?;
        let (center, noise) =
            channel.forward_center(tape, x, self.model.blocks, distances_km, noise)?;
        Ok((self.record_rx(tape, center)?, noise))
    }

    /// Decided central message of every sequence.
    pub fn decide_batch(
        &self,
        channel: &Channel,
        messages: &[Message],
        distances_km: &[f64],
        rng: &mut SimRng,
    ) -> Result<Vec<Message>> {
        let mut tape = Tape::new();
        let x = self.record_tx(&mut tape, messages)?;
        if let Receiver::Ffe(ffe) = &self.rx {
            let format = match &self.tx {
                Transmitter::Pam(f) => *f,
                Transmitter::Ann(_) => {
                    return Err(Error::Usage(
                        "the equalizer receiver needs a PAM transmitter".into(),
                    ))
                }
            };
            let out = channel.forward(&mut tape, x, distances_km, NoiseSource::Random(rng))?;
            let signal = tape.value(out.signal);
            let sps = format.samples_per_symbol(&self.model)?;
            let start = self.model.center() * self.model.block_len;
            return (0..signal.rows())
                .map(|r| {
                    let row = signal.row(r);
                    let levels: Vec<usize> = (0..self.model.block_len / sps)
                        .map(|s| ffe.decide(row, start + s * sps + sps / 2))
                        .collect();
                    Ok(message_from_gray_bits(&format.block_bits(&levels)))
                })
                .collect();
        }
        let (center, _) = channel.forward_center(
            &mut tape,
            x,
            self.model.blocks,
            distances_km,
            NoiseSource::Random(rng),
        )?;
        let probs = self.record_rx(&mut tape, center)?;
        let p = tape.value(probs);
        Ok((0..p.rows()).map(|r| decide(p.row(r))).collect())
    }
}

pub fn sample_messages(rng: &mut SimRng, messages: usize, count: usize) -> Vec<Message> {
    (0..count)
        .map(|_| Message::from_index(rng.random_range(0..messages)))
        .collect()
}

/// Labels of the central block of each sequence in a row-major batch.
pub fn center_labels(messages: &[Message], blocks: usize) -> Vec<Message> {
    messages.chunks(blocks).map(|s| s[blocks / 2]).collect()
}
