//! Reference systems the end-to-end design is compared against.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::Tape;
use crate::channel::{Channel, ChannelConfig, NoiseSource};
use crate::error::{Error, Result};
use crate::eval::ffe::{Ffe, Pilot};
use crate::eval::pam::PamFormat;
use crate::eval::rates::{estimate_rates, SweepRecord};
use crate::link::{Link, MulticlassPerceptron, Receiver, Trainable, Transmitter};
use crate::rng::{Purpose, StreamId};
use crate::training::{init_params, train_link, TrainConfig, TrainLog};
use crate::transceiver::{gray_bits, ModelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// PAM2 with a least-squares feed-forward equalizer.
    Pam2Ffe,
    /// Hexacode-coded PAM4 with a feed-forward equalizer.
    Pam4Ffe,
    /// PAM2 transmitter, receiver network trained on its output.
    Pam2AnnRx,
    Pam4AnnRx,
    /// Transmitter network trained jointly with a multiclass perceptron.
    AnnTxLinearRx,
    /// Transmitter network trained against a frozen PAM2-trained receiver.
    AnnTxFrozenRx,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Pam2Ffe,
        BaselineKind::Pam4Ffe,
        BaselineKind::Pam2AnnRx,
        BaselineKind::Pam4AnnRx,
        BaselineKind::AnnTxLinearRx,
        BaselineKind::AnnTxFrozenRx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Pam2Ffe => "pam2-ffe",
            BaselineKind::Pam4Ffe => "pam4-ffe",
            BaselineKind::Pam2AnnRx => "pam2-annrx",
            BaselineKind::Pam4AnnRx => "pam4-annrx",
            BaselineKind::AnnTxLinearRx => "anntx-linearrx",
            BaselineKind::AnnTxFrozenRx => "anntx-frozenrx",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Raised-cosine roll-off of the PAM transmitters.
    pub rolloff: f64,
    pub ffe_taps: usize,
    /// Known symbols used to fit the equalizer.
    pub pilot_symbols: usize,
    /// Training schedule for the network parts; also fixes the distance at
    /// which the equalizer is fitted.
    pub train: TrainConfig,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, train: TrainConfig) -> Self {
        Self {
            kind,
            rolloff: 0.25,
            ffe_taps: 13,
            pilot_symbols: 10_000,
            train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ffe_taps.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "ffe_taps must be odd, got {}",
                self.ffe_taps
            )));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!(
                "roll-off {} outside [0, 1]",
                self.rolloff
            )));
        }
        self.train.validate()
    }

    /// PAM format of the PAM kinds.
    pub fn pam(&self) -> Option<PamFormat> {
        let base = match self.kind {
            BaselineKind::Pam2Ffe | BaselineKind::Pam2AnnRx => PamFormat::pam2(),
            BaselineKind::Pam4Ffe | BaselineKind::Pam4AnnRx => PamFormat::pam4(),
            _ => return None,
        };
        Some(PamFormat {
            rolloff: self.rolloff,
            ..base
        })
    }
}

/// A reference system; [`Baseline::train`] must run before evaluation.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub config: BaselineConfig,
    pub model: ModelConfig,
    link: Option<Link>,
}

impl Baseline {
    pub fn new(config: BaselineConfig, model: &ModelConfig) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        if let Some(f) = config.pam() {
            f.samples_per_symbol(model)?;
        }
        Ok(Self {
            config,
            model: model.clone(),
            link: None,
        })
    }

    /// Trains or fits the system. Returns the training log of the last
    /// network optimization, if any.
    pub fn train(&mut self, channel_cfg: &ChannelConfig) -> Result<Option<TrainLog>> {
        let cfg = &self.config;
        let seed = cfg.train.seed;
        let init = init_params(&self.model, seed);
        let (link, log) = match cfg.kind {
            BaselineKind::Pam2Ffe | BaselineKind::Pam4Ffe => {
                let format = cfg.pam().expect("PAM kind");
                let mut link = Link {
                    model: self.model.clone(),
                    tx: Transmitter::Pam(format),
                    rx: Receiver::Ann(init.rx),
                };
                let ffe = fit_ffe(&link, channel_cfg, cfg.train.distance_mean_km, cfg, seed)?;
                link.rx = Receiver::Ffe(ffe);
                (link, None)
            }
            BaselineKind::Pam2AnnRx | BaselineKind::Pam4AnnRx => {
                let mut link = Link {
                    model: self.model.clone(),
                    tx: Transmitter::Pam(cfg.pam().expect("PAM kind")),
                    rx: Receiver::Ann(init.rx),
                };
                let log = train_link(&mut link, channel_cfg, &cfg.train, Trainable::RX)?;
                (link, Some(log))
            }
            BaselineKind::AnnTxLinearRx => {
                let mut rng = StreamId::new(seed, Purpose::Init, 2).rng(0);
                let mut link = Link {
                    model: self.model.clone(),
                    tx: Transmitter::Ann(init.tx),
                    rx: Receiver::Perceptron(MulticlassPerceptron::init(
                        self.model.block_len,
                        self.model.messages,
                        &mut rng,
                    )),
                };
                let log = train_link(&mut link, channel_cfg, &cfg.train, Trainable::BOTH)?;
                (link, Some(log))
            }
            BaselineKind::AnnTxFrozenRx => {
                let mut pam = Baseline::new(
                    BaselineConfig {
                        kind: BaselineKind::Pam2AnnRx,
                        ..cfg.clone()
                    },
                    &self.model,
                )?;
                pam.train(channel_cfg)?;
                let rx = pam.link.expect("trained").rx;
                let mut link = Link {
                    model: self.model.clone(),
                    tx: Transmitter::Ann(init.tx),
                    rx,
                };
                let log = train_link(&mut link, channel_cfg, &cfg.train, Trainable::TX)?;
                (link, Some(log))
            }
        };
        self.link = Some(link);
        Ok(log)
    }

    pub fn link(&self) -> Result<&Link> {
        self.link.as_ref().ok_or_else(|| {
            Error::Usage(format!(
                "baseline {} has not been trained",
                self.config.kind
            ))
        })
    }

    pub fn run(
        &self,
        channel_cfg: &ChannelConfig,
        distance_km: f64,
        num_blocks: usize,
        stream: StreamId,
    ) -> Result<SweepRecord> {
        estimate_rates(self.link()?, channel_cfg, distance_km, num_blocks, stream)
    }
}

/// Trains `cfg.kind` and evaluates it at the training distance.
pub fn run_baseline(
    cfg: &BaselineConfig,
    model: &ModelConfig,
    channel_cfg: &ChannelConfig,
    num_blocks: usize,
    stream: StreamId,
) -> Result<SweepRecord> {
    let mut b = Baseline::new(cfg.clone(), model)?;
    b.train(channel_cfg)?;
    b.run(channel_cfg, cfg.train.distance_mean_km, num_blocks, stream)
}

/// Fits the equalizer on pilot symbols from the three central blocks of
/// random sequences at `distance_km`. Targets are the detected powers
/// `sin²(level)` of the transmitted levels.
pub fn fit_ffe(
    link: &Link,
    channel_cfg: &ChannelConfig,
    distance_km: f64,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<Ffe> {
    let format = match &link.tx {
        Transmitter::Pam(f) => *f,
        Transmitter::Ann(_) => {
            return Err(Error::Usage(
                "equalizer fitting needs a PAM transmitter".into(),
            ))
        }
    };
    let model = &link.model;
    let sps = format.samples_per_symbol(model)?;
    let per_block = model.block_len / sps;
    let pilot_blocks: Vec<usize> = (model.center().saturating_sub(1)..=model.center() + 1)
        .filter(|&b| b < model.blocks)
        .collect();
    let per_seq = per_block * pilot_blocks.len();
    let sequences = cfg.pilot_symbols.div_ceil(per_seq).max(1);

    let channel = Channel::new(channel_cfg, model.seq_len())?;
    let stream = StreamId::new(seed, Purpose::Pilots, 0);
    let mut rng = stream.rng(0);
    let msgs = link.sample_messages(&mut rng, sequences);
    let mut tape = Tape::new();
    let x = link.record_tx(&mut tape, &msgs)?;
    let out = channel.forward(&mut tape, x, &[distance_km], NoiseSource::Random(&mut rng))?;
    let signal = tape.value(out.signal);

    let power: Vec<f64> = format.levels().iter().map(|l| l.sin().powi(2)).collect();
    let mut pilots = Vec::with_capacity(sequences * per_seq);
    for (r, seq) in msgs.chunks(model.blocks).enumerate() {
        let row = signal.row(r);
        for &b in &pilot_blocks {
            let symbols = format.block_symbols(&gray_bits(seq[b], model.messages));
            for (s, &level) in symbols.iter().enumerate() {
                pilots.push(Pilot {
                    signal: row,
                    center: b * model.block_len + s * sps + sps / 2,
                    target: power[level],
                });
            }
        }
    }
    pilots.truncate(cfg.pilot_symbols.max(1));
    Ffe::fit(cfg.ffe_taps, sps / 2, power, pilots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for k in BaselineKind::ALL {
            assert_eq!(k.name().parse::<BaselineKind>().unwrap(), k);
        }
        assert!("pam8".parse::<BaselineKind>().is_err());
    }

    #[test]
    fn untrained_baseline_is_usage_error() {
        let b = Baseline::new(
            BaselineConfig::new(BaselineKind::Pam2Ffe, TrainConfig::default()),
            &ModelConfig::default(),
        )
        .unwrap();
        let err = b
            .run(
                &ChannelConfig::default(),
                20.0,
                10,
                StreamId::new(0, Purpose::Test, 0),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn even_taps_rejected() {
        let mut cfg = BaselineConfig::new(BaselineKind::Pam2Ffe, TrainConfig::default());
        cfg.ffe_taps = 12;
        assert!(Baseline::new(cfg, &ModelConfig::default()).is_err());
    }

    #[test]
    fn pam2_ffe_is_error_free_on_short_noiseless_link() {
        let mut ch = ChannelConfig::default();
        ch.stages = ch.stages.noiseless();
        let mut train = TrainConfig::default();
        train.distance_mean_km = 0.0;
        let cfg = BaselineConfig::new(BaselineKind::Pam2Ffe, train);
        let model = ModelConfig::default();
        let rec = run_baseline(&cfg, &model, &ch, 500, StreamId::new(1, Purpose::Test, 0)).unwrap();
        assert_eq!(rec.bler, 0.0);
    }
}
