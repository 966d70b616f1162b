//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; missing keys keep the defaults listed in [`KEYS`]. Unknown or
//! repeated keys are errors.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{ChannelConfig, SnrTable};
use crate::error::{Error, Result};
use crate::eval::baselines::{BaselineConfig, BaselineKind};
use crate::training::{GradCheckConfig, InitMode, RetrainConfig, TrainConfig};
use crate::transceiver::{EpsMode, ModelConfig};

/// Every accepted key with its default and a short description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.M", "64", "number of messages (power of two)"),
    ("model.n", "48", "samples per block"),
    ("model.N", "11", "blocks per sequence (odd)"),
    ("model.oversampling", "4", "samples per base-rate sample"),
    (
        "model.eps_mode",
        "nominal",
        "clipping margin: nominal | zero | <radians>",
    ),
    ("channel.sample_rate_hz", "336e9", "simulation sample rate"),
    (
        "channel.lpf_hz",
        "32e9",
        "brickwall bandwidth of both low-pass filters",
    ),
    (
        "channel.enob",
        "6",
        "DAC/ADC effective number of bits, inf disables",
    ),
    (
        "channel.dispersion_ps_nm_km",
        "17",
        "fiber dispersion parameter D",
    ),
    ("channel.wavelength_nm", "1550", "carrier wavelength"),
    (
        "channel.snr_table",
        "20:19.41,40:6.83,60:5.6,80:3.73",
        "km:dB anchors of the receiver SNR",
    ),
    (
        "channel.zero_pad_factor",
        "5",
        "zero-padding multiple before dispersion",
    ),
    (
        "channel.noise",
        "on",
        "on | off for all three noise sources",
    ),
    ("train.iterations", "100000", "optimizer steps"),
    ("train.batch_size", "250", "sequences per step"),
    ("train.distance_mean_km", "20", "mean training distance"),
    (
        "train.distance_std_km",
        "0",
        "standard deviation of the training distance",
    ),
    ("train.lr", "0.001", "Adam learning rate"),
    ("train.seed", "0", "master seed, overridden by --seed"),
    (
        "train.validation_interval",
        "5000",
        "steps between validation runs",
    ),
    (
        "train.validation_size",
        "15000000",
        "blocks per validation run",
    ),
    (
        "eval.num_blocks",
        "100000",
        "Monte-Carlo blocks per distance",
    ),
    (
        "eval.distances_km",
        "0:5:100",
        "comma list or start:step:stop",
    ),
    ("retrain.epochs", "4", "passes over the training traces"),
    ("retrain.batch_size", "250", "traces per step"),
    ("retrain.lr", "0.001", "Adam learning rate"),
    ("retrain.init_mode", "fine-tune", "fine-tune | randomize"),
    (
        "retrain.num_traces",
        "100000",
        "traces written by retrain-rx when generating",
    ),
    (
        "retrain.snr_offset_db",
        "0",
        "SNR shift of the trace channel",
    ),
    (
        "baseline.kind",
        "pam2-ffe",
        "pam2-ffe | pam4-ffe | pam2-annrx | pam4-annrx | anntx-linearrx | anntx-frozenrx",
    ),
    ("baseline.rolloff", "0.25", "raised-cosine roll-off"),
    ("baseline.ffe_taps", "13", "equalizer taps (odd)"),
    (
        "baseline.pilot_symbols",
        "10000",
        "symbols used to fit the equalizer",
    ),
    (
        "gradcheck.batch_size",
        "16",
        "sequences in the checked batch",
    ),
    ("gradcheck.coords", "200", "coordinates compared"),
    ("gradcheck.step", "1e-5", "central-difference step"),
    ("gradcheck.distance_km", "20", "link length"),
    (
        "export.sequence",
        "2,36,64,40,21,53,42,41,34,13",
        "messages of the exported waveform (1..=M)",
    ),
];

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub num_blocks: usize,
    pub distances_km: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub eps_mode: EpsMode,
    pub channel: ChannelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub retrain: RetrainConfig,
    pub num_traces: usize,
    pub trace_snr_offset_db: f64,
    pub baseline: BaselineConfig,
    pub gradcheck: GradCheckConfig,
    pub export_sequence: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl RunConfig {
    /// Baseline settings combined with the training schedule.
    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            train: self.train.clone(),
            ..self.baseline.clone()
        }
    }

    /// Applies a master seed to every seeded part.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.retrain.seed = seed;
        self.gradcheck.seed = seed;
        self.baseline.train.seed = seed;
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let values = config_values(text)?;
    let get = |key: &str| -> &str { &values.iter().find(|(k, _)| *k == key).expect("known key").1 };
    build(get)
}

/// Every key with its effective value after applying `text` over the defaults.
pub fn config_values(text: &str) -> Result<Vec<(&'static str, String)>> {
    let mut values: Vec<(&'static str, String)> =
        KEYS.iter().map(|&(k, v, _)| (k, v.to_string())).collect();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let slot = values
            .iter_mut()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)))?;
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!(
                "line {}: key {key:?} given twice",
                lineno + 1
            )));
        }
        slot.1 = value.trim().to_string();
    }
    Ok(values)
}

fn build<'a>(get: impl Fn(&str) -> &'a str + Copy) -> Result<RunConfig> {
    let channel = ChannelConfig {
        sample_rate: num(get, "channel.sample_rate_hz")?,
        lpf_bandwidth: num(get, "channel.lpf_hz")?,
        enob: num(get, "channel.enob")?,
        dispersion_ps_nm_km: num(get, "channel.dispersion_ps_nm_km")?,
        wavelength_m: num::<f64>(get, "channel.wavelength_nm")? / 1e9,
        zero_pad_factor: num(get, "channel.zero_pad_factor")?,
        snr_table: snr_table(get("channel.snr_table"))?,
        stages: match get("channel.noise") {
            "on" => Default::default(),
            "off" => crate::channel::Stages::default().noiseless(),
            other => return Err(invalid("channel.noise", other, "expected on or off")),
        },
        ..ChannelConfig::default()
    };
    channel.validate()?;

    let eps_mode = match get("model.eps_mode") {
        "nominal" => EpsMode::Nominal,
        "zero" => EpsMode::Fixed(0.0),
        other => EpsMode::Fixed(other.parse().map_err(|_| {
            invalid(
                "model.eps_mode",
                other,
                "expected nominal, zero or a number",
            )
        })?),
    };
    let mut model = ModelConfig::new(
        num(get, "model.M")?,
        num(get, "model.n")?,
        num(get, "model.N")?,
        eps_mode.resolve(channel.enob),
    )?;
    model.oversampling = num(get, "model.oversampling")?;
    model.validate()?;

    let train = TrainConfig {
        iterations: num(get, "train.iterations")?,
        batch_size: num(get, "train.batch_size")?,
        validation_interval: num(get, "train.validation_interval")?,
        validation_size: num(get, "train.validation_size")?,
        distance_mean_km: num(get, "train.distance_mean_km")?,
        distance_std_km: num(get, "train.distance_std_km")?,
        seed: num(get, "train.seed")?,
        adam: crate::training::AdamConfig {
            lr: num(get, "train.lr")?,
            ..Default::default()
        },
    };
    train.validate()?;

    let eval = EvalConfig {
        num_blocks: num(get, "eval.num_blocks")?,
        distances_km: distances(get("eval.distances_km"))?,
    };
    if eval.num_blocks == 0 {
        return Err(invalid("eval.num_blocks", "0", "must be at least 1"));
    }

    let retrain = RetrainConfig {
        epochs: num(get, "retrain.epochs")?,
        batch_size: num(get, "retrain.batch_size")?,
        adam: crate::training::AdamConfig {
            lr: num(get, "retrain.lr")?,
            ..Default::default()
        },
        seed: train.seed,
        init_mode: match get("retrain.init_mode") {
            "fine-tune" => InitMode::FineTune,
            "randomize" => InitMode::Randomize,
            other => {
                return Err(invalid(
                    "retrain.init_mode",
                    other,
                    "expected fine-tune or randomize",
                ))
            }
        },
    };

    let mut baseline =
        BaselineConfig::new(num::<BaselineKind>(get, "baseline.kind")?, train.clone());
    baseline.rolloff = num(get, "baseline.rolloff")?;
    baseline.ffe_taps = num(get, "baseline.ffe_taps")?;
    baseline.pilot_symbols = num(get, "baseline.pilot_symbols")?;
    baseline.validate()?;

    let gradcheck = GradCheckConfig {
        batch_size: num(get, "gradcheck.batch_size")?,
        distance_km: num(get, "gradcheck.distance_km")?,
        step: num(get, "gradcheck.step")?,
        coords: num(get, "gradcheck.coords")?,
        seed: train.seed,
    };

    let export_sequence = list::<usize>(get("export.sequence"), "export.sequence")?;
    // checked against M only when exporting, so small models keep the default
    if export_sequence.contains(&0) {
        return Err(invalid(
            "export.sequence",
            "0",
            "messages are numbered from 1",
        ));
    }
    Ok(RunConfig {
        model,
        eps_mode,
        channel,
        train,
        eval,
        retrain,
        num_traces: num(get, "retrain.num_traces")?,
        trace_snr_offset_db: num(get, "retrain.snr_offset_db")?,
        baseline,
        gradcheck,
        export_sequence,
    })
}

/// One line per key: `key = default  # description`.
pub fn describe_keys() -> String {
    let width = KEYS
        .iter()
        .map(|(k, v, _)| k.len() + v.len())
        .max()
        .unwrap_or(0)
        + 3;
    KEYS.iter()
        .map(|(k, v, d)| format!("{:<width$} # {d}\n", format!("{k} = {v}")))
        .collect()
}

fn invalid(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: {why}"))
}

fn num<'a, T: FromStr>(get: impl Fn(&str) -> &'a str, key: &str) -> Result<T> {
    let v = get(key);
    v.parse()
        .map_err(|_| invalid(key, v, &format!("not a valid {}", short_type::<T>())))
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    name.rsplit("::").next().unwrap_or(name)
}

fn list<T: FromStr>(text: &str, key: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse()
                .map_err(|_| invalid(key, s, "unparsable list entry"))
        })
        .collect()
}

/// `a,b,c` or `start:step:stop` (inclusive, tolerant to rounding).
fn distances(text: &str) -> Result<Vec<f64>> {
    let key = "eval.distances_km";
    let out = if text.contains(':') {
        let parts = list::<f64>(&text.replace(':', ","), key)?;
        let [start, step, stop] = parts[..] else {
            return Err(invalid(key, text, "range needs start:step:stop"));
        };
        if !(step > 0.0) || stop < start {
            return Err(invalid(
                key,
                text,
                "range needs a positive step and stop >= start",
            ));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        list(text, key)?
    };
    if out.is_empty() || out.iter().any(|d| !(*d >= 0.0)) {
        return Err(invalid(key, text, "distances must be non-negative"));
    }
    Ok(out)
}

fn snr_table(text: &str) -> Result<SnrTable> {
    let key = "channel.snr_table";
    let anchors = text
        .split(',')
        .map(|pair| {
            let (d, s) = pair
                .split_once(':')
                .ok_or_else(|| invalid(key, pair, "anchors are km:dB"))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| invalid(key, d, "bad distance"))?;
            let s: f64 = s.trim().parse().map_err(|_| invalid(key, s, "bad SNR"))?;
            Ok((d, s))
        })
        .collect::<Result<Vec<_>>>()?;
    SnrTable::new(anchors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::export::DEFAULT_SEQUENCE;
    use crate::transceiver::nominal_eps;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.model.messages, 64);
        assert_eq!(c.model.block_len, 48);
        assert_eq!(c.model.blocks, 11);
        assert_eq!(c.model.eps, nominal_eps(6.0));
        assert_eq!(c.channel, ChannelConfig::default());
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.eval.distances_km.len(), 21);
        assert_eq!(c.eval.distances_km[20], 100.0);
        assert_eq!(c.export_sequence, DEFAULT_SEQUENCE.to_vec());
    }

    #[test]
    fn overrides_and_comments() {
        let c = parse_config(
            "# larger constellation\nmodel.M = 256\nmodel.n=48\n\ntrain.distance_std_km = 4\neval.distances_km = 30, 40.5\nmodel.eps_mode = zero\n",
        )
        .unwrap();
        assert_eq!(c.model.messages, 256);
        assert_eq!(c.train.distance_std_km, 4.0);
        assert_eq!(c.eval.distances_km, vec![30.0, 40.5]);
        assert_eq!(c.model.eps, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "model.N=10",
            "model.M=48",
            "model.q=1",
            "model.M=64\nmodel.M=64",
            "train.lr=fast",
            "channel.lpf_hz=200e9",
            "channel.snr_table=40:1,20:2",
            "retrain.init_mode=sometimes",
            "baseline.ffe_taps=12",
            "eval.distances_km=10:0:20",
            "no equals sign",
            "export.sequence=0,1",
        ] {
            assert!(matches!(parse_config(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn range_includes_stop() {
        assert_eq!(distances("30:0.5:31").unwrap(), vec![30.0, 30.5, 31.0]);
        assert_eq!(distances("10:0.1:10.3").unwrap().len(), 4);
    }

    #[test]
    fn every_key_is_described() {
        let text = describe_keys();
        for (k, _, _) in KEYS {
            assert!(text.contains(k));
        }
        // the described defaults parse back to the defaults
        let as_file: String = KEYS.iter().map(|(k, v, _)| format!("{k}={v}\n")).collect();
        assert_eq!(parse_config(&as_file).unwrap(), RunConfig::default());
    }
}
