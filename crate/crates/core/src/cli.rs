//! `imdd-e2e` command-line front end.
//!
//! Every subcommand reads the run configuration from `--config` (defaults
//! when absent), applies `--seed` on top and writes its result to `--out`.
//! CSV outputs contain no timing information, so identical inputs give
//! identical bytes.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::eval::baselines::{Baseline, BaselineKind};
use crate::eval::export::{
    band_powers, export_waveforms, filtered_waveform, spectrum, write_spectrum_csv,
};
use crate::eval::rates::{distance_sweep, write_sweep_csv};
use crate::link::{sample_messages, Link};
use crate::persist::{
    config_values, describe_keys, load_config, load_model, load_traces, save_model, save_traces,
    ModelHeader, RunConfig,
};
use crate::rng::{Purpose, StreamId};
use crate::training::{
    generate_traces, grad_check_link, train_observed, train_receiver_only, InitMode,
};
use crate::transceiver::{Message, ModelConfig, ModelParams};

/// Gradient-check pass threshold on the maximum relative error.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "imdd-e2e",
    version,
    about = "Train and evaluate end-to-end learned IM/DD fiber transceivers",
    after_help = config_help()
)]
struct Cli {
    /// Run configuration, `key = value` per line.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides every seed in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Model file to load.
    #[arg(long, global = true, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for Monte-Carlo evaluation; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the autoencoder; writes the model to --out and the log to <out>.log.csv.
    Train,
    /// Retrain the receiver of --model on traces with the transmitter frozen.
    RetrainRx {
        /// Trace file; generated from the model and channel when absent.
        #[arg(long, value_name = "PATH")]
        traces: Option<PathBuf>,
        /// Overrides retrain.init_mode.
        #[arg(long, value_name = "MODE")]
        init_mode: Option<String>,
        /// Also write the generated traces here.
        #[arg(long, value_name = "PATH")]
        save_traces: Option<PathBuf>,
    },
    /// BLER/BER of --model at every eval.distances_km, as CSV.
    Sweep,
    /// Train a reference system and sweep it over eval.distances_km.
    Baseline {
        /// Overrides baseline.kind.
        #[arg(long, value_name = "KIND")]
        kind: Option<String>,
    },
    /// Write the transmit blocks and a filtered waveform of --model into the --out directory.
    ExportWaveforms,
    /// Periodogram of a filtered transmit waveform, as CSV.
    Spectrum {
        /// Waveform CSV (sample,time_s,amplitude) instead of --model.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Random messages transmitted when using --model.
        #[arg(long, default_value_t = 1000)]
        blocks: usize,
    },
    /// Compare reverse-mode gradients with central differences; exit 1 above tolerance.
    GradCheck,
    /// Print the effective configuration and the header of --model.
    Info,
}

fn config_help() -> String {
    format!(
        "Configuration keys (key = default  # meaning):\n{}",
        describe_keys()
    )
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 for usage errors, 1 for everything else.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum Failure {
    Usage(clap::Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn missing(flag: &str, sub: &str) -> Failure {
    let mut cmd = Cli::command();
    Failure::Usage(cmd.error(
        ErrorKind::MissingRequiredArgument,
        format!("`{sub}` requires {flag}"),
    ))
}

fn invalid_value(msg: String) -> Failure {
    Failure::Usage(Cli::command().error(ErrorKind::InvalidValue, msg))
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

/// Model from --model. The channel comes from the configuration when one is
/// given and from the model file otherwise.
fn loaded_model(cli: &Cli, cfg: &RunConfig, sub: &str) -> std::result::Result<Loaded, Failure> {
    let path = cli
        .model
        .as_ref()
        .ok_or_else(|| missing("--model <PATH>", sub))?;
    let (params, header) = load_model(path)?;
    let channel = if cli.config.is_some() {
        cfg.channel.clone()
    } else {
        header.channel.clone()
    };
    Ok(Loaded {
        params,
        header,
        channel,
    })
}

struct Loaded {
    params: ModelParams,
    header: ModelHeader,
    channel: ChannelConfig,
}

/// Writes `bytes` to `out`, or to stdout when `out` is `None`.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn execute(cli: &Cli) -> std::result::Result<i32, Failure> {
    let cfg = run_config(cli)?;
    match &cli.command {
        Command::Train => {
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| missing("--out <PATH>", "train"))?;
            let (params, log) = train_observed(&cfg.model, &cfg.channel, &cfg.train, &mut |row| {
                eprintln!(
                    "iteration {:>7}  loss {:.5}  val BLER {:.3e}  val BER {:.3e}  {:.1} s",
                    row.iteration, row.loss, row.validation_bler, row.validation_ber, row.elapsed_s
                );
            })?;
            save_model(
                &params,
                &cfg.model,
                &cfg.channel.with_distance(cfg.train.distance_mean_km),
                out,
            )?;
            fs::write(log_path(out), log.to_csv_reproducible())?;
            eprintln!("wrote {} and {}", out.display(), log_path(out).display());
        }
        Command::RetrainRx {
            traces,
            init_mode,
            save_traces: traces_out,
        } => {
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| missing("--out <PATH>", "retrain-rx"))?;
            let m = loaded_model(cli, &cfg, "retrain-rx")?;
            let mut retrain = cfg.retrain.clone();
            if let Some(mode) = init_mode {
                retrain.init_mode = match mode.as_str() {
                    "fine-tune" => InitMode::FineTune,
                    "randomize" => InitMode::Randomize,
                    other => {
                        return Err(invalid_value(format!(
                            "--init-mode {other:?}: expected fine-tune or randomize"
                        )))
                    }
                };
            }
            let messages = m.header.model.messages;
            let traces = match traces {
                Some(p) => load_traces(p, messages)?,
                None => {
                    let link = Link::autoencoder(&m.header.model, m.params.clone())?;
                    let mut ch = m.channel.clone();
                    ch.snr_table = ch.snr_table.shifted(cfg.trace_snr_offset_db);
                    generate_traces(
                        &link,
                        &ch,
                        cfg.train.distance_mean_km,
                        cfg.num_traces,
                        cfg.train.seed,
                    )?
                }
            };
            if let Some(p) = traces_out {
                save_traces(&traces, p)?;
            }
            let (params, report) = train_receiver_only(&m.params, &traces, &retrain)?;
            save_model(&params, &m.header.model, &m.header.channel, out)?;
            let mut s = String::from("stage,bler\n");
            s.push_str(&format!("initial_test,{:e}\n", report.initial_test_bler));
            for (i, b) in report.epoch_validation_bler.iter().enumerate() {
                s.push_str(&format!("epoch{}_validation,{b:e}\n", i + 1));
            }
            s.push_str(&format!("final_test,{:e}\n", report.test_bler));
            emit(None, s.as_bytes())?;
        }
        Command::Sweep => {
            let m = loaded_model(cli, &cfg, "sweep")?;
            let link = Link::autoencoder(&m.header.model, m.params)?;
            let records = distance_sweep(
                &link,
                &m.channel,
                &cfg.eval.distances_km,
                cfg.eval.num_blocks,
                cfg.train.seed,
                cli.threads,
            )?;
            let mut buf = Vec::new();
            write_sweep_csv(&records, &mut buf)?;
            emit(cli.out.as_deref(), &buf)?;
        }
        Command::Baseline { kind } => {
            let mut bcfg = cfg.baseline_config();
            if let Some(k) = kind {
                bcfg.kind = k
                    .parse::<BaselineKind>()
                    .map_err(|e| invalid_value(e.to_string()))?;
            }
            let mut b = Baseline::new(bcfg, &cfg.model)?;
            b.train(&cfg.channel)?;
            let records = distance_sweep(
                b.link()?,
                &cfg.channel,
                &cfg.eval.distances_km,
                cfg.eval.num_blocks,
                cfg.train.seed,
                cli.threads,
            )?;
            let mut buf = Vec::new();
            write_sweep_csv(&records, &mut buf)?;
            emit(cli.out.as_deref(), &buf)?;
        }
        Command::ExportWaveforms => {
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| missing("--out <DIR>", "export-waveforms"))?;
            let m = loaded_model(cli, &cfg, "export-waveforms")?;
            let model = &m.header.model;
            let seq = cfg
                .export_sequence
                .iter()
                .map(|&v| Message::new(v, model.messages))
                .collect::<Result<Vec<_>>>()?;
            let paths = export_waveforms(&m.params.tx, model, &m.channel, &seq, out)?;
            eprintln!(
                "wrote {} and {}",
                paths.blocks.display(),
                paths.filtered.display()
            );
        }
        Command::Spectrum { input, blocks } => {
            let (wave, rate, cutoff) = match input {
                Some(p) => (
                    read_waveform(p)?,
                    cfg.channel.sample_rate,
                    cfg.channel.lpf_bandwidth,
                ),
                None => {
                    let m = loaded_model(cli, &cfg, "spectrum")?;
                    let model = &m.header.model;
                    let mut rng = StreamId::new(cfg.train.seed, Purpose::Waveform, 0).rng(0);
                    let seq = sample_messages(&mut rng, model.messages, *blocks);
                    let wave = filtered_waveform(&m.params.tx, model, &m.channel, &seq)?;
                    (wave, m.channel.sample_rate, m.channel.lpf_bandwidth)
                }
            };
            let table = spectrum(&wave, rate);
            let (outside, inside) = band_powers(&table, cutoff);
            eprintln!("out-of-band / in-band power: {:e}", outside / inside);
            let mut buf = Vec::new();
            write_spectrum_csv(&table, &mut buf)?;
            emit(cli.out.as_deref(), &buf)?;
        }
        Command::GradCheck => {
            let report = grad_check_link(&cfg.model, &cfg.channel, &cfg.gradcheck)?;
            let worst = report
                .worst
                .as_ref()
                .map_or(String::from("-"), |(name, i)| format!("{name}[{i}]"));
            let text = format!(
                "max_relative_error,coords_checked,coords_skipped,worst\n{:e},{},{},{worst}\n",
                report.max_rel_error, report.coords_checked, report.coords_skipped
            );
            emit(cli.out.as_deref(), text.as_bytes())?;
            if !(report.max_rel_error < GRAD_CHECK_TOLERANCE) {
                eprintln!(
                    "gradient check failed: {:e} >= {GRAD_CHECK_TOLERANCE:e}",
                    report.max_rel_error
                );
                return Ok(1);
            }
        }
        Command::Info => {
            let text = match &cli.config {
                Some(p) => fs::read_to_string(p)?,
                None => String::new(),
            };
            let mut s = String::from("# effective configuration\n");
            for (k, v) in config_values(&text)? {
                let v = match (k, cli.seed) {
                    ("train.seed", Some(seed)) => seed.to_string(),
                    _ => v,
                };
                s.push_str(&format!("{k} = {v}\n"));
            }
            if cli.model.is_some() {
                let m = loaded_model(cli, &cfg, "info")?;
                s.push_str(&model_summary(&m.header.model, &m.header.channel));
            }
            emit(cli.out.as_deref(), s.as_bytes())?;
        }
    }
    Ok(0)
}

/// `<out>.log.csv`
pub fn log_path(model_out: &Path) -> PathBuf {
    let mut s = model_out.as_os_str().to_owned();
    s.push(".log.csv");
    PathBuf::from(s)
}

fn model_summary(model: &ModelConfig, ch: &ChannelConfig) -> String {
    let anchors: Vec<String> = ch
        .snr_table
        .anchors()
        .iter()
        .map(|(d, s)| format!("{d}:{s}"))
        .collect();
    format!(
        "# model file\n\
         M = {}\nn = {}\nN = {}\noversampling = {}\neps = {}\n\
         sample_rate_hz = {}\nlpf_hz = {}\nenob = {}\ndispersion_ps_nm_km = {}\n\
         wavelength_nm = {}\nzero_pad_factor = {}\ntrained_distance_km = {}\nsnr_table = {}\n",
        model.messages,
        model.block_len,
        model.blocks,
        model.oversampling,
        model.eps,
        ch.sample_rate,
        ch.lpf_bandwidth,
        ch.enob,
        ch.dispersion_ps_nm_km,
        ch.wavelength_m * 1e9,
        ch.zero_pad_factor,
        ch.distance_km,
        anchors.join(","),
    )
}

/// Amplitude column (the last one) of a waveform CSV with a header line.
fn read_waveform(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?)
        .lines()
        .enumerate()
        .skip(1)
    {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or("").trim();
        let v = field.parse().map_err(|_| Error::Format {
            field: format!("line {}", i + 1),
            detail: format!("{field:?} is not a number"),
        })?;
        out.push(v);
    }
    Ok(out)
}
