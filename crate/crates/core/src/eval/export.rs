//! Waveform dumps and periodograms as CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::autodiff::{fft, Complex64};
use crate::channel::{lowpass_brickwall, ChannelConfig};
use crate::error::Result;
use crate::eval::rates::fmt17;
use crate::transceiver::{serialize, Message, ModelConfig, TransmitterNet};

/// Message sequence shown in the default filtered-waveform dump.
pub const DEFAULT_SEQUENCE: [usize; 10] = [2, 36, 64, 40, 21, 53, 42, 41, 34, 13];

pub const BLOCKS_FILE: &str = "tx_blocks.csv";
pub const FILTERED_FILE: &str = "tx_filtered.csv";

/// `m,s0,…,s{n-1}` with one row per message.
pub fn write_blocks_csv(table: &[Vec<f64>], mut w: impl Write) -> Result<()> {
    let n = table.first().map_or(0, Vec::len);
    let cols: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    writeln!(w, "m,{}", cols.join(","))?;
    for (i, row) in table.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        writeln!(w, "{},{}", i + 1, vals.join(","))?;
    }
    Ok(())
}

/// `sample,time_s,amplitude`
pub fn write_waveform_csv(samples: &[f64], sample_rate: f64, mut w: impl Write) -> Result<()> {
    writeln!(w, "sample,time_s,amplitude")?;
    for (i, &v) in samples.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt17(i as f64 / sample_rate), fmt17(v))?;
    }
    Ok(())
}

/// Transmitter output for `messages` after the transmit low-pass filter.
pub fn filtered_waveform(
    tx: &TransmitterNet,
    model: &ModelConfig,
    channel_cfg: &ChannelConfig,
    messages: &[Message],
) -> Result<Vec<f64>> {
    let x = serialize(messages, tx, model.eps)?;
    Ok(lowpass_brickwall(
        &x,
        channel_cfg.lpf_bandwidth,
        channel_cfg.sample_rate,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportPaths {
    pub blocks: PathBuf,
    pub filtered: PathBuf,
}

/// Writes the unfiltered block of every message and the filtered waveform
/// of `sequence` into `dir`.
pub fn export_waveforms(
    tx: &TransmitterNet,
    model: &ModelConfig,
    channel_cfg: &ChannelConfig,
    sequence: &[Message],
    dir: &Path,
) -> Result<ExportPaths> {
    fs::create_dir_all(dir)?;
    let paths = ExportPaths {
        blocks: dir.join(BLOCKS_FILE),
        filtered: dir.join(FILTERED_FILE),
    };
    let mut buf = Vec::new();
    write_blocks_csv(&tx.table(model.eps)?, &mut buf)?;
    fs::write(&paths.blocks, buf)?;
    let wave = filtered_waveform(tx, model, channel_cfg, sequence)?;
    let mut buf = Vec::new();
    write_waveform_csv(&wave, channel_cfg.sample_rate, &mut buf)?;
    fs::write(&paths.filtered, buf)?;
    Ok(paths)
}

/// One-sided periodogram `(frequency_hz, power_density)` over bins
/// `0..=L/2`, density `|X_k|² / (fs·L)` with interior bins doubled.
pub fn spectrum(signal: &[f64], sample_rate: f64) -> Vec<(f64, f64)> {
    let len = signal.len();
    if len == 0 {
        return Vec::new();
    }
    let x: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // unitary transform: |X_unitary|² = |X|² / L
    let spec = fft::dft(&x);
    (0..=len / 2)
        .map(|k| {
            let mut p = spec[k].norm_sqr() / sample_rate;
            if k != 0 && !(len.is_multiple_of(2) && k == len / 2) {
                p *= 2.0;
            }
            (k as f64 * sample_rate / len as f64, p)
        })
        .collect()
}

pub fn write_spectrum_csv(table: &[(f64, f64)], mut w: impl Write) -> Result<()> {
    writeln!(w, "frequency_hz,power_density")?;
    for &(f, p) in table {
        writeln!(w, "{},{}", fmt17(f), fmt17(p))?;
    }
    Ok(())
}

/// Power above and at-or-below `cutoff_hz` in a one-sided periodogram.
pub fn band_powers(table: &[(f64, f64)], cutoff_hz: f64) -> (f64, f64) {
    let slack = 1e-9 * cutoff_hz;
    table.iter().fold((0.0, 0.0), |(out, inb), &(f, p)| {
        if f > cutoff_hz + slack {
            (out + p, inb)
        } else {
            (out, inb + p)
        }
    })
}
