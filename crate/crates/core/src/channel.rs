//! Differentiable IM/DD link model.
//!
//! Stage order: brickwall LPF, DAC quantization noise, Mach-Zehnder
//! modulator (`sin`), chromatic dispersion on a zero-padded copy of the
//! sequence, square-law photodiode, Gaussian receiver noise, brickwall LPF,
//! ADC quantization noise. Every stage is linear or elementwise, so the whole
//! chain is recorded on a [`Tape`] and differentiated with the transceiver.
//!
//! Noise realizations are drawn outside the graph. Their variance follows the
//! mean square of the signal entering the stage, computed per row (sequence)
//! and treated as a constant by the reverse pass.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::autodiff::{fft, Complex64, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Piecewise-linear SNR (dB) versus distance (km), clamped outside the
/// first and last anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct SnrTable {
    anchors: Vec<(f64, f64)>,
}

impl SnrTable {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Config("SNR table needs at least one anchor".into()));
        }
        if anchors.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(
                "SNR table distances must be strictly increasing".into(),
            ));
        }
        if anchors.iter().any(|(d, s)| !d.is_finite() || s.is_nan()) {
            return Err(Error::Config("SNR table entries must be numbers".into()));
        }
        Ok(Self { anchors })
    }

    /// Post-detection SNRs measured for the 42 GBd PAM2 reference link.
    pub fn measured() -> Self {
        Self {
            anchors: vec![(20.0, 19.41), (40.0, 6.83), (60.0, 5.6), (80.0, 3.73)],
        }
    }

    /// Constant SNR at every distance.
    pub fn flat(snr_db: f64) -> Self {
        Self {
            anchors: vec![(0.0, snr_db)],
        }
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    /// Same table with every SNR moved by `delta_db`.
    pub fn shifted(&self, delta_db: f64) -> Self {
        Self {
            anchors: self
                .anchors
                .iter()
                .map(|&(d, s)| (d, s + delta_db))
                .collect(),
        }
    }

    pub fn at(&self, distance_km: f64) -> f64 {
        snr_at_distance(distance_km, self)
    }
}

/// Switches for the individual channel stages; all on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub tx_lpf: bool,
    pub dac_noise: bool,
    pub mzm: bool,
    pub fiber: bool,
    pub photodiode: bool,
    pub rx_noise: bool,
    pub rx_lpf: bool,
    pub adc_noise: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            tx_lpf: true,
            dac_noise: true,
            mzm: true,
            fiber: true,
            photodiode: true,
            rx_noise: true,
            rx_lpf: true,
            adc_noise: true,
        }
    }
}

impl Stages {
    pub fn noiseless(self) -> Self {
        Self {
            dac_noise: false,
            rx_noise: false,
            adc_noise: false,
            ..self
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    /// Samples per second of the simulated waveform.
    pub sample_rate: f64,
    /// One-sided brickwall bandwidth (Hz) of both low-pass filters.
    pub lpf_bandwidth: f64,
    /// Effective number of bits of DAC and ADC; `f64::INFINITY` disables
    /// quantization noise.
    pub enob: f64,
    /// Fiber dispersion parameter D in ps/(nm·km).
    pub dispersion_ps_nm_km: f64,
    /// Carrier wavelength in meters.
    pub wavelength_m: f64,
    /// The sequence is zero-padded to this multiple of its length before
    /// dispersion is applied.
    pub zero_pad_factor: usize,
    pub snr_table: SnrTable,
    /// Link length used when no per-sequence distance is given.
    pub distance_km: f64,
    pub stages: Stages,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 336e9,
            lpf_bandwidth: 32e9,
            enob: 6.0,
            dispersion_ps_nm_km: 17.0,
            wavelength_m: 1550e-9,
            zero_pad_factor: 5,
            snr_table: SnrTable::measured(),
            distance_km: 20.0,
            stages: Stages::default(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.lpf_bandwidth > 0.0) {
            return Err(Error::Config(
                "sample rate and LPF bandwidth must be positive".into(),
            ));
        }
        if self.sample_rate <= 2.0 * self.lpf_bandwidth {
            return Err(Error::Config(format!(
                "sample rate {} must exceed twice the LPF bandwidth {}",
                self.sample_rate, self.lpf_bandwidth
            )));
        }
        if self.zero_pad_factor < 1 {
            return Err(Error::Config("zero_pad_factor must be at least 1".into()));
        }
        if !(self.enob > 0.0) {
            return Err(Error::Config(format!(
                "ENOB must be positive, got {}",
                self.enob
            )));
        }
        if !(self.wavelength_m > 0.0) || self.dispersion_ps_nm_km < 0.0 {
            return Err(Error::Config(
                "wavelength must be positive and dispersion non-negative".into(),
            ));
        }
        if !(self.distance_km >= 0.0) {
            return Err(Error::Config("distance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn beta2(&self) -> f64 {
        beta2_from_d(self.dispersion_ps_nm_km, self.wavelength_m)
    }

    pub fn with_distance(&self, distance_km: f64) -> Self {
        Self {
            distance_km,
            ..self.clone()
        }
    }
}

/// Group-velocity dispersion β2 (s²/m) from D in ps/(nm·km).
pub fn beta2_from_d(d_ps_nm_km: f64, wavelength_m: f64) -> f64 {
    let d_si = d_ps_nm_km * 1e-6; // ps/(nm km) -> s/m²
    -d_si * wavelength_m * wavelength_m / (2.0 * PI * SPEED_OF_LIGHT)
}

/// Angular frequencies of an `L`-point DFT in standard bin order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    omega: Vec<f64>,
    sample_rate: f64,
}

impl FrequencyGrid {
    pub fn new(len: usize, sample_rate: f64) -> Self {
        let omega = (0..len)
            .map(|k| 2.0 * PI * bin_frequency(k, len, sample_rate))
            .collect();
        Self { omega, sample_rate }
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

/// Signed frequency (Hz) of DFT bin `k`; bins above `L/2` are negative.
pub fn bin_frequency(k: usize, len: usize, sample_rate: f64) -> f64 {
    let k = if 2 * k <= len {
        k as f64
    } else {
        k as f64 - len as f64
    };
    k * sample_rate / len as f64
}

/// 1 on bins with `|f| <= bandwidth`, 0 elsewhere.
pub fn lowpass_mask(len: usize, bandwidth: f64, sample_rate: f64) -> Vec<f64> {
    (0..len)
        .map(|k| {
            // relative slack keeps a bin sitting exactly on the edge
            let f = bin_frequency(k, len, sample_rate).abs();
            if f <= bandwidth * (1.0 + 1e-12) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Brickwall low-pass filter over the whole (circular) sequence.
pub fn lowpass_brickwall(x: &[f64], bandwidth: f64, sample_rate: f64) -> Vec<f64> {
    let mask = lowpass_mask(x.len(), bandwidth, sample_rate);
    let spec: Vec<Complex64> = fft::dft(&to_complex(x))
        .into_iter()
        .zip(&mask)
        .map(|(c, m)| c * m)
        .collect();
    fft::idft(&spec).into_iter().map(|c| c.re).collect()
}

/// Quantization-noise variance of a converter with the given ENOB for a
/// signal of mean power `power`.
pub fn quantization_noise_variance(power: f64, enob: f64) -> f64 {
    3.0 * power * 10f64.powf(-(6.02 * enob + 1.76) / 10.0)
}

/// Uniform quantization noise matching [`quantization_noise_variance`] for
/// the mean square of `x`.
pub fn quantization_noise(x: &[f64], enob: f64, rng: &mut SimRng) -> Vec<f64> {
    let var = quantization_noise_variance(mean_square(x), enob);
    let half_width = (3.0 * var).sqrt();
    if half_width == 0.0 {
        return vec![0.0; x.len()];
    }
    Uniform::new_inclusive(-half_width, half_width)
        .expect("finite positive width")
        .sample_iter(rng)
        .take(x.len())
        .collect()
}

/// `x` plus uniform DAC/ADC quantization noise.
pub fn dac_adc_noise(x: &[f64], enob: f64, rng: &mut SimRng) -> Vec<f64> {
    let noise = quantization_noise(x, enob, rng);
    x.iter().zip(noise).map(|(a, b)| a + b).collect()
}

/// Field transfer of the modulator.
pub fn mzm(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.sin()).collect()
}

/// `exp(j β2/2 ω² z)` on every bin of `grid`.
pub fn dispersion_transfer(z_m: f64, grid: &FrequencyGrid, beta2: f64) -> Vec<Complex64> {
    grid.omega()
        .iter()
        .map(|w| Complex64::from_polar(1.0, 0.5 * beta2 * w * w * z_m))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpticalField {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl OpticalField {
    pub fn from_real(x: &[f64], sample_rate: f64) -> Self {
        Self {
            samples: to_complex(x),
            sample_rate,
        }
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Dispersion applied to the zero-padded field, without truncation.
pub fn propagate_padded(
    field: &OpticalField,
    z_m: f64,
    beta2: f64,
    pad_factor: usize,
) -> OpticalField {
    let padded_len = field.samples.len() * pad_factor.max(1);
    let mut padded = field.samples.clone();
    padded.resize(padded_len, Complex64::new(0.0, 0.0));
    let grid = FrequencyGrid::new(padded_len, field.sample_rate);
    let h = dispersion_transfer(z_m, &grid, beta2);
    let spec: Vec<Complex64> = fft::dft(&padded)
        .iter()
        .zip(&h)
        .map(|(a, b)| a * b)
        .collect();
    OpticalField {
        samples: fft::idft(&spec),
        sample_rate: field.sample_rate,
    }
}

/// Dispersion over `z_m` meters; the output keeps the first `L` samples of
/// the padded result.
pub fn propagate_fiber(
    field: &OpticalField,
    z_m: f64,
    beta2: f64,
    pad_factor: usize,
) -> OpticalField {
    let mut out = propagate_padded(field, z_m, beta2, pad_factor);
    out.samples.truncate(field.samples.len());
    out
}

/// Frequency response, on a `2L`-point grid, of the filter that maps a
/// length-`L` field to the first `L` samples of [`propagate_padded`].
///
/// Only lags `-(L-1)..=L-1` of the padded circular impulse response reach
/// those samples, so a `2L`-point circular convolution with those taps
/// (output read from offset `L-1`) gives the same result at much lower cost.
pub fn dispersion_kernel(
    z_m: f64,
    len: usize,
    pad_factor: usize,
    beta2: f64,
    sample_rate: f64,
) -> Vec<Complex64> {
    let padded_len = len * pad_factor.max(1);
    let grid = FrequencyGrid::new(padded_len, sample_rate);
    let scale = 1.0 / (padded_len as f64).sqrt();
    let impulse: Vec<Complex64> = fft::idft(&dispersion_transfer(z_m, &grid, beta2))
        .into_iter()
        .map(|c| c * scale)
        .collect();
    let q = 2 * len;
    let mut taps = vec![Complex64::new(0.0, 0.0); q];
    for (j, t) in taps.iter_mut().take(q - 1).enumerate() {
        let lag = (j as isize - (len as isize - 1)).rem_euclid(padded_len as isize);
        *t = impulse[lag as usize];
    }
    let root = (q as f64).sqrt();
    fft::dft(&taps).into_iter().map(|c| c * root).collect()
}

/// Square-law detection.
pub fn photodiode(field: &OpticalField) -> Vec<f64> {
    field.samples.iter().map(|c| c.norm_sqr()).collect()
}

pub fn snr_at_distance(distance_km: f64, table: &SnrTable) -> f64 {
    let a = table.anchors();
    let (first, last) = (a[0], a[a.len() - 1]);
    if distance_km <= first.0 {
        return first.1;
    }
    if distance_km >= last.0 {
        return last.1;
    }
    let i = a.partition_point(|&(d, _)| d <= distance_km);
    let ((d0, s0), (d1, s1)) = (a[i - 1], a[i]);
    s0 + (s1 - s0) * (distance_km - d0) / (d1 - d0)
}

/// Zero-mean Gaussian noise with variance `mean_square(x) / 10^(snr/10)`.
pub fn gaussian_noise(x: &[f64], snr_db: f64, rng: &mut SimRng) -> Vec<f64> {
    let std = (mean_square(x) / 10f64.powf(snr_db / 10.0)).sqrt();
    if std == 0.0 || !std.is_finite() {
        return vec![0.0; x.len()];
    }
    (0..x.len())
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn receiver_noise(x: &[f64], snr_db: f64, rng: &mut SimRng) -> Vec<f64> {
    let noise = gaussian_noise(x, snr_db, rng);
    x.iter().zip(noise).map(|(a, b)| a + b).collect()
}

pub fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&r| Complex64::new(r, 0.0)).collect()
}

/// Where channel noise comes from on a forward pass.
pub enum NoiseSource<'a> {
    Off,
    Random(&'a mut SimRng),
    /// Replays realizations captured from an earlier pass.
    Frozen(&'a FrozenNoise),
}

/// Noise realizations of one forward pass, `[rows, L]` each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrozenNoise {
    pub dac: Option<Tensor>,
    pub rx: Option<Tensor>,
    pub adc: Option<Tensor>,
}

pub struct ChannelOutput {
    /// Detected, filtered and quantized sequence, `[rows, L]`.
    pub signal: Var,
    pub noise: FrozenNoise,
}

#[derive(Clone, Copy)]
enum NoiseKind {
    Quantization,
    Receiver,
}

/// Channel bound to a fixed sequence length, recording onto a tape.
#[derive(Clone, Debug)]
pub struct Channel {
    cfg: ChannelConfig,
    seq_len: usize,
    /// Low-pass response on the non-negative frequency bins.
    lpf: Vec<f64>,
    beta2: f64,
}

impl Channel {
    pub fn new(cfg: &ChannelConfig, seq_len: usize) -> Result<Self> {
        cfg.validate()?;
        if seq_len == 0 {
            return Err(Error::Config("sequence length must be positive".into()));
        }
        let mut lpf = lowpass_mask(seq_len, cfg.lpf_bandwidth, cfg.sample_rate);
        lpf.truncate(seq_len / 2 + 1);
        Ok(Self {
            cfg: cfg.clone(),
            seq_len,
            lpf,
            beta2: cfg.beta2(),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Runs every row of `x` (`[rows, L]`) through the link. `distances_km`
    /// holds one distance per row, or a single distance for all rows.
    pub fn forward(
        &self,
        tape: &mut Tape,
        x: Var,
        distances_km: &[f64],
        mut noise: NoiseSource<'_>,
    ) -> Result<ChannelOutput> {
        let xv = tape.value(x);
        if xv.cols() != self.seq_len {
            return Err(Error::Shape(format!(
                "channel expects rows of {} samples, got {:?}",
                self.seq_len,
                xv.shape()
            )));
        }
        let rows = xv.rows();
        if !(distances_km.len() == 1 || distances_km.len() == rows) {
            return Err(Error::Shape(format!(
                "{} distances for {rows} sequences",
                distances_km.len()
            )));
        }
        let st = self.cfg.stages;
        let mut realized = FrozenNoise::default();

        let mut s = x;
        if st.tx_lpf {
            s = self.lowpass(tape, s)?;
        }
        if st.dac_noise {
            let n = self.noise(tape, s, NoiseKind::Quantization, &[], &mut noise, |f| {
                &f.dac
            })?;
            s = self.inject(tape, s, n.as_ref())?;
            realized.dac = n;
        }
        if st.mzm {
            s = tape.sin(s)?;
        }
        let field = if st.fiber {
            let padded = tape.zero_pad(s, 2 * self.seq_len)?;
            let padded = tape.to_complex(padded)?;
            let spec = tape.dft(padded)?;
            let spec = tape.complex_mul(spec, self.dispersion(distances_km, rows)?)?;
            let out = tape.idft(spec)?;
            tape.slice_cols(out, self.seq_len - 1, self.seq_len)?
        } else {
            tape.to_complex(s)?
        };
        s = if st.photodiode {
            tape.abs_square(field)?
        } else {
            tape.real_part(field)?
        };
        if st.rx_noise {
            let snr: Vec<f64> = distances_km
                .iter()
                .map(|&d| self.cfg.snr_table.at(d))
                .collect();
            let n = self.noise(tape, s, NoiseKind::Receiver, &snr, &mut noise, |f| &f.rx)?;
            s = self.inject(tape, s, n.as_ref())?;
            realized.rx = n;
        }
        if st.rx_lpf {
            s = self.lowpass(tape, s)?;
        }
        if st.adc_noise {
            let n = self.noise(tape, s, NoiseKind::Quantization, &[], &mut noise, |f| {
                &f.adc
            })?;
            s = self.inject(tape, s, n.as_ref())?;
            realized.adc = n;
        }
        Ok(ChannelOutput {
            signal: s,
            noise: realized,
        })
    }

    /// Forward pass over `blocks` serialized blocks of `block_len` samples,
    /// returning the central block (`[rows, block_len]`) and the noise used.
    pub fn forward_center(
        &self,
        tape: &mut Tape,
        x: Var,
        blocks: usize,
        distances_km: &[f64],
        noise: NoiseSource<'_>,
    ) -> Result<(Var, FrozenNoise)> {
        if blocks.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "number of blocks must be odd, got {blocks}"
            )));
        }
        if !self.seq_len.is_multiple_of(blocks) {
            return Err(Error::Shape(format!(
                "sequence of {} samples is not {blocks} equal blocks",
                self.seq_len
            )));
        }
        let block_len = self.seq_len / blocks;
        let out = self.forward(tape, x, distances_km, noise)?;
        let center = tape.slice_cols(out.signal, (blocks / 2) * block_len, block_len)?;
        Ok((center, out.noise))
    }

    fn lowpass(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.real_filter(x, self.lpf.clone())
    }

    fn dispersion(&self, distances_km: &[f64], rows: usize) -> Result<Tensor> {
        let len = 2 * self.seq_len;
        let kernel = |d: f64| {
            dispersion_kernel(
                d * 1e3,
                self.seq_len,
                self.cfg.zero_pad_factor,
                self.beta2,
                self.cfg.sample_rate,
            )
        };
        let all_equal = distances_km.windows(2).all(|w| w[0] == w[1]);
        if all_equal {
            return Tensor::complex(&[len], kernel(distances_km[0]));
        }
        let mut data = Vec::with_capacity(rows * len);
        for &d in distances_km {
            data.extend(kernel(d));
        }
        Tensor::complex(&[rows, len], data)
    }

    fn noise(
        &self,
        tape: &Tape,
        x: Var,
        kind: NoiseKind,
        snr_db: &[f64],
        source: &mut NoiseSource<'_>,
        frozen: impl Fn(&FrozenNoise) -> &Option<Tensor>,
    ) -> Result<Option<Tensor>> {
        let rng = match source {
            NoiseSource::Off => return Ok(None),
            NoiseSource::Frozen(f) => return Ok(frozen(f).clone()),
            NoiseSource::Random(rng) => &mut **rng,
        };
        let xv = tape.value(x);
        let cols = xv.cols();
        let mut data = Vec::with_capacity(xv.len());
        for (r, row) in xv.re().chunks(cols).enumerate() {
            match kind {
                NoiseKind::Quantization => {
                    if self.cfg.enob.is_finite() {
                        data.extend(quantization_noise(row, self.cfg.enob, rng));
                    } else {
                        data.extend(std::iter::repeat_n(0.0, cols));
                    }
                }
                NoiseKind::Receiver => {
                    let snr = if snr_db.len() == 1 {
                        snr_db[0]
                    } else {
                        snr_db[r]
                    };
                    data.extend(gaussian_noise(row, snr, rng));
                }
            }
        }
        Ok(Some(Tensor::real(xv.shape(), data)?))
    }

    fn inject(&self, tape: &mut Tape, x: Var, noise: Option<&Tensor>) -> Result<Var> {
        match noise {
            Some(n) => tape.add_noise(x, n),
            None => Ok(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamId};

    const FS: f64 = 336e9;

    fn rng(i: u64) -> SimRng {
        StreamId::new(42, Purpose::Test, i).rng(0)
    }

    fn random_drive(len: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..len).map(|_| r.random_range(0.0..0.7)).collect()
    }

    fn tone(len: usize, k: usize) -> Vec<f64> {
        (0..len)
            .map(|t| (2.0 * PI * (k * t) as f64 / len as f64).cos())
            .collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn beta2_for_standard_fiber() {
        // 17e-6 s/m² · (1550e-9 m)² / (2π · 299792458 m/s)
        let b2 = beta2_from_d(17.0, 1550e-9);
        assert!((b2 / -2.168e-26 - 1.0).abs() < 1e-3, "{b2}");
    }

    #[test]
    fn lowpass_keeps_passband_and_removes_stopband() {
        // 528-point grid: bin k is k · 636.36 MHz
        let inband = tone(528, 44); // 28 GHz
        let out = lowpass_brickwall(&inband, 32e9, FS);
        assert!(max_diff(&inband, &out) < 1e-12);
        let stop = tone(528, 66); // 42 GHz
        let out = lowpass_brickwall(&stop, 32e9, FS);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        // edge bin 32 GHz = 50.28 bins is not on the grid; bin 50 passes, 51 does not
        assert_eq!(lowpass_mask(528, 32e9, FS)[50], 1.0);
        assert_eq!(lowpass_mask(528, 32e9, FS)[51], 0.0);
        assert_eq!(lowpass_mask(528, 32e9, FS)[528 - 50], 1.0);
    }

    #[test]
    fn lowpass_is_idempotent() {
        let x = random_drive(528, 1);
        let once = lowpass_brickwall(&x, 32e9, FS);
        let twice = lowpass_brickwall(&once, 32e9, FS);
        assert!(max_diff(&once, &twice) < 1e-10);
    }

    #[test]
    fn quantization_variance_formula() {
        // 3 · 10^(-(6.02·6 + 1.76)/10) = 3 · 10^-3.788
        assert!((quantization_noise_variance(1.0, 6.0) - 4.888e-4).abs() < 1e-6);
        assert_eq!(quantization_noise_variance(0.0, 6.0), 0.0);
    }

    #[test]
    fn quantization_noise_matches_variance() {
        let x = vec![0.5; 1_000_000];
        let n = quantization_noise(&x, 6.0, &mut rng(2));
        let var = mean_square(&n);
        let target = quantization_noise_variance(0.25, 6.0);
        assert!((var / target - 1.0).abs() < 0.02, "{var} vs {target}");
        let bound = (3.0 * target).sqrt();
        assert!(n.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn receiver_noise_hits_target_snr() {
        let x = random_drive(1_000_000, 3);
        for snr in [19.41, 6.83] {
            let n = gaussian_noise(&x, snr, &mut rng(4));
            let measured = 10.0 * (mean_square(&x) / mean_square(&n)).log10();
            assert!((measured - snr).abs() < 0.1, "{measured} vs {snr}");
        }
    }

    #[test]
    fn snr_table_interpolates_and_clamps() {
        let t = SnrTable::measured();
        assert_eq!(t.at(20.0), 19.41);
        assert!((t.at(30.0) - 13.12).abs() < 1e-12);
        assert_eq!(t.at(5.0), 19.41);
        assert_eq!(t.at(100.0), 3.73);
        assert!((t.shifted(-2.0).at(40.0) - 4.83).abs() < 1e-12);
        assert!(SnrTable::new(vec![(40.0, 1.0), (20.0, 2.0)]).is_err());
    }

    #[test]
    fn dispersion_is_pure_phase_and_unitary() {
        let beta2 = beta2_from_d(17.0, 1550e-9);
        let grid = FrequencyGrid::new(2640, FS);
        let h = dispersion_transfer(40e3, &grid, beta2);
        assert!(h.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        let field = OpticalField::from_real(&mzm(&random_drive(528, 5)), FS);
        let out = propagate_padded(&field, 40e3, beta2, 5);
        assert!((out.energy() / field.energy() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dispersion_composes_over_distance() {
        let beta2 = beta2_from_d(17.0, 1550e-9);
        let field = OpticalField::from_real(&mzm(&random_drive(528, 6)), FS);
        let a = propagate_padded(&propagate_padded(&field, 15e3, beta2, 5), 25e3, beta2, 1);
        let b = propagate_padded(&field, 40e3, beta2, 5);
        let err = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn short_kernel_matches_padded_propagation() {
        let beta2 = beta2_from_d(17.0, 1550e-9);
        for (len, pad, z) in [(528, 5, 20e3), (528, 5, 80e3), (96, 3, 35e3), (48, 1, 10e3)] {
            let field = OpticalField::from_real(&mzm(&random_drive(len, 7)), FS);
            let reference = propagate_fiber(&field, z, beta2, pad);
            let g = dispersion_kernel(z, len, pad, beta2, FS);
            let mut x = field.samples.clone();
            x.resize(2 * len, Complex64::new(0.0, 0.0));
            let spec: Vec<Complex64> = fft::dft(&x).iter().zip(&g).map(|(a, b)| a * b).collect();
            let y = fft::idft(&spec);
            let err = y[len - 1..2 * len - 1]
                .iter()
                .zip(&reference.samples)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "len {len} pad {pad}: {err}");
        }
    }

    #[test]
    fn zero_distance_is_identity() {
        let field = OpticalField::from_real(&random_drive(528, 8), FS);
        let out = propagate_fiber(&field, 0.0, beta2_from_d(17.0, 1550e-9), 5);
        let err = out
            .samples
            .iter()
            .zip(&field.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    fn noiseless() -> ChannelConfig {
        let mut cfg = ChannelConfig::default();
        cfg.stages = cfg.stages.noiseless();
        cfg
    }

    fn run_tape(cfg: &ChannelConfig, x: &[f64], rows: usize, distance: f64) -> Vec<f64> {
        let len = x.len() / rows;
        let ch = Channel::new(cfg, len).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::matrix(rows, len, x.to_vec()).unwrap());
        let out = ch
            .forward(&mut tape, v, &[distance], NoiseSource::Off)
            .unwrap();
        tape.value(out.signal).re().to_vec()
    }

    #[test]
    fn tape_channel_matches_stage_composition() {
        let cfg = noiseless();
        let x = random_drive(528, 9);
        let got = run_tape(&cfg, &x, 1, 30.0);
        let s = lowpass_brickwall(&x, cfg.lpf_bandwidth, FS);
        let field = OpticalField::from_real(&mzm(&s), FS);
        let field = propagate_fiber(&field, 30e3, cfg.beta2(), cfg.zero_pad_factor);
        let want = lowpass_brickwall(&photodiode(&field), cfg.lpf_bandwidth, FS);
        assert!(max_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn per_row_distances_match_single_distance_runs() {
        let cfg = noiseless();
        let x = random_drive(2 * 528, 10);
        let ch = Channel::new(&cfg, 528).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::matrix(2, 528, x.clone()).unwrap());
        let out = ch
            .forward(&mut tape, v, &[10.0, 50.0], NoiseSource::Off)
            .unwrap();
        let both = tape.value(out.signal).re().to_vec();
        assert!(max_diff(&both[..528], &run_tape(&cfg, &x[..528], 1, 10.0)) < 1e-13);
        assert!(max_diff(&both[528..], &run_tape(&cfg, &x[528..], 1, 50.0)) < 1e-13);
    }

    #[test]
    fn constant_drive_detects_as_sin_squared() {
        let cfg = noiseless();
        let c = 0.4;
        let out = run_tape(&cfg, &[c; 528], 1, 0.0);
        let want = c.sin().powi(2);
        assert!(out.iter().all(|v| (v - want).abs() < 1e-12));
    }

    #[test]
    fn frozen_noise_replays_exactly() {
        let cfg = ChannelConfig::default();
        let x = random_drive(3 * 528, 11);
        let ch = Channel::new(&cfg, 528).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::matrix(3, 528, x.clone()).unwrap());
        let mut r = rng(12);
        let first = ch
            .forward(&mut tape, v, &[20.0], NoiseSource::Random(&mut r))
            .unwrap();
        let a = tape.value(first.signal).re().to_vec();
        let mut tape2 = Tape::new();
        let v2 = tape2.constant(Tensor::matrix(3, 528, x).unwrap());
        let again = ch
            .forward(&mut tape2, v2, &[20.0], NoiseSource::Frozen(&first.noise))
            .unwrap();
        assert_eq!(a, tape2.value(again.signal).re());
        assert!(first.noise.dac.is_some() && first.noise.rx.is_some() && first.noise.adc.is_some());
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::default().validate().is_ok());
        let mut c = ChannelConfig::default();
        c.lpf_bandwidth = 200e9;
        assert!(c.validate().is_err());
        let mut c = ChannelConfig::default();
        c.zero_pad_factor = 0;
        assert!(c.validate().is_err());
        assert!(Channel::new(&ChannelConfig::default(), 528).is_ok());
    }
}
