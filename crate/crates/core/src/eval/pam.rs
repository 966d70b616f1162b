//! PAM2/PAM4 reference transmitters with raised-cosine pulses.
//!
//! Six bits per block: PAM2 sends them as six on-off symbols, PAM4 encodes
//! them as three GF(4) symbols with the [6,3,4] hexacode and sends the six
//! code symbols. Pulses are raised cosines at 2 samples per symbol, brought
//! to the simulation rate by ideal band-limited interpolation, which is the
//! same as sampling the continuous pulse at the final rate.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::transceiver::ModelConfig;

pub const PAM2_LEVELS: [f64; 2] = [0.0, FRAC_PI_4];
pub const PAM4_LEVELS: [f64; 4] = [0.0, PI / 12.0, PI / 6.0, FRAC_PI_4];

/// Samples per symbol before the final oversampling.
pub const BASE_SAMPLES_PER_SYMBOL: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PamOrder {
    Pam2,
    Pam4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PamFormat {
    pub order: PamOrder,
    pub rolloff: f64,
}

impl PamFormat {
    pub fn pam2() -> Self {
        Self {
            order: PamOrder::Pam2,
            rolloff: 0.25,
        }
    }

    pub fn pam4() -> Self {
        Self {
            order: PamOrder::Pam4,
            rolloff: 0.25,
        }
    }

    pub fn levels(&self) -> &'static [f64] {
        match self.order {
            PamOrder::Pam2 => &PAM2_LEVELS,
            PamOrder::Pam4 => &PAM4_LEVELS,
        }
    }

    /// Symbols carried by one block of `bits` information bits.
    pub fn symbols_per_block(&self, bits: usize) -> usize {
        match self.order {
            PamOrder::Pam2 => bits,
            PamOrder::Pam4 => 6,
        }
    }

    /// Checks the format against a model configuration and returns the
    /// samples per symbol at the simulation rate.
    pub fn samples_per_symbol(&self, cfg: &ModelConfig) -> Result<usize> {
        let bits = cfg.bits_per_symbol();
        if self.order == PamOrder::Pam4 && bits != 6 {
            return Err(Error::Config(format!(
                "PAM4 with the hexacode carries 6 bits per block, model has {bits}"
            )));
        }
        let symbols = self.symbols_per_block(bits);
        let sps = BASE_SAMPLES_PER_SYMBOL * cfg.oversampling;
        if symbols * sps != cfg.block_len {
            return Err(Error::Config(format!(
                "{symbols} symbols at {sps} samples each do not fill a block of {}",
                cfg.block_len
            )));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!(
                "roll-off {} outside [0, 1]",
                self.rolloff
            )));
        }
        Ok(sps)
    }

    /// Level indices of the symbols carrying one block of bits.
    pub fn block_symbols(&self, bits: &[u8]) -> Vec<usize> {
        match self.order {
            PamOrder::Pam2 => bits.iter().map(|&b| b as usize).collect(),
            PamOrder::Pam4 => {
                let info = bits_to_gf4(bits);
                hexacode_encode(info)
                    .iter()
                    .map(|&s| GF4_TO_LEVEL[s as usize])
                    .collect()
            }
        }
    }

    /// Bits recovered from hard symbol decisions of one block.
    pub fn block_bits(&self, levels: &[usize]) -> Vec<u8> {
        match self.order {
            PamOrder::Pam2 => levels.iter().map(|&l| l as u8).collect(),
            PamOrder::Pam4 => {
                let word: Vec<u8> = levels.iter().map(|&l| LEVEL_TO_GF4[l]).collect();
                gf4_to_bits(hexacode_decode(&word))
            }
        }
    }
}

/// Raised-cosine impulse response at `t` symbol periods.
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let sinc = if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    };
    let denom = 1.0 - (2.0 * rolloff * t).powi(2);
    if denom.abs() < 1e-10 {
        // removable singularity at |t| = 1/(2β)
        return FRAC_PI_4 * sinc_at(1.0 / (2.0 * rolloff));
    }
    sinc * (PI * rolloff * t).cos() / denom
}

fn sinc_at(t: f64) -> f64 {
    (PI * t).sin() / (PI * t)
}

/// Waveform for `bits` spanning whole blocks, `blocks · n` samples.
///
/// Symbol `k` peaks at sample `k·sps + sps/2`, centering each block's
/// symbols inside the block.
pub fn pam_modulate(bits: &[u8], format: PamFormat, cfg: &ModelConfig) -> Result<Vec<f64>> {
    let sps = format.samples_per_symbol(cfg)?;
    let per_block = cfg.bits_per_symbol();
    if bits.is_empty() || !bits.len().is_multiple_of(per_block) {
        return Err(Error::Config(format!(
            "PAM block needs {per_block} bits per block, got {} bits",
            bits.len()
        )));
    }
    let levels = format.levels();
    let amplitudes: Vec<f64> = bits
        .chunks(per_block)
        .flat_map(|b| format.block_symbols(b))
        .map(|l| levels[l])
        .collect();
    Ok(shape_pulses(&amplitudes, sps, format.rolloff))
}

/// Sum of raised-cosine pulses, one per amplitude, at `sps` samples per symbol.
pub fn shape_pulses(amplitudes: &[f64], sps: usize, rolloff: f64) -> Vec<f64> {
    let len = amplitudes.len() * sps;
    let offset = sps as f64 / 2.0;
    // pulse[d + len] is the pulse `d` samples after a symbol's block start
    let pulse: Vec<f64> = (0..2 * len)
        .map(|j| raised_cosine((j as f64 - len as f64 - offset) / sps as f64, rolloff))
        .collect();
    let mut out = vec![0.0; len];
    for (k, &a) in amplitudes.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let base = len - k * sps;
        for (i, o) in out.iter_mut().enumerate() {
            *o += a * pulse[base + i];
        }
    }
    out
}

// GF(4) = {0, 1, ω, ω²} encoded as 0, 1, 2, 3 in the polynomial basis
// (ω = x, ω² = x + 1). Addition is XOR.
const GF4_MUL: [[u8; 4]; 4] = [[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]];

pub fn gf4_mul(a: u8, b: u8) -> u8 {
    GF4_MUL[a as usize][b as usize]
}

pub fn gf4_add(a: u8, b: u8) -> u8 {
    a ^ b
}

// Gray labeling: adjacent levels differ in one bit of the 2-bit label.
const GF4_TO_LEVEL: [usize; 4] = [0, 1, 3, 2];
const LEVEL_TO_GF4: [u8; 4] = [0, 1, 3, 2];

/// Hexacode generator rows: `(a, b, c) ↦ (a, b, c, φ(1), φ(ω), φ(ω²))`
/// with `φ(x) = a·x² + b·x + c`.
pub const HEXACODE_GENERATOR: [[u8; 6]; 3] =
    [[1, 0, 0, 1, 3, 2], [0, 1, 0, 1, 2, 3], [0, 0, 1, 1, 1, 1]];

pub fn hexacode_encode(info: [u8; 3]) -> [u8; 6] {
    let mut word = [0u8; 6];
    for (row, &coef) in HEXACODE_GENERATOR.iter().zip(&info) {
        for (w, &g) in word.iter_mut().zip(row) {
            *w = gf4_add(*w, gf4_mul(coef, g));
        }
    }
    word
}

/// All 64 codewords, indexed by `16·a + 4·b + c`.
pub fn hexacode_codebook() -> Vec<[u8; 6]> {
    (0..64u8)
        .map(|i| hexacode_encode([i >> 4, (i >> 2) & 3, i & 3]))
        .collect()
}

/// Information symbols of the codeword nearest in Hamming distance; ties
/// go to the lowest codeword index.
pub fn hexacode_decode(word: &[u8]) -> [u8; 3] {
    let best = hexacode_codebook()
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (hamming(*c, word), *i))
        .map(|(i, _)| i as u8)
        .unwrap_or(0);
    [best >> 4, (best >> 2) & 3, best & 3]
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn bits_to_gf4(bits: &[u8]) -> [u8; 3] {
    let mut s = [0u8; 3];
    for (i, pair) in bits.chunks(2).take(3).enumerate() {
        s[i] = (pair[0] << 1) | pair[1];
    }
    s
}

fn gf4_to_bits(s: [u8; 3]) -> Vec<u8> {
    s.iter().flat_map(|&v| [v >> 1, v & 1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hexacode_minimum_distance_is_four() {
        let book = hexacode_codebook();
        assert_eq!(book.len(), 64);
        let mut min = usize::MAX;
        for i in 0..64 {
            for j in i + 1..64 {
                min = min.min(hamming(&book[i], &book[j]));
            }
        }
        assert_eq!(min, 4);
    }

    #[test]
    fn hexacode_decodes_single_errors() {
        for (i, c) in hexacode_codebook().iter().enumerate() {
            let info = [(i >> 4) as u8, ((i >> 2) & 3) as u8, (i & 3) as u8];
            assert_eq!(hexacode_decode(c), info);
            let mut w = *c;
            w[i % 6] ^= 1 + (i % 3) as u8;
            assert_eq!(hexacode_decode(&w), info);
        }
    }

    #[test]
    fn gf4_is_a_field() {
        for a in 1..4u8 {
            assert_eq!((1..4u8).filter(|&b| gf4_mul(a, b) == 1).count(), 1);
        }
        // ω² = ω + 1
        assert_eq!(gf4_mul(2, 2), gf4_add(2, 1));
    }

    #[test]
    fn pam_bits_roundtrip() {
        for f in [PamFormat::pam2(), PamFormat::pam4()] {
            for v in 0..64u8 {
                let bits: Vec<u8> = (0..6).rev().map(|k| (v >> k) & 1).collect();
                let sym = f.block_symbols(&bits);
                assert_eq!(sym.len(), 6);
                assert_eq!(f.block_bits(&sym), bits);
            }
        }
    }

    #[test]
    fn all_zero_pam2_is_silent() {
        let cfg = ModelConfig::default();
        let wave = pam_modulate(&[0; 66], PamFormat::pam2(), &cfg).unwrap();
        assert_eq!(wave.len(), 528);
        assert!(wave.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pulses_hit_levels_at_symbol_centers() {
        let cfg = ModelConfig::default();
        let bits: Vec<u8> = (0..66).map(|i| ((i * 7 + 3) % 5 % 2) as u8).collect();
        let wave = pam_modulate(&bits, PamFormat::pam2(), &cfg).unwrap();
        for (k, &b) in bits.iter().enumerate() {
            assert!((wave[8 * k + 4] - PAM2_LEVELS[b as usize]).abs() < 1e-12);
        }
        assert!(pam_modulate(&bits[..65], PamFormat::pam2(), &cfg).is_err());
    }

    #[test]
    fn raised_cosine_is_nyquist() {
        for beta in [0.25, 0.4, 0.99] {
            assert_eq!(raised_cosine(0.0, beta), 1.0);
            for k in 1..6 {
                assert!(raised_cosine(k as f64, beta).abs() < 1e-12);
            }
            let t = 1.0 / (2.0 * beta);
            let near = raised_cosine(t + 1e-7, beta);
            assert!((raised_cosine(t, beta) - near).abs() < 1e-5);
        }
    }
}
