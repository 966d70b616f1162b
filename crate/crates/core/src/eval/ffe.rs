//! Fractionally spaced linear feed-forward equalizer.
//!
//! The symbol estimate at sample `c` is `b + Σ_j w_j · r[c + (j - K/2)·s]`
//! for `K` taps spaced `s` samples apart (zero outside the sequence). Taps
//! and bias are fitted once by ridge-regularized least squares against known
//! pilot symbols; decisions pick the nearest expected level.

use crate::error::{Error, Result};

/// Ridge weight relative to the mean diagonal of the normal equations.
pub const FFE_RIDGE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Ffe {
    pub taps: Vec<f64>,
    pub bias: f64,
    /// Samples between adjacent taps.
    pub spacing: usize,
    /// Expected equalizer output for each level, indexed like the levels.
    pub levels: Vec<f64>,
}

/// One pilot observation: a received sequence, the sample index of the
/// symbol center and the desired equalizer output there.
pub struct Pilot<'a> {
    pub signal: &'a [f64],
    pub center: usize,
    pub target: f64,
}

impl Ffe {
    /// Least-squares fit of `taps` coefficients plus bias.
    pub fn fit<'a>(
        taps: usize,
        spacing: usize,
        levels: Vec<f64>,
        pilots: impl IntoIterator<Item = Pilot<'a>>,
    ) -> Result<Self> {
        if taps.is_multiple_of(2) || spacing == 0 {
            return Err(Error::Config(format!(
                "FFE needs an odd tap count and positive spacing, got {taps} taps, spacing {spacing}"
            )));
        }
        if levels.is_empty() {
            return Err(Error::Config(
                "FFE needs at least one decision level".into(),
            ));
        }
        let dim = taps + 1;
        let mut ata = vec![0.0; dim * dim];
        let mut atb = vec![0.0; dim];
        let mut count = 0usize;
        let mut feat = vec![0.0; dim];
        for p in pilots {
            features(p.signal, p.center, taps, spacing, &mut feat);
            for i in 0..dim {
                atb[i] += feat[i] * p.target;
                for j in 0..dim {
                    ata[i * dim + j] += feat[i] * feat[j];
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Config("FFE fit needs pilot symbols".into()));
        }
        let trace: f64 = (0..dim).map(|i| ata[i * dim + i]).sum();
        let ridge = FFE_RIDGE * trace / dim as f64;
        for i in 0..dim {
            ata[i * dim + i] += ridge;
        }
        let w = solve(ata, atb, dim)?;
        Ok(Self {
            taps: w[..taps].to_vec(),
            bias: w[taps],
            spacing,
            levels,
        })
    }

    pub fn estimate(&self, signal: &[f64], center: usize) -> f64 {
        let half = self.taps.len() / 2;
        let mut y = self.bias;
        for (j, w) in self.taps.iter().enumerate() {
            let pos = center as isize + (j as isize - half as isize) * self.spacing as isize;
            if pos >= 0 && (pos as usize) < signal.len() {
                y += w * signal[pos as usize];
            }
        }
        y
    }

    /// Index of the level nearest to the equalized sample.
    pub fn decide(&self, signal: &[f64], center: usize) -> usize {
        let y = self.estimate(signal, center);
        let mut best = 0;
        for (i, l) in self.levels.iter().enumerate() {
            if (y - l).abs() < (y - self.levels[best]).abs() {
                best = i;
            }
        }
        best
    }
}

fn features(signal: &[f64], center: usize, taps: usize, spacing: usize, out: &mut [f64]) {
    let half = taps / 2;
    for (j, f) in out[..taps].iter_mut().enumerate() {
        let pos = center as isize + (j as isize - half as isize) * spacing as isize;
        *f = if pos >= 0 && (pos as usize) < signal.len() {
            signal[pos as usize]
        } else {
            0.0
        };
    }
    out[taps] = 1.0;
}

/// Gaussian elimination with partial pivoting on a dense `dim × dim` system.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, dim: usize) -> Result<Vec<f64>> {
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&i, &j| a[i * dim + col].abs().total_cmp(&a[j * dim + col].abs()))
            .unwrap_or(col);
        if a[pivot * dim + col].abs() < f64::MIN_POSITIVE {
            return Err(Error::Config("FFE normal equations are singular".into()));
        }
        if pivot != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot * dim + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..dim {
            let f = a[row * dim + col] / a[col * dim + col];
            if f == 0.0 {
                continue;
            }
            for k in col..dim {
                a[row * dim + k] -= f * a[col * dim + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; dim];
    for row in (0..dim).rev() {
        let s: f64 = (row + 1..dim).map(|k| a[row * dim + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * dim + row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::pam::shape_pulses;
    use rand::{Rng, SeedableRng};

    const SPS: usize = 8;

    fn random_symbols(len: usize, seed: u64) -> Vec<usize> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(0..4)).collect()
    }

    fn fit_on(signal: &[f64], symbols: &[usize], levels: &[f64]) -> Ffe {
        let pilots = symbols.iter().enumerate().map(|(k, &s)| Pilot {
            signal,
            center: k * SPS + SPS / 2,
            target: levels[s],
        });
        Ffe::fit(13, SPS / 2, levels.to_vec(), pilots).unwrap()
    }

    fn ser(ffe: &Ffe, signal: &[f64], symbols: &[usize]) -> usize {
        symbols
            .iter()
            .enumerate()
            .filter(|(k, &s)| ffe.decide(signal, k * SPS + SPS / 2) != s)
            .count()
    }

    #[test]
    fn distortion_free_channel_gives_delta() {
        let levels = [0.0, 1.0, 2.0, 3.0];
        let sym = random_symbols(2000, 1);
        let amps: Vec<f64> = sym.iter().map(|&s| levels[s]).collect();
        let signal = shape_pulses(&amps, SPS, 0.25);
        let ffe = fit_on(&signal, &sym, &levels);
        // T/2 samples of a band-limited signal make the normal equations
        // nearly singular; the ridge leaves ~1e-4 residue off the delta.
        assert!((ffe.taps[6] - 1.0).abs() < 1e-3, "{:?}", ffe.taps);
        for (j, w) in ffe.taps.iter().enumerate() {
            if j != 6 {
                assert!(w.abs() < 1e-3, "tap {j} = {w}");
            }
        }
        assert!(ffe.bias.abs() < 1e-3);
        assert_eq!(ser(&ffe, &signal, &sym), 0);
    }

    #[test]
    fn scaled_channel_recovers_gain() {
        let levels = [0.0, 1.0, 2.0, 3.0];
        let sym = random_symbols(2000, 2);
        let amps: Vec<f64> = sym.iter().map(|&s| 0.5 * levels[s]).collect();
        let signal = shape_pulses(&amps, SPS, 0.25);
        let ffe = fit_on(&signal, &sym, &levels);
        assert!((ffe.taps[6] - 2.0).abs() < 2e-3, "{:?}", ffe.taps);
        assert_eq!(ser(&ffe, &signal, &sym), 0);
    }

    #[test]
    fn short_linear_isi_is_removed() {
        // r = x + 0.4·x delayed by one symbol; the inverse has a decaying
        // tail that 13 half-symbol taps cover well enough for SER 0.
        let levels = [0.0, 1.0, 2.0, 3.0];
        let sym = random_symbols(3000, 3);
        let amps: Vec<f64> = sym.iter().map(|&s| levels[s]).collect();
        let clean = shape_pulses(&amps, SPS, 0.25);
        let signal: Vec<f64> = (0..clean.len())
            .map(|i| clean[i] + if i >= SPS { 0.4 * clean[i - SPS] } else { 0.0 })
            .collect();
        let ffe = fit_on(&signal, &sym, &levels);
        assert_eq!(ser(&ffe, &signal, &sym), 0);
    }

    #[test]
    fn rejects_even_taps() {
        assert!(Ffe::fit(12, 4, vec![0.0], std::iter::empty()).is_err());
    }

    #[test]
    fn solver_matches_known_system() {
        let x = solve(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }
}
