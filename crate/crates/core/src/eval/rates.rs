//! Monte-Carlo block and bit error rates.

use std::io::Write;
use std::thread;

use crate::channel::{Channel, ChannelConfig};
use crate::error::{Error, Result};
use crate::link::{center_labels, Link};
use crate::rng::{Purpose, StreamId};
use crate::transceiver::{count_bit_errors, Message};

/// Sequences simulated per random chunk. Each chunk draws from its own
/// generator, so results do not depend on how chunks are spread over threads.
pub const EVAL_CHUNK: usize = 250;

pub const SWEEP_HEADER: &str = "distance_km,bler,ber,ber_lower_bound,num_blocks,seed";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub distance_km: f64,
    pub bler: f64,
    pub ber: f64,
    /// Every block error costs at least one bit: `bler / log2 M`.
    pub ber_lower_bound: f64,
    pub num_blocks: u64,
    pub seed: u64,
}

impl SweepRecord {
    pub fn block_errors(&self) -> u64 {
        (self.bler * self.num_blocks as f64).round() as u64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            fmt17(self.distance_km),
            fmt17(self.bler),
            fmt17(self.ber),
            fmt17(self.ber_lower_bound),
            self.num_blocks,
            self.seed
        )
    }
}

/// Float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sent and decided central messages of a Monte-Carlo run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decisions {
    pub sent: Vec<Message>,
    pub decided: Vec<Message>,
}

impl Decisions {
    pub fn block_errors(&self) -> u64 {
        self.sent
            .iter()
            .zip(&self.decided)
            .filter(|(a, b)| a != b)
            .count() as u64
    }

    pub fn bit_errors(&self, messages: usize) -> u64 {
        self.sent
            .iter()
            .zip(&self.decided)
            .map(|(&a, &b)| count_bit_errors(a, b, messages) as u64)
            .sum()
    }

    pub fn record(&self, messages: usize, distance_km: f64, seed: u64) -> SweepRecord {
        let n = self.sent.len() as u64;
        let bits = messages.trailing_zeros() as f64;
        let bler = self.block_errors() as f64 / n as f64;
        SweepRecord {
            distance_km,
            bler,
            ber: self.bit_errors(messages) as f64 / (n as f64 * bits),
            ber_lower_bound: bler / bits,
            num_blocks: n,
            seed,
        }
    }
}

/// Simulates `num_blocks` independent sequences at a fixed distance.
///
/// Chunk `c` uses `stream.rng(c)` for both messages and noise.
pub fn run_link(
    link: &Link,
    channel: &Channel,
    distance_km: f64,
    num_blocks: usize,
    stream: StreamId,
    threads: usize,
) -> Result<Decisions> {
    if num_blocks == 0 {
        return Err(Error::Config("num_blocks must be at least 1".into()));
    }
    let chunks = num_blocks.div_ceil(EVAL_CHUNK);
    let run_chunk = |c: usize| -> Result<Decisions> {
        let rows = EVAL_CHUNK.min(num_blocks - c * EVAL_CHUNK);
        let mut rng = stream.rng(c as u64);
        let msgs = link.sample_messages(&mut rng, rows);
        let decided = link.decide_batch(channel, &msgs, &[distance_km], &mut rng)?;
        Ok(Decisions {
            sent: center_labels(&msgs, link.model.blocks),
            decided,
        })
    };
    let threads = threads.clamp(1, chunks);
    let parts: Vec<Result<Decisions>> = if threads == 1 {
        (0..chunks).map(run_chunk).collect()
    } else {
        let mut slots: Vec<Option<Result<Decisions>>> = (0..chunks).map(|_| None).collect();
        thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let run_chunk = &run_chunk;
                    s.spawn(move || {
                        (t..chunks)
                            .step_by(threads)
                            .map(|c| (c, run_chunk(c)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (c, r) in h.join().expect("evaluation thread panicked") {
                    slots[c] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("chunk ran")).collect()
    };
    let mut out = Decisions::default();
    for p in parts {
        let p = p?;
        out.sent.extend(p.sent);
        out.decided.extend(p.decided);
    }
    Ok(out)
}

pub fn estimate_rates(
    link: &Link,
    channel_cfg: &ChannelConfig,
    distance_km: f64,
    num_blocks: usize,
    stream: StreamId,
) -> Result<SweepRecord> {
    let channel = Channel::new(channel_cfg, link.model.seq_len())?;
    let d = run_link(link, &channel, distance_km, num_blocks, stream, 1)?;
    Ok(d.record(link.model.messages, distance_km, stream.seed))
}

/// One record per distance; distance `i` uses test stream `i` of `seed`.
pub fn distance_sweep(
    link: &Link,
    channel_cfg: &ChannelConfig,
    distances_km: &[f64],
    num_blocks: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<SweepRecord>> {
    let channel = Channel::new(channel_cfg, link.model.seq_len())?;
    distances_km
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let stream = StreamId::new(seed, Purpose::Test, i as u64);
            let dec = run_link(link, &channel, d, num_blocks, stream, threads)?;
            Ok(dec.record(link.model.messages, d, seed))
        })
        .collect()
}

pub fn write_sweep_csv(records: &[SweepRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Wilson score interval for `errors` out of `trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Contiguous runs of sweep distances whose BER is below `threshold`; the
/// widest run as `(first, last)` distance, if any.
pub fn widest_span_below(records: &[SweepRecord], threshold: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut start: Option<usize> = None;
    for i in 0..=records.len() {
        let below = i < records.len() && records[i].ber < threshold;
        match (below, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let span = (records[s].distance_km, records[i - 1].distance_km);
                if best.is_none_or(|b| span.1 - span.0 > b.1 - b.0) {
                    best = Some(span);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(i: usize) -> Message {
        Message::new(i, 64).unwrap()
    }

    #[test]
    fn rates_from_decisions() {
        let d = Decisions {
            sent: vec![m(1), m(2), m(3), m(4)],
            decided: vec![m(1), m(3), m(3), m(1)],
        };
        // 2 vs 3: Gray 000001 vs 000011 -> 1 bit; 4 vs 1: 000010 vs 000000 -> 1 bit
        let r = d.record(64, 20.0, 9);
        assert_eq!(r.bler, 0.5);
        assert_eq!(r.ber, 2.0 / 24.0);
        assert_eq!(r.ber_lower_bound, 0.5 / 6.0);
        assert!(r.ber_lower_bound <= r.ber && r.ber <= r.bler);
    }

    #[test]
    fn lower_bound_example() {
        let bler: f64 = 6e-3;
        assert!((bler / 6.0 - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(10, 1000, Z95);
        assert!(lo < 0.01 && 0.01 < hi);
        let (lo0, hi0) = wilson_interval(0, 1000, Z95);
        assert!(lo0 < 1e-12);
        assert!(hi0 > 0.0 && hi0 < 0.004);
    }

    #[test]
    fn widest_span() {
        let rec = |d: f64, ber: f64| SweepRecord {
            distance_km: d,
            bler: ber,
            ber,
            ber_lower_bound: ber / 6.0,
            num_blocks: 1,
            seed: 0,
        };
        let r = vec![
            rec(10.0, 0.1),
            rec(20.0, 1e-3),
            rec(30.0, 1e-4),
            rec(40.0, 0.1),
            rec(50.0, 1e-3),
        ];
        assert_eq!(widest_span_below(&r, 4e-3), Some((20.0, 30.0)));
        assert_eq!(widest_span_below(&r[..1], 4e-3), None);
    }

    #[test]
    fn csv_uses_17_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    }
}
