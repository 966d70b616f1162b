//! Fixed-distance versus distance-randomized training at the same budget.
//!
//! Each sequence of a batch gets its own distance drawn from N(μ, σ²); the
//! widest run of distances below the hard-decision FEC threshold is
//! compared for σ = 0 and the given σ.
//!
//! cargo run --release --example robust_training -- [iterations] [mean_km] [std_km] [seed]

use std::env;

use imdd_e2e::channel::ChannelConfig;
use imdd_e2e::eval::rates::{distance_sweep, widest_span_below};
use imdd_e2e::link::Link;
use imdd_e2e::training::{train, TrainConfig};
use imdd_e2e::transceiver::ModelConfig;

const FEC_THRESHOLD: f64 = 4e-3;

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let iterations = args
        .first()
        .map_or(Ok(5000), |s| s.parse())
        .expect("iterations");
    let mean: f64 = args.get(1).map_or(Ok(40.0), |s| s.parse()).expect("mean");
    let std: f64 = args.get(2).map_or(Ok(4.0), |s| s.parse()).expect("std");
    let seed = args.get(3).map_or(Ok(1), |s| s.parse()).expect("seed");

    let model = ModelConfig::default();
    let channel = ChannelConfig::default();
    let distances: Vec<f64> = (0..=40).map(|k| mean - 20.0 + k as f64).collect();
    for sigma in [0.0, std] {
        let cfg = TrainConfig {
            iterations,
            validation_interval: iterations,
            validation_size: 5000,
            distance_mean_km: mean,
            distance_std_km: sigma,
            seed,
            ..TrainConfig::default()
        };
        let (params, _) = train(&model, &channel, &cfg)?;
        let link = Link::autoencoder(&model, params)?;
        let sweep = distance_sweep(&link, &channel, &distances, 20_000, seed, 1)?;
        match widest_span_below(&sweep, FEC_THRESHOLD) {
            Some((a, b)) => println!(
                "sigma {sigma}: BER < {FEC_THRESHOLD} from {a} to {b} km ({} km)",
                b - a
            ),
            None => println!("sigma {sigma}: BER never below {FEC_THRESHOLD}"),
        }
    }
    Ok(())
}
