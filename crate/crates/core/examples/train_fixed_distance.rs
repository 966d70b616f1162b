//! Train the autoencoder at one fixed distance and sweep the distance.
//!
//! cargo run --example train_fixed_distance -- [iterations] [distance_km] [seed] [model_out]

use std::env;
use std::path::Path;

use imdd_e2e::channel::ChannelConfig;
use imdd_e2e::eval::distance_sweep;
use imdd_e2e::link::Link;
use imdd_e2e::persist::save_model;
use imdd_e2e::training::{train, TrainConfig};
use imdd_e2e::transceiver::ModelConfig;

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let iterations = args
        .first()
        .map_or(Ok(5000), |s| s.parse())
        .expect("iterations");
    let distance: f64 = args
        .get(1)
        .map_or(Ok(20.0), |s| s.parse())
        .expect("distance");
    let seed = args.get(2).map_or(Ok(1), |s| s.parse()).expect("seed");

    let model = ModelConfig::default();
    let channel = ChannelConfig::default();
    let cfg = TrainConfig {
        iterations,
        validation_interval: 1000.min(iterations.max(1)),
        validation_size: 10_000,
        distance_mean_km: distance,
        seed,
        ..TrainConfig::default()
    };
    let (params, log) = train(&model, &channel, &cfg)?;
    print!("{}", log.to_csv());
    if let Some(path) = args.get(3) {
        save_model(&params, &model, &channel, Path::new(path))?;
    }

    let link = Link::autoencoder(&model, params)?;
    let distances: Vec<f64> = (0..=6).map(|k| distance - 7.5 + 2.5 * k as f64).collect();
    println!("distance_km,bler,ber");
    for r in distance_sweep(&link, &channel, &distances, 20_000, seed, 1)? {
        println!("{:.1},{:.3e},{:.3e}", r.distance_km, r.bler, r.ber);
    }
    Ok(())
}
