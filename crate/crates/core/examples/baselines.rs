//! The reference systems at one distance: PAM2/PAM4 with a least-squares FFE
//! or a trained receiver network, and the transmitter network paired with a
//! linear or a frozen PAM2 receiver.
//!
//! cargo run --release --example baselines -- [distance_km] [iterations] [blocks]

use std::env;

use imdd_e2e::channel::ChannelConfig;
use imdd_e2e::eval::baselines::{run_baseline, BaselineConfig, BaselineKind};
use imdd_e2e::rng::{Purpose, StreamId};
use imdd_e2e::training::TrainConfig;
use imdd_e2e::transceiver::ModelConfig;

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let distance: f64 = args
        .first()
        .map_or(Ok(20.0), |s| s.parse())
        .expect("distance");
    let iterations = args
        .get(1)
        .map_or(Ok(2000), |s| s.parse())
        .expect("iterations");
    let blocks = args
        .get(2)
        .map_or(Ok(20_000), |s| s.parse())
        .expect("blocks");

    let model = ModelConfig::default();
    let channel = ChannelConfig::default();
    let train = TrainConfig {
        iterations,
        validation_interval: iterations,
        validation_size: 2000,
        distance_mean_km: distance,
        seed: 1,
        ..TrainConfig::default()
    };
    println!("system,bler,ber");
    for kind in BaselineKind::ALL {
        let cfg = BaselineConfig::new(kind, train.clone());
        let stream = StreamId::new(9, Purpose::Test, 0);
        let r = run_baseline(&cfg, &model, &channel, blocks, stream)?;
        println!("{kind},{:.3e},{:.3e}", r.bler, r.ber);
    }
    Ok(())
}
