//! Short training runs for other message counts and block lengths.
//!
//! The bit rate is `log2(M) / n` bits per sample times the sample rate, so
//! M = 256 with n = 48 carries 8 bits per 7 GHz block.
//!
//! cargo run --release --example rate_variants -- [iterations] [distance_km]

use std::env;

use imdd_e2e::channel::ChannelConfig;
use imdd_e2e::eval::rates::distance_sweep;
use imdd_e2e::link::Link;
use imdd_e2e::training::{train, TrainConfig};
use imdd_e2e::transceiver::{nominal_eps, ModelConfig};

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let iterations = args
        .first()
        .map_or(Ok(2000), |s| s.parse())
        .expect("iterations");
    let distance: f64 = args
        .get(1)
        .map_or(Ok(20.0), |s| s.parse())
        .expect("distance");
    let channel = ChannelConfig::default();

    println!("M,n,gbit_per_s,ber");
    for (m, n) in [(64, 48), (256, 48), (16, 48), (64, 32)] {
        let model = ModelConfig::new(m, n, 11, nominal_eps(channel.enob))?;
        let cfg = TrainConfig {
            iterations,
            validation_interval: iterations,
            validation_size: 2000,
            distance_mean_km: distance,
            seed: 1,
            ..TrainConfig::default()
        };
        let (params, _) = train(&model, &channel, &cfg)?;
        let link = Link::autoencoder(&model, params)?;
        let r = &distance_sweep(&link, &channel, &[distance], 10_000, 1, 1)?[0];
        let rate = model.bits_per_symbol() as f64 * model.symbol_rate(channel.sample_rate) / 1e9;
        println!("{m},{n},{rate:.1},{:.3e}", r.ber);
    }
    Ok(())
}
