//! Receiver-only retraining on received traces with the transmitter frozen.
//!
//! Traces come from the saved model's own transmitter over a channel whose
//! SNR is lower than the one it was trained for; the receiver is then
//! retrained from its current weights and from a fresh initialization. The
//! traces are also written as CSV for the `retrain-rx` command.
//!
//! cargo run --release --example retrain_receiver -- model.bin [distance_km] [snr_offset_db] [traces]

use std::env;
use std::path::Path;

use imdd_e2e::link::Link;
use imdd_e2e::persist::{load_model, save_traces};
use imdd_e2e::training::{generate_traces, train_receiver_only, InitMode, RetrainConfig};

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: retrain_receiver model.bin [distance_km] [snr_offset_db] [traces]");
        std::process::exit(2);
    };
    let (params, header) = load_model(Path::new(path))?;
    let distance = args
        .get(1)
        .map_or(Ok(header.channel.distance_km), |s| s.parse())
        .expect("distance");
    let offset: f64 = args.get(2).map_or(Ok(-2.0), |s| s.parse()).expect("offset");
    let count = args
        .get(3)
        .map_or(Ok(100_000), |s| s.parse())
        .expect("traces");

    let mut channel = header.channel.clone();
    channel.snr_table = channel.snr_table.shifted(offset);
    let link = Link::autoencoder(&header.model, params.clone())?;
    let traces = generate_traces(&link, &channel, distance, count, 1)?;
    save_traces(&traces, Path::new("traces.csv"))?;

    for mode in [InitMode::FineTune, InitMode::Randomize] {
        let cfg = RetrainConfig {
            init_mode: mode,
            seed: 1,
            ..RetrainConfig::default()
        };
        let (_, r) = train_receiver_only(&params, &traces, &cfg)?;
        println!(
            "{mode:?}: test BLER {:.3e} -> {:.3e}, per-epoch validation {:?}",
            r.initial_test_bler, r.test_bler, r.epoch_validation_bler
        );
    }
    Ok(())
}
