//! Reverse-mode gradients of the whole link against central differences.
//!
//! cargo run --example gradient_check -- [coords] [seed]

use std::env;

use imdd_e2e::channel::ChannelConfig;
use imdd_e2e::training::{grad_check_link, GradCheckConfig};
use imdd_e2e::transceiver::ModelConfig;

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let coords = args.first().map_or(Ok(200), |s| s.parse()).expect("coords");
    let seed = args.get(1).map_or(Ok(0), |s| s.parse()).expect("seed");

    // small enough that a few hundred forward passes take well under a second
    let model = ModelConfig::new(8, 16, 3, 0.01)?;
    let cfg = GradCheckConfig {
        coords,
        seed,
        ..GradCheckConfig::default()
    };
    let mut quiet = ChannelConfig::default();
    quiet.stages = quiet.stages.noiseless();
    for (label, channel) in [
        ("noisy (frozen)", ChannelConfig::default()),
        ("noiseless", quiet),
    ] {
        let r = grad_check_link(&model, &channel, &cfg)?;
        println!(
            "{label:>15}: max relative error {:.3e} over {} coordinates, worst {:?}, {} skipped at kinks",
            r.max_rel_error, r.coords_checked, r.worst, r.coords_skipped
        );
    }
    Ok(())
}
