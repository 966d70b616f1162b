//! BLER and BER of a saved model over a range of distances, with 95%
//! confidence intervals on the BER.
//!
//! cargo run --example distance_sweep -- model.bin [blocks] [start:step:stop]

use std::env;
use std::path::Path;

use imdd_e2e::eval::rates::{distance_sweep, wilson_interval, Z95};
use imdd_e2e::link::Link;
use imdd_e2e::persist::load_model;

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: distance_sweep model.bin [blocks] [start:step:stop]");
        std::process::exit(2);
    };
    let blocks = args
        .get(1)
        .map_or(Ok(20_000), |s| s.parse())
        .expect("blocks");
    let range: Vec<f64> = args
        .get(2)
        .map_or("0:5:60", String::as_str)
        .split(':')
        .map(|s| s.parse().expect("range"))
        .collect();
    let (start, step, stop) = (range[0], range[1], range[2]);
    let distances: Vec<f64> = (0..)
        .map(|k| start + step * k as f64)
        .take_while(|d| *d <= stop + 1e-9)
        .collect();

    let (params, header) = load_model(Path::new(path))?;
    let link = Link::autoencoder(&header.model, params)?;
    let bits = header.model.bits_per_symbol() as u64;
    println!("distance_km,bler,ber,ber_low,ber_high");
    for r in distance_sweep(&link, &header.channel, &distances, blocks, 7, 1)? {
        let trials = r.num_blocks * bits;
        let (lo, hi) = wilson_interval((r.ber * trials as f64).round() as u64, trials, Z95);
        println!(
            "{},{:.3e},{:.3e},{lo:.2e},{hi:.2e}",
            r.distance_km, r.bler, r.ber
        );
    }
    Ok(())
}
