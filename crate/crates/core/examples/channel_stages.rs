//! A random drive signal pushed through each channel stage by hand.
//!
//! Prints how far the detected signal drifts from the ideal `sin²(x)` as the
//! fiber gets longer, with and without the converter and receiver noise.
//!
//! cargo run --example channel_stages

use rand::Rng;

use imdd_e2e::channel::{
    dac_adc_noise, lowpass_brickwall, mean_square, mzm, photodiode, propagate_fiber,
    receiver_noise, ChannelConfig, OpticalField,
};
use imdd_e2e::rng::{Purpose, StreamId};

fn main() {
    let cfg = ChannelConfig::default();
    let len = 48 * 11;
    let mut rng = StreamId::new(3, Purpose::Test, 0).rng(0);
    let drive: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..0.75)).collect();

    let x = lowpass_brickwall(&drive, cfg.lpf_bandwidth, cfg.sample_rate);
    let ideal: Vec<f64> = x.iter().map(|v| v.sin().powi(2)).collect();

    println!("distance_km,snr_db,distortion_db,noisy_distortion_db");
    for km in [0.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0] {
        let field = OpticalField::from_real(&mzm(&x), cfg.sample_rate);
        let field = propagate_fiber(&field, km * 1e3, cfg.beta2(), cfg.zero_pad_factor);
        let clean = lowpass_brickwall(&photodiode(&field), cfg.lpf_bandwidth, cfg.sample_rate);

        let snr = cfg.snr_table.at(km);
        let noisy = dac_adc_noise(&x, cfg.enob, &mut rng);
        let field = OpticalField::from_real(&mzm(&noisy), cfg.sample_rate);
        let field = propagate_fiber(&field, km * 1e3, cfg.beta2(), cfg.zero_pad_factor);
        let y = receiver_noise(&photodiode(&field), snr, &mut rng);
        let y = dac_adc_noise(
            &lowpass_brickwall(&y, cfg.lpf_bandwidth, cfg.sample_rate),
            cfg.enob,
            &mut rng,
        );

        let db = |got: &[f64]| {
            let err: Vec<f64> = got.iter().zip(&ideal).map(|(a, b)| a - b).collect();
            10.0 * (mean_square(&err) / mean_square(&ideal)).log10()
        };
        println!("{km},{snr:.2},{:.2},{:.2}", db(&clean), db(&y));
    }
}
