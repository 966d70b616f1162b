//! Transmit blocks, a filtered waveform and its periodogram for a saved model.
//!
//! Writes `tx_blocks.csv`, `tx_filtered.csv` and `spectrum.csv` into the
//! output directory and prints the strongest spectral lines.
//!
//! cargo run --example export_waveforms -- model.bin [out_dir]

use std::env;
use std::fs::File;
use std::path::Path;

use imdd_e2e::eval::export::{
    band_powers, export_waveforms, filtered_waveform, spectrum, write_spectrum_csv,
    DEFAULT_SEQUENCE,
};
use imdd_e2e::link::sample_messages;
use imdd_e2e::persist::load_model;
use imdd_e2e::rng::{Purpose, StreamId};
use imdd_e2e::transceiver::Message;

fn main() -> imdd_e2e::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: export_waveforms model.bin [out_dir]");
        std::process::exit(2);
    };
    let out = Path::new(args.get(1).map_or("waveforms", String::as_str));
    let (params, header) = load_model(Path::new(path))?;
    let (model, channel) = (&header.model, &header.channel);

    let seq = DEFAULT_SEQUENCE
        .iter()
        .map(|&m| Message::new(m, model.messages))
        .collect::<imdd_e2e::Result<Vec<_>>>()?;
    export_waveforms(&params.tx, model, channel, &seq, out)?;

    let mut rng = StreamId::new(1, Purpose::Waveform, 0).rng(0);
    let long = sample_messages(&mut rng, model.messages, 2000);
    let table = spectrum(
        &filtered_waveform(&params.tx, model, channel, &long)?,
        channel.sample_rate,
    );
    write_spectrum_csv(&table, File::create(out.join("spectrum.csv"))?)?;

    let (outside, inside) = band_powers(&table, channel.lpf_bandwidth);
    println!("out-of-band / in-band power {:.2e}", outside / inside);
    let mut lines: Vec<_> = table.iter().filter(|(f, _)| *f > 0.0).collect();
    lines.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (f, p) in lines.iter().take(6) {
        println!("{:>7.3} GHz  {p:.3e}", f / 1e9);
    }
    Ok(())
}
