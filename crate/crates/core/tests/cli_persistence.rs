//! File formats and the command-line binary, end to end.

use std::fs;
use std::path::Path;
use std::process::Command;

use imdd_e2e::channel::ChannelConfig;
use imdd_e2e::persist::{load_model, load_traces, parse_config, save_model, save_traces};
use imdd_e2e::training::{init_params, TraceFile};
use imdd_e2e::transceiver::{Message, ModelConfig};

const SMALL: &str = "model.M = 16\nmodel.n = 16\nmodel.N = 3\n\
    train.iterations = 40\ntrain.batch_size = 20\ntrain.validation_interval = 20\n\
    train.validation_size = 200\neval.num_blocks = 500\neval.distances_km = 0:10:40\n\
    gradcheck.coords = 20\nexport.sequence = 1,5,16,9\n";

fn bin(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_imdd-e2e"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run binary");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn model_file_roundtrip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let cfg = ModelConfig::new(16, 8, 3, 0.01).unwrap();
    let channel = ChannelConfig::default().with_distance(35.0);
    let params = init_params(&cfg, 3);
    save_model(&params, &cfg, &channel, &path).unwrap();

    let (loaded, header) = load_model(&path).unwrap();
    assert_eq!(loaded, params);
    assert_eq!(header.model, cfg);
    assert_eq!(header.channel, channel);

    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_model(&path).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    fs::write(&path, &bad).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn trace_file_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let records = (1..=8)
        .map(|m| {
            let block = (0..4)
                .map(|i| (m * 7 + i) as f64 / 3.0 - 1e-9 * i as f64)
                .collect();
            (Message::new(m, 8).unwrap(), block)
        })
        .collect();
    let traces = TraceFile::new(4, records).unwrap();
    save_traces(&traces, &path).unwrap();
    assert_eq!(load_traces(&path, 8).unwrap(), traces);
    // labels are checked against M
    assert!(load_traces(&path, 4).is_err());
}

#[test]
fn config_rejects_unknown_and_repeated_keys() {
    let cfg = parse_config("model.M = 16\n# comment\nmodel.n = 8\n").unwrap();
    assert_eq!(cfg.model.messages, 16);
    assert_eq!(cfg.model.block_len, 8);
    assert!(parse_config("model.Q = 1\n").is_err());
    assert!(parse_config("model.M = 16\nmodel.M = 32\n").is_err());
    assert!(parse_config("model.M = sixteen\n").is_err());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["frobnicate"]).0, 2);
    assert_eq!(bin(dir.path(), &["train"]).0, 2);
    assert_eq!(bin(dir.path(), &["sweep"]).0, 2);
    let (code, _, err) = bin(dir.path(), &["info", "--model", "missing.bin"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn cli_train_sweep_and_grad_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("small.cfg"), SMALL).unwrap();

    let (code, _, err) = bin(
        d,
        &[
            "train",
            "--config",
            "small.cfg",
            "--seed",
            "2",
            "--out",
            "m.bin",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let log = fs::read_to_string(d.join("m.bin.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3, "header and two validation rows");

    let (code, _, err) = bin(
        d,
        &[
            "sweep",
            "--config",
            "small.cfg",
            "--model",
            "m.bin",
            "--out",
            "s.csv",
            "--threads",
            "2",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let sweep = fs::read_to_string(d.join("s.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(
        lines.next(),
        Some("distance_km,bler,ber,ber_lower_bound,num_blocks,seed")
    );
    assert_eq!(lines.count(), 5, "one row per configured distance");

    let (code, out, err) = bin(d, &["grad-check", "--config", "small.cfg", "--seed", "4"]);
    assert_eq!(code, 0, "{out}{err}");

    let (code, out, _) = bin(d, &["info", "--model", "m.bin"]);
    assert_eq!(code, 0);
    assert!(
        out.contains("# model file\nM = 16\nn = 16\nN = 3\n"),
        "{out}"
    );
}
