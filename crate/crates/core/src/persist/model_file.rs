//! Binary model files.
//!
//! ```text
//! "E2EA"  u16 version
//! u32 M, u32 n, u32 N, u32 oversampling, f64 eps
//! f64 sample_rate, f64 lpf_bandwidth, f64 enob, f64 D, f64 wavelength_m,
//! u32 zero_pad_factor, f64 distance_km, u32 snr anchors, (f64 km, f64 dB)*
//! u32 layer count, then per layer: u32 rows, u32 cols,
//!     rows·cols f64 weights (row-major), cols f64 biases
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::autodiff::{Parameter, Tensor};
use crate::channel::{ChannelConfig, SnrTable};
use crate::error::{Error, Result};
use crate::transceiver::{Dense, ModelConfig, ModelParams, ReceiverNet, TransmitterNet};

pub const MAGIC: &[u8; 4] = b"E2EA";
pub const VERSION: u16 = 1;

/// Configuration stored alongside the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelHeader {
    pub model: ModelConfig,
    pub channel: ChannelConfig,
}

pub fn encode_model(params: &ModelParams, model: &ModelConfig, channel: &ChannelConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        model.messages,
        model.block_len,
        model.blocks,
        model.oversampling,
    ] {
        put_u32(&mut out, v);
    }
    put_f64(&mut out, model.eps);
    for v in [
        channel.sample_rate,
        channel.lpf_bandwidth,
        channel.enob,
        channel.dispersion_ps_nm_km,
        channel.wavelength_m,
    ] {
        put_f64(&mut out, v);
    }
    put_u32(&mut out, channel.zero_pad_factor);
    put_f64(&mut out, channel.distance_km);
    let anchors = channel.snr_table.anchors();
    put_u32(&mut out, anchors.len());
    for &(d, s) in anchors {
        put_f64(&mut out, d);
        put_f64(&mut out, s);
    }
    let layers: Vec<&Dense> = params
        .tx
        .layers
        .iter()
        .chain(params.rx.layers.iter())
        .collect();
    put_u32(&mut out, layers.len());
    for l in layers {
        put_u32(&mut out, l.n_in());
        put_u32(&mut out, l.n_out());
        for &w in l.weight.value.re() {
            put_f64(&mut out, w);
        }
        for &b in l.bias.value.re() {
            put_f64(&mut out, b);
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelParams, ModelHeader)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(
            "magic",
            "not a model file (expected \"E2EA\")",
        ));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::format(
            "version",
            format!("file has version {version}, this build reads version {VERSION}"),
        ));
    }
    let model = ModelConfig {
        messages: r.u32("header.M")?,
        block_len: r.u32("header.n")?,
        blocks: r.u32("header.N")?,
        oversampling: r.u32("header.oversampling")?,
        eps: r.f64("header.eps")?,
    };
    model
        .validate()
        .map_err(|e| Error::format("header", e.to_string()))?;
    let mut channel = ChannelConfig {
        sample_rate: r.f64("channel.sample_rate")?,
        lpf_bandwidth: r.f64("channel.lpf_bandwidth")?,
        enob: r.f64("channel.enob")?,
        dispersion_ps_nm_km: r.f64("channel.dispersion")?,
        wavelength_m: r.f64("channel.wavelength")?,
        zero_pad_factor: r.u32("channel.zero_pad_factor")?,
        distance_km: r.f64("channel.distance_km")?,
        ..ChannelConfig::default()
    };
    let count = r.u32("channel.snr_table length")?;
    if count > r.remaining() / 16 {
        return Err(Error::format(
            "channel.snr_table length",
            format!("{count} anchors do not fit"),
        ));
    }
    let mut anchors = Vec::with_capacity(count);
    for i in 0..count {
        let d = r.f64(&format!("channel.snr_table[{i}]"))?;
        let s = r.f64(&format!("channel.snr_table[{i}]"))?;
        anchors.push((d, s));
    }
    channel.snr_table =
        SnrTable::new(anchors).map_err(|e| Error::format("channel.snr_table", e.to_string()))?;

    let (m, n) = (model.messages, model.block_len);
    let h = 2 * m;
    let expected = [(m, h), (h, h), (h, n), (n, h), (h, h), (h, m)];
    let layer_count = r.u32("layer count")?;
    if layer_count != expected.len() {
        return Err(Error::format(
            "layer count",
            format!("{layer_count}, expected {}", expected.len()),
        ));
    }
    let mut layers = Vec::with_capacity(6);
    for (i, &(rows, cols)) in expected.iter().enumerate() {
        let k = i + 1;
        let got = (
            r.u32(&format!("layer {k} rows"))?,
            r.u32(&format!("layer {k} cols"))?,
        );
        if got != (rows, cols) {
            return Err(Error::format(
                format!("layer {k} dimensions"),
                format!("{}x{}, header implies {rows}x{cols}", got.0, got.1),
            ));
        }
        let w = r.f64s(rows * cols, &format!("layer {k} weights"))?;
        let b = r.f64s(cols, &format!("layer {k} biases"))?;
        layers.push(Dense {
            weight: Parameter::new(format!("W{k}"), Tensor::matrix(rows, cols, w)?),
            bias: Parameter::new(format!("b{k}"), Tensor::vector(b)),
        });
    }
    if r.remaining() != 0 {
        return Err(Error::format(
            "trailer",
            format!("{} unexpected bytes", r.remaining()),
        ));
    }
    let mut it = layers.into_iter();
    let mut next = || it.next().expect("six layers");
    let params = ModelParams {
        tx: TransmitterNet {
            layers: [next(), next(), next()],
        },
        rx: ReceiverNet {
            layers: [next(), next(), next()],
        },
    };
    Ok((params, ModelHeader { model, channel }))
}

pub fn save_model(
    params: &ModelParams,
    model: &ModelConfig,
    channel: &ChannelConfig,
    path: &Path,
) -> Result<()> {
    params.check_dims(model.messages, model.block_len)?;
    fs::write(path, encode_model(params, model, channel))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(ModelParams, ModelHeader)> {
    decode_model(&fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, len: usize, field: &str) -> Result<&[u8]> {
        if self.remaining() < len {
            return Err(Error::format(
                field,
                format!(
                    "file truncated: need {len} bytes at offset {}, {} left",
                    self.pos,
                    self.remaining()
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<usize> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self, field: &str) -> Result<f64> {
        let b = self.take(8, field)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize, field: &str) -> Result<Vec<f64>> {
        let b = self.take(count * 8, field)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::init_params;

    fn sample() -> (ModelParams, ModelConfig, ChannelConfig) {
        let model = ModelConfig::new(8, 16, 3, 0.01).unwrap();
        let mut p = init_params(&model, 11);
        // non-zero biases so they are exercised too
        for (i, v) in p.rx.layers[2].bias.value.re_mut().iter_mut().enumerate() {
            *v = i as f64 * 0.1 - 0.3;
        }
        (p, model, ChannelConfig::default().with_distance(33.0))
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let (p, model, ch) = sample();
        let bytes = encode_model(&p, &model, &ch);
        let (q, h) = decode_model(&bytes).unwrap();
        assert_eq!(h.model, model);
        assert_eq!(h.channel.snr_table, ch.snr_table);
        assert_eq!(h.channel.distance_km, 33.0);
        for (a, b) in p.params().zip(q.params()) {
            assert_eq!(a.name, b.name);
            let bits = |t: &Tensor| t.re().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        assert_eq!(encode_model(&q, &h.model, &h.channel), bytes);
    }

    #[test]
    fn truncation_and_corruption_are_named() {
        let (p, model, ch) = sample();
        let bytes = encode_model(&p, &model, &ch);
        for cut in [0, 3, 5, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                decode_model(&bytes[..cut]),
                Err(Error::Format { .. })
            ));
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        match decode_model(&bad) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "magic"),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        match decode_model(&bad) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "version"),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes;
        bad[6] = 16; // M = 16 no longer matches the layers
        assert!(matches!(decode_model(&bad), Err(Error::Format { .. })));
    }
}
