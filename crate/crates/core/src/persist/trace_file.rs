//! CSV trace files: header `m,s0,...,s{n-1}`, then one labeled received
//! block per row with labels `1..=M`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::rates::fmt17;
use crate::training::TraceFile;
use crate::transceiver::Message;

pub fn write_traces(traces: &TraceFile, mut w: impl Write) -> Result<()> {
    let names: Vec<String> = (0..traces.block_len).map(|i| format!("s{i}")).collect();
    writeln!(w, "m,{}", names.join(","))?;
    for (m, block) in &traces.records {
        let row: Vec<String> = block.iter().map(|&v| fmt17(v)).collect();
        writeln!(w, "{},{}", m.get(), row.join(","))?;
    }
    Ok(())
}

/// Parses a trace file; labels must lie in `1..=messages`.
pub fn read_traces(r: impl BufRead, messages: usize) -> Result<TraceFile> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("header", "empty trace file"))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"m") || cols.len() < 2 {
        return Err(Error::format(
            "header",
            format!("expected \"m,s0,...\", got {header:?}"),
        ));
    }
    let block_len = cols.len() - 1;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 2;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != block_len + 1 {
            return Err(Error::format(
                format!("line {row}"),
                format!("{} columns, header has {}", fields.len(), block_len + 1),
            ));
        }
        let label: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(format!("line {row} label"), format!("{:?}", fields[0])))?;
        let m = Message::new(label, messages).map_err(|_| {
            Error::format(
                format!("line {row} label"),
                format!("{label} outside 1..={messages}"),
            )
        })?;
        let block = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::format(format!("line {row} sample"), format!("{f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        records.push((m, block));
    }
    TraceFile::new(block_len, records)
}

pub fn save_traces(traces: &TraceFile, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_traces(traces, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_traces(path: &Path, messages: usize) -> Result<TraceFile> {
    read_traces(BufReader::new(File::open(path)?), messages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceFile {
        let records = vec![
            (Message::new(1, 8).unwrap(), vec![0.1, -2.5e-7, 3.0]),
            (
                Message::new(8, 8).unwrap(),
                vec![1.0 / 3.0, 0.0, f64::MIN_POSITIVE],
            ),
        ];
        TraceFile::new(3, records).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let mut buf = Vec::new();
        write_traces(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m,s0,s1,s2\n1,"));
        assert_eq!(read_traces(&buf[..], 8).unwrap(), sample());
    }

    #[test]
    fn malformed_rows_are_named() {
        for (bad, field) in [
            ("", "header"),
            ("x,s0\n1,0.5\n", "header"),
            ("m,s0,s1\n1,0.5\n", "line 2"),
            ("m,s0\n9,0.5\n", "line 2 label"),
            ("m,s0\n0,0.5\n", "line 2 label"),
            ("m,s0\n1,0.5\n2,abc\n", "line 3 sample"),
        ] {
            match read_traces(bad.as_bytes(), 8) {
                Err(Error::Format { field: f, .. }) => assert_eq!(f, field, "{bad:?}"),
                other => panic!("{bad:?}: {other:?}"),
            }
        }
    }
}
