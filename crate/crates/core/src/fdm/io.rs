//! Time-series binary files and frame logs.
//!
//! ```text
//! EITTS 1
//! sample_rate <hz>
//! start_time <s>
//! channels <c>
//! samples <n>
//! data f64le channel-major
//! <c*n little-endian f64>
//! ```
//!
//! Frame logs are CSV with header `timestamp,m1,...,mN`; values are the
//! signed in-phase voltages of each measurement.

use std::fmt::Write as _;
use std::path::Path;

use super::{TimeSeries, VoltageFrame};
use crate::error::{Error, Result};

const HEADER_KEYS: [&str; 4] = ["sample_rate", "start_time", "channels", "samples"];

pub fn write_time_series(ts: &TimeSeries) -> Vec<u8> {
    let mut head = String::from("EITTS 1\n");
    let _ = writeln!(head, "sample_rate {}", ts.sample_rate);
    let _ = writeln!(head, "start_time {}", ts.start_time);
    let _ = writeln!(head, "channels {}", ts.n_channels());
    let _ = writeln!(head, "samples {}", ts.n_samples());
    head.push_str("data f64le channel-major\n");
    let mut out = head.into_bytes();
    for v in ts.channels.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_time_series(bytes: &[u8], path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut pos = 0;
    let mut lines = Vec::new();
    while lines.len() < 6 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| perr(lines.len() + 1, "truncated header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| perr(lines.len() + 1, "header is not UTF-8".into()))?;
        lines.push(line.trim().to_string());
        pos += end + 1;
    }
    if lines[0] != "EITTS 1" {
        return Err(perr(1, format!("expected `EITTS 1`, found `{}`", lines[0])));
    }
    let mut values = [0.0f64; 4];
    for (i, key) in HEADER_KEYS.iter().enumerate() {
        let line = &lines[i + 1];
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(perr(i + 2, format!("expected `{key} <value>`, found `{line}`")));
        }
        values[i] = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(i + 2, format!("bad {key} value")))?;
    }
    if lines[5] != "data f64le channel-major" {
        return Err(perr(6, format!("unsupported data layout `{}`", lines[5])));
    }
    let (c, n) = (values[2] as usize, values[3] as usize);
    let data = &bytes[pos..];
    if data.len() != c * n * 8 {
        return Err(perr(7, format!("expected {} data bytes, found {}", c * n * 8, data.len())));
    }
    let flat: Vec<f64> = data
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let channels = if n == 0 {
        vec![Vec::new(); c]
    } else {
        flat.chunks(n).map(<[f64]>::to_vec).collect()
    };
    TimeSeries::new(values[0], values[1], channels)
}

pub fn save_time_series(ts: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_time_series(ts)).map_err(|e| Error::io(path, e))
}

pub fn load_time_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_time_series(&bytes, path)
}

pub fn write_frames_csv(frames: &[VoltageFrame]) -> String {
    let m = frames.first().map_or(0, VoltageFrame::len);
    let mut out = String::from("timestamp");
    for i in 1..=m {
        let _ = write!(out, ",m{i}");
    }
    out.push('\n');
    for f in frames {
        let _ = write!(out, "{}", f.timestamp);
        for v in f.signed() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_frames_csv(frames: &[VoltageFrame], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_frames_csv(frames)).map_err(|e| Error::io(path, e))
}

/// Timestamps and voltage rows of a frame log.
pub fn parse_frames_csv(text: &str, path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty frame log".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"timestamp")
        || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("m{}", i + 1))
    {
        return Err(perr(1, "header must be `timestamp,m1,...,mN`".into()));
    }
    let (mut times, mut rows) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| perr(i + 1, format!("bad number: {e}")))?;
        if vals.len() != cols.len() {
            return Err(perr(i + 1, format!("expected {} fields, found {}", cols.len(), vals.len())));
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((times, rows))
}

pub fn load_frames_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_frames_csv(&text, path)
}
