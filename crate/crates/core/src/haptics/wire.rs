//! Line protocol to the servo controller:
//! `S,<L|R>,<angle1 centidegrees>,<angle2 centidegrees>,<t_ms>\n`.

use std::io::{self, BufRead, Write};
use std::net::TcpStream;
use std::path::PathBuf;

use thiserror::Error;

use super::kinematics::ServoLimits;
use super::patterns::Temple;
use super::render::ServoCommand;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("motor {motor} angle {angle_deg} deg outside limits [{min}, {max}]")]
    AngleOutOfLimits { motor: u8, angle_deg: f64, min: f64, max: f64 },
    #[error("angle {0} is not finite")]
    NonFinite(f64),
    #[error("byte {byte}, field {field}: {reason}")]
    Malformed { field: usize, byte: usize, reason: String },
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<WireError> },
}

fn centideg(angle: f64) -> Result<i64, WireError> {
    if !angle.is_finite() {
        return Err(WireError::NonFinite(angle));
    }
    Ok((angle * 100.0).round() as i64)
}

pub fn encode_wire(cmd: &ServoCommand, limits: &[ServoLimits; 2]) -> Result<String, WireError> {
    for (i, a) in [cmd.angle1_deg, cmd.angle2_deg].into_iter().enumerate() {
        if !a.is_finite() {
            return Err(WireError::NonFinite(a));
        }
        if !limits[i].contains(a) {
            return Err(WireError::AngleOutOfLimits {
                motor: i as u8 + 1,
                angle_deg: a,
                min: limits[i].min_deg,
                max: limits[i].max_deg,
            });
        }
    }
    Ok(format!(
        "S,{},{},{},{}\n",
        cmd.temple.wire_code(),
        centideg(cmd.angle1_deg)?,
        centideg(cmd.angle2_deg)?,
        cmd.t_ms
    ))
}

/// Parse one line; the trailing newline is required.
pub fn decode_wire(line: &str) -> Result<ServoCommand, WireError> {
    let bad = |field: usize, byte: usize, reason: &str| WireError::Malformed { field, byte, reason: reason.to_string() };
    let Some(body) = line.strip_suffix('\n') else {
        return Err(bad(0, line.len(), "missing line terminator"));
    };
    let mut fields = Vec::with_capacity(5);
    let mut start = 0;
    for (i, c) in body.char_indices() {
        if c == ',' {
            fields.push((start, &body[start..i]));
            start = i + 1;
        }
    }
    fields.push((start, &body[start..]));
    if fields.len() != 5 {
        let byte = if fields.len() > 5 { fields[5].0 } else { body.len() };
        return Err(bad(fields.len().min(5), byte, &format!("expected 5 fields, found {}", fields.len())));
    }
    if fields[0].1 != "S" {
        return Err(bad(0, 0, "expected record tag `S`"));
    }
    let temple = match fields[1].1 {
        "L" => Temple::Left,
        "R" => Temple::Right,
        _ => return Err(bad(1, fields[1].0, "temple must be L or R")),
    };
    let int = |idx: usize, signed: bool| -> Result<i64, WireError> {
        let (off, s) = fields[idx];
        let digits = if signed { s.strip_prefix('-').unwrap_or(s) } else { s };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            let pos = s
                .bytes()
                .enumerate()
                .position(|(i, b)| !(b.is_ascii_digit() || (signed && i == 0 && b == b'-')))
                .unwrap_or(s.len());
            return Err(bad(idx, off + pos, "expected an integer"));
        }
        s.parse::<i64>().map_err(|_| bad(idx, off, "integer out of range"))
    };
    let a1 = int(2, true)?;
    let a2 = int(3, true)?;
    let t = int(4, false)?;
    Ok(ServoCommand { t_ms: t as u64, temple, angle1_deg: a1 as f64 / 100.0, angle2_deg: a2 as f64 / 100.0 })
}

/// Decode every line of a stream; errors carry the 1-based line number.
pub fn decode_stream<R: BufRead>(reader: R) -> Vec<Result<ServoCommand, WireError>> {
    let mut out = Vec::new();
    let mut reader = reader;
    let mut line_no = 0;
    loop {
        let mut buf = String::new();
        match reader.read_line(&mut buf) {
            Ok(0) => break,
            Ok(_) => {
                line_no += 1;
                out.push(decode_wire(&buf).map_err(|e| WireError::AtLine { line: line_no, source: Box::new(e) }));
            }
            Err(e) => {
                line_no += 1;
                out.push(Err(WireError::AtLine {
                    line: line_no,
                    source: Box::new(WireError::Malformed { field: 0, byte: 0, reason: e.to_string() }),
                }));
                break;
            }
        }
    }
    out
}

/// Where encoded lines go: `tcp://host:port`, `file:///path` or a bare path
/// (serial devices are written as character files).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireTarget {
    Tcp(String),
    File(PathBuf),
}

impl WireTarget {
    pub fn parse(uri: &str) -> Result<Self, String> {
        if let Some(addr) = uri.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err("tcp URI needs host:port".into());
            }
            Ok(Self::Tcp(addr.to_string()))
        } else if let Some(path) = uri.strip_prefix("file://") {
            Ok(Self::File(PathBuf::from(path)))
        } else if uri.contains("://") {
            Err(format!("unsupported wire URI scheme in `{uri}`"))
        } else if uri.is_empty() {
            Err("empty wire URI".into())
        } else {
            Ok(Self::File(PathBuf::from(uri)))
        }
    }

    pub fn open(&self) -> io::Result<Box<dyn Write + Send>> {
        Ok(match self {
            Self::Tcp(addr) => Box::new(TcpStream::connect(addr)?),
            Self::File(p) => Box::new(std::fs::OpenOptions::new().create(true).append(true).open(p)?),
        })
    }
}
