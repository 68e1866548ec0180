//! Confusion-matrix model of how a wearer perceives rendered patterns.

use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::haptics::HapticPatternId;

pub const N_PATTERNS: usize = 13;
pub const DEFAULT_REACTION_LATENCY_MS: u64 = 500;
const ROW_SUM_TOL: f64 = 1e-9;

pub const TABLE1_RAW_CSV: &str = include_str!("../../data/perception/table1_raw.csv");
pub const TABLE1_NORMALIZED_CSV: &str = include_str!("../../data/perception/table1_normalized.csv");

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("confusion CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("confusion CSV: unknown pattern name `{0}`")]
    UnknownName(String),
    #[error("confusion CSV: pattern `{0}` listed twice")]
    Duplicate(String),
    #[error("confusion CSV: missing {0}")]
    Missing(String),
    #[error("confusion CSV: bad value `{value}` at row {row}, column {column}")]
    BadValue { row: String, column: String, value: String },
    #[error("row {0} has a negative entry")]
    Negative(HapticPatternId),
    #[error("row {pattern} sums to {sum}")]
    NotStochastic { pattern: HapticPatternId, sum: f64 },
}

pub type Matrix = [[f64; N_PATTERNS]; N_PATTERNS];

/// Parse a square matrix with a header row and a header column of pattern
/// names; rows and columns are reordered into [`HapticPatternId::ALL`] order.
pub fn read_matrix_csv<R: io::Read>(input: R) -> Result<Matrix, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    let mut col_idx = Vec::new();
    let mut seen_cols = [false; N_PATTERNS];
    for name in header.iter().skip(1) {
        let p: HapticPatternId = name.parse().map_err(|_| ProfileError::UnknownName(name.to_string()))?;
        if std::mem::replace(&mut seen_cols[p.index()], true) {
            return Err(ProfileError::Duplicate(name.to_string()));
        }
        col_idx.push(p.index());
    }
    if let Some(i) = seen_cols.iter().position(|s| !s) {
        return Err(ProfileError::Missing(format!("column {}", HapticPatternId::ALL[i])));
    }
    let mut m = [[0.0; N_PATTERNS]; N_PATTERNS];
    let mut seen_rows = [false; N_PATTERNS];
    for rec in rdr.records() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or("");
        let p: HapticPatternId = name.parse().map_err(|_| ProfileError::UnknownName(name.to_string()))?;
        if std::mem::replace(&mut seen_rows[p.index()], true) {
            return Err(ProfileError::Duplicate(name.to_string()));
        }
        for (j, &c) in col_idx.iter().enumerate() {
            let raw = rec.get(j + 1).unwrap_or("");
            let v = match raw {
                "" | "-" => 0.0,
                s => s.parse::<f64>().map_err(|_| ProfileError::BadValue {
                    row: name.to_string(),
                    column: header.get(j + 1).unwrap_or("").to_string(),
                    value: raw.to_string(),
                })?,
            };
            m[p.index()][c] = v;
        }
    }
    if let Some(i) = seen_rows.iter().position(|s| !s) {
        return Err(ProfileError::Missing(format!("row {}", HapticPatternId::ALL[i])));
    }
    Ok(m)
}

pub fn write_matrix_csv<W: io::Write>(m: &Matrix, out: W) -> Result<(), ProfileError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["actual".to_string()];
    header.extend(HapticPatternId::ALL.iter().map(|p| p.name().to_string()));
    w.write_record(&header)?;
    for p in HapticPatternId::ALL {
        let mut row = vec![p.name().to_string()];
        row.extend(m[p.index()].iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Make every row sum to one. Short rows are scaled up proportionally; rows
/// over one (rounding in the transcription) have the excess taken equally
/// from their non-zero cells, falling back to proportional scaling if that
/// would drive a cell negative.
pub fn normalize_rows(m: &Matrix) -> Matrix {
    let mut out = *m;
    for row in out.iter_mut() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() <= 1e-12 || sum <= 0.0 {
            continue;
        }
        let nz = row.iter().filter(|v| **v > 0.0).count() as f64;
        let share = (sum - 1.0) / nz;
        if sum > 1.0 && row.iter().all(|v| *v == 0.0 || *v >= share) {
            for v in row.iter_mut().filter(|v| **v > 0.0) {
                *v -= share;
            }
        } else {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionProfile {
    /// Row = rendered pattern, column = perceived pattern, both in
    /// [`HapticPatternId::ALL`] order.
    pub confusion: Matrix,
    #[serde(default = "default_latency")]
    pub reaction_latency_ms: u64,
}

fn default_latency() -> u64 {
    DEFAULT_REACTION_LATENCY_MS
}

impl PerceptionProfile {
    pub fn new(confusion: Matrix, reaction_latency_ms: u64) -> Result<Self, ProfileError> {
        let p = Self { confusion, reaction_latency_ms };
        p.validate()?;
        Ok(p)
    }

    /// Every pattern perceived as rendered.
    pub fn perfect() -> Self {
        let mut m = [[0.0; N_PATTERNS]; N_PATTERNS];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { confusion: m, reaction_latency_ms: DEFAULT_REACTION_LATENCY_MS }
    }

    /// The bundled user-study confusion matrix, row-normalized.
    pub fn table1() -> Self {
        let m = read_matrix_csv(TABLE1_NORMALIZED_CSV.as_bytes()).expect("bundled confusion matrix parses");
        Self { confusion: m, reaction_latency_ms: DEFAULT_REACTION_LATENCY_MS }
    }

    pub fn from_csv<R: io::Read>(input: R, reaction_latency_ms: u64) -> Result<Self, ProfileError> {
        Self::new(normalize_rows(&read_matrix_csv(input)?), reaction_latency_ms)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        for p in HapticPatternId::ALL {
            let row = &self.confusion[p.index()];
            if row.iter().any(|v| !(*v >= 0.0)) {
                return Err(ProfileError::Negative(p));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ProfileError::NotStochastic { pattern: p, sum });
            }
        }
        Ok(())
    }

    pub fn probability(&self, actual: HapticPatternId, perceived: HapticPatternId) -> f64 {
        self.confusion[actual.index()][perceived.index()]
    }
}

/// Draw the perceived pattern from the actual pattern's row.
pub fn sample_perceived<R: Rng + ?Sized>(actual: HapticPatternId, profile: &PerceptionProfile, rng: &mut R) -> HapticPatternId {
    let row = &profile.confusion[actual.index()];
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    let mut last_nonzero = actual;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_nonzero = HapticPatternId::ALL[j];
        acc += p;
        if u < acc {
            return last_nonzero;
        }
    }
    last_nonzero
}
