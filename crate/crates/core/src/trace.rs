//! Trace records, their CSV form, and numeric trace comparison.
//!
//! File layout:
//!
//! ```text
//! # scenario=<name> digest=<hex>
//! k,t,iL,vo,u
//! 0,0.0000000000000000e0,...
//! ```
//!
//! Reals are written with 17 significant digits so a write/read round trip
//! is exact.

use std::io::{self, BufRead, Write};

use thiserror::Error;

/// One converter iteration: gate applied at tick `k` and the state it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    /// Seconds, `k·Ts`.
    pub t: f64,
    pub inductor_current: f64,
    pub output_voltage: f64,
    pub gate: u8,
}

pub const COLUMNS: &str = "k,t,iL,vo,u";

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub digest: String,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("no data rows")]
    NoData,
}

pub fn write_csv<W: Write>(
    mut out: W,
    scenario: &str,
    digest: &str,
    records: &[TraceRecord],
) -> io::Result<()> {
    write!(out, "# scenario={scenario} digest={digest}\n{COLUMNS}\n")?;
    for r in records {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.k, r.t, r.inductor_current, r.output_voltage, r.gate
        )?;
    }
    out.flush()
}

fn malformed(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse_header(line: &str) -> Option<(String, String)> {
    let rest = line.strip_prefix("# scenario=")?;
    let (name, digest) = rest.rsplit_once(" digest=")?;
    Some((name.to_string(), digest.to_string()))
}

/// Reads a trace file. An empty data section is reported as [`TraceError::NoData`].
pub fn read_csv<R: BufRead>(input: R) -> Result<Trace, TraceError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(TraceError::NoData)??;
    let (scenario, digest) =
        parse_header(&header).ok_or_else(|| malformed(1, "expected '# scenario=<name> digest=<hex>'"))?;
    let columns = lines.next().ok_or(TraceError::NoData)??;
    if columns != COLUMNS {
        return Err(malformed(2, format!("expected column header '{COLUMNS}'")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(malformed(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let real = |j: usize, name: &str| {
            fields[j]
                .parse::<f64>()
                .map_err(|e| malformed(line_no, format!("{name}: {e}")))
        };
        let k = fields[0]
            .parse::<u64>()
            .map_err(|e| malformed(line_no, format!("k: {e}")))?;
        let gate = match fields[4] {
            "0" => 0,
            "1" => 1,
            other => return Err(malformed(line_no, format!("u: '{other}' is not 0 or 1"))),
        };
        records.push(TraceRecord {
            k,
            t: real(1, "t")?,
            inductor_current: real(2, "iL")?,
            output_voltage: real(3, "vo")?,
            gate,
        });
    }
    if records.is_empty() {
        return Err(TraceError::NoData);
    }
    Ok(Trace {
        scenario,
        digest,
        records,
    })
}

/// Pointwise relative error; zero when both values are equal.
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: usize,
    pub max_rel_il: f64,
    pub max_rel_vo: f64,
    pub rmse_il: f64,
    pub rmse_vo: f64,
    pub gate_mismatches: usize,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructuralMismatch {
    #[error("scenario digests differ: {0} vs {1}")]
    Digest(String, String),
    #[error("row counts differ: {0} vs {1}")]
    RowCount(usize, usize),
    #[error("tick mismatch at row {row}: k={a} vs k={b}")]
    Tick { row: usize, a: u64, b: u64 },
}

/// Compares two record streams sample by sample.
pub fn compare_records(
    a: &[TraceRecord],
    b: &[TraceRecord],
    tolerance: f64,
) -> Result<Comparison, StructuralMismatch> {
    if a.len() != b.len() {
        return Err(StructuralMismatch::RowCount(a.len(), b.len()));
    }
    let mut c = Comparison {
        rows: a.len(),
        max_rel_il: 0.0,
        max_rel_vo: 0.0,
        rmse_il: 0.0,
        rmse_vo: 0.0,
        gate_mismatches: 0,
        tolerance,
        pass: false,
    };
    let (mut sq_il, mut sq_vo) = (0.0, 0.0);
    for (row, (x, y)) in a.iter().zip(b).enumerate() {
        if x.k != y.k {
            return Err(StructuralMismatch::Tick { row, a: x.k, b: y.k });
        }
        c.max_rel_il = c.max_rel_il.max(relative_error(x.inductor_current, y.inductor_current));
        c.max_rel_vo = c.max_rel_vo.max(relative_error(x.output_voltage, y.output_voltage));
        sq_il += (x.inductor_current - y.inductor_current).powi(2);
        sq_vo += (x.output_voltage - y.output_voltage).powi(2);
        c.gate_mismatches += usize::from(x.gate != y.gate);
    }
    if !a.is_empty() {
        c.rmse_il = (sq_il / a.len() as f64).sqrt();
        c.rmse_vo = (sq_vo / a.len() as f64).sqrt();
    }
    c.pass = c.max_rel_il <= tolerance && c.max_rel_vo <= tolerance && c.gate_mismatches == 0;
    Ok(c)
}

/// Compares two trace files; traces from different scenarios are refused.
pub fn compare_traces(a: &Trace, b: &Trace, tolerance: f64) -> Result<Comparison, StructuralMismatch> {
    if a.digest != b.digest {
        return Err(StructuralMismatch::Digest(a.digest.clone(), b.digest.clone()));
    }
    compare_records(&a.records, &b.records, tolerance)
}
