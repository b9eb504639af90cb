//! Trajectory and error CSV files.
//!
//! Numbers are written like C's `%.17g`, which round-trips every `f64`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::geometry::Vec3;
use crate::sim::{LogRole, TrajectoryLog};

pub const TRAJECTORY_HEADER: [&str; 9] = ["t", "agent", "role", "x", "y", "z", "vx", "vy", "vz"];
pub const ERROR_HEADER: [&str; 5] = ["t", "agent", "ex", "ey", "ez"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] ::csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

/// Formats like C's `printf("%.17g", v)`.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa.to_string()), exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One parsed row of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    /// 1-based agent id.
    pub agent: usize,
    pub role: LogRole,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// One parsed row of an error CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub t: f64,
    pub agent: usize,
    pub error: Vec3,
}

pub fn write_trajectory<W: Write>(log: &TrajectoryLog, out: W) -> Result<(), CsvError> {
    let mut w = ::csv::WriterBuilder::new().terminator(::csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in &log.rows {
        let mut rec = vec![format_g17(r.t), (r.agent + 1).to_string(), r.role.as_str().to_string()];
        rec.extend(r.position.iter().chain(r.velocity.iter()).map(|v| format_g17(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_errors<W: Write>(log: &TrajectoryLog, out: W) -> Result<(), CsvError> {
    let mut w = ::csv::WriterBuilder::new().terminator(::csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(ERROR_HEADER)?;
    for r in &log.rows {
        let mut rec = vec![format_g17(r.t), (r.agent + 1).to_string()];
        rec.extend(r.error.iter().map(|v| format_g17(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn reader<R: Read>(input: R, expected: &[&str]) -> Result<::csv::Reader<R>, CsvError> {
    let mut r = ::csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(CsvError::Header { found, expected: expected.iter().map(|s| s.to_string()).collect() });
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(rec: &::csv::StringRecord, k: usize, line: u64) -> Result<T, CsvError> {
    let raw = rec.get(k).ok_or_else(|| CsvError::Row { line, message: format!("missing column {k}") })?;
    raw.parse().map_err(|_| CsvError::Row { line, message: format!("cannot parse {raw:?}") })
}

fn vec_at(rec: &::csv::StringRecord, k: usize, line: u64) -> Result<Vec3, CsvError> {
    Ok(Vec3::new(field(rec, k, line)?, field(rec, k + 1, line)?, field(rec, k + 2, line)?))
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectoryRow>, CsvError> {
    let mut r = reader(input, &TRAJECTORY_HEADER)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let role_raw = rec.get(2).unwrap_or_default();
        let role = LogRole::parse(role_raw)
            .ok_or_else(|| CsvError::Row { line, message: format!("unknown role {role_raw:?}") })?;
        rows.push(TrajectoryRow {
            t: field(&rec, 0, line)?,
            agent: field(&rec, 1, line)?,
            role,
            position: vec_at(&rec, 3, line)?,
            velocity: vec_at(&rec, 6, line)?,
        });
    }
    Ok(rows)
}

pub fn read_errors<R: Read>(input: R) -> Result<Vec<ErrorRow>, CsvError> {
    let mut r = reader(input, &ERROR_HEADER)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(ErrorRow { t: field(&rec, 0, line)?, agent: field(&rec, 1, line)?, error: vec_at(&rec, 2, line)? });
    }
    Ok(rows)
}
