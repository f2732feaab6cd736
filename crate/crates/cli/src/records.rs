//! CSV and JSON emission of sweep records and transition-gap tables.

use std::io::Write;

use coopfield::experiments::{Solver, SweepRecord};
use coopfield::RiskMode;
use serde::Serialize;

use crate::config::Format;
use crate::error::{CliError, CliResult};

pub const SWEEP_HEADER: [&str; 11] = [
    "beta",
    "b",
    "c",
    "gamma",
    "n",
    "solver",
    "mode",
    "mean_density",
    "density_variance",
    "stderr",
    "tau_int",
];

pub const GAP_HEADER: [&str; 10] = [
    "beta",
    "b",
    "gamma",
    "n",
    "mode",
    "c_low",
    "c_high",
    "density_low",
    "density_high",
    "gap",
];

/// One row of a transition-gap table.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub beta: f64,
    pub b: f64,
    pub gamma: f64,
    pub n: usize,
    pub mode: RiskMode,
    pub c_low: f64,
    pub c_high: f64,
    pub density_low: f64,
    pub density_high: f64,
    pub gap: f64,
}

/// `printf("%.12g")`; `nan`, `inf` and `-inf` for non-finite values.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn rounded(x: f64) -> Option<f64> {
    x.is_finite().then(|| format_real(x).parse().expect("formatted real"))
}

#[derive(Serialize)]
struct SweepJson<'a> {
    beta: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    gamma: Option<f64>,
    n: usize,
    solver: &'a str,
    mode: &'a str,
    mean_density: Option<f64>,
    density_variance: Option<f64>,
    stderr: Option<f64>,
    tau_int: Option<f64>,
}

#[derive(Serialize)]
struct GapJson<'a> {
    beta: Option<f64>,
    b: Option<f64>,
    gamma: Option<f64>,
    n: usize,
    mode: &'a str,
    c_low: Option<f64>,
    c_high: Option<f64>,
    density_low: Option<f64>,
    density_high: Option<f64>,
    gap: Option<f64>,
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::io("writing CSV", e)
}

fn opt(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

/// Serialises sweep records; output depends only on the records.
pub fn emit_records(records: &[SweepRecord<f64>], format: Format, out: &mut dyn Write) -> CliResult<()> {
    if records.is_empty() {
        return Err(CliError::Usage("no records to emit".into()));
    }
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(SWEEP_HEADER).map_err(csv_error)?;
            for r in records {
                w.write_record([
                    format_real(r.beta),
                    format_real(r.b),
                    format_real(r.c),
                    format_real(r.gamma),
                    r.n.to_string(),
                    r.solver.tag().to_string(),
                    r.mode.tag().to_string(),
                    format_real(r.mean_density),
                    format_real(r.density_variance),
                    opt(r.stderr),
                    opt(r.tau_int),
                ])
                .map_err(csv_error)?;
            }
            w.flush().map_err(|e| CliError::io("writing CSV", e))
        }
        Format::Json => {
            let rows: Vec<SweepJson> = records
                .iter()
                .map(|r| SweepJson {
                    beta: rounded(r.beta),
                    b: rounded(r.b),
                    c: rounded(r.c),
                    gamma: rounded(r.gamma),
                    n: r.n,
                    solver: r.solver.tag(),
                    mode: r.mode.tag(),
                    mean_density: rounded(r.mean_density),
                    density_variance: rounded(r.density_variance),
                    stderr: r.stderr.and_then(rounded),
                    tau_int: r.tau_int.and_then(rounded),
                })
                .collect();
            write_json(&rows, out)
        }
    }
}

pub fn emit_gap_table(rows: &[GapRow], format: Format, out: &mut dyn Write) -> CliResult<()> {
    if rows.is_empty() {
        return Err(CliError::Usage("no rows to emit".into()));
    }
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(GAP_HEADER).map_err(csv_error)?;
            for r in rows {
                w.write_record([
                    format_real(r.beta),
                    format_real(r.b),
                    format_real(r.gamma),
                    r.n.to_string(),
                    r.mode.tag().to_string(),
                    format_real(r.c_low),
                    format_real(r.c_high),
                    format_real(r.density_low),
                    format_real(r.density_high),
                    format_real(r.gap),
                ])
                .map_err(csv_error)?;
            }
            w.flush().map_err(|e| CliError::io("writing CSV", e))
        }
        Format::Json => {
            let rows: Vec<GapJson> = rows
                .iter()
                .map(|r| GapJson {
                    beta: rounded(r.beta),
                    b: rounded(r.b),
                    gamma: rounded(r.gamma),
                    n: r.n,
                    mode: r.mode.tag(),
                    c_low: rounded(r.c_low),
                    c_high: rounded(r.c_high),
                    density_low: rounded(r.density_low),
                    density_high: rounded(r.density_high),
                    gap: rounded(r.gap),
                })
                .collect();
            write_json(&rows, out)
        }
    }
}

fn write_json<S: Serialize>(rows: &[S], out: &mut dyn Write) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, rows).map_err(|e| CliError::io("writing JSON", e))?;
    out.write_all(b"\n").map_err(|e| CliError::io("writing JSON", e))
}

/// A previously emitted table.
#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Sweep(Vec<SweepRecord<f64>>),
    Gap(Vec<GapRow>),
}

fn field(row: &csv::StringRecord, i: usize, line: usize) -> CliResult<&str> {
    row.get(i)
        .ok_or_else(|| CliError::Usage(format!("line {line}: missing column {}", i + 1)))
}

fn parse_real(s: &str, column: &str, line: usize) -> CliResult<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| CliError::Usage(format!("line {line}: `{column}` is not a number: `{s}`"))),
    }
}

fn parse_mode(s: &str, line: usize) -> CliResult<RiskMode> {
    s.parse()
        .map_err(|_| CliError::Usage(format!("line {line}: unknown mode `{s}`")))
}

fn parse_n(s: &str, line: usize) -> CliResult<usize> {
    s.parse()
        .map_err(|_| CliError::Usage(format!("line {line}: `n` is not an integer: `{s}`")))
}

/// Reads a sweep CSV or a gap-table CSV, recognised by its header.
pub fn read_table(text: &str) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("unreadable CSV header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("malformed CSV: {e}")))?;
    if names == SWEEP_HEADER {
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let line = i + 2;
            let real = |col: usize| parse_real(field(row, col, line)?, SWEEP_HEADER[col], line);
            let optional = |col: usize| -> CliResult<Option<f64>> {
                let s = field(row, col, line)?;
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse_real(s, SWEEP_HEADER[col], line).map(Some)
                }
            };
            let solver: Solver = field(row, 5, line)?
                .parse()
                .map_err(|_| CliError::Usage(format!("line {line}: unknown solver")))?;
            let mean_density = real(7)?;
            out.push(SweepRecord {
                beta: real(0)?,
                b: real(1)?,
                c: real(2)?,
                gamma: real(3)?,
                n: parse_n(field(row, 4, line)?, line)?,
                solver,
                mode: parse_mode(field(row, 6, line)?, line)?,
                mean_density,
                density_variance: real(8)?,
                stderr: optional(9)?,
                tau_int: optional(10)?,
                error: mean_density.is_nan().then(|| "not a number".to_string()),
            });
        }
        Ok(Table::Sweep(out))
    } else if names == GAP_HEADER {
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let line = i + 2;
            let real = |col: usize| parse_real(field(row, col, line)?, GAP_HEADER[col], line);
            out.push(GapRow {
                beta: real(0)?,
                b: real(1)?,
                gamma: real(2)?,
                n: parse_n(field(row, 3, line)?, line)?,
                mode: parse_mode(field(row, 4, line)?, line)?,
                c_low: real(5)?,
                c_high: real(6)?,
                density_low: real(7)?,
                density_high: real(8)?,
                gap: real(9)?,
            });
        }
        Ok(Table::Gap(out))
    } else {
        Err(CliError::Usage(format!(
            "unrecognised CSV header `{}`",
            names.join(",")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(beta: f64, mean: f64) -> SweepRecord<f64> {
        SweepRecord {
            beta,
            b: 1.0,
            c: 0.665,
            gamma: 1.0,
            n: 1024,
            solver: Solver::Mc,
            mode: RiskMode::MeanFieldClosedForm,
            mean_density: mean,
            density_variance: 1.234567890123456e-5,
            stderr: Some(3.3e-4),
            tau_int: Some(12.5),
            error: None,
        }
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_real(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(format_real(1024.0), "1024");
        assert_eq!(format_real(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_real(-0.000123), "-0.000123");
        assert_eq!(format_real(0.99999999999995), "1");
        assert_eq!(format_real(-0.0), "0");
        assert_eq!(format_real(f64::NAN), "nan");
    }

    #[test]
    fn csv_round_trip() {
        let rec = vec![record(2.2, 0.123456789012345)];
        let mut buf = Vec::new();
        emit_records(&rec, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("beta,b,c,gamma,n,solver,mode,mean_density,density_variance,stderr,tau_int\n"));
        let Table::Sweep(back) = read_table(&text).unwrap() else {
            panic!("wrong table kind")
        };
        assert_eq!(back.len(), 1);
        let r = &back[0];
        assert!((r.mean_density / 0.123456789012345 - 1.0).abs() < 1e-11);
        assert_eq!(r.solver, Solver::Mc);
        assert_eq!(r.mode, RiskMode::MeanFieldClosedForm);
        assert_eq!(r.stderr, Some(3.3e-4));
        // re-emission is byte-identical
        let mut again = Vec::new();
        emit_records(&back, Format::Csv, &mut again).unwrap();
        assert_eq!(text.as_bytes(), &again[..]);
    }

    #[test]
    fn deterministic_records_leave_error_columns_empty() {
        let mut r = record(1.0, 0.5);
        r.solver = Solver::Exact;
        r.stderr = None;
        r.tau_int = None;
        let mut buf = Vec::new();
        emit_records(&[r], Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,"));
    }

    #[test]
    fn json_objects_use_csv_field_names() {
        let mut buf = Vec::new();
        emit_records(&[record(1.0, f64::NAN)], Format::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v.as_array().unwrap()[0].as_object().unwrap();
        for key in SWEEP_HEADER {
            assert!(obj.contains_key(key), "{key}");
        }
        assert!(obj["mean_density"].is_null());
    }

    #[test]
    fn gap_round_trip_and_errors() {
        let row = GapRow {
            beta: 3.0,
            b: 1.0,
            gamma: 1.0,
            n: 1024,
            mode: RiskMode::MeanFieldClosedForm,
            c_low: 0.664,
            c_high: 0.665,
            density_low: 0.002,
            density_high: 0.0019,
            gap: 0.0001,
        };
        let mut buf = Vec::new();
        emit_gap_table(std::slice::from_ref(&row), Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_table(&text).unwrap(), Table::Gap(vec![row]));
        assert!(emit_records(&[], Format::Csv, &mut Vec::new()).is_err());
        assert!(read_table("x,y\n1,2\n").is_err());
    }

    #[test]
    fn ten_thousand_records_are_fast() {
        let recs: Vec<_> = (0..10_000).map(|i| record(i as f64 * 1e-3, 0.3)).collect();
        let start = std::time::Instant::now();
        let mut buf = Vec::new();
        emit_records(&recs, Format::Csv, &mut buf).unwrap();
        assert!(start.elapsed().as_secs_f64() < 1.0);
    }
}
