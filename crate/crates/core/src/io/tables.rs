use std::io::{Read, Write};

use super::{fmt_f64, format_metadata, parse_error, parse_metadata, parse_value, Metadata};
use crate::error::{Error, Result};
use crate::harmonic::GlStage;
use crate::optimize::TraceRecord;
use crate::spectral::{SpectrumResult, MULTIPLICITY_GAP};

pub const SPECTRUM_COLUMNS: [&str; 4] = ["index", "eigenvalue", "multiplicity_group", "residual"];
pub const GL_TRACE_COLUMNS: [&str; 6] = ["stage", "epsilon", "iterations", "dirichlet", "potential_term", "residual"];
pub const OPTIMIZER_TRACE_COLUMNS: [&str; 5] = ["iteration", "F1", "gap", "beta_change", "map_rank"];

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            }
        } else {
            Error::Parse(e.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub multiplicity_group: usize,
    pub residual: f64,
}

fn header_line(meta: &Metadata) -> String {
    let body: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("# {}\n", body.join(" "))
}

fn spectrum_meta(s: &SpectrumResult, extra: &Metadata) -> Metadata {
    let mut meta = extra.clone();
    meta.insert("problem".into(), s.problem.to_string());
    meta.insert("zero_tol".into(), fmt_f64(s.zero_tol));
    meta.insert("multiplicity_gap".into(), fmt_f64(MULTIPLICITY_GAP));
    meta
}

/// One `#` line with `key=value` pairs (problem, zero_tol, multiplicity_gap
/// and `extra`), then the CSV table. Values in `extra` must not contain spaces.
pub fn write_spectrum_csv(s: &SpectrumResult, extra: &Metadata, mut w: impl Write) -> Result<()> {
    w.write_all(header_line(&spectrum_meta(s, extra)).as_bytes())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SPECTRUM_COLUMNS)?;
    for (k, g) in s.groups().into_iter().enumerate() {
        out.write_record([k.to_string(), fmt_f64(s.eigenvalues[k]), g.to_string(), fmt_f64(s.residuals[k])])?;
    }
    out.flush()?;
    Ok(())
}

fn split_header(text: &str) -> Result<(Metadata, &str)> {
    let Some(rest) = text.strip_prefix('#') else {
        return parse_error("expected a '#' header line");
    };
    let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
    let meta = parse_metadata(line.split_whitespace())?;
    Ok((meta, body))
}

fn table(body: &str, columns: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
    let head = r.headers()?;
    if head.iter().ne(columns.iter().copied()) {
        return parse_error(format!("expected columns {columns:?}, found {head:?}"));
    }
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    parse_value(name, &rec[i])
}

pub fn read_spectrum_csv(mut r: impl Read) -> Result<(Metadata, Vec<SpectrumRow>)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (meta, body) = split_header(&text)?;
    let rows = table(body, &SPECTRUM_COLUMNS)?
        .iter()
        .map(|rec| {
            Ok(SpectrumRow {
                index: field(rec, 0, "index")?,
                eigenvalue: field(rec, 1, "eigenvalue")?,
                multiplicity_group: field(rec, 2, "multiplicity_group")?,
                residual: field(rec, 3, "residual")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((meta, rows))
}

/// Eigenvectors as a vertex-major text matrix, one column per eigenvalue,
/// below the same `#` header as the spectrum table.
pub fn write_eigenvectors(s: &SpectrumResult, extra: &Metadata, mut w: impl Write) -> Result<()> {
    let mut meta = spectrum_meta(s, extra);
    meta.insert("columns".into(), s.len().to_string());
    w.write_all(header_line(&meta).as_bytes())?;
    let n = s.eigenvectors.first().map_or(0, |v| v.len());
    for i in 0..n {
        let row: Vec<String> = s.eigenvectors.iter().map(|v| fmt_f64(v.values()[i])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_gl_trace(stages: &[GlStage], extra: &Metadata, mut w: impl Write) -> Result<()> {
    w.write_all(format_metadata(extra, "# ").as_bytes())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(GL_TRACE_COLUMNS)?;
    for s in stages {
        out.write_record([
            s.stage.to_string(),
            fmt_f64(s.epsilon),
            s.iterations.to_string(),
            fmt_f64(s.dirichlet),
            fmt_f64(s.potential_term),
            fmt_f64(s.residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Stages as stored; the `converged` flag is not part of the table and reads
/// back as `residual` below the `tol` recorded in the comment lines, or
/// `false` when no tolerance was recorded.
pub fn read_gl_trace(mut r: impl Read) -> Result<(Metadata, Vec<GlStage>)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let meta = parse_metadata(text.lines().take_while(|l| l.starts_with('#')))?;
    let tol: Option<f64> = meta.get("tol").map(|t| parse_value("tol", t)).transpose()?;
    let rows = table(&text, &GL_TRACE_COLUMNS)?
        .iter()
        .map(|rec| {
            let residual: f64 = field(rec, 5, "residual")?;
            Ok(GlStage {
                stage: field(rec, 0, "stage")?,
                epsilon: field(rec, 1, "epsilon")?,
                iterations: field(rec, 2, "iterations")?,
                dirichlet: field(rec, 3, "dirichlet")?,
                potential_term: field(rec, 4, "potential_term")?,
                residual,
                converged: tol.is_some_and(|t| residual <= t),
            })
        })
        .collect::<Result<_>>()?;
    Ok((meta, rows))
}

pub fn write_optimizer_trace(records: &[TraceRecord], extra: &Metadata, mut w: impl Write) -> Result<()> {
    w.write_all(format_metadata(extra, "# ").as_bytes())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(OPTIMIZER_TRACE_COLUMNS)?;
    for r in records {
        out.write_record([
            r.iteration.to_string(),
            fmt_f64(r.f1),
            fmt_f64(r.gap),
            fmt_f64(r.beta_change),
            r.map_rank.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Records as stored; `harmonicity_defect` is not part of the table.
pub fn read_optimizer_trace(mut r: impl Read) -> Result<(Metadata, Vec<TraceRecord>)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let meta = parse_metadata(text.lines().take_while(|l| l.starts_with('#')))?;
    let rows = table(&text, &OPTIMIZER_TRACE_COLUMNS)?
        .iter()
        .map(|rec| {
            Ok(TraceRecord {
                iteration: field(rec, 0, "iteration")?,
                f1: field(rec, 1, "F1")?,
                gap: field(rec, 2, "gap")?,
                beta_change: field(rec, 3, "beta_change")?,
                map_rank: field(rec, 4, "map_rank")?,
                harmonicity_defect: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok((meta, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_columns_are_rejected() {
        let text = "# problem=x\nindex,eigenvalue,group,residual\n0,1,0,0\n";
        assert!(read_spectrum_csv(text.as_bytes()).is_err());
        assert!(read_optimizer_trace("iteration,F1\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn non_numeric_fields_are_rejected() {
        let text = "# problem=x\nindex,eigenvalue,multiplicity_group,residual\n0,abc,0,0\n";
        assert!(matches!(read_spectrum_csv(text.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn nan_gap_survives() {
        let rec = TraceRecord { iteration: 0, f1: 1.5, gap: f64::NAN, beta_change: 0.0, map_rank: 2, harmonicity_defect: None };
        let mut buf = Vec::new();
        write_optimizer_trace(&[rec], &Metadata::new(), &mut buf).unwrap();
        let (_, back) = read_optimizer_trace(buf.as_slice()).unwrap();
        assert!(back[0].gap.is_nan());
        assert_eq!(back[0].f1, 1.5);
    }
}
