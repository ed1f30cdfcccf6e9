//! CSV serialisation of traces (format v1).
//!
//! ```text
//! # drem-observer trace v1
//! t,x_1..x_n,xhat_1..xhat_n,zbar_1..zbar_n,thetahat_1..thetahat_p,
//!   thetatilde_1..thetatilde_p,delta,det_phi,min_eig_phi,eps_1..eps_p,swap_residual,V0
//! ```
//!
//! Values are written with 17 significant digits, so a written trace parses
//! back bit-exactly.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sim::TraceRow;

pub const HEADER_COMMENT: &str = "# drem-observer trace v1";

/// State and parameter dimension of a CSV trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceShape {
    pub n_x: usize,
    pub p: usize,
}

pub fn trace_columns(shape: TraceShape) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let mut group = |prefix: &str, n: usize| cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    group("x", shape.n_x);
    group("xhat", shape.n_x);
    group("zbar", shape.n_x);
    group("thetahat", shape.p);
    group("thetatilde", shape.p);
    cols.extend(["delta", "det_phi", "min_eig_phi"].map(String::from));
    cols.extend((1..=shape.p).map(|i| format!("eps_{i}")));
    cols.extend(["swap_residual", "V0"].map(String::from));
    cols
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv<W: Write>(mut out: W, shape: TraceShape, rows: &[TraceRow]) -> Result<()> {
    let io = |e: std::io::Error| Error::Trace(e.to_string());
    writeln!(out, "{HEADER_COMMENT}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(trace_columns(shape)).map_err(csv_err)?;
    let mut record = Vec::with_capacity(3 * shape.n_x + 3 * shape.p + 6);
    for r in rows {
        record.clear();
        record.push(fmt(r.t));
        for v in [&r.x, &r.x_hat, &r.z_bar, &r.theta_hat, &r.theta_tilde] {
            record.extend(v.iter().map(|&x| fmt(x)));
        }
        record.extend([r.delta, r.det_phi, r.min_eig_phi].map(fmt));
        record.extend(r.eps.iter().map(|&x| fmt(x)));
        record.extend([r.swap_residual, r.v0].map(fmt));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Infers the trace shape from a header row.
pub fn shape_from_header(header: &[String]) -> Result<TraceShape> {
    let count = |prefix: &str| {
        header
            .iter()
            .filter(|h| h.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
            .count()
    };
    let shape = TraceShape {
        n_x: count("x_"),
        p: count("thetahat_"),
    };
    if shape.n_x == 0 || shape.p == 0 {
        return Err(Error::Trace("header lacks x_i or thetahat_i columns".into()));
    }
    let expected = trace_columns(shape);
    if header != expected.as_slice() {
        return Err(Error::Trace(format!(
            "header does not match format v1: expected `{}`",
            expected.join(",")
        )));
    }
    Ok(shape)
}

/// Reads a v1 trace.
pub fn read_trace_csv<R: Read>(input: R) -> Result<(TraceShape, Vec<TraceRow>)> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first).map_err(|e| Error::Trace(e.to_string()))?;
    if first.trim_end() != HEADER_COMMENT {
        return Err(Error::Trace(format!("missing `{HEADER_COMMENT}` line")));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Trace(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let shape = shape_from_header(&header)?;
    let TraceShape { n_x, p } = shape;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Trace(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Trace(format!("row {}: {e}", line + 1)))?;
        if vals.len() != header.len() {
            return Err(Error::Trace(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                vals.len(),
                header.len()
            )));
        }
        let mut at = 0;
        let mut take = |n: usize| {
            let v = DVector::from_column_slice(&vals[at..at + n]);
            at += n;
            v
        };
        let t = take(1)[0];
        let x = take(n_x);
        let x_hat = take(n_x);
        let z_bar = take(n_x);
        let theta_hat = take(p);
        let theta_tilde = take(p);
        let scalars = take(3);
        let eps = take(p);
        let tail = take(2);
        rows.push(TraceRow {
            t,
            x,
            x_hat,
            z_bar,
            theta_hat,
            theta_tilde,
            delta: scalars[0],
            det_phi: scalars[1],
            min_eig_phi: scalars[2],
            eps,
            swap_residual: tail[0],
            v0: tail[1],
        });
    }
    Ok((shape, rows))
}
