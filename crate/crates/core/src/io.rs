//! CSV formats.
//!
//! Grid functions: header `t,v1,...,vp,is_left_limit`. Rows run through the
//! pieces in order; the left limit at `n` (row with `t = n`,
//! `is_left_limit = 1`) precedes the samples of piece `n`, and the left limit
//! at the right end of the window comes last.
//!
//! Sequences: `n,v1,...,vp`, header optional on input.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{AaSequence, GridFunction, Window};

/// Significant digits that make every `f64` round-trip.
pub const FULL_PRECISION: usize = 17;

fn fmt_value(v: f64, precision: usize) -> String {
    format!("{:.*e}", precision.saturating_sub(1), v)
}

fn header(first: &str, dim: usize, trailer: Option<&str>) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend((1..=dim).map(|i| format!("v{i}")));
    if let Some(t) = trailer {
        h.push(t.to_string());
    }
    h
}

pub fn write_grid<W: Write>(f: &GridFunction, out: W, precision: usize) -> Result<()> {
    if precision == 0 || precision > FULL_PRECISION {
        return Err(Error::Config(format!("precision must lie in 1..={FULL_PRECISION}, got {precision}")));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("t", f.dim(), Some("is_left_limit")))?;
    let win = f.window();
    let m = f.samples_per_unit();
    let row = |t: f64, vals: &[f64], ll: bool| {
        let mut r = vec![format!("{t}")];
        r.extend(vals.iter().map(|v| fmt_value(*v, precision)));
        r.push(if ll { "1" } else { "0" }.to_string());
        r
    };
    for n in win.lo..win.hi {
        if n > win.lo {
            w.write_record(row(n as f64, f.left_limit(n)?, true))?;
        }
        for j in 0..m {
            w.write_record(row(f.lattice_time(n, j), f.sample(n, j), false))?;
        }
    }
    w.write_record(row(win.hi as f64, f.left_limit(win.hi)?, true))?;
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidData(format!("line {line}: {field:?} is not a number")))
}

/// Reads a grid function, inferring the window and the samples per unit.
pub fn read_grid<R: Read>(input: R) -> Result<GridFunction> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let hdr = rdr.headers()?.clone();
    if hdr.len() < 3 || hdr.get(0).map(str::trim) != Some("t") || hdr.get(hdr.len() - 1).map(str::trim) != Some("is_left_limit") {
        return Err(Error::InvalidData("expected header t,v1,...,vp,is_left_limit".into()));
    }
    let dim = hdr.len() - 2;
    // (t, values, is_left_limit, line)
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let t = parse_f64(&rec[0], line)?;
        let vals = (1..=dim).map(|i| parse_f64(&rec[i], line)).collect::<Result<Vec<_>>>()?;
        let ll = match rec[dim + 1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::InvalidData(format!("line {line}: is_left_limit must be 0 or 1, got {other:?}"))),
        };
        rows.push((t, vals, ll, line));
    }
    let m = rows.iter().take_while(|r| !r.2).count();
    if m == 0 || rows.len() == m {
        return Err(Error::InvalidData("grid CSV needs sample rows followed by a left-limit row".into()));
    }
    let lo = rows[0].0.round();
    let pieces = rows.len() / (m + 1);
    if pieces * (m + 1) != rows.len() {
        return Err(Error::InvalidData(format!(
            "{} rows do not form whole pieces of {m} samples",
            rows.len()
        )));
    }
    let window = Window::new(lo as i64, lo as i64 + pieces as i64);
    let mut interior = Vec::with_capacity(pieces * m * dim);
    let mut left = Vec::with_capacity(pieces * dim);
    let mut it = rows.into_iter();
    for n in window.lo..window.hi {
        if n > window.lo {
            let (t, v, ll, line) = it.next().expect("counted");
            if !ll || t != n as f64 {
                return Err(Error::InvalidData(format!("line {line}: expected the left limit at {n}")));
            }
            left.extend(v);
        }
        for j in 0..m {
            let (t, v, ll, line) = it.next().expect("counted");
            let expect = n as f64 + j as f64 / m as f64;
            if ll || (t - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
                return Err(Error::InvalidData(format!("line {line}: expected the sample at t = {expect}")));
            }
            interior.extend(v);
        }
    }
    let (t, v, ll, line) = it.next().expect("counted");
    if !ll || t != window.hi as f64 {
        return Err(Error::InvalidData(format!("line {line}: expected the final left limit at {}", window.hi)));
    }
    left.extend(v);
    GridFunction::new(window, m, dim, interior, left)
}

pub fn write_sequence<W: Write>(s: &AaSequence, out: W, precision: usize) -> Result<()> {
    if precision == 0 || precision > FULL_PRECISION {
        return Err(Error::Config(format!("precision must lie in 1..={FULL_PRECISION}, got {precision}")));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("n", s.dim(), None))?;
    for (n, v) in s.iter() {
        let mut r = vec![n.to_string()];
        r.extend(v.iter().map(|x| fmt_value(*x, precision)));
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `n,v1,...,vp` rows with consecutive `n`; a non-numeric first row is
/// taken as a header.
pub fn read_sequence<R: Read>(input: R) -> Result<AaSequence> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut first: Option<i64> = None;
    let mut dim = 0;
    let mut values = Vec::new();
    let mut count = 0i64;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let n: i64 = match rec[0].trim().parse() {
            Ok(n) => n,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::InvalidData(format!("line {line}: {:?} is not an integer index", &rec[0]))),
        };
        if rec.len() < 2 {
            return Err(Error::InvalidData(format!("line {line}: no values")));
        }
        match first {
            None => {
                first = Some(n);
                dim = rec.len() - 1;
            }
            Some(lo) if n != lo + count => {
                return Err(Error::InvalidData(format!("line {line}: index {n}, expected {}", lo + count)));
            }
            _ => {}
        }
        for f in rec.iter().skip(1) {
            values.push(parse_f64(f, line)?);
        }
        count += 1;
    }
    let lo = first.ok_or_else(|| Error::InvalidData("empty sequence".into()))?;
    AaSequence::new(Window::new(lo, lo + count - 1), dim, values)
}
