//! Sample files.
//!
//! CSV: a header row `n,m,Q`, then one row per sample holding the n
//! coordinates followed by the Q·m values grouped by branch. Numbers are
//! written in shortest round-trip form. The grid resolution is recovered
//! from the coordinate spacing and every sample gets the weight `h^n`.
//!
//! JSON mirrors this: `{"n", "m", "Q", "h"?, "points": [[..]], "values": [[..]]}`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aq::SampledQFunction;
use crate::domain::QuadratureGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn write_csv<W: Write>(u: &SampledQFunction, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([u.n().to_string(), u.m().to_string(), u.q().to_string()])
        .map_err(csv_err)?;
    let mut row = Vec::with_capacity(u.n() + u.q() * u.m());
    for i in 0..u.len() {
        row.clear();
        row.extend(u.grid().point(i).iter().map(|v| v.to_string()));
        row.extend(u.raw(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(u: &SampledQFunction) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(u, &mut buf)?;
    String::from_utf8(buf).map_err(|e| parse_err(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<SampledQFunction> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| parse_err("empty sample file"))?
        .map_err(|e| parse_err(e.to_string()))?;
    let dims: Vec<usize> = header
        .iter()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(format!("header must be `n,m,Q`, got `{}`", header.iter().collect::<Vec<_>>().join(","))))?;
    let [n, m, q] = dims[..] else {
        return Err(parse_err(format!("header must have three fields, got {}", dims.len())));
    };
    if n == 0 || m == 0 || q == 0 {
        return Err(parse_err("n, m and Q must be positive"));
    }
    let width = n + q * m;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(format!(
                "row {}: expected {width} fields, found {}",
                line + 2,
                rec.len()
            )));
        }
        for (c, f) in rec.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(format!("row {}: `{f}` is not a number", line + 2)))?;
            if !v.is_finite() {
                return Err(parse_err(format!("row {}: non-finite value", line + 2)));
            }
            if c < n {
                points.push(v);
            } else {
                values.push(v);
            }
        }
    }
    assemble(n, m, q, None, points, values)
}

pub fn read_json<R: Read>(input: R) -> Result<SampledQFunction> {
    let s: SampleJson = serde_json::from_reader(input)?;
    let (n, m, q) = (s.n, s.m, s.q);
    if n == 0 || m == 0 || q == 0 {
        return Err(parse_err("n, m and Q must be positive"));
    }
    if s.points.len() != s.values.len() {
        return Err(parse_err("points and values differ in length"));
    }
    let mut points = Vec::with_capacity(n * s.points.len());
    let mut values = Vec::with_capacity(q * m * s.points.len());
    for (p, v) in s.points.iter().zip(&s.values) {
        if p.len() != n || v.len() != q * m {
            return Err(parse_err("row width does not match n, m, Q"));
        }
        points.extend_from_slice(p);
        values.extend_from_slice(v);
    }
    assemble(n, m, q, s.h, points, values)
}

pub fn to_json(u: &SampledQFunction) -> SampleJson {
    SampleJson {
        n: u.n(),
        m: u.m(),
        q: u.q(),
        h: Some(u.grid().resolution()),
        points: (0..u.len()).map(|i| u.grid().point(i).to_vec()).collect(),
        values: (0..u.len()).map(|i| u.raw(i).to_vec()).collect(),
    }
}

/// Reads `.json` files as JSON and everything else as CSV.
pub fn read_samples(path: &Path) -> Result<SampledQFunction> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_json(reader)
    } else {
        read_csv(reader)
    }
}

fn assemble(
    n: usize,
    m: usize,
    q: usize,
    h: Option<f64>,
    points: Vec<f64>,
    values: Vec<f64>,
) -> Result<SampledQFunction> {
    if points.is_empty() {
        return Err(parse_err("no samples"));
    }
    let h = match h {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(parse_err(format!("resolution {h} must be positive"))),
        None => infer_spacing(n, &points)?,
    };
    let count = points.len() / n;
    let grid = QuadratureGrid::from_points(n, h, points, vec![h.powi(n as i32); count])?;
    SampledQFunction::new(grid, q, m, values)
}

/// Smallest positive gap between distinct coordinates along any axis.
fn infer_spacing(n: usize, points: &[f64]) -> Result<f64> {
    let mut h = f64::INFINITY;
    for a in 0..n {
        let mut c: Vec<f64> = points.iter().skip(a).step_by(n).copied().collect();
        c.sort_by(f64::total_cmp);
        for w in c.windows(2) {
            let d = w[1] - w[0];
            // Ignore round-off between nominally equal coordinates.
            if d > 1e-9 * w[1].abs().max(1.0) {
                h = h.min(d);
            }
        }
    }
    if h.is_finite() {
        Ok(h)
    } else {
        Err(parse_err("cannot infer the grid spacing from fewer than two distinct coordinates"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;

    #[test]
    fn csv_round_trip() {
        let grid = Domain::unit_ball(2).sample(0.25).unwrap();
        let vals: Vec<f64> = (0..grid.len() * 2).map(|i| (i as f64).sin() / 3.0).collect();
        let u = SampledQFunction::new(grid, 2, 1, vals).unwrap();
        let text = to_csv_string(&u).unwrap();
        assert!(text.starts_with("2,1,2\n"));
        let v = read_csv(text.as_bytes()).unwrap();
        assert_eq!(v.raw_values(), u.raw_values());
        assert!((v.grid().resolution() - 0.25).abs() < 1e-12);
        assert_eq!(v.grid().weights(), u.grid().weights());
    }

    #[test]
    fn bad_header() {
        assert!(matches!(read_csv("a,b\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_csv("2,1,1\n0,0\n".as_bytes()), Err(Error::Parse(_))));
    }
}
