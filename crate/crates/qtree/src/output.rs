//! Self-describing CSV tables: a block of `# key: value` lines followed by
//! a header row and data rows.

use std::io::Write;

use crate::error::{Error, Result};
use crate::stats::LogTypical;
use crate::su2::ScanPoint;

pub const U1_COLUMNS: &[&str] = &["d", "p", "k", "protocol", "lnZtyp", "stderr", "frac_nonzero", "pool_size", "seed"];
pub const SU2_COLUMNS: &[&str] = &["theta1", "theta2", "p", "k", "r", "lnZtyp_s", "lnZtyp_t", "n_groups", "log_scale"];
pub const REPLICA_COLUMNS: &[&str] = &["theta1", "theta2", "p", "n", "k", "r_n"];
pub const ASYMMETRY_COLUMNS: &[&str] = &["theta1", "theta2", "delta_r"];
pub const VELOCITY_COLUMNS: &[&str] = &["family", "params", "lambda", "v"];
pub const CONTOUR_COLUMNS: &[&str] = &["theta1", "theta2"];
pub const SCALING_COLUMNS: &[&str] = &["theta1", "theta2", "kappa", "K"];

/// Locale-free float text: shortest round-trip form, `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a metadata entry; newlines in either part are flattened.
    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let clean = |s: String| s.replace(['\n', '\r'], " ");
        self.meta.push((clean(key.into()), clean(value.to_string())));
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} fields, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}").map_err(io)?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(io)
    }
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Identification shared by every row of one pool run.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolRun<'a> {
    /// Qudit dimension, or `inf` for the classical limit.
    pub d: &'a str,
    pub p: f64,
    pub protocol: &'a str,
    pub pool_size: usize,
    pub seed: u64,
}

/// One row per generation; entry `k` of `series` is generation `k`.
pub fn push_pool_rows(table: &mut Table, run: &PoolRun, series: &[LogTypical]) -> Result<()> {
    for (k, s) in series.iter().enumerate() {
        table.push(vec![
            run.d.to_string(),
            num(run.p),
            k.to_string(),
            run.protocol.to_string(),
            num(s.mean),
            num(s.stderr),
            num(s.frac_nonzero),
            run.pool_size.to_string(),
            run.seed.to_string(),
        ])?;
    }
    Ok(())
}

pub fn push_scan_rows(table: &mut Table, points: &[ScanPoint]) -> Result<()> {
    for s in points {
        table.push(vec![
            num(s.theta1),
            num(s.theta2),
            num(s.p),
            s.k.to_string(),
            num(s.r),
            num(s.ln_z_singlet),
            num(s.ln_z_triplet),
            s.groups.to_string(),
            num(s.log_scale),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("seed", 3).meta("note", "two\nlines");
        t.push(vec![num(0.5), num(f64::NEG_INFINITY)]).unwrap();
        t.push(vec!["x,y".into(), num(f64::NAN)]).unwrap();
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "# seed: 3\n# note: two lines\na,b\n0.5,-inf\n\"x,y\",nan\n");
        assert!(t.push(vec!["1".into()]).is_err());
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e21, std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn pool_rows_follow_schema() {
        let mut t = Table::new(U1_COLUMNS);
        let run = PoolRun { d: "inf", p: 0.3, protocol: "sharpening", pool_size: 10, seed: 7 };
        let s = LogTypical { mean: -1.5, stderr: 0.1, frac_nonzero: 1.0, count: 10 };
        push_pool_rows(&mut t, &run, &[s, s]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows()[1], ["inf", "0.3", "1", "sharpening", "-1.5", "0.1", "1", "10", "7"]);
    }
}
