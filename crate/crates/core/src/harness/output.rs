// SPDX-License-Identifier: MIT OR Apache-2.0

//! Trajectory CSV and sorted-key JSON files.
//!
//! `trajectory.csv` has the header `t,J,pi_1,...,pi_K,gamma_t,delta_t,cond2_ok`.
//! Reals are written in Rust's shortest round-trip form, so parsing a file
//! gives back the exact values. The three steering columns are empty for
//! GRPO runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One row of a policy trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    /// `J(pi_t)`.
    pub j: f64,
    pub probs: Vec<f64>,
    pub gamma_t: Option<f64>,
    pub delta_t: Option<f64>,
    pub cond2_ok: Option<bool>,
}

pub fn trajectory_header(arm_count: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "J".to_string()];
    h.extend((1..=arm_count).map(|i| format!("pi_{i}")));
    h.extend(["gamma_t", "delta_t", "cond2_ok"].map(String::from));
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `records` as CSV. An empty slice produces the header alone.
pub fn write_trajectory<W: Write>(writer: W, arm_count: usize, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trajectory_header(arm_count))?;
    for r in records {
        if r.probs.len() != arm_count {
            return Err(Error::DimensionMismatch {
                expected: arm_count,
                got: r.probs.len(),
            });
        }
        let mut row = vec![r.t.to_string(), r.j.to_string()];
        row.extend(r.probs.iter().map(f64::to_string));
        row.extend([opt(r.gamma_t), opt(r.delta_t), opt(r.cond2_ok)]);
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_trajectory_file(path: &Path, arm_count: usize, records: &[TrajectoryRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory(BufWriter::new(file), arm_count, records).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            kind => Error::Config(format!("{}: {kind:?}", path.display())),
        },
        other => other,
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} value {field:?}")))
}

fn parse_opt<T: std::str::FromStr>(field: &str, what: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("cannot parse {what} value {field:?}")))
}

/// Parses CSV written by [`write_trajectory`].
pub fn read_trajectory<R: std::io::Read>(reader: R) -> Result<Vec<TrajectoryRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let arm_count = header.len().checked_sub(5).unwrap_or(0);
    let expected = trajectory_header(arm_count);
    if arm_count < 1 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Config(format!(
            "unexpected trajectory header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let t = row[0]
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse t value {:?}", &row[0])))?;
        let probs = (0..arm_count)
            .map(|i| parse_f64(&row[2 + i], "pi"))
            .collect::<Result<Vec<_>>>()?;
        out.push(TrajectoryRecord {
            t,
            j: parse_f64(&row[1], "J")?,
            probs,
            gamma_t: parse_opt(&row[2 + arm_count], "gamma_t")?,
            delta_t: parse_opt(&row[3 + arm_count], "delta_t")?,
            cond2_ok: parse_opt(&row[4 + arm_count], "cond2_ok")?,
        });
    }
    Ok(out)
}

pub fn read_trajectory_file(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(file).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => with_path(other, path),
    })
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is a BTreeMap, so routing through Value sorts keys.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_sorted_json(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes plain CSV rows under `header`.
pub fn write_table_file(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| with_path(Error::Csv(e), path))?;
    for row in rows {
        w.write_record(row).map_err(|e| with_path(Error::Csv(e), path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<TrajectoryRecord> {
        vec![
            TrajectoryRecord {
                t: 0,
                j: 1.01,
                probs: vec![0.3, 0.2, 0.5],
                gamma_t: Some(0.49),
                delta_t: Some(0.98),
                cond2_ok: Some(true),
            },
            TrajectoryRecord {
                t: 1,
                j: 1.2345678901234567,
                probs: vec![0.1 / 3.0, 1e-300, 1.0 - 0.1 / 3.0],
                gamma_t: None,
                delta_t: None,
                cond2_ok: None,
            },
        ]
    }

    fn roundtrip(records: &[TrajectoryRecord], k: usize) -> Vec<TrajectoryRecord> {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, k, records).unwrap();
        read_trajectory(buf.as_slice()).unwrap()
    }

    #[test]
    fn header_and_empty_file() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, 3, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "t,J,pi_1,pi_2,pi_3,gamma_t,delta_t,cond2_ok\n"
        );
        assert!(read_trajectory(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn grpo_rows_leave_steering_columns_empty() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, 3, &sample()[1..]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,,"));
    }

    #[test]
    fn roundtrip_is_exact() {
        assert_eq!(roundtrip(&sample(), 3), sample());
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_trajectory("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_trajectory("t,J,pi_1,gamma_t,delta_t,cond2_ok\n0,x,1,,,\n".as_bytes()).is_err());
    }

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }

    proptest! {
        #[test]
        fn csv_roundtrip_property(
            rows in prop::collection::vec(
                (any::<f64>().prop_filter("finite", |v| v.is_finite()),
                 prop::collection::vec(0.0f64..=1.0, 4),
                 prop::option::of(-10.0f64..10.0),
                 prop::option::of(any::<bool>())),
                0..20)
        ) {
            let records: Vec<TrajectoryRecord> = rows
                .into_iter()
                .enumerate()
                .map(|(t, (j, probs, g, ok))| TrajectoryRecord { t, j, probs, gamma_t: g, delta_t: g.map(|v| v * 2.0), cond2_ok: ok })
                .collect();
            prop_assert_eq!(roundtrip(&records, 4), records);
        }
    }
}
