//! Dataset persistence: one CSV per split with header
//! `ue_index,true_x,true_y,los_0..los_{N-1},toa_0..toa_{N-1}`.

use std::fmt::Write as _;
use std::path::Path;

use posuq_core::geo::Point2;
use posuq_core::radiosim::{MeasurementSet, SplitTag, ToaRecord};
use posuq_core::scenario::Deployment;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing header line")]
    MissingHeader { path: String },
    #[error("{path}: bad column {column:?} at position {position} (expected {expected:?})")]
    BadColumn {
        path: String,
        column: String,
        position: usize,
        expected: String,
    },
    #[error("{path} line {line}: expected {expected} fields, found {found}")]
    BadFieldCount {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path} line {line}: cannot parse field {field:?}")]
    BadValue {
        path: String,
        line: usize,
        field: String,
    },
}

fn expected_header(n_bs: usize) -> Vec<String> {
    let mut cols = vec!["ue_index".to_string(), "true_x".into(), "true_y".into()];
    for i in 0..n_bs {
        cols.push(format!("los_{i}"));
    }
    for i in 0..n_bs {
        cols.push(format!("toa_{i}"));
    }
    cols
}

/// Serialize a measurement set. Floats use the shortest round-trip
/// representation, so rewriting the same set is byte-identical.
pub fn to_csv(set: &MeasurementSet) -> String {
    let n_bs = set.deployment.num_bs();
    let mut out = String::new();
    out.push_str(&expected_header(n_bs).join(","));
    out.push('\n');
    for r in &set.records {
        let mut line = format!("{},{},{}", r.ue_index, r.true_position.x, r.true_position.y);
        for los in &r.los_flags {
            let _ = write!(line, ",{}", u8::from(*los));
        }
        for toa in &r.toa {
            let _ = write!(line, ",{toa}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn write_csv(set: &MeasurementSet, path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, to_csv(set)).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_csv(
    path: &Path,
    deployment: &Deployment,
    split_tag: SplitTag,
) -> Result<MeasurementSet, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text, &path.display().to_string(), deployment, split_tag)
}

pub fn parse_csv(
    text: &str,
    path: &str,
    deployment: &Deployment,
    split_tag: SplitTag,
) -> Result<MeasurementSet, DatasetError> {
    let n_bs = deployment.num_bs();
    let expected = expected_header(n_bs);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| DatasetError::MissingHeader {
        path: path.to_string(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    for (position, want) in expected.iter().enumerate() {
        match cols.get(position) {
            Some(got) if got == want => {}
            got => {
                return Err(DatasetError::BadColumn {
                    path: path.to_string(),
                    column: got.unwrap_or(&"<missing>").to_string(),
                    position,
                    expected: want.clone(),
                })
            }
        }
    }
    if cols.len() != expected.len() {
        return Err(DatasetError::BadColumn {
            path: path.to_string(),
            column: cols[expected.len()].to_string(),
            position: expected.len(),
            expected: "<end of header>".into(),
        });
    }

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected.len() {
            return Err(DatasetError::BadFieldCount {
                path: path.to_string(),
                line: line_no,
                expected: expected.len(),
                found: fields.len(),
            });
        }
        let bad = |field: &str| DatasetError::BadValue {
            path: path.to_string(),
            line: line_no,
            field: field.to_string(),
        };
        let ue_index: usize = fields[0].parse().map_err(|_| bad(fields[0]))?;
        let x: f64 = fields[1].parse().map_err(|_| bad(fields[1]))?;
        let y: f64 = fields[2].parse().map_err(|_| bad(fields[2]))?;
        let mut los_flags = Vec::with_capacity(n_bs);
        for f in &fields[3..3 + n_bs] {
            los_flags.push(match *f {
                "0" => false,
                "1" => true,
                other => return Err(bad(other)),
            });
        }
        let mut toa = Vec::with_capacity(n_bs);
        for f in &fields[3 + n_bs..] {
            toa.push(f.parse().map_err(|_| bad(f))?);
        }
        records.push(ToaRecord {
            ue_index,
            toa,
            los_flags,
            true_position: Point2::new(x, y),
        });
    }
    Ok(MeasurementSet {
        records,
        deployment: deployment.clone(),
        split_tag,
    })
}
