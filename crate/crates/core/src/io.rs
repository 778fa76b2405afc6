//! Readers and writers for the exported artifacts: Field snapshot CSVs,
//! sweep CSVs with a `#` metadata line, and JSON documents.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{SweepMeta, SweepResult, SweepRow};
use crate::evolution::{EvolutionTrace, FlowVerdict, StepDiagnostics};
use crate::grid::{Field, Grid, GridError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("bad header: expected {expected}, got {got}")]
    Header { expected: String, got: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("node coordinates do not form a uniform grid")]
    NotUniform,
}

/// Field CSV: header `x,value` or `x,y,value`, row-major node order.
pub fn write_field_csv<W: Write>(field: &Field, out: W) -> Result<(), IoError> {
    let grid = field.grid();
    let dim = grid.dimension();
    let mut w = csv::Writer::from_writer(out);
    if dim == 1 {
        w.write_record(["x", "value"])?;
    } else {
        w.write_record(["x", "y", "value"])?;
    }
    for (n, v) in field.values().iter().enumerate() {
        let c = grid.coords(n);
        if dim == 1 {
            w.write_record([c[0].to_string(), v.to_string()])?;
        } else {
            w.write_record([c[0].to_string(), c[1].to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn field_to_csv(field: &Field) -> String {
    let mut buf = Vec::new();
    write_field_csv(field, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn axis_from(coords: &[f64]) -> Result<(f64, usize), IoError> {
    let mut xs = coords.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let n = xs.len();
    if n < 3 || xs[0] != 0.0 {
        return Err(IoError::NotUniform);
    }
    Ok((xs[n - 1], n))
}

/// Reads a Field CSV; the grid is rebuilt from the node coordinates.
pub fn read_field_csv(text: &str) -> Result<Field, IoError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["x", "value"] => 1,
        ["x", "y", "value"] => 2,
        _ => {
            return Err(IoError::Header {
                expected: "x[,y],value".into(),
                got: header.join(","),
            })
        }
    };
    let mut coords = vec![Vec::new(); dim];
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let num = |k: usize| -> Result<f64, IoError> {
            rec.get(k)
                .ok_or_else(|| IoError::Parse {
                    line,
                    message: "missing column".into(),
                })?
                .parse::<f64>()
                .map_err(|e| IoError::Parse {
                    line,
                    message: e.to_string(),
                })
        };
        for (k, c) in coords.iter_mut().enumerate() {
            c.push(num(k)?);
        }
        values.push(num(dim)?);
    }
    let axes: Vec<(f64, usize)> = coords.iter().map(|c| axis_from(c)).collect::<Result<_, _>>()?;
    let grid = if dim == 1 {
        Grid::line(axes[0].0, axes[0].1)?
    } else {
        Grid::rectangle([axes[0].0, axes[1].0], [axes[0].1, axes[1].1])?
    };
    if grid.node_count() != values.len() {
        return Err(IoError::NotUniform);
    }
    for n in 0..grid.node_count() {
        let c = grid.coords(n);
        let h = grid.spacing();
        for k in 0..dim {
            if (c[k] - coords[k][n]).abs() > 1e-9 * h[k] {
                return Err(IoError::NotUniform);
            }
        }
    }
    Ok(Field::new(Arc::new(grid), values)?)
}

pub const SWEEP_COLUMNS: [&str; 7] = ["sigma", "J_u0", "J_u2", "J_u1", "deadcore_volume", "count", "premise"];

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn sweep_to_csv(result: &SweepResult) -> String {
    let mut buf = Vec::new();
    writeln!(buf, "{}", result.meta.header()).expect("memory");
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record(SWEEP_COLUMNS).expect("memory");
    for r in &result.rows {
        w.write_record([
            r.sigma.to_string(),
            opt(r.j_u0),
            opt(r.j_u2),
            opt(r.j_u1),
            r.deadcore_volume.to_string(),
            r.count.to_string(),
            r.premise.to_string(),
        ])
        .expect("memory");
    }
    w.flush().expect("memory");
    drop(w);
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Parses the `# key=value,...` metadata line.
pub fn parse_meta_line(line: &str) -> Result<Vec<(String, String)>, IoError> {
    let body = line.strip_prefix('#').ok_or(IoError::Parse {
        line: 1,
        message: "missing metadata line".into(),
    })?;
    body.trim()
        .split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or(IoError::Parse {
                    line: 1,
                    message: format!("bad metadata entry {kv:?}"),
                })
        })
        .collect()
}

/// Rows and raw metadata of a sweep CSV. The `failure` text is not part of
/// the CSV and reads back as `None`.
pub fn read_sweep_csv(text: &str) -> Result<(Vec<(String, String)>, Vec<SweepRow>), IoError> {
    let first = text.lines().next().unwrap_or_default();
    let meta = parse_meta_line(first)?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_COLUMNS {
        return Err(IoError::Header {
            expected: SWEEP_COLUMNS.join(","),
            got: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 3;
        let bad = |m: String| IoError::Parse { line, message: m };
        let f = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(e.to_string()));
        let o = |k: usize| -> Result<Option<f64>, IoError> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                rec[k].parse::<f64>().map(Some).map_err(|e| bad(e.to_string()))
            }
        };
        rows.push(SweepRow {
            sigma: f(0)?,
            j_u0: o(1)?,
            j_u2: o(2)?,
            j_u1: o(3)?,
            deadcore_volume: f(4)?,
            count: rec[5].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            premise: rec[6].parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?,
            failure: None,
        });
    }
    Ok((meta, rows))
}

/// A JSON document carrying the metadata alongside its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithMeta<T> {
    pub meta: SweepMeta,
    #[serde(flatten)]
    pub data: T,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, IoError> {
    Ok(serde_json::from_str(text)?)
}

/// Trace manifest: everything in the trace except the snapshot fields, which
/// go to one CSV each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub run_id: String,
    pub times: Vec<f64>,
    pub snapshots: Vec<String>,
    pub step_times: Vec<f64>,
    pub energies: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
    pub verdict: FlowVerdict,
}

pub fn snapshot_name(run_id: &str, index: usize) -> String {
    format!("trace_{run_id}_t{index}.csv")
}

/// Manifest plus `(file name, CSV text)` per snapshot.
pub fn export_trace(trace: &EvolutionTrace, run_id: &str) -> (TraceManifest, Vec<(String, String)>) {
    let files: Vec<(String, String)> = trace
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, f)| (snapshot_name(run_id, i), field_to_csv(f)))
        .collect();
    let manifest = TraceManifest {
        run_id: run_id.to_string(),
        times: trace.times.clone(),
        snapshots: files.iter().map(|f| f.0.clone()).collect(),
        step_times: trace.step_times.clone(),
        energies: trace.energies.clone(),
        dissipation: trace.dissipation.clone(),
        diagnostics: trace.diagnostics.clone(),
        warnings: trace.warnings.clone(),
        verdict: trace.verdict,
    };
    (manifest, files)
}

/// Rebuilds a trace from its manifest and a snapshot loader.
pub fn import_trace(
    manifest: &TraceManifest,
    mut load: impl FnMut(&str) -> Result<String, IoError>,
) -> Result<EvolutionTrace, IoError> {
    let snapshots = manifest
        .snapshots
        .iter()
        .map(|name| read_field_csv(&load(name)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvolutionTrace {
        times: manifest.times.clone(),
        snapshots,
        step_times: manifest.step_times.clone(),
        energies: manifest.energies.clone(),
        dissipation: manifest.dissipation.clone(),
        diagnostics: manifest.diagnostics.clone(),
        warnings: manifest.warnings.clone(),
        verdict: manifest.verdict,
    })
}
