//! Path CSV and JSON persistence.
//!
//! Path files have one row per grid point with columns
//! `replication,k,t_k,B,X`. Floats are written in shortest round-trip form, so
//! reading a file back yields bit-identical paths.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::FbmGrid;
use crate::sde::SamplePath;

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    replication: usize,
    k: usize,
    t_k: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "X")]
    x: f64,
}

pub fn write_paths_csv<W: Write>(out: W, paths: &[SamplePath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (r, p) in paths.iter().enumerate() {
        for (k, (&b, &x)) in p.b_path.iter().zip(&p.x_path).enumerate() {
            w.serialize(PathRow {
                replication: r,
                k,
                t_k: p.grid.time(k),
                b,
                x,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_paths_file(path: &Path, paths: &[SamplePath]) -> Result<()> {
    write_paths_csv(BufWriter::new(File::create(path)?), paths)
}

/// Reads a path file. Every replication must cover `k = 0..=n` in order on the
/// same uniform grid.
pub fn read_paths_csv<R: Read>(input: R) -> Result<Vec<SamplePath>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut groups: BTreeMap<usize, Vec<PathRow>> = BTreeMap::new();
    for (line, rec) in rdr.deserialize::<PathRow>().enumerate() {
        let row = rec.map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        groups.entry(row.replication).or_default().push(row);
    }
    if groups.is_empty() {
        return Err(Error::Parse("path file contains no rows".into()));
    }
    let mut grid: Option<FbmGrid> = None;
    let mut out = Vec::with_capacity(groups.len());
    for (rep, rows) in groups {
        if rows.len() < 2 {
            return Err(Error::Parse(format!("replication {rep} has fewer than two points")));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.k != k {
                return Err(Error::Parse(format!(
                    "replication {rep}: expected k = {k}, found {}",
                    row.k
                )));
            }
        }
        let n = rows.len() - 1;
        let t_final = rows[n].t_k;
        let g = FbmGrid::new(t_final, n).map_err(|e| Error::Parse(e.to_string()))?;
        for row in &rows {
            if (row.t_k - g.time(row.k)).abs() > 1e-9 * t_final.max(1.0) {
                return Err(Error::Parse(format!(
                    "replication {rep}: non-uniform time {} at k = {}",
                    row.t_k, row.k
                )));
            }
        }
        match grid {
            None => grid = Some(g),
            Some(prev) if prev != g => {
                return Err(Error::Parse(format!(
                    "replication {rep} uses a different grid from the first replication"
                )))
            }
            _ => {}
        }
        let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
        let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
        out.push(SamplePath::from_observations(g, b, x).map_err(|e| Error::Parse(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_paths_file(path: &Path) -> Result<Vec<SamplePath>> {
    read_paths_csv(File::open(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
