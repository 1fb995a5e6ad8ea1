//! CSV and 16-bit PGM export of per-pixel maps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `row,col,value` rows (0-based coordinates); undefined values are empty cells.
pub fn map_to_csv(map: &Grid<Option<f64>>) -> String {
    let mut out = String::from("row,col,value\n");
    for i in 0..map.rows() {
        for j in 0..map.cols() {
            match map[(i, j)] {
                Some(v) => writeln!(out, "{i},{j},{v}").unwrap(),
                None => writeln!(out, "{i},{j},").unwrap(),
            }
        }
    }
    out
}

pub fn write_map_csv(path: impl AsRef<Path>, map: &Grid<Option<f64>>) -> Result<()> {
    fs::write(path, map_to_csv(map))?;
    Ok(())
}

pub fn parse_map_csv(text: &str) -> Result<Grid<Option<f64>>> {
    let mut entries = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (ln == 0 && line.starts_with("row")) {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "expected row,col,value".into(),
            });
        }
        let bad = |s: &str| Error::Parse {
            line: ln + 1,
            msg: format!("bad field `{s}`"),
        };
        let i: usize = f[0].trim().parse().map_err(|_| bad(f[0]))?;
        let j: usize = f[1].trim().parse().map_err(|_| bad(f[1]))?;
        let v = match f[2].trim() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(s))?),
        };
        entries.push((i, j, v));
    }
    if entries.is_empty() {
        return Err(Error::EmptyFile);
    }
    let rows = entries.iter().map(|e| e.0).max().unwrap() + 1;
    let cols = entries.iter().map(|e| e.1).max().unwrap() + 1;
    if entries.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} entries for a {rows}x{cols} map",
            entries.len()
        )));
    }
    let mut grid = Grid::filled(rows, cols, None);
    for (i, j, v) in entries {
        grid[(i, j)] = v;
    }
    Ok(grid)
}

pub fn read_map_csv(path: impl AsRef<Path>) -> Result<Grid<Option<f64>>> {
    parse_map_csv(&fs::read_to_string(path)?)
}

/// Plain comma-separated matrix, one image row per line.
pub fn matrix_to_csv(map: &Grid<Option<f64>>) -> String {
    let mut out = String::new();
    for i in 0..map.rows() {
        let row: Vec<String> = (0..map.cols())
            .map(|j| map[(i, j)].map_or(String::new(), |v| v.to_string()))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, map: &Grid<Option<f64>>) -> Result<()> {
    fs::write(path, matrix_to_csv(map))?;
    Ok(())
}

/// Linear min-max scaling applied when writing a PGM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmScaling {
    pub min: f64,
    pub max: f64,
}

impl PgmScaling {
    pub fn sidecar(&self, undefined: usize) -> String {
        format!(
            "min = {}\nmax = {}\nmaxval = 65535\nmapping = round((v - min) / (max - min) * 65535)\nundefined_pixels = {undefined}\nundefined_value = 0\n",
            self.min, self.max
        )
    }
}

/// Binary 16-bit PGM (`P5`, big-endian samples). Undefined pixels are black.
pub fn map_to_pgm(map: &Grid<Option<f64>>) -> (Vec<u8>, PgmScaling) {
    let vals: Vec<f64> = map.as_slice().iter().flatten().copied().collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (min, max) = if vals.is_empty() {
        (0.0, 0.0)
    } else {
        (min, max)
    };
    let span = max - min;
    let mut out = format!("P5\n{} {}\n65535\n", map.cols(), map.rows()).into_bytes();
    for v in map.as_slice() {
        let level: u16 = match v {
            Some(v) if span > 0.0 => ((v - min) / span * 65535.0).round() as u16,
            Some(_) => 0,
            None => 0,
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    (out, PgmScaling { min, max })
}

/// Writes `<path>` plus a `<path>.txt` sidecar recording the scaling.
pub fn write_pgm16(path: impl AsRef<Path>, map: &Grid<Option<f64>>) -> Result<PgmScaling> {
    let path = path.as_ref();
    let (bytes, scaling) = map_to_pgm(map);
    fs::write(path, bytes)?;
    let undefined = map.as_slice().iter().filter(|v| v.is_none()).count();
    let mut side = path.as_os_str().to_owned();
    side.push(".txt");
    fs::write(side, scaling.sidecar(undefined))?;
    Ok(scaling)
}
