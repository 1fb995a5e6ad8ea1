//! Photon count cubes and the `PCUBE1` file format.
//!
//! Binary layout: an ASCII header line `PCUBE1 <n_row> <n_col> <n_bins>\n`
//! followed by `n_row * n_col * n_bins` little-endian `u32` counts stored
//! pixel-major (row, col), then bin. A CSV form with one pixel per line
//! (`row,col,y_1,...,y_T`, 0-based coordinates) is accepted as well.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const CUBE_MAGIC: &str = "PCUBE1";

/// Observed histogram array `Y` of photon counts over (row, col, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonCube {
    n_row: usize,
    n_col: usize,
    n_bins: usize,
    counts: Vec<u32>,
    totals: Vec<u64>,
}

impl PhotonCube {
    pub fn new(n_row: usize, n_col: usize, n_bins: usize, counts: Vec<u32>) -> Result<Self> {
        if n_row == 0 || n_col == 0 || n_bins == 0 {
            return Err(Error::DimensionMismatch(format!(
                "cube dimensions must be positive, got {n_row}x{n_col}x{n_bins}"
            )));
        }
        let expected = checked_volume(n_row, n_col, n_bins)?;
        if counts.len() != expected {
            return Err(Error::PayloadLengthMismatch {
                expected,
                found: counts.len(),
            });
        }
        let totals = counts
            .chunks_exact(n_bins)
            .map(|h| h.iter().map(|&y| y as u64).sum())
            .collect();
        Ok(Self {
            n_row,
            n_col,
            n_bins,
            counts,
            totals,
        })
    }

    pub fn zeros(n_row: usize, n_col: usize, n_bins: usize) -> Result<Self> {
        let n = checked_volume(n_row, n_col, n_bins)?;
        Self::new(n_row, n_col, n_bins, vec![0; n])
    }

    pub fn n_row(&self) -> usize {
        self.n_row
    }

    pub fn n_col(&self) -> usize {
        self.n_col
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_pixels(&self) -> usize {
        self.n_row * self.n_col
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Histogram of pixel `(i, j)`; entry `t - 1` holds bin `t`.
    pub fn pixel(&self, i: usize, j: usize) -> &[u32] {
        self.pixel_at(i * self.n_col + j)
    }

    /// Histogram of the pixel with flat index `p`.
    pub fn pixel_at(&self, p: usize) -> &[u32] {
        &self.counts[p * self.n_bins..(p + 1) * self.n_bins]
    }

    /// Cached per-pixel total `O_{i,j}`.
    pub fn total(&self, i: usize, j: usize) -> u64 {
        self.totals[i * self.n_col + j]
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn totals_grid(&self) -> Grid<u64> {
        Grid::from_vec(self.n_row, self.n_col, self.totals.clone())
    }

    pub fn total_photons(&self) -> u64 {
        self.totals.iter().sum()
    }

    pub fn mean_photons_per_pixel(&self) -> f64 {
        self.total_photons() as f64 / self.n_pixels() as f64
    }

    pub fn empty_pixel_fraction(&self) -> f64 {
        self.totals.iter().filter(|&&o| o == 0).count() as f64 / self.n_pixels() as f64
    }

    /// Nonzero bins of pixel `p` as `(bin index starting at 1, count)`.
    pub fn sparse_pixel(&self, p: usize) -> Vec<(usize, u32)> {
        self.pixel_at(p)
            .iter()
            .enumerate()
            .filter(|(_, &y)| y > 0)
            .map(|(k, &y)| (k + 1, y))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!(
            "{CUBE_MAGIC} {} {} {}\n",
            self.n_row, self.n_col, self.n_bins
        );
        let mut out = Vec::with_capacity(header.len() + 4 * self.counts.len());
        out.extend_from_slice(header.as_bytes());
        for &c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
        let line = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
        let tokens: Vec<&str> = line.split(' ').collect();
        if tokens.len() != 4 || tokens[0] != CUBE_MAGIC {
            return Err(Error::MalformedHeader(format!(
                "expected `{CUBE_MAGIC} <n_row> <n_col> <n_bins>`, got `{line}`"
            )));
        }
        let mut dims = [0usize; 3];
        for (d, tok) in dims.iter_mut().zip(&tokens[1..]) {
            *d = tok
                .parse()
                .map_err(|_| Error::MalformedHeader(format!("bad dimension `{tok}`")))?;
            if *d == 0 {
                return Err(Error::MalformedHeader("dimensions must be positive".into()));
            }
        }
        let canonical = format!("{CUBE_MAGIC} {} {} {}", dims[0], dims[1], dims[2]);
        if canonical != line {
            return Err(Error::MalformedHeader(format!(
                "non-canonical header `{line}`"
            )));
        }
        let [n_row, n_col, n_bins] = dims;
        let expected = checked_volume(n_row, n_col, n_bins)?;
        let payload = &bytes[nl + 1..];
        if payload.len() != expected * 4 {
            return Err(Error::PayloadLengthMismatch {
                expected,
                found: payload.len() / 4,
            });
        }
        let counts = payload
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(n_row, n_col, n_bins, counts)
    }

    /// Parses the CSV form. Every pixel of the rectangle spanned by the
    /// largest row and column indices must appear exactly once.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, usize, Vec<u32>)> = Vec::new();
        let mut n_bins = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "expected row,col,y_1,...,y_T".into(),
                });
            }
            let parse_idx = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad index `{s}`"),
                })
            };
            let (r, c) = (parse_idx(fields[0])?, parse_idx(fields[1])?);
            let hist = fields[2..]
                .iter()
                .map(|s| parse_count(s, ln + 1))
                .collect::<Result<Vec<u32>>>()?;
            match n_bins {
                None => n_bins = Some(hist.len()),
                Some(t) if t != hist.len() => {
                    return Err(Error::PayloadLengthMismatch {
                        expected: t,
                        found: hist.len(),
                    })
                }
                _ => {}
            }
            rows.push((r, c, hist));
        }
        let n_bins = n_bins.ok_or(Error::EmptyFile)?;
        let n_row = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
        let n_col = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
        let mut counts = vec![0u32; checked_volume(n_row, n_col, n_bins)?];
        let mut seen = vec![false; n_row * n_col];
        for (r, c, hist) in rows {
            let p = r * n_col + c;
            if seen[p] {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("pixel ({r}, {c}) listed twice"),
                });
            }
            seen[p] = true;
            counts[p * n_bins..(p + 1) * n_bins].copy_from_slice(&hist);
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(Error::PayloadLengthMismatch {
                expected: n_row * n_col,
                found: p,
            });
        }
        Self::new(n_row, n_col, n_bins, counts)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n_row {
            for j in 0..self.n_col {
                out.push_str(&format!("{i},{j}"));
                for y in self.pixel(i, j) {
                    out.push_str(&format!(",{y}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_count(s: &str, line: usize) -> Result<u32> {
    let v: u64 = s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad count `{s}`"),
    })?;
    u32::try_from(v).map_err(|_| Error::CountOverflow(format!("count {v} at line {line}")))
}

fn checked_volume(n_row: usize, n_col: usize, n_bins: usize) -> Result<usize> {
    n_row
        .checked_mul(n_col)
        .and_then(|v| v.checked_mul(n_bins))
        .filter(|&v| v <= (isize::MAX as usize) / 4)
        .ok_or_else(|| Error::CountOverflow(format!("cube volume {n_row}x{n_col}x{n_bins}")))
}

/// Loads a cube, dispatching on the `PCUBE1` magic; anything else is read as CSV.
pub fn load_cube(path: impl AsRef<Path>) -> Result<PhotonCube> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(CUBE_MAGIC.as_bytes()) {
        PhotonCube::from_bytes(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::MalformedHeader("neither PCUBE1 nor CSV".into()))?;
        PhotonCube::from_csv(text)
    }
}

pub fn save_cube(cube: &PhotonCube, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&cube.to_bytes())?;
    Ok(())
}
