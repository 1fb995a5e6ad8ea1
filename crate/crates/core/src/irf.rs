//! Instrument impulse response `g0` and the `IRF1` text format.
//!
//! File layout: first line `IRF1 <L> <peak_offset>`, then `L` reals one per
//! line. Entry `k` (0-based) holds `g0(k - peak_offset)`, so the peak of the
//! response sits at offset zero and a surface at bin `t_pos` produces its
//! maximum expected count in bin `t_pos`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IRF_MAGIC: &str = "IRF1";
pub const DEFAULT_FLOOR_EPS: f64 = 1e-12;

/// Impulse response tabulated on every offset `δ ∈ [-(T-1), T-1]` of a
/// histogram with `T` bins, together with the per-shift masses
/// `v(τ) = Σ_{t=1..T} g0(t - τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    measured: Vec<f64>,
    peak_offset: usize,
    floor_eps: f64,
    n_bins: usize,
    table: Vec<f64>,
    shift_mass: Vec<f64>,
}

impl ImpulseResponse {
    /// Builds the response for histograms of `n_bins` bins. Entries below
    /// `floor_eps` and every offset outside the measured support are floored
    /// to `floor_eps`.
    pub fn from_measured(
        values: &[f64],
        peak_offset: usize,
        n_bins: usize,
        floor_eps: f64,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyFile);
        }
        if !(floor_eps > 0.0 && floor_eps.is_finite()) {
            return Err(Error::InvalidImpulseResponse(format!(
                "floor_eps must be positive, got {floor_eps}"
            )));
        }
        if n_bins == 0 {
            return Err(Error::InvalidImpulseResponse(
                "n_bins must be positive".into(),
            ));
        }
        if peak_offset >= values.len() {
            return Err(Error::InvalidImpulseResponse(format!(
                "peak offset {peak_offset} outside {} entries",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidImpulseResponse(format!(
                "entries must be finite and nonnegative, found {v}"
            )));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidImpulseResponse("all-zero response".into()));
        }
        let measured: Vec<f64> = values.iter().map(|&v| v.max(floor_eps)).collect();

        let span = 2 * n_bins - 1;
        let mut table = vec![floor_eps; span];
        for (k, &g) in measured.iter().enumerate() {
            let delta = k as isize - peak_offset as isize;
            let idx = delta + n_bins as isize - 1;
            if (0..span as isize).contains(&idx) {
                table[idx as usize] = g;
            }
        }
        let shift_mass = (1..=n_bins)
            .map(|tau| {
                (1..=n_bins)
                    .map(|t| table[t + n_bins - 1 - tau])
                    .sum::<f64>()
            })
            .collect();
        Ok(Self {
            measured,
            peak_offset,
            floor_eps,
            n_bins,
            table,
            shift_mass,
        })
    }

    /// Same measured response re-tabulated for a different histogram length.
    pub fn with_bins(&self, n_bins: usize) -> Result<Self> {
        Self::from_measured(&self.measured, self.peak_offset, n_bins, self.floor_eps)
    }

    /// Measured entries after flooring.
    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    pub fn peak_offset(&self) -> usize {
        self.peak_offset
    }

    pub fn floor_eps(&self) -> f64 {
        self.floor_eps
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// `g0(δ)`; `δ` must lie in `[-(T-1), T-1]`.
    #[inline]
    pub fn at(&self, delta: isize) -> f64 {
        self.table[(delta + self.n_bins as isize - 1) as usize]
    }

    /// `g0(t - t_pos)` for 1-based bins.
    #[inline]
    pub fn response(&self, t: usize, t_pos: usize) -> f64 {
        self.table[t + self.n_bins - 1 - t_pos]
    }

    /// `v(τ)` for `τ ∈ [1, T]`.
    #[inline]
    pub fn shift_mass(&self, tau: usize) -> f64 {
        self.shift_mass[tau - 1]
    }

    pub fn shift_masses(&self) -> &[f64] {
        &self.shift_mass
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{IRF_MAGIC} {} {}\n", self.measured.len(), self.peak_offset);
        for v in &self.measured {
            out.push_str(&format!("{v:e}\n"));
        }
        out
    }
}

/// Parses the `IRF1` format into raw values and the peak offset.
pub fn parse_irf(text: &str) -> Result<(Vec<f64>, usize)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 3 || tokens[0] != IRF_MAGIC {
        return Err(Error::MalformedHeader(format!(
            "expected `{IRF_MAGIC} <L> <peak_offset>`, got `{header}`"
        )));
    }
    let len: usize = tokens[1]
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad length `{}`", tokens[1])))?;
    let peak: usize = tokens[2]
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad peak offset `{}`", tokens[2])))?;
    let values = lines
        .map(|(ln, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: format!("bad value `{}`", l.trim()),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::EmptyFile);
    }
    if values.len() != len {
        return Err(Error::PayloadLengthMismatch {
            expected: len,
            found: values.len(),
        });
    }
    Ok((values, peak))
}

/// Loads an `IRF1` file and tabulates it for `n_bins`-bin histograms.
pub fn load_irf(path: impl AsRef<Path>, n_bins: usize, floor_eps: f64) -> Result<ImpulseResponse> {
    let text = fs::read_to_string(path)?;
    let (values, peak) = parse_irf(&text)?;
    ImpulseResponse::from_measured(&values, peak, n_bins, floor_eps)
}

pub fn save_irf(irf: &ImpulseResponse, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, irf.to_text())?;
    Ok(())
}
