//! Synthetic scenes and Poisson waveform cubes.
//!
//! Scenes are described by a flat `key = value` config:
//!
//! ```text
//! rows = 64
//! cols = 64
//! bins = 96
//! depth = hemisphere        # constant | step | hemisphere | file
//! depth_base = 60
//! depth_height = 20
//! intensity = constant      # constant | ramp | file
//! intensity_value = 0.9
//! background = constant     # constant | file
//! background_value = 0.001
//! exposure_scale = 1
//! seed = 1
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::Distribution;
use rand_distr::Poisson;
use rayon::prelude::*;

use crate::cube::PhotonCube;
use crate::error::{Error, Result};
use crate::fields::FieldSet;
use crate::grid::Grid;
use crate::irf::ImpulseResponse;
use crate::maps::read_map_csv;
use crate::neighborhood::GmrfEdges;
use crate::rng::{StreamFactory, StreamTag};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

const KNOWN_KEYS: &[&str] = &[
    "rows",
    "cols",
    "bins",
    "seed",
    "exposure_scale",
    "bin_width_ps",
    "irf_fwhm_ps",
    "irf_length",
    "depth",
    "depth_value",
    "depth_low",
    "depth_high",
    "step_col",
    "depth_base",
    "depth_height",
    "radius",
    "depth_file",
    "intensity",
    "intensity_value",
    "intensity_center",
    "intensity_edge",
    "intensity_file",
    "background",
    "background_value",
    "background_file",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DepthGen {
    Constant(u32),
    /// Columns `< split` take `low`, the rest `high`.
    Step {
        low: u32,
        high: u32,
        split: usize,
    },
    /// Plane at `base` with a bump reaching `base - height` at the image
    /// center; `radius` in pixels.
    Hemisphere {
        base: u32,
        height: f64,
        radius: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntensityGen {
    Constant(f64),
    /// Linear in the distance to the image center, from `center` to `edge`
    /// at the farthest corner.
    Ramp {
        center: f64,
        edge: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundGen {
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    pub bins: usize,
    pub depth: DepthGen,
    pub intensity: IntensityGen,
    pub background: BackgroundGen,
    pub exposure_scale: f64,
    pub seed: u64,
    pub bin_width_ps: f64,
    pub irf_fwhm_ps: f64,
    /// Zero picks a length covering four standard deviations each side.
    pub irf_length: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            bins: 32,
            depth: DepthGen::Constant(16),
            intensity: IntensityGen::Constant(1.0),
            background: BackgroundGen::Constant(0.01),
            exposure_scale: 1.0,
            seed: 0,
            bin_width_ps: 16.0,
            irf_fwhm_ps: 95.0,
            irf_length: 0,
        }
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: ln + 1,
            msg: "expected key = value".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            return Err(Error::UnknownConfigKey(k.to_string()));
        }
        if map.insert(k.to_string(), (ln + 1, v.to_string())).is_some() {
            return Err(Error::Parse {
                line: ln + 1,
                msg: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(map)
}

struct Keys {
    map: BTreeMap<String, (usize, String)>,
}

impl Keys {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                msg: format!("invalid value `{v}` for `{key}`"),
            }),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn path(&self, key: &str, base: &Path) -> Result<PathBuf> {
        let p: String = self
            .get(key)?
            .ok_or_else(|| Error::InvalidConfig(format!("`{key}` is required")))?;
        Ok(base.join(p))
    }
}

impl SceneSpec {
    /// Parses a config; relative file paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: impl AsRef<Path>) -> Result<Self> {
        let base = base_dir.as_ref();
        let k = Keys {
            map: parse_kv(text)?,
        };
        let d = Self::default();
        let rows = k.or("rows", d.rows)?;
        let cols = k.or("cols", d.cols)?;
        let bins: usize = k.or("bins", d.bins)?;
        let mid = (bins / 2).max(1) as u32;
        let depth = match k.or("depth", "constant".to_string())?.as_str() {
            "constant" => DepthGen::Constant(k.or("depth_value", mid)?),
            "step" => DepthGen::Step {
                low: k.or("depth_low", (bins / 3).max(1) as u32)?,
                high: k.or("depth_high", (2 * bins / 3).max(1) as u32)?,
                split: k.or("step_col", cols / 2)?,
            },
            "hemisphere" => DepthGen::Hemisphere {
                base: k.or("depth_base", (3 * bins / 4).max(1) as u32)?,
                height: k.or("depth_height", bins as f64 / 4.0)?,
                radius: k.or("radius", 0.4 * rows.min(cols) as f64)?,
            },
            "file" => DepthGen::File(k.path("depth_file", base)?),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown depth generator `{other}`"
                )))
            }
        };
        let intensity = match k.or("intensity", "constant".to_string())?.as_str() {
            "constant" => IntensityGen::Constant(k.or("intensity_value", 1.0)?),
            "ramp" => IntensityGen::Ramp {
                center: k.or("intensity_center", 1.0)?,
                edge: k.or("intensity_edge", 0.2)?,
            },
            "file" => IntensityGen::File(k.path("intensity_file", base)?),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown intensity generator `{other}`"
                )))
            }
        };
        let background = match k.or("background", "constant".to_string())?.as_str() {
            "constant" => BackgroundGen::Constant(k.or("background_value", 0.01)?),
            "file" => BackgroundGen::File(k.path("background_file", base)?),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown background generator `{other}`"
                )))
            }
        };
        let spec = Self {
            rows,
            cols,
            bins,
            depth,
            intensity,
            background,
            exposure_scale: k.or("exposure_scale", d.exposure_scale)?,
            seed: k.or("seed", d.seed)?,
            bin_width_ps: k.or("bin_width_ps", d.bin_width_ps)?,
            irf_fwhm_ps: k.or("irf_fwhm_ps", d.irf_fwhm_ps)?,
            irf_length: k.or("irf_length", d.irf_length)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.rows == 0 || self.cols == 0 || self.bins == 0 {
            return bad("rows, cols and bins must be positive".into());
        }
        if !(self.exposure_scale > 0.0 && self.exposure_scale.is_finite()) {
            return bad(format!(
                "exposure_scale must be positive, got {}",
                self.exposure_scale
            ));
        }
        if !(self.bin_width_ps > 0.0 && self.irf_fwhm_ps > 0.0) {
            return bad("bin_width_ps and irf_fwhm_ps must be positive".into());
        }
        if self.irf_length > 0 && self.irf_length.is_multiple_of(2) {
            return bad(format!("irf_length must be odd, got {}", self.irf_length));
        }
        let in_range = |t: u32| t >= 1 && t as usize <= self.bins;
        match &self.depth {
            DepthGen::Constant(t) if !in_range(*t) => {
                bad(format!("depth {t} outside 1..={}", self.bins))
            }
            DepthGen::Step { low, high, .. } if !in_range(*low) || !in_range(*high) => bad(
                format!("step depths {low}/{high} outside 1..={}", self.bins),
            ),
            DepthGen::Hemisphere {
                base,
                height,
                radius,
            } => {
                if !in_range(*base)
                    || height.is_nan()
                    || *height < 0.0
                    || *base as f64 - height < 0.5
                {
                    bad(format!(
                        "hemisphere base {base} / height {height} leaves 1..={}",
                        self.bins
                    ))
                } else if radius.is_nan() || *radius <= 0.0 {
                    bad(format!("radius must be positive, got {radius}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }?;
        let nonneg = |v: f64, what: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{what} must be >= 0, got {v}"
                )))
            }
        };
        match self.intensity {
            IntensityGen::Constant(r) => nonneg(r, "intensity_value")?,
            IntensityGen::Ramp { center, edge } => {
                nonneg(center, "intensity_center")?;
                nonneg(edge, "intensity_edge")?;
            }
            IntensityGen::File(_) => {}
        }
        if let BackgroundGen::Constant(b) = self.background {
            nonneg(b, "background_value")?;
        }
        Ok(())
    }

    /// FWHM of the surrogate impulse response in bins.
    pub fn irf_fwhm_bins(&self) -> f64 {
        self.irf_fwhm_ps / self.bin_width_ps
    }

    pub fn synth_irf(&self) -> Result<ImpulseResponse> {
        synth_irf(
            self.irf_fwhm_ps,
            self.bin_width_ps,
            self.irf_length,
            self.bins,
        )
    }
}

fn radial(rows: usize, cols: usize, i: usize, j: usize) -> f64 {
    let ci = (rows as f64 - 1.0) / 2.0;
    let cj = (cols as f64 - 1.0) / 2.0;
    ((i as f64 - ci).powi(2) + (j as f64 - cj).powi(2)).sqrt()
}

fn load_map(path: &Path, rows: usize, cols: usize) -> Result<Grid<f64>> {
    let m = read_map_csv(path)?;
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "{}: map is {}x{}, scene is {rows}x{cols}",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (p, v) in m.as_slice().iter().enumerate() {
        out.push(v.ok_or_else(|| {
            Error::InvalidConfig(format!("{}: undefined value at pixel {p}", path.display()))
        })?);
    }
    Ok(Grid::from_vec(rows, cols, out))
}

/// Ground-truth fields for a scene. The auxiliary field is set to the
/// arithmetic mean of the adjacent intensities.
pub fn generate_truth(spec: &SceneSpec) -> Result<FieldSet> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let depth = match &spec.depth {
        DepthGen::Constant(t) => Grid::filled(rows, cols, *t),
        DepthGen::Step { low, high, split } => {
            Grid::from_fn(rows, cols, |_, j| if j < *split { *low } else { *high })
        }
        DepthGen::Hemisphere {
            base,
            height,
            radius,
        } => Grid::from_fn(rows, cols, |i, j| {
            let d = radial(rows, cols, i, j) / radius;
            if d < 1.0 {
                (*base as f64 - height * (1.0 - d * d).sqrt()).round() as u32
            } else {
                *base
            }
        }),
        DepthGen::File(p) => {
            let m = load_map(p, rows, cols)?;
            let mut out = Vec::with_capacity(rows * cols);
            for &v in m.as_slice() {
                let t = v.round();
                if v.fract() != 0.0 || t < 1.0 || t > spec.bins as f64 {
                    return Err(Error::InvalidConfig(format!(
                        "{}: depth {v} is not a bin in 1..={}",
                        p.display(),
                        spec.bins
                    )));
                }
                out.push(t as u32);
            }
            Grid::from_vec(rows, cols, out)
        }
    };
    let k = spec.exposure_scale;
    let intensity = match &spec.intensity {
        IntensityGen::Constant(r) => Grid::filled(rows, cols, r * k),
        IntensityGen::Ramp { center, edge } => {
            let dmax = radial(rows, cols, 0, 0).max(f64::MIN_POSITIVE);
            Grid::from_fn(rows, cols, |i, j| {
                let u = (radial(rows, cols, i, j) / dmax).min(1.0);
                (center + (edge - center) * u) * k
            })
        }
        IntensityGen::File(p) => load_map(p, rows, cols)?.map(|&r| r * k),
    };
    let background = match &spec.background {
        BackgroundGen::Constant(b) => Grid::filled(rows, cols, b * k),
        BackgroundGen::File(p) => load_map(p, rows, cols)?.map(|&b| b * k),
    };
    let edges = GmrfEdges::new(rows, cols, crate::fields::SamplerConfig::default().r_pad);
    let aux = edges
        .beta_field(&intensity)
        .map(|&g| g.max(f64::MIN_POSITIVE));
    let fields = FieldSet {
        intensity,
        depth,
        background,
        aux,
    };
    fields.validate(spec.bins)?;
    Ok(fields)
}

/// Draws `y_t ~ Poisson(r g0(t - t_pos) + b)` independently for every bin.
pub fn sample_cube(truth: &FieldSet, g0: &ImpulseResponse, seed: u64) -> Result<PhotonCube> {
    let (rows, cols, n_bins) = (truth.rows(), truth.cols(), g0.n_bins());
    truth.validate(n_bins)?;
    let streams = StreamFactory::new(seed);
    let per_pixel: Vec<Vec<u32>> = (0..rows * cols)
        .into_par_iter()
        .map(|p| {
            let mut rng = streams.stream(0, StreamTag::Simulate, p);
            let r = truth.intensity.as_slice()[p];
            let b = truth.background.as_slice()[p];
            let t_pos = truth.depth.as_slice()[p] as usize;
            (1..=n_bins)
                .map(|t| {
                    let lam = r * g0.response(t, t_pos) + b;
                    if lam <= 0.0 {
                        0
                    } else {
                        let y: f64 = Poisson::new(lam)
                            .expect("finite positive rate")
                            .sample(&mut rng);
                        y.min(u32::MAX as f64) as u32
                    }
                })
                .collect()
        })
        .collect();
    PhotonCube::new(rows, cols, n_bins, per_pixel.concat())
}

/// `Σ_{i,j} r v(t_pos) + T b`.
pub fn expected_total_photons(truth: &FieldSet, g0: &ImpulseResponse) -> f64 {
    let t = g0.n_bins() as f64;
    (0..truth.rows() * truth.cols())
        .map(|p| {
            truth.intensity.as_slice()[p] * g0.shift_mass(truth.depth.as_slice()[p] as usize)
                + t * truth.background.as_slice()[p]
        })
        .sum()
}

/// Odd length covering at least four standard deviations each side.
pub fn default_irf_length(fwhm_bins: f64) -> usize {
    let sigma = fwhm_bins / FWHM_PER_SIGMA;
    2 * (4.0 * sigma).ceil().max(1.0) as usize + 1
}

/// Unit-sum discretized Gaussian with the given FWHM, peak at the middle
/// entry. `length = 0` picks [`default_irf_length`].
pub fn synth_irf(
    fwhm_ps: f64,
    bin_width_ps: f64,
    length: usize,
    n_bins: usize,
) -> Result<ImpulseResponse> {
    if !(fwhm_ps > 0.0 && bin_width_ps > 0.0) {
        return Err(Error::InvalidImpulseResponse(format!(
            "fwhm and bin width must be positive, got {fwhm_ps} / {bin_width_ps}"
        )));
    }
    let fwhm_bins = fwhm_ps / bin_width_ps;
    let len = if length == 0 {
        default_irf_length(fwhm_bins)
    } else {
        length
    };
    if len % 2 == 0 {
        return Err(Error::InvalidImpulseResponse(format!(
            "length must be odd, got {len}"
        )));
    }
    let sigma = fwhm_bins / FWHM_PER_SIGMA;
    let c = (len / 2) as f64;
    let mut g: Vec<f64> = (0..len)
        .map(|k| (-(k as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    ImpulseResponse::from_measured(&g, len / 2, n_bins, crate::irf::DEFAULT_FLOOR_EPS)
}
