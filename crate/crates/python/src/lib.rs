//! Python bindings: cubes, impulse responses, the simulator, the sampler and
//! the evaluation metrics.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tcspc_core::baseline::run_baseline;
use tcspc_core::cube::{load_cube, save_cube};
use tcspc_core::inference::{map_depth, mmse_background, mmse_intensity, mse_cdf as core_mse_cdf};
use tcspc_core::irf::{load_irf, DEFAULT_FLOOR_EPS};
use tcspc_core::sampler::Sampler;
use tcspc_core::simulator::{generate_truth, sample_cube, synth_irf, SceneSpec};
use tcspc_core::{Grid, HyperState, SamplerConfig};

create_exception!(tcspc, TcspcError, PyException);

fn err(e: tcspc_core::Error) -> PyErr {
    TcspcError::new_err(format!("{}: {e}", e.kind()))
}

fn rows_of<T: Copy>(g: &Grid<T>) -> Vec<Vec<T>> {
    g.as_slice().chunks(g.cols()).map(|r| r.to_vec()).collect()
}

fn from_rows<T: Copy>(rows: Vec<Vec<T>>) -> PyResult<Grid<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(TcspcError::new_err(
            "expected a non-empty rectangular list of rows",
        ));
    }
    Ok(Grid::from_vec(n, m, rows.concat()))
}

/// Photon count cube of shape `(rows, cols, bins)`.
#[pyclass(name = "PhotonCube", module = "tcspc")]
struct PyCube {
    inner: tcspc_core::PhotonCube,
}

#[pymethods]
impl PyCube {
    /// Builds a cube from a flat pixel-major list of counts.
    #[new]
    fn new(rows: usize, cols: usize, bins: usize, counts: Vec<u32>) -> PyResult<Self> {
        tcspc_core::PhotonCube::new(rows, cols, bins, counts)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// Reads a PCUBE1 or CSV cube.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_cube(path).map(|inner| Self { inner }).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_cube(&self.inner, path).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.n_row(), self.inner.n_col(), self.inner.n_bins())
    }

    fn pixel(&self, row: usize, col: usize) -> PyResult<Vec<u32>> {
        if row >= self.inner.n_row() || col >= self.inner.n_col() {
            return Err(TcspcError::new_err(format!(
                "pixel ({row}, {col}) out of range"
            )));
        }
        Ok(self.inner.pixel(row, col).to_vec())
    }

    fn counts(&self) -> Vec<u32> {
        self.inner.counts().to_vec()
    }

    fn total_photons(&self) -> u64 {
        self.inner.total_photons()
    }

    fn mean_photons_per_pixel(&self) -> f64 {
        self.inner.mean_photons_per_pixel()
    }

    fn empty_pixel_fraction(&self) -> f64 {
        self.inner.empty_pixel_fraction()
    }

    fn __repr__(&self) -> String {
        let (r, c, t) = self.shape();
        format!(
            "PhotonCube({r}x{c}x{t}, photons={})",
            self.inner.total_photons()
        )
    }
}

/// Instrument impulse response tabulated for a given histogram length.
#[pyclass(name = "ImpulseResponse", module = "tcspc")]
struct PyIrf {
    inner: tcspc_core::ImpulseResponse,
}

#[pymethods]
impl PyIrf {
    #[new]
    #[pyo3(signature = (values, peak_offset, n_bins, floor_eps = DEFAULT_FLOOR_EPS))]
    fn new(values: Vec<f64>, peak_offset: usize, n_bins: usize, floor_eps: f64) -> PyResult<Self> {
        tcspc_core::ImpulseResponse::from_measured(&values, peak_offset, n_bins, floor_eps)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// Reads an IRF1 text file.
    #[staticmethod]
    #[pyo3(signature = (path, n_bins, floor_eps = DEFAULT_FLOOR_EPS))]
    fn load(path: PathBuf, n_bins: usize, floor_eps: f64) -> PyResult<Self> {
        load_irf(path, n_bins, floor_eps)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// Unit-sum discretized Gaussian.
    #[staticmethod]
    #[pyo3(signature = (fwhm_ps, bin_width_ps, n_bins, length = 0))]
    fn gaussian(fwhm_ps: f64, bin_width_ps: f64, n_bins: usize, length: usize) -> PyResult<Self> {
        synth_irf(fwhm_ps, bin_width_ps, length, n_bins)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn measured(&self) -> Vec<f64> {
        self.inner.measured().to_vec()
    }

    #[getter]
    fn peak_offset(&self) -> usize {
        self.inner.peak_offset()
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.inner.n_bins()
    }

    /// `g0(t - t_pos)` for 1-based bins.
    fn response(&self, t: usize, t_pos: usize) -> PyResult<f64> {
        let n = self.inner.n_bins();
        if !(1..=n).contains(&t) || !(1..=n).contains(&t_pos) {
            return Err(TcspcError::new_err(format!("bins must lie in 1..={n}")));
        }
        Ok(self.inner.response(t, t_pos))
    }

    fn shift_masses(&self) -> Vec<f64> {
        self.inner.shift_masses().to_vec()
    }
}

/// Generates a scene from `key = value` config text and samples a cube.
///
/// Returns `(cube, irf, truth)` where `truth` holds `depth`, `intensity`
/// and `background` as lists of rows.
#[pyfunction]
#[pyo3(signature = (config, seed = None, base_dir = "."))]
fn simulate<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    base_dir: &str,
) -> PyResult<(PyCube, PyIrf, Bound<'py, PyDict>)> {
    let spec = SceneSpec::parse(config, base_dir).map_err(err)?;
    let g0 = spec.synth_irf().map_err(err)?;
    let truth = generate_truth(&spec).map_err(err)?;
    let cube = sample_cube(&truth, &g0, seed.unwrap_or(spec.seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("depth", rows_of(&truth.depth))?;
    d.set_item("intensity", rows_of(&truth.intensity))?;
    d.set_item("background", rows_of(&truth.background))?;
    Ok((PyCube { inner: cube }, PyIrf { inner: g0 }, d))
}

/// Runs the adaptive Gibbs sampler and returns point estimates and the
/// hyperparameter trace.
#[pyfunction]
#[pyo3(signature = (
    cube, irf, iters = 1000, burnin = 200, seed = 0, thinning = 1, order = 2,
    c0 = 1.0, alpha0 = 1.0, step_scale = 1.0, fix_hyper = false, parallel = true
))]
#[allow(clippy::too_many_arguments)]
fn reconstruct<'py>(
    py: Python<'py>,
    cube: &PyCube,
    irf: &PyIrf,
    iters: usize,
    burnin: usize,
    seed: u64,
    thinning: usize,
    order: u8,
    c0: f64,
    alpha0: f64,
    step_scale: f64,
    fix_hyper: bool,
    parallel: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = SamplerConfig {
        n_mc: iters,
        n_bi: burnin,
        seed,
        thinning,
        neighborhood_order: order,
        parallel,
        hyper: HyperState {
            c: c0,
            step_scale,
            alpha0,
            ..HyperState::default()
        },
        ..SamplerConfig::default()
    };
    if fix_hyper {
        config = config.with_fixed_hyper(c0, alpha0);
    }
    let (c, g) = (&cube.inner, &irf.inner);
    let result = py.detach(|| {
        let trace = Sampler::new(c, g, config)?.run()?;
        Ok::<_, tcspc_core::Error>((
            map_depth(&trace)?,
            mmse_intensity(&trace)?,
            mmse_background(&trace)?,
            trace.hyper_trace,
        ))
    });
    let (depth, intensity, background, hyper) = result.map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("depth", rows_of(&depth))?;
    d.set_item("intensity", rows_of(&intensity))?;
    d.set_item("background", rows_of(&background))?;
    let trace: Vec<(usize, f64, f64, f64)> = hyper
        .iter()
        .map(|h| (h.iter, h.c, h.alpha0, h.log_posterior))
        .collect();
    d.set_item("hyper_trace", trace)?;
    Ok(d)
}

/// Cross-correlation depth and ML intensity; `None` marks empty pixels.
#[pyfunction]
fn baseline<'py>(py: Python<'py>, cube: &PyCube, irf: &PyIrf) -> PyResult<Bound<'py, PyDict>> {
    let est = run_baseline(&cube.inner, &irf.inner);
    let d = PyDict::new(py);
    d.set_item("depth", rows_of(&est.depth))?;
    d.set_item("intensity", rows_of(&est.intensity))?;
    Ok(d)
}

/// Fraction of all pixels whose error is defined and below each threshold.
#[pyfunction]
fn mse_cdf(mse: Vec<Vec<Option<f64>>>, taus: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(core_mse_cdf(&from_rows(mse)?, &taus))
}

/// Distance in meters covered by `t` bins of `bin_width_ps`.
#[pyfunction]
fn bin_to_distance(t: f64, bin_width_ps: f64) -> f64 {
    tcspc_core::bin_to_distance(t, bin_width_ps)
}

#[pymodule]
fn tcspc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TcspcError", m.py().get_type::<TcspcError>())?;
    m.add_class::<PyCube>()?;
    m.add_class::<PyIrf>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(mse_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(bin_to_distance, m)?)?;
    Ok(())
}
