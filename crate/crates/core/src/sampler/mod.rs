//! Adaptive Gibbs sampler.
//!
//! One iteration `n` updates, in order: depth (colored sweep), intensity,
//! background and the auxiliary field. While `n < n_bi`, the prior-only
//! chains `(R', Γ')` and `T'` advance one kernel step with the previous
//! hyperparameters and `(c, α0)` take one projected stochastic-gradient step.
//! The prior chains persist across iterations and start from the initial
//! main state.

mod kernels;
mod sweeps;

use std::fmt;

pub use kernels::{kernel_k1, kernel_k2, update_hyperparams, MrfStatistics};
pub use sweeps::{
    depth_log_weights, sample_log_categorical, sweep_aux, sweep_background, sweep_depth,
    sweep_intensity, sweep_prior_depth, SweepContext, MIN_POSITIVE,
};

use rand::Rng;

use crate::baseline::{ml_intensity, xcorr_depth_sparse};
use crate::cube::PhotonCube;
use crate::error::{Error, Result};
use crate::fields::{FieldSet, HyperState, SamplerConfig};
use crate::grid::Grid;
use crate::inference::{ChainTrace, HyperRecord};
use crate::irf::ImpulseResponse;
use crate::model::log_posterior_unnorm;
use crate::neighborhood::{GmrfEdges, NeighborhoodSpec};
use crate::rng::{StreamFactory, StreamTag};

const INIT_FLOOR: f64 = 1e-3;

/// Full sampler state after `iteration` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub iteration: usize,
    pub fields: FieldSet,
    pub hyper: HyperState,
    pub prior_intensity: Grid<f64>,
    pub prior_aux: Grid<f64>,
    pub prior_depth: Grid<u32>,
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub log_posterior: f64,
    pub c: f64,
    pub alpha0: f64,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} logpost={} c={} alpha0={}",
            self.iter, self.log_posterior, self.c, self.alpha0
        )
    }
}

/// Initial fields: baseline depth (uniform random where undefined), baseline
/// intensity floored at 1e-3, mean per-bin count floored at 1e-3 for the
/// background and `Γ = β(R)` floored at 1e-3.
pub fn init_fields(
    cube: &PhotonCube,
    g0: &ImpulseResponse,
    edges: &GmrfEdges,
    streams: &StreamFactory,
) -> FieldSet {
    let (rows, cols, n_bins) = (cube.n_row(), cube.n_col(), cube.n_bins());
    let mut depth = Vec::with_capacity(rows * cols);
    let mut intensity = Vec::with_capacity(rows * cols);
    let mut background = Vec::with_capacity(rows * cols);
    for p in 0..rows * cols {
        let t = xcorr_depth_sparse(&cube.sparse_pixel(p), g0).unwrap_or_else(|| {
            let mut rng = streams.stream(0, StreamTag::Init, p);
            rng.random_range(1..=n_bins)
        });
        let r = ml_intensity(cube.pixel_at(p), Some(t), g0).unwrap_or(0.0);
        depth.push(t as u32);
        intensity.push(r.max(INIT_FLOOR));
        background.push((cube.totals()[p] as f64 / n_bins as f64).max(INIT_FLOOR));
    }
    let intensity = Grid::from_vec(rows, cols, intensity);
    let aux = edges.beta_field(&intensity).map(|&g| g.max(INIT_FLOOR));
    FieldSet {
        intensity,
        depth: Grid::from_vec(rows, cols, depth),
        background: Grid::from_vec(rows, cols, background),
        aux,
    }
}

fn check_bins(cube: &PhotonCube, g0: &ImpulseResponse) -> Result<()> {
    if g0.n_bins() != cube.n_bins() {
        return Err(Error::DimensionMismatch(format!(
            "impulse response tabulated for {} bins, cube has {}",
            g0.n_bins(),
            cube.n_bins()
        )));
    }
    Ok(())
}

/// Sampler bound to one cube and impulse response.
pub struct Sampler<'a> {
    cube: &'a PhotonCube,
    g0: &'a ImpulseResponse,
    config: SamplerConfig,
    nb: NeighborhoodSpec,
    edges: GmrfEdges,
    sparse: Vec<Vec<(usize, u32)>>,
    streams: StreamFactory,
    state: SamplerState,
}

impl<'a> Sampler<'a> {
    /// Validates inputs and builds the initial state.
    pub fn new(
        cube: &'a PhotonCube,
        g0: &'a ImpulseResponse,
        config: SamplerConfig,
    ) -> Result<Self> {
        check_bins(cube, g0)?;
        let edges = GmrfEdges::new(cube.n_row(), cube.n_col(), config.r_pad);
        let streams = StreamFactory::new(config.seed);
        let fields = init_fields(cube, g0, &edges, &streams);
        Self::with_fields(cube, g0, config, fields)
    }

    /// Starts from caller-provided fields; prior chains copy them.
    pub fn with_fields(
        cube: &'a PhotonCube,
        g0: &'a ImpulseResponse,
        config: SamplerConfig,
        fields: FieldSet,
    ) -> Result<Self> {
        config.validate()?;
        check_bins(cube, g0)?;
        if fields.rows() != cube.n_row() || fields.cols() != cube.n_col() {
            return Err(Error::DimensionMismatch("fields do not match cube".into()));
        }
        fields.validate(cube.n_bins())?;
        let nb = NeighborhoodSpec::new(cube.n_row(), cube.n_col(), config.neighborhood_order);
        let edges = GmrfEdges::new(cube.n_row(), cube.n_col(), config.r_pad);
        let sparse = (0..cube.n_pixels()).map(|p| cube.sparse_pixel(p)).collect();
        let streams = StreamFactory::new(config.seed);
        let state = SamplerState {
            iteration: 0,
            prior_intensity: fields.intensity.clone(),
            prior_aux: fields.aux.clone(),
            prior_depth: fields.depth.clone(),
            fields,
            hyper: config.hyper,
        };
        Ok(Self {
            cube,
            g0,
            config,
            nb,
            edges,
            sparse,
            streams,
            state,
        })
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn neighborhood(&self) -> &NeighborhoodSpec {
        &self.nb
    }

    pub fn edges(&self) -> &GmrfEdges {
        &self.edges
    }

    fn context(&self) -> SweepContext<'_> {
        SweepContext {
            g0: self.g0,
            nb: &self.nb,
            edges: &self.edges,
            sparse: &self.sparse,
            streams: &self.streams,
            parallel: self.config.parallel,
        }
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let n = self.state.iteration + 1;
        let iter = n as u64;
        let hyper = self.state.hyper;
        let n_bins = self.cube.n_bins();
        let SamplerState {
            fields,
            prior_intensity,
            prior_aux,
            prior_depth,
            ..
        } = &mut self.state;
        let ctx = SweepContext {
            g0: self.g0,
            nb: &self.nb,
            edges: &self.edges,
            sparse: &self.sparse,
            streams: &self.streams,
            parallel: self.config.parallel,
        };

        sweep_depth(&ctx, fields, hyper.c, iter);
        sweep_intensity(&ctx, fields, hyper.alpha0, iter);
        sweep_background(&ctx, fields, hyper.eta, hyper.nu, iter);
        sweep_aux(&ctx, fields, hyper.alpha0, iter);
        debug_assert!(fields.validate(n_bins).is_ok());

        let adapting = n < self.config.n_bi && (self.config.adapt_c || self.config.adapt_alpha0);
        let (c, alpha0) = if adapting {
            if self.config.adapt_alpha0 {
                kernel_k1(&ctx, prior_intensity, prior_aux, hyper.alpha0, iter);
            }
            if self.config.adapt_c {
                kernel_k2(&ctx, prior_depth, hyper.c, iter);
            }
            let main = MrfStatistics::of(
                &fields.intensity,
                &fields.aux,
                &fields.depth,
                &self.nb,
                &self.edges,
            );
            let prior = MrfStatistics::of(
                prior_intensity,
                prior_aux,
                prior_depth,
                &self.nb,
                &self.edges,
            );
            update_hyperparams(
                &hyper,
                &main,
                &prior,
                n,
                self.cube.n_pixels(),
                self.config.gradient_scaling,
                self.config.adapt_c,
                self.config.adapt_alpha0,
            )
        } else {
            (hyper.c, hyper.alpha0)
        };
        self.state.hyper.c = c;
        self.state.hyper.alpha0 = alpha0;
        self.state.iteration = n;

        let log_posterior = log_posterior_unnorm(
            self.cube,
            &self.state.fields,
            &self.state.hyper,
            self.g0,
            &self.nb,
            &self.edges,
        )?;
        if !log_posterior.is_finite() {
            return Err(Error::NonFinite {
                iter: n,
                diagnostics: self.diagnostics(log_posterior),
            });
        }
        Ok(IterationRecord {
            iter: n,
            log_posterior,
            c,
            alpha0,
        })
    }

    fn diagnostics(&self, log_posterior: f64) -> String {
        let f = &self.state.fields;
        let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
        format!(
            "logpost={log_posterior} c={} alpha0={} min_r={} min_b={} min_gamma={}",
            self.state.hyper.c,
            self.state.hyper.alpha0,
            min(f.intensity.as_slice()),
            min(f.background.as_slice()),
            min(f.aux.as_slice()),
        )
    }

    /// Runs all `n_mc` iterations, calling `observer` after each one.
    pub fn run_with(mut self, mut observer: impl FnMut(&IterationRecord)) -> Result<ChainTrace> {
        let cfg = self.config.clone();
        let mut trace = ChainTrace::new(
            self.cube.n_row(),
            self.cube.n_col(),
            self.cube.n_bins(),
            cfg.n_mc,
            cfg.n_bi,
            cfg.thinning,
            cfg.store_background,
        );
        for _ in 0..cfg.n_mc {
            let rec = self.step()?;
            trace.hyper_trace.push(HyperRecord {
                iter: rec.iter,
                c: rec.c,
                alpha0: rec.alpha0,
                log_posterior: rec.log_posterior,
            });
            if trace.retains(rec.iter) {
                trace.record(rec.iter, &self.state.fields);
            }
            observer(&rec);
        }
        debug_assert_eq!(trace.retained_count(), cfg.retained_count());
        Ok(trace)
    }

    pub fn run(self) -> Result<ChainTrace> {
        self.run_with(|_| {})
    }

    #[doc(hidden)]
    pub fn sweep_context(&self) -> SweepContext<'_> {
        self.context()
    }
}

/// Initializes and runs the sampler.
pub fn run(cube: &PhotonCube, g0: &ImpulseResponse, config: SamplerConfig) -> Result<ChainTrace> {
    Sampler::new(cube, g0, config)?.run()
}
