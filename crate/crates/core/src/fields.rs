//! Latent fields, hyperparameters and sampler configuration.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Latent state `{R, T, B, Γ}`.
///
/// Depth values are 1-based bin indices in `{1, ..., T}`. The auxiliary
/// field is `(n_row + 1) x (n_col + 1)`; intensity site `(i, j)` is linked to
/// auxiliary sites `(i, j)`, `(i + 1, j)`, `(i, j + 1)` and `(i + 1, j + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub intensity: Grid<f64>,
    pub depth: Grid<u32>,
    pub background: Grid<f64>,
    pub aux: Grid<f64>,
}

impl FieldSet {
    pub fn rows(&self) -> usize {
        self.intensity.rows()
    }

    pub fn cols(&self) -> usize {
        self.intensity.cols()
    }

    /// Checks shapes and the positivity / range invariants.
    pub fn validate(&self, n_bins: usize) -> Result<()> {
        let (r, c) = (self.rows(), self.cols());
        if !self.depth.same_shape(&self.intensity) || !self.background.same_shape(&self.intensity) {
            return Err(Error::DimensionMismatch("field shapes differ".into()));
        }
        if self.aux.rows() != r + 1 || self.aux.cols() != c + 1 {
            return Err(Error::DimensionMismatch(format!(
                "aux field must be {}x{}, got {}x{}",
                r + 1,
                c + 1,
                self.aux.rows(),
                self.aux.cols()
            )));
        }
        if let Some(v) = self
            .intensity
            .as_slice()
            .iter()
            .find(|v| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "intensity must be >= 0, found {v}"
            )));
        }
        if let Some(v) = self
            .background
            .as_slice()
            .iter()
            .find(|v| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "background must be >= 0, found {v}"
            )));
        }
        if let Some(v) = self
            .aux
            .as_slice()
            .iter()
            .find(|v| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "aux field must be > 0, found {v}"
            )));
        }
        if let Some(t) = self
            .depth
            .as_slice()
            .iter()
            .find(|&&t| t == 0 || t as usize > n_bins)
        {
            return Err(Error::InvalidConfig(format!(
                "depth {t} outside 1..={n_bins}"
            )));
        }
        Ok(())
    }
}

/// MRF hyperparameters `(c, α0)`, fixed background prior `(η, ν)` and the
/// projected stochastic-gradient schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperState {
    pub c: f64,
    pub alpha0: f64,
    pub eta: f64,
    pub nu: f64,
    pub c_max: f64,
    pub alpha0_max: f64,
    /// Lower projection bound of `α0`; gamma shapes must stay positive.
    pub alpha0_min: f64,
    /// Multiplier on `ξ_n = n^{-3/4}`.
    pub step_scale: f64,
}

impl Default for HyperState {
    fn default() -> Self {
        Self {
            c: 1.0,
            alpha0: 1.0,
            eta: 1.0,
            nu: 10.0,
            c_max: 20.0,
            alpha0_max: 20.0,
            alpha0_min: 1e-2,
            step_scale: 1.0,
        }
    }
}

impl HyperState {
    /// `ξ_n = scale * n^{-3/4}` for `n >= 1`.
    pub fn step(&self, n: usize) -> f64 {
        self.step_scale * (n as f64).powf(-0.75)
    }

    pub fn project_c(&self, c: f64) -> f64 {
        c.clamp(0.0, self.c_max)
    }

    pub fn project_alpha0(&self, a: f64) -> f64 {
        a.clamp(self.alpha0_min, self.alpha0_max)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta > 0.0
            && self.nu > 0.0
            && self.c_max > 0.0
            && self.alpha0_max > self.alpha0_min
            && self.alpha0_min > 0.0
            && (0.0..=self.c_max).contains(&self.c)
            && (self.alpha0_min..=self.alpha0_max).contains(&self.alpha0)
            && self.step_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid hyperparameters {self:?}"
            )))
        }
    }
}

/// How the stochastic gradient is scaled before the step is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientScaling {
    /// Raw statistic differences.
    Raw,
    /// Differences divided by the number of sites of the field involved.
    PerSite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_mc: usize,
    pub n_bi: usize,
    pub seed: u64,
    /// 1 for the 4-pixel neighborhood, 2 for the 8-pixel one.
    pub neighborhood_order: u8,
    pub thinning: usize,
    pub parallel: bool,
    /// Intensity value substituted outside the image in the gamma-MRF.
    pub r_pad: f64,
    pub hyper: HyperState,
    pub adapt_c: bool,
    pub adapt_alpha0: bool,
    pub gradient_scaling: GradientScaling,
    pub store_background: bool,
    /// Emit a progress line every `log_every` iterations (0 disables).
    pub log_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_mc: 1000,
            n_bi: 200,
            seed: 0,
            neighborhood_order: 2,
            thinning: 1,
            parallel: true,
            r_pad: 0.1,
            hyper: HyperState::default(),
            adapt_c: true,
            adapt_alpha0: true,
            gradient_scaling: GradientScaling::PerSite,
            store_background: true,
            log_every: 0,
        }
    }
}

impl SamplerConfig {
    /// Disables adaptation and pins `(c, α0)`.
    pub fn with_fixed_hyper(mut self, c: f64, alpha0: f64) -> Self {
        self.hyper.c = c;
        self.hyper.alpha0 = alpha0;
        self.adapt_c = false;
        self.adapt_alpha0 = false;
        self
    }

    pub fn retained_count(&self) -> usize {
        (self.n_mc - self.n_bi) / self.thinning
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mc == 0 || self.n_bi >= self.n_mc {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= n_bi < n_mc, got n_bi={} n_mc={}",
                self.n_bi, self.n_mc
            )));
        }
        if self.thinning == 0 || !(self.n_mc - self.n_bi).is_multiple_of(self.thinning) {
            return Err(Error::InvalidConfig(format!(
                "thinning {} must divide n_mc - n_bi = {}",
                self.thinning,
                self.n_mc - self.n_bi
            )));
        }
        if !matches!(self.neighborhood_order, 1 | 2) {
            return Err(Error::InvalidConfig(format!(
                "neighborhood order must be 1 or 2, got {}",
                self.neighborhood_order
            )));
        }
        if self.r_pad.is_nan() || self.r_pad <= 0.0 {
            return Err(Error::InvalidConfig("r_pad must be positive".into()));
        }
        self.hyper.validate()
    }
}
