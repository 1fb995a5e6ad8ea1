//! Prior-only kernels K1 / K2 and the projected stochastic-gradient update
//! of `(c, α0)`.

use crate::fields::{GradientScaling, HyperState};
use crate::grid::Grid;
use crate::model::gmrf_statistic;
use crate::neighborhood::{tv_cost, GmrfEdges, NeighborhoodSpec};
use crate::rng::StreamTag;

use super::sweeps::{sweep_aux_field, sweep_prior_depth, sweep_prior_intensity, SweepContext};

/// One Gibbs sweep targeting the gamma-MRF `f(R, Γ | α0)`: all intensities
/// given `Γ'`, then all auxiliary sites given the new `R'`.
pub fn kernel_k1(
    ctx: &SweepContext<'_>,
    intensity: &mut Grid<f64>,
    aux: &mut Grid<f64>,
    alpha0: f64,
    iter: u64,
) {
    sweep_prior_intensity(ctx, intensity, aux, alpha0, iter);
    sweep_aux_field(ctx, aux, intensity, alpha0, iter, StreamTag::PriorAux);
}

/// One colored Gibbs sweep targeting the depth MRF `exp(-c φ(T))`.
pub fn kernel_k2(ctx: &SweepContext<'_>, depth: &mut Grid<u32>, c: f64, iter: u64) {
    sweep_prior_depth(ctx, depth, c, iter);
}

/// Sufficient statistics entering the gradient estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrfStatistics {
    /// `Λ(R, Γ)`.
    pub gmrf: f64,
    /// `φ(T)`.
    pub tv: f64,
}

impl MrfStatistics {
    pub fn of(
        intensity: &Grid<f64>,
        aux: &Grid<f64>,
        depth: &Grid<u32>,
        nb: &NeighborhoodSpec,
        edges: &GmrfEdges,
    ) -> Self {
        Self {
            gmrf: gmrf_statistic(intensity.as_slice(), aux.as_slice(), edges),
            tv: tv_cost(depth, nb),
        }
    }
}

/// `α0 ← P(α0 + ξ_n [Λ(main) - Λ(prior)])`, `c ← P(c + ξ_n [φ(prior) - φ(main)])`.
///
/// With [`GradientScaling::PerSite`] each difference is divided by the
/// number of sites it sums over (intensity sites for `Λ`, pixels for `φ`).
#[allow(clippy::too_many_arguments)]
pub fn update_hyperparams(
    hyper: &HyperState,
    main: &MrfStatistics,
    prior: &MrfStatistics,
    n: usize,
    n_sites: usize,
    scaling: GradientScaling,
    adapt_c: bool,
    adapt_alpha0: bool,
) -> (f64, f64) {
    let step = hyper.step(n);
    let norm = match scaling {
        GradientScaling::Raw => 1.0,
        GradientScaling::PerSite => n_sites as f64,
    };
    let alpha0 = if adapt_alpha0 {
        hyper.project_alpha0(hyper.alpha0 + step * (main.gmrf - prior.gmrf) / norm)
    } else {
        hyper.alpha0
    };
    let c = if adapt_c {
        hyper.project_c(hyper.c + step * (prior.tv - main.tv) / norm)
    } else {
        hyper.c
    };
    (c, alpha0)
}
