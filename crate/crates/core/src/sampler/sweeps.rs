//! Conditional updates of the main chain and the prior-only chains.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::fields::FieldSet;
use crate::gamma_mixture::{background_conditional_sparse, intensity_conditional_sparse};
use crate::grid::Grid;
use crate::irf::ImpulseResponse;
use crate::neighborhood::{GmrfEdges, NeighborhoodSpec};
use crate::rng::{StreamFactory, StreamTag};

/// Smallest value a positive field entry is allowed to take.
pub const MIN_POSITIVE: f64 = 1e-300;
const MAX_POSITIVE: f64 = 1e300;

/// Read-only inputs shared by every sweep.
#[derive(Clone, Copy)]
pub struct SweepContext<'a> {
    pub g0: &'a ImpulseResponse,
    pub nb: &'a NeighborhoodSpec,
    pub edges: &'a GmrfEdges,
    /// Nonzero `(bin, count)` entries per pixel.
    pub sparse: &'a [Vec<(usize, u32)>],
    pub streams: &'a StreamFactory,
    pub parallel: bool,
}

pub(crate) fn map_sites<T, F>(parallel: bool, sites: &[usize], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        sites.par_iter().map(|&p| f(p)).collect()
    } else {
        sites.iter().map(|&p| f(p)).collect()
    }
}

pub(crate) fn map_range<T, F>(parallel: bool, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Draws an index from unnormalized log-probabilities by inversion.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(
        m.is_finite(),
        "categorical weights must have a finite maximum"
    );
    let mut cum = Vec::with_capacity(log_w.len());
    let mut total = 0.0;
    for &lw in log_w {
        total += (lw - m).exp();
        cum.push(total);
    }
    let u = rng.random::<f64>() * total;
    cum.iter().position(|&c| u < c).unwrap_or(log_w.len() - 1)
}

/// Log-weights of `t ∈ {1..T}` (entry `t - 1`) under the depth full
/// conditional: `Σ_s y_s ln(r g0(s - t) + b) - r v(t) - 2 c Σ_{q∈V} |t - t_q|`.
///
/// The factor 2 is exact: `φ` counts every neighbor pair twice, so a site
/// appears in `2 |V|` terms. Constants in `t` are dropped.
pub fn depth_log_weights(
    sparse: &[(usize, u32)],
    r: f64,
    b: f64,
    g0: &ImpulseResponse,
    neighbor_cost: &[f64],
    c: f64,
) -> Vec<f64> {
    (0..g0.n_bins())
        .map(|k| {
            let t = k + 1;
            let mut s = -r * g0.shift_mass(t) - 2.0 * c * neighbor_cost[k];
            for &(bin, y) in sparse {
                s += y as f64 * (r * g0.response(bin, t) + b).ln();
            }
            s
        })
        .collect()
}

/// Colored Gibbs sweep over depth. Sites of one color are conditionally
/// independent and drawn together.
pub fn sweep_depth(ctx: &SweepContext<'_>, fields: &mut FieldSet, c: f64, iter: u64) {
    let n_bins = ctx.g0.n_bins();
    for class in ctx.nb.color_classes() {
        let depth = fields.depth.as_slice();
        let r = fields.intensity.as_slice();
        let b = fields.background.as_slice();
        let draws = map_sites(ctx.parallel, class, |p| {
            let mut cost = vec![0.0; n_bins];
            ctx.nb.neighbor_cost(depth, p, n_bins, &mut cost);
            let lw = depth_log_weights(&ctx.sparse[p], r[p], b[p], ctx.g0, &cost, c);
            let mut rng = ctx.streams.stream(iter, StreamTag::Depth, p);
            sample_log_categorical(&lw, &mut rng) as u32 + 1
        });
        let out = fields.depth.as_mut_slice();
        for (&p, t) in class.iter().zip(draws) {
            out[p] = t;
        }
    }
}

/// Draws each intensity from its gamma-mixture conditional.
pub fn sweep_intensity(ctx: &SweepContext<'_>, fields: &mut FieldSet, alpha0: f64, iter: u64) {
    let n = fields.intensity.len();
    let depth = fields.depth.as_slice();
    let b = fields.background.as_slice();
    let aux = fields.aux.as_slice();
    let draws = map_range(ctx.parallel, n, |p| {
        let alpha_w = ctx.edges.alpha_at(aux, p);
        let mix = intensity_conditional_sparse(
            &ctx.sparse[p],
            depth[p] as usize,
            b[p],
            alpha0,
            alpha_w,
            ctx.g0,
        );
        let mut rng = ctx.streams.stream(iter, StreamTag::Intensity, p);
        mix.sample(&mut rng).max(MIN_POSITIVE)
    });
    fields.intensity.as_mut_slice().copy_from_slice(&draws);
}

/// Draws each background level from its gamma-mixture conditional.
pub fn sweep_background(
    ctx: &SweepContext<'_>,
    fields: &mut FieldSet,
    eta: f64,
    nu: f64,
    iter: u64,
) {
    let n = fields.background.len();
    let depth = fields.depth.as_slice();
    let r = fields.intensity.as_slice();
    let draws = map_range(ctx.parallel, n, |p| {
        let mix =
            background_conditional_sparse(&ctx.sparse[p], depth[p] as usize, r[p], eta, nu, ctx.g0);
        let mut rng = ctx.streams.stream(iter, StreamTag::Background, p);
        mix.sample(&mut rng).max(MIN_POSITIVE)
    });
    fields.background.as_mut_slice().copy_from_slice(&draws);
}

/// `γ ~ IG(α0, α0 β(R))` at every auxiliary site.
pub fn sweep_aux_field(
    ctx: &SweepContext<'_>,
    aux: &mut Grid<f64>,
    intensity: &Grid<f64>,
    alpha0: f64,
    iter: u64,
    tag: StreamTag,
) {
    let r = intensity.as_slice();
    let draws = map_range(ctx.parallel, aux.len(), |a| {
        let beta = ctx.edges.beta_at(r, a);
        let g = Gamma::new(alpha0, 1.0 / (alpha0 * beta)).expect("valid gamma parameters");
        let mut rng = ctx.streams.stream(iter, tag, a);
        (1.0 / g.sample(&mut rng)).clamp(MIN_POSITIVE, MAX_POSITIVE)
    });
    aux.as_mut_slice().copy_from_slice(&draws);
}

pub fn sweep_aux(ctx: &SweepContext<'_>, fields: &mut FieldSet, alpha0: f64, iter: u64) {
    let FieldSet { aux, intensity, .. } = fields;
    sweep_aux_field(ctx, aux, intensity, alpha0, iter, StreamTag::Aux);
}

/// `r ~ Gamma(α0, scale α_w(Γ) / α0)` at every intensity site (prior only).
pub fn sweep_prior_intensity(
    ctx: &SweepContext<'_>,
    intensity: &mut Grid<f64>,
    aux: &Grid<f64>,
    alpha0: f64,
    iter: u64,
) {
    let g = aux.as_slice();
    let draws = map_range(ctx.parallel, intensity.len(), |p| {
        let alpha_w = ctx.edges.alpha_at(g, p);
        let gamma = Gamma::new(alpha0, alpha_w / alpha0).expect("valid gamma parameters");
        let mut rng = ctx.streams.stream(iter, StreamTag::PriorIntensity, p);
        gamma.sample(&mut rng).clamp(MIN_POSITIVE, MAX_POSITIVE)
    });
    intensity.as_mut_slice().copy_from_slice(&draws);
}

/// Colored Gibbs sweep targeting `exp(-c φ(T))` alone.
pub fn sweep_prior_depth(ctx: &SweepContext<'_>, depth: &mut Grid<u32>, c: f64, iter: u64) {
    let n_bins = ctx.g0.n_bins();
    for class in ctx.nb.color_classes() {
        let d = depth.as_slice();
        let draws = map_sites(ctx.parallel, class, |p| {
            let mut cost = vec![0.0; n_bins];
            ctx.nb.neighbor_cost(d, p, n_bins, &mut cost);
            cost.iter_mut().for_each(|x| *x *= -2.0 * c);
            let mut rng = ctx.streams.stream(iter, StreamTag::PriorDepth, p);
            sample_log_categorical(&cost, &mut rng) as u32 + 1
        });
        let out = depth.as_mut_slice();
        for (&p, t) in class.iter().zip(draws) {
            out[p] = t;
        }
    }
}
