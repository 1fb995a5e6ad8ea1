//! Likelihood and prior densities, up to their intractable normalizing
//! constants.

use crate::cube::PhotonCube;
use crate::error::{Error, Result};
use crate::fields::{FieldSet, HyperState};
use crate::grid::Grid;
use crate::irf::ImpulseResponse;
use crate::math::{ln_factorial, xlogy};
use crate::neighborhood::{tv_cost, GmrfEdges, NeighborhoodSpec};

/// Poisson rate `λ = r g0(t - t_pos) + b` of bin `t`.
#[inline]
pub fn lambda(r: f64, b: f64, g0: &ImpulseResponse, t_pos: usize, t: usize) -> f64 {
    r * g0.response(t, t_pos) + b
}

/// `Σ_t [y_t ln λ_t - λ_t - ln y_t!]` for one pixel, given its nonzero bins.
/// Zero-count bins only contribute through `Σ_t λ_t = r v(t_pos) + T b`.
pub fn pixel_log_likelihood(
    sparse: &[(usize, u32)],
    r: f64,
    b: f64,
    t_pos: usize,
    g0: &ImpulseResponse,
) -> f64 {
    let mut acc = -(r * g0.shift_mass(t_pos) + g0.n_bins() as f64 * b);
    for &(t, y) in sparse {
        let lam = lambda(r, b, g0, t_pos, t);
        acc += y as f64 * lam.ln() - ln_factorial(y);
    }
    acc
}

/// Full Poisson log-likelihood `ln P(Y | R, B, T)`.
///
/// Fails with [`Error::DegenerateRate`] when a bin with a positive count has
/// a zero rate.
pub fn log_likelihood(cube: &PhotonCube, fields: &FieldSet, g0: &ImpulseResponse) -> Result<f64> {
    check_dims(cube, fields)?;
    let n_bins = cube.n_bins();
    let mut total = 0.0;
    for p in 0..cube.n_pixels() {
        let r = fields.intensity.as_slice()[p];
        let b = fields.background.as_slice()[p];
        let t_pos = fields.depth.as_slice()[p] as usize;
        let hist = cube.pixel_at(p);
        let mut acc = -(r * g0.shift_mass(t_pos) + n_bins as f64 * b);
        for (k, &y) in hist.iter().enumerate() {
            if y == 0 {
                continue;
            }
            let lam = lambda(r, b, g0, t_pos, k + 1);
            if lam <= 0.0 {
                return Err(Error::DegenerateRate {
                    row: p / cube.n_col(),
                    col: p % cube.n_col(),
                    bin: k + 1,
                });
            }
            acc += y as f64 * lam.ln() - ln_factorial(y);
        }
        total += acc;
    }
    Ok(total)
}

/// `-c φ(T)`; the partition function `G(c)` is never evaluated.
pub fn log_depth_prior_unnorm(depth: &Grid<u32>, c: f64, nb: &NeighborhoodSpec) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    -c * tv_cost(depth, nb)
}

/// `Σ_{edges} r / (4 γ)`, padded edges included.
pub fn gmrf_edge_sum(intensity: &[f64], aux: &[f64], edges: &GmrfEdges) -> f64 {
    (0..edges.n_aux())
        .map(|a| edges.beta_at(intensity, a) / aux[a])
        .sum()
}

/// Unnormalized gamma-MRF log-density
/// `(α0 - 1) Σ ln r - (α0 + 1) Σ ln γ - α0 Σ_{edges} r / (4 γ)`.
///
/// With a zero intensity the result is `-inf` for `α0 > 1` and `+inf` for
/// `α0 < 1`; at `α0 = 1` the `ln r` term vanishes identically.
pub fn log_gmrf_unnorm(
    intensity: &Grid<f64>,
    aux: &Grid<f64>,
    alpha0: f64,
    edges: &GmrfEdges,
) -> f64 {
    let r = intensity.as_slice();
    let g = aux.as_slice();
    let log_r: f64 = r.iter().map(|&x| xlogy(alpha0 - 1.0, x)).sum();
    let log_g: f64 = g.iter().map(|&x| x.ln()).sum();
    log_r - (alpha0 + 1.0) * log_g - alpha0 * gmrf_edge_sum(r, g, edges)
}

/// `Λ(R, Γ) = ∂/∂α0` of the unnormalized gamma-MRF log-density.
pub fn gmrf_statistic(intensity: &[f64], aux: &[f64], edges: &GmrfEdges) -> f64 {
    let log_r: f64 = intensity.iter().map(|x| x.ln()).sum();
    let log_g: f64 = aux.iter().map(|x| x.ln()).sum();
    log_r - log_g - gmrf_edge_sum(intensity, aux, edges)
}

/// Gamma(η, scale ν) log-density of a background level, without the
/// constant `-ln Γ(η) - η ln ν`.
pub fn log_background_prior(b: f64, eta: f64, nu: f64) -> f64 {
    xlogy(eta - 1.0, b) - b / nu
}

/// Unnormalized joint log-posterior of `(T, B, R, Γ)` given `Y, c, α0`.
pub fn log_posterior_unnorm(
    cube: &PhotonCube,
    fields: &FieldSet,
    hyper: &HyperState,
    g0: &ImpulseResponse,
    nb: &NeighborhoodSpec,
    edges: &GmrfEdges,
) -> Result<f64> {
    let ll = log_likelihood(cube, fields, g0)?;
    let depth = log_depth_prior_unnorm(&fields.depth, hyper.c, nb);
    let gmrf = log_gmrf_unnorm(&fields.intensity, &fields.aux, hyper.alpha0, edges);
    let bg: f64 = fields
        .background
        .as_slice()
        .iter()
        .map(|&b| log_background_prior(b, hyper.eta, hyper.nu))
        .sum();
    Ok(ll + depth + gmrf + bg)
}

fn check_dims(cube: &PhotonCube, fields: &FieldSet) -> Result<()> {
    if fields.rows() != cube.n_row() || fields.cols() != cube.n_col() {
        return Err(Error::DimensionMismatch(format!(
            "fields {}x{} vs cube {}x{}",
            fields.rows(),
            fields.cols(),
            cube.n_row(),
            cube.n_col()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_irf(t: usize) -> ImpulseResponse {
        ImpulseResponse::from_measured(&[1.0], 0, t, 1.0).unwrap()
    }

    fn fields_1x1(r: f64, b: f64, t: u32) -> FieldSet {
        FieldSet {
            intensity: Grid::filled(1, 1, r),
            depth: Grid::filled(1, 1, t),
            background: Grid::filled(1, 1, b),
            aux: Grid::filled(2, 2, 1.0),
        }
    }

    #[test]
    fn lambda_examples() {
        let g0 = ImpulseResponse::from_measured(&[0.5, 4.0, 0.5], 1, 5, 1e-12).unwrap();
        assert_eq!(lambda(0.0, 0.5, &g0, 3, 1), 0.5);
        assert_eq!(lambda(1.0, 0.0, &g0, 3, 3), 4.0);
        assert!((lambda(2.0, 0.1, &g0, 3, 4) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn likelihood_examples() {
        // λ = 1 from the background alone.
        let cube = PhotonCube::new(1, 1, 1, vec![0]).unwrap();
        let g0 = ImpulseResponse::from_measured(&[1e-12], 0, 1, 1e-12).unwrap();
        let ll = log_likelihood(&cube, &fields_1x1(0.0, 1.0, 1), &g0).unwrap();
        assert!((ll + 1.0).abs() < 1e-15);

        let cube = PhotonCube::new(1, 1, 2, vec![1, 0]).unwrap();
        let ll = log_likelihood(&cube, &fields_1x1(0.0, 2.0, 1), &flat_irf(2)).unwrap();
        assert!((ll - (2f64.ln() - 4.0)).abs() < 1e-14);

        let cube = PhotonCube::new(1, 1, 2, vec![1, 0]).unwrap();
        let err = log_likelihood(&cube, &fields_1x1(0.0, 0.0, 1), &flat_irf(2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateRate { .. }));
    }

    #[test]
    fn depth_prior_examples() {
        let nb = NeighborhoodSpec::new(2, 2, 2);
        let d = Grid::from_vec(2, 2, vec![1, 2, 3, 4]);
        assert_eq!(log_depth_prior_unnorm(&d, 0.0, &nb), 0.0);
        assert_eq!(log_depth_prior_unnorm(&d, 1.0, &nb), -20.0);
        assert_eq!(
            log_depth_prior_unnorm(&Grid::filled(2, 2, 5), 2.0, &nb),
            0.0
        );
    }

    #[test]
    fn gmrf_examples() {
        let edges = GmrfEdges::new(2, 2, 1.0);
        let r = Grid::filled(2, 2, 1.0);
        let g = Grid::filled(3, 3, 1.0);
        // 9 aux sites x 4 edges, each r / (4 γ) = 1/4.
        let alpha0 = 1.7;
        assert!((log_gmrf_unnorm(&r, &g, alpha0, &edges) + 9.0 * alpha0).abs() < 1e-12);

        let r = Grid::from_vec(2, 2, vec![0.3, 2.0, 0.7, 1.1]);
        let g = Grid::from_fn(3, 3, |i, j| 0.5 + (i * 3 + j) as f64 * 0.1);
        let edges = GmrfEdges::new(2, 2, 0.1);
        let with_one = log_gmrf_unnorm(&r, &g, 1.0, &edges);
        let log_g: f64 = g.as_slice().iter().map(|x| x.ln()).sum();
        assert!(
            (with_one - (-2.0 * log_g - gmrf_edge_sum(r.as_slice(), g.as_slice(), &edges))).abs()
                < 1e-12
        );

        let r0 = Grid::from_vec(2, 2, vec![0.0, 2.0, 0.7, 1.1]);
        assert_eq!(log_gmrf_unnorm(&r0, &g, 2.0, &edges), f64::NEG_INFINITY);
        assert!(log_gmrf_unnorm(&r0, &g, 1.0, &edges).is_finite());
    }

    #[test]
    fn background_prior_examples() {
        assert!((log_background_prior(5.0, 1.0, 10.0) + 0.5).abs() < 1e-15);
        assert_eq!(log_background_prior(0.0, 1.0, 10.0), 0.0);
        assert_eq!(log_background_prior(0.0, 2.0, 10.0), f64::NEG_INFINITY);
    }

    #[test]
    fn posterior_is_sum_of_components() {
        let cube = PhotonCube::new(2, 2, 3, vec![0, 1, 0, 2, 0, 0, 0, 0, 1, 1, 1, 0]).unwrap();
        let g0 = ImpulseResponse::from_measured(&[0.2, 1.0, 0.3], 1, 3, 1e-12).unwrap();
        let nb = NeighborhoodSpec::new(2, 2, 2);
        let edges = GmrfEdges::new(2, 2, 0.1);
        let fields = FieldSet {
            intensity: Grid::from_vec(2, 2, vec![0.5, 1.0, 1.5, 2.0]),
            depth: Grid::from_vec(2, 2, vec![2, 1, 3, 2]),
            background: Grid::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]),
            aux: Grid::from_fn(3, 3, |i, j| 1.0 + 0.1 * (i + j) as f64),
        };
        let hyper = HyperState {
            c: 0.7,
            alpha0: 2.5,
            ..HyperState::default()
        };
        let total = log_posterior_unnorm(&cube, &fields, &hyper, &g0, &nb, &edges).unwrap();
        let parts = log_likelihood(&cube, &fields, &g0).unwrap()
            + log_depth_prior_unnorm(&fields.depth, 0.7, &nb)
            + log_gmrf_unnorm(&fields.intensity, &fields.aux, 2.5, &edges)
            + fields
                .background
                .as_slice()
                .iter()
                .map(|&b| log_background_prior(b, 1.0, 10.0))
                .sum::<f64>();
        assert!((total - parts).abs() < 1e-12);

        let neutral = HyperState {
            c: 0.0,
            alpha0: 1.0,
            ..HyperState::default()
        };
        let lp = log_posterior_unnorm(&cube, &fields, &neutral, &g0, &nb, &edges).unwrap();
        let log_g: f64 = fields.aux.as_slice().iter().map(|x| x.ln()).sum();
        let expect = log_likelihood(&cube, &fields, &g0).unwrap()
            + fields
                .background
                .as_slice()
                .iter()
                .map(|&b| -b / 10.0)
                .sum::<f64>()
            - 2.0 * log_g
            - gmrf_edge_sum(fields.intensity.as_slice(), fields.aux.as_slice(), &edges);
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn pixel_log_likelihood_matches_full() {
        let cube = PhotonCube::new(1, 1, 4, vec![2, 0, 1, 3]).unwrap();
        let g0 = ImpulseResponse::from_measured(&[0.2, 1.0, 0.3], 1, 4, 1e-12).unwrap();
        let f = fields_1x1(1.3, 0.2, 3);
        let full = log_likelihood(&cube, &f, &g0).unwrap();
        let fast = pixel_log_likelihood(&cube.sparse_pixel(0), 1.3, 0.2, 3, &g0);
        assert!((full - fast).abs() < 1e-13);
    }
}
