//! Classical two-step estimator: cross-correlation depth, then maximum
//! likelihood intensity assuming zero background.

use rayon::prelude::*;

use crate::cube::PhotonCube;
use crate::grid::Grid;
use crate::irf::ImpulseResponse;

/// `argmax_τ Σ_t y_t g0(t - τ)` over `τ ∈ {1..T}`, ties to the smallest `τ`.
/// Correlations within a relative `1e-12` of each other count as tied.
/// `None` for an empty histogram.
pub fn xcorr_depth(hist: &[u32], g0: &ImpulseResponse) -> Option<usize> {
    let sparse: Vec<(usize, u32)> = hist
        .iter()
        .enumerate()
        .filter(|(_, &y)| y > 0)
        .map(|(k, &y)| (k + 1, y))
        .collect();
    xcorr_depth_sparse(&sparse, g0)
}

const TIE_RTOL: f64 = 1e-12;

pub fn xcorr_depth_sparse(sparse: &[(usize, u32)], g0: &ImpulseResponse) -> Option<usize> {
    if sparse.is_empty() {
        return None;
    }
    let corr = |tau: usize| -> f64 {
        sparse
            .iter()
            .map(|&(t, y)| y as f64 * g0.response(t, tau))
            .sum()
    };
    let mut best = (1, corr(1));
    for tau in 2..=g0.n_bins() {
        let c = corr(tau);
        if c > best.1 + TIE_RTOL * best.1.abs() {
            best = (tau, c);
        }
    }
    Some(best.0)
}

/// `Σ y / v(t_hat)`; `None` propagates an undefined depth.
pub fn ml_intensity(hist: &[u32], t_hat: Option<usize>, g0: &ImpulseResponse) -> Option<f64> {
    let total: u64 = hist.iter().map(|&y| y as u64).sum();
    t_hat.map(|t| total as f64 / g0.shift_mass(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    pub depth: Grid<Option<u32>>,
    pub intensity: Grid<Option<f64>>,
}

impl BaselineEstimate {
    pub fn defined_fraction(&self) -> f64 {
        let n = self.depth.len();
        self.depth.as_slice().iter().filter(|d| d.is_some()).count() as f64 / n as f64
    }
}

/// Runs the two-step method on every pixel.
pub fn run_baseline(cube: &PhotonCube, g0: &ImpulseResponse) -> BaselineEstimate {
    let per_pixel: Vec<(Option<u32>, Option<f64>)> = (0..cube.n_pixels())
        .into_par_iter()
        .map(|p| {
            let t = xcorr_depth_sparse(&cube.sparse_pixel(p), g0);
            let r = ml_intensity(cube.pixel_at(p), t, g0);
            (t.map(|t| t as u32), r)
        })
        .collect();
    let (depth, intensity): (Vec<_>, Vec<_>) = per_pixel.into_iter().unzip();
    BaselineEstimate {
        depth: Grid::from_vec(cube.n_row(), cube.n_col(), depth),
        intensity: Grid::from_vec(cube.n_row(), cube.n_col(), intensity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peaked(t: usize) -> ImpulseResponse {
        ImpulseResponse::from_measured(&[0.05, 0.3, 1.0, 0.3, 0.05], 2, t, 1e-12).unwrap()
    }

    #[test]
    fn noiseless_shifted_copy() {
        let g0 = peaked(32);
        let hist: Vec<u32> = (1..=32)
            .map(|t| (100.0 * g0.response(t, 17)).round() as u32)
            .collect();
        // Direct argmax oracle.
        let oracle = (1..=32)
            .map(|tau| {
                let c: f64 = (1..=32)
                    .map(|t| hist[t - 1] as f64 * g0.response(t, tau))
                    .sum();
                (tau, c)
            })
            .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a })
            .0;
        assert_eq!(oracle, 17);
        assert_eq!(xcorr_depth(&hist, &g0), Some(17));
    }

    #[test]
    fn empty_pixel_is_undefined() {
        let g0 = peaked(8);
        assert_eq!(xcorr_depth(&[0; 8], &g0), None);
        assert_eq!(ml_intensity(&[0; 8], None, &g0), None);
    }

    #[test]
    fn ties_go_to_smallest_shift() {
        let g0 = peaked(16);
        let mut hist = vec![0; 16];
        hist[4] = 1;
        hist[8] = 1;
        assert_eq!(xcorr_depth(&hist, &g0), Some(5));
    }

    #[test]
    fn ml_ratio() {
        let g0 = ImpulseResponse::from_measured(&[5.0], 0, 4, 1e-12).unwrap();
        let m = g0.shift_mass(2);
        let hist = [3, 4, 3, 0];
        assert!((ml_intensity(&hist, Some(2), &g0).unwrap() - 10.0 / m).abs() < 1e-12);
        assert_eq!(ml_intensity(&[0; 4], Some(2), &g0), Some(0.0));
    }

    #[test]
    fn scaling_counts_keeps_argmax() {
        let g0 = peaked(20);
        let hist = [0, 0, 1, 0, 2, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 3, 0, 0];
        let t = xcorr_depth(&hist, &g0);
        for k in 2..5 {
            let scaled: Vec<u32> = hist.iter().map(|y| y * k).collect();
            assert_eq!(xcorr_depth(&scaled, &g0), t);
            let r = ml_intensity(&scaled, t, &g0).unwrap();
            assert!((r - k as f64 * ml_intensity(&hist, t, &g0).unwrap()).abs() < 1e-9);
        }
    }
}
