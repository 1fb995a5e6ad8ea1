//! Point estimates from chain output and the MSE / cdf evaluation metrics.

use crate::bin_to_distance;
use crate::error::{Error, Result};
use crate::fields::FieldSet;
use crate::grid::Grid;

/// Hyperparameter values after iteration `iter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperRecord {
    pub iter: usize,
    pub c: f64,
    pub alpha0: f64,
    pub log_posterior: f64,
}

/// Post-burn-in samples. Depth is kept as per-pixel bin occupancy counts;
/// intensity (and optionally background) as full fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub rows: usize,
    pub cols: usize,
    pub n_bins: usize,
    pub n_mc: usize,
    pub n_bi: usize,
    pub thinning: usize,
    pub retained_iters: Vec<usize>,
    pub intensity_samples: Vec<Vec<f64>>,
    pub background_samples: Option<Vec<Vec<f64>>>,
    /// Pixel-major, `n_bins` counts per pixel; entry `t - 1` counts bin `t`.
    pub depth_histograms: Vec<u32>,
    pub hyper_trace: Vec<HyperRecord>,
}

impl ChainTrace {
    pub fn new(
        rows: usize,
        cols: usize,
        n_bins: usize,
        n_mc: usize,
        n_bi: usize,
        thinning: usize,
        store_background: bool,
    ) -> Self {
        Self {
            rows,
            cols,
            n_bins,
            n_mc,
            n_bi,
            thinning,
            retained_iters: Vec::new(),
            intensity_samples: Vec::new(),
            background_samples: store_background.then(Vec::new),
            depth_histograms: vec![0; rows * cols * n_bins],
            hyper_trace: Vec::new(),
        }
    }

    /// Whether iteration `n` (1-based) is kept.
    pub fn retains(&self, n: usize) -> bool {
        n > self.n_bi && (n - self.n_bi).is_multiple_of(self.thinning)
    }

    pub fn record(&mut self, n: usize, fields: &FieldSet) {
        self.retained_iters.push(n);
        self.intensity_samples
            .push(fields.intensity.as_slice().to_vec());
        if let Some(bs) = self.background_samples.as_mut() {
            bs.push(fields.background.as_slice().to_vec());
        }
        for (p, &t) in fields.depth.as_slice().iter().enumerate() {
            self.depth_histograms[p * self.n_bins + t as usize - 1] += 1;
        }
    }

    pub fn retained_count(&self) -> usize {
        self.retained_iters.len()
    }

    pub fn depth_histogram(&self, p: usize) -> &[u32] {
        &self.depth_histograms[p * self.n_bins..(p + 1) * self.n_bins]
    }

    /// Empirical marginal of pixel `p`'s depth over retained samples.
    pub fn depth_marginal(&self, p: usize) -> Vec<f64> {
        let n = self.retained_count() as f64;
        self.depth_histogram(p)
            .iter()
            .map(|&h| h as f64 / n)
            .collect()
    }
}

fn mean_field(rows: usize, cols: usize, samples: &[Vec<f64>]) -> Result<Grid<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = samples.len() as f64;
    let mut acc = vec![0.0; rows * cols];
    for s in samples {
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(Grid::from_vec(rows, cols, acc))
}

/// Posterior-mean intensity.
pub fn mmse_intensity(trace: &ChainTrace) -> Result<Grid<f64>> {
    mean_field(trace.rows, trace.cols, &trace.intensity_samples)
}

/// Posterior-mean background.
pub fn mmse_background(trace: &ChainTrace) -> Result<Grid<f64>> {
    let samples = trace
        .background_samples
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("background samples were not stored".into()))?;
    mean_field(trace.rows, trace.cols, samples)
}

/// Index (1-based) of the largest count; ties go to the smallest bin.
pub fn histogram_mode(hist: &[u32]) -> u32 {
    let mut best = 0;
    for (k, &h) in hist.iter().enumerate() {
        if h > hist[best] {
            best = k;
        }
    }
    best as u32 + 1
}

/// Marginal MAP depth: per-pixel most frequent sampled bin.
pub fn map_depth(trace: &ChainTrace) -> Result<Grid<u32>> {
    if trace.retained_count() == 0 {
        return Err(Error::EmptyTrace);
    }
    Ok(Grid::from_fn(trace.rows, trace.cols, |i, j| {
        histogram_mode(trace.depth_histogram(i * trace.cols + j))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Depth bins, compared after conversion to meters.
    Distance,
    Intensity,
}

/// Per-pixel squared error; undefined estimates stay undefined.
pub fn mse_fields(
    est: &Grid<Option<f64>>,
    reference: &Grid<f64>,
    kind: MetricKind,
    bin_width_ps: f64,
) -> Result<Grid<Option<f64>>> {
    if !est.same_shape(reference) {
        return Err(Error::DimensionMismatch(format!(
            "estimate {}x{} vs reference {}x{}",
            est.rows(),
            est.cols(),
            reference.rows(),
            reference.cols()
        )));
    }
    let convert = |v: f64| match kind {
        MetricKind::Distance => bin_to_distance(v, bin_width_ps),
        MetricKind::Intensity => v,
    };
    let data = est
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(e, &r)| e.map(|e| (convert(e) - convert(r)).powi(2)))
        .collect();
    Ok(Grid::from_vec(est.rows(), est.cols(), data))
}

/// `F(τ)`: fraction of all pixels whose error is defined and below `τ`.
/// Undefined pixels count in the denominator only.
pub fn mse_cdf(mse: &Grid<Option<f64>>, taus: &[f64]) -> Vec<f64> {
    let n = mse.len() as f64;
    let mut defined: Vec<f64> = mse.as_slice().iter().flatten().copied().collect();
    defined.sort_by(|a, b| a.total_cmp(b));
    taus.iter()
        .map(|&tau| defined.partition_point(|&e| e < tau) as f64 / n)
        .collect()
}

/// Fraction of pixels with a defined error.
pub fn defined_fraction<T>(field: &Grid<Option<T>>) -> f64 {
    field.as_slice().iter().filter(|v| v.is_some()).count() as f64 / field.len() as f64
}

/// Median of the defined entries, `None` if there are none.
pub fn median_defined(field: &Grid<Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = field.as_slice().iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// `n` log-spaced thresholds covering `[lo, hi]`.
pub fn log_tau_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn defined<T: Copy>(grid: &Grid<T>) -> Grid<Option<T>> {
    grid.map(|&v| Some(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn trace_with(samples: Vec<Vec<f64>>) -> ChainTrace {
        let mut t = ChainTrace::new(1, samples[0].len(), 3, samples.len(), 0, 1, true);
        for (n, s) in samples.into_iter().enumerate() {
            let cols = s.len();
            let fields = FieldSet {
                intensity: Grid::from_vec(1, cols, s.clone()),
                depth: Grid::filled(1, cols, 1),
                background: Grid::from_vec(1, cols, s),
                aux: Grid::filled(2, cols + 1, 1.0),
            };
            t.record(n + 1, &fields);
        }
        t
    }

    #[test]
    fn mmse_examples() {
        let t = trace_with(vec![vec![0.3, 2.0]]);
        assert_eq!(mmse_intensity(&t).unwrap().as_slice(), &[0.3, 2.0]);
        let t = trace_with(vec![vec![1.5]; 10]);
        assert!((mmse_intensity(&t).unwrap()[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((mmse_background(&t).unwrap()[(0, 0)] - 1.5).abs() < 1e-15);

        let gamma = Gamma::new(2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let t = trace_with((0..n).map(|_| vec![gamma.sample(&mut rng)]).collect());
        let sd = (2.0f64 * 9.0 / n as f64).sqrt();
        assert!((mmse_intensity(&t).unwrap()[(0, 0)] - 6.0).abs() < 3.0 * sd);
        assert!((mmse_background(&t).unwrap()[(0, 0)] - 6.0).abs() < 3.0 * sd);
    }

    #[test]
    fn empty_trace_errors() {
        let t = ChainTrace::new(1, 1, 3, 1, 0, 1, false);
        assert!(matches!(mmse_intensity(&t), Err(Error::EmptyTrace)));
        assert!(matches!(map_depth(&t), Err(Error::EmptyTrace)));
        assert!(mmse_background(&t).is_err());
    }

    #[test]
    fn mode_and_tie_break() {
        assert_eq!(histogram_mode(&[0, 5, 3]), 2);
        assert_eq!(histogram_mode(&[4, 4, 0]), 1);
    }

    #[test]
    fn mode_recovers_known_categorical() {
        use rand::Rng;
        let p = [0.2, 0.45, 0.35];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut hits = 0;
        for _ in 0..200 {
            let mut hist = [0u32; 3];
            for _ in 0..2000 {
                let u: f64 = rng.random();
                let k = if u < p[0] {
                    0
                } else if u < p[0] + p[1] {
                    1
                } else {
                    2
                };
                hist[k] += 1;
            }
            hits += (histogram_mode(&hist) == 2) as usize;
        }
        assert!(hits >= 195, "mode recovered {hits}/200");
    }

    #[test]
    fn mse_examples() {
        let r = Grid::filled(2, 2, 10.0);
        let zero = mse_fields(&defined(&r), &r, MetricKind::Distance, 16.0).unwrap();
        assert!(zero.as_slice().iter().all(|v| *v == Some(0.0)));

        let est = Grid::filled(1, 1, Some(11.0));
        let m = mse_fields(&est, &Grid::filled(1, 1, 10.0), MetricKind::Distance, 16.0).unwrap();
        assert!((m[(0, 0)].unwrap() - 5.76e-6).abs() < 1e-15);

        let m = mse_fields(
            &Grid::filled(1, 1, Some(0.5)),
            &Grid::filled(1, 1, 0.7),
            MetricKind::Intensity,
            16.0,
        )
        .unwrap();
        assert!((m[(0, 0)].unwrap() - 0.04).abs() < 1e-15);

        assert!(mse_fields(
            &Grid::filled(1, 2, Some(0.5)),
            &r,
            MetricKind::Intensity,
            16.0
        )
        .is_err());
    }

    #[test]
    fn cdf_examples() {
        let zeros = Grid::filled(3, 3, Some(0.0));
        assert_eq!(mse_cdf(&zeros, &[1e-9, 1.0]), vec![1.0, 1.0]);

        let half = Grid::from_vec(2, 2, vec![Some(0.1), None, Some(0.2), None]);
        let f = mse_cdf(&half, &[0.05, 0.15, 10.0]);
        assert_eq!(f, vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn cdf_matches_counting() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data: Vec<Option<f64>> = (0..400)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    None
                } else {
                    Some(rng.random::<f64>().powi(3))
                }
            })
            .collect();
        let g = Grid::from_vec(20, 20, data.clone());
        let taus = log_tau_grid(1e-4, 1.0, 50);
        let f = mse_cdf(&g, &taus);
        for (tau, fv) in taus.iter().zip(&f) {
            let count = data
                .iter()
                .filter(|v| matches!(v, Some(e) if e < tau))
                .count();
            assert_eq!(*fv, count as f64 / 400.0);
        }
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
    }
}
