//! Closed-form conditionals of intensity and background as finite mixtures
//! of gamma distributions.
//!
//! Given a pixel histogram with total count `O`, the product of Poisson
//! terms `Π_t (g_t x + a_t)^{y_t}` is a degree-`O` polynomial with
//! nonnegative coefficients `ε_k`. Multiplying by a gamma prior and the
//! `exp(-x v)` factor yields a mixture of `O + 1` gamma densities sharing one
//! rate. Coefficients and weights are carried in the log domain because
//! `ε_k` and `Γ(α0 + k)` overflow `f64` for a few hundred photons.
//!
//! Cost is `O(O²)` per pixel.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::irf::ImpulseResponse;
use crate::math::{ln_binomial, ln_gamma, log_sum_exp, normalize_log_weights};

/// `Σ_k w_k Gamma(x; base_shape + k, rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMixture {
    log_weights: Vec<f64>,
    base_shape: f64,
    rate: f64,
}

impl GammaMixture {
    /// Builds a mixture from unnormalized log-weights.
    pub fn from_log_weights(mut log_weights: Vec<f64>, base_shape: f64, rate: f64) -> Self {
        assert!(
            !log_weights.is_empty(),
            "mixture needs at least one component"
        );
        assert!(
            base_shape > 0.0 && rate > 0.0,
            "gamma shape and rate must be positive"
        );
        normalize_log_weights(&mut log_weights);
        Self {
            log_weights,
            base_shape,
            rate,
        }
    }

    pub fn single(shape: f64, rate: f64) -> Self {
        Self::from_log_weights(vec![0.0], shape, rate)
    }

    pub fn n_components(&self) -> usize {
        self.log_weights.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn base_shape(&self) -> f64 {
        self.base_shape
    }

    pub fn shape(&self, k: usize) -> f64 {
        self.base_shape + k as f64
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.log_weights
            .iter()
            .enumerate()
            .map(|(k, w)| w.exp() * self.shape(k) / self.rate)
            .sum()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (lx, lrate) = (x.ln(), self.rate.ln());
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .enumerate()
            .map(|(k, &lw)| {
                let a = self.shape(k);
                lw + a * lrate - ln_gamma(a) + (a - 1.0) * lx - self.rate * x
            })
            .collect();
        log_sum_exp(&terms)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Gumbel-max component selection followed by a gamma draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.sample_component(rng);
        let gamma = Gamma::new(self.shape(k), 1.0 / self.rate).expect("valid gamma parameters");
        gamma.sample(rng)
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.log_weights.len() == 1 {
            return 0;
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &lw) in self.log_weights.iter().enumerate() {
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let u: f64 = rng.sample(Open01);
            let g = -(-u.ln()).ln();
            if lw + g > best.1 {
                best = (k, lw + g);
            }
        }
        best.0
    }
}

/// Log-coefficients of `Π_i (s_i x + a_i)^{y_i}` given `ln s_i`, `ln a_i`.
/// Zero slopes or intercepts (`-inf` logs) are allowed; `0^0 = 1`.
pub fn log_poly_coeffs_general(
    ln_slopes: &[f64],
    ln_intercepts: &[f64],
    counts: &[u32],
) -> Vec<f64> {
    assert_eq!(ln_slopes.len(), counts.len());
    assert_eq!(ln_intercepts.len(), counts.len());
    let mut coeffs = vec![0.0];
    let mut factor = Vec::new();
    let mut next = Vec::new();
    for ((&ls, &la), &y) in ln_slopes.iter().zip(ln_intercepts).zip(counts) {
        if y == 0 {
            continue;
        }
        factor.clear();
        factor.extend(
            (0..=y).map(|j| ln_binomial(y, j) + zero_pow_log(j, ls) + zero_pow_log(y - j, la)),
        );
        convolve_log(&coeffs, &factor, &mut next);
        std::mem::swap(&mut coeffs, &mut next);
    }
    coeffs
}

/// Log-coefficients `ln ε_k` of `P(r) = Π_t (g_t r + b)^{y_t}`, `k = 0..O`.
pub fn poly_log_coeffs(g_vals: &[f64], b: f64, counts: &[u32]) -> Vec<f64> {
    let ls: Vec<f64> = g_vals.iter().map(|g| g.ln()).collect();
    let la = vec![b.ln(); g_vals.len()];
    log_poly_coeffs_general(&ls, &la, counts)
}

#[inline]
fn zero_pow_log(power: u32, ln_base: f64) -> f64 {
    if power == 0 {
        0.0
    } else {
        power as f64 * ln_base
    }
}

/// Log-domain polynomial product: `out[k] = ln Σ_j exp(a[k - j] + f[j])`.
fn convolve_log(a: &[f64], f: &[f64], out: &mut Vec<f64>) {
    let n = a.len() + f.len() - 1;
    out.clear();
    out.resize(n, f64::NEG_INFINITY);
    for (k, slot) in out.iter_mut().enumerate() {
        let j_lo = k.saturating_sub(a.len() - 1);
        let j_hi = k.min(f.len() - 1);
        let mut m = f64::NEG_INFINITY;
        for j in j_lo..=j_hi {
            m = m.max(a[k - j] + f[j]);
        }
        if m == f64::NEG_INFINITY {
            continue;
        }
        let mut s = 0.0;
        for j in j_lo..=j_hi {
            s += (a[k - j] + f[j] - m).exp();
        }
        *slot = m + s.ln();
    }
}

/// Mixture weights `ln ε_k + ln Γ(a + k) - (a + k) ln rate`, normalized.
fn mixture_from_coeffs(log_eps: Vec<f64>, base_shape: f64, rate: f64) -> GammaMixture {
    let lr = rate.ln();
    let lw = log_eps
        .into_iter()
        .enumerate()
        .map(|(k, le)| {
            let a = base_shape + k as f64;
            le + ln_gamma(a) - a * lr
        })
        .collect();
    GammaMixture::from_log_weights(lw, base_shape, rate)
}

/// Conditional of `r` given its nonzero bins, depth, background and the
/// gamma-MRF weight `α_w = α_{i,j}(Γ)`.
pub fn intensity_conditional_sparse(
    sparse: &[(usize, u32)],
    t_pos: usize,
    b: f64,
    alpha0: f64,
    alpha_w: f64,
    g0: &ImpulseResponse,
) -> GammaMixture {
    let rate = alpha0 / alpha_w + g0.shift_mass(t_pos);
    let total: u32 = sparse.iter().map(|e| e.1).sum();
    if total == 0 || b == 0.0 {
        return GammaMixture::single(alpha0 + total as f64, rate);
    }
    let ls: Vec<f64> = sparse
        .iter()
        .map(|&(t, _)| g0.response(t, t_pos).ln())
        .collect();
    let la = vec![b.ln(); sparse.len()];
    let counts: Vec<u32> = sparse.iter().map(|e| e.1).collect();
    mixture_from_coeffs(log_poly_coeffs_general(&ls, &la, &counts), alpha0, rate)
}

/// Conditional of `b` given its nonzero bins, depth, intensity and the
/// Gamma(η, ν) prior.
pub fn background_conditional_sparse(
    sparse: &[(usize, u32)],
    t_pos: usize,
    r: f64,
    eta: f64,
    nu: f64,
    g0: &ImpulseResponse,
) -> GammaMixture {
    let rate = 1.0 / nu + g0.n_bins() as f64;
    let total: u32 = sparse.iter().map(|e| e.1).sum();
    if total == 0 || r == 0.0 {
        return GammaMixture::single(eta + total as f64, rate);
    }
    let ls = vec![0.0; sparse.len()];
    let la: Vec<f64> = sparse
        .iter()
        .map(|&(t, _)| (r * g0.response(t, t_pos)).ln())
        .collect();
    let counts: Vec<u32> = sparse.iter().map(|e| e.1).collect();
    mixture_from_coeffs(log_poly_coeffs_general(&ls, &la, &counts), eta, rate)
}

fn sparsify(hist: &[u32]) -> Vec<(usize, u32)> {
    hist.iter()
        .enumerate()
        .filter(|(_, &y)| y > 0)
        .map(|(k, &y)| (k + 1, y))
        .collect()
}

/// Intensity conditional from a full histogram (entry `t - 1` is bin `t`).
pub fn build_intensity_conditional(
    hist: &[u32],
    t_pos: usize,
    b: f64,
    alpha0: f64,
    alpha_w: f64,
    g0: &ImpulseResponse,
) -> GammaMixture {
    intensity_conditional_sparse(&sparsify(hist), t_pos, b, alpha0, alpha_w, g0)
}

/// Background conditional from a full histogram.
pub fn build_background_conditional(
    hist: &[u32],
    t_pos: usize,
    r: f64,
    eta: f64,
    nu: f64,
    g0: &ImpulseResponse,
) -> GammaMixture {
    background_conditional_sparse(&sparsify(hist), t_pos, r, eta, nu, g0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp_all(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x.exp()).collect()
    }

    #[test]
    fn linear_and_quadratic_factors() {
        let c = exp_all(&poly_log_coeffs(&[2.0], 3.0, &[1]));
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12);
        let c = exp_all(&poly_log_coeffs(&[2.0], 3.0, &[2]));
        for (got, want) in c.iter().zip([9.0, 12.0, 4.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_intercept_is_monomial() {
        let c = poly_log_coeffs(&[2.0, 0.5], 0.0, &[2, 1]);
        assert_eq!(c.len(), 4);
        assert!(c[..3].iter().all(|&x| x == f64::NEG_INFINITY));
        assert!((c[3].exp() - 4.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_branches() {
        let g0 = ImpulseResponse::from_measured(&[0.3, 1.0, 0.2], 1, 8, 1e-12).unwrap();
        let v = g0.shift_mass(4);
        let m = build_intensity_conditional(&[0; 8], 4, 0.2, 1.5, 2.0, &g0);
        assert_eq!(m.n_components(), 1);
        assert_eq!(m.shape(0), 1.5);
        assert!((m.rate() - (1.5 / 2.0 + v)).abs() < 1e-15);

        let m = build_intensity_conditional(&[0, 0, 1, 2, 0, 0, 0, 0], 4, 0.0, 1.5, 2.0, &g0);
        assert_eq!(m.n_components(), 1);
        assert_eq!(m.shape(0), 4.5);

        let m = build_background_conditional(&[0; 8], 4, 1.0, 1.0, 10.0, &g0);
        assert_eq!((m.n_components(), m.shape(0)), (1, 1.0));
        assert!((m.rate() - 8.1).abs() < 1e-12);
        let m = build_background_conditional(&[1, 0, 0, 2, 0, 0, 2, 0], 4, 0.0, 1.0, 10.0, &g0);
        assert_eq!((m.n_components(), m.shape(0)), (1, 6.0));
    }

    #[test]
    fn weights_are_normalized() {
        let g0 = ImpulseResponse::from_measured(&[0.3, 1.0, 0.2], 1, 8, 1e-12).unwrap();
        let m = build_intensity_conditional(&[1, 0, 3, 2, 0, 1, 0, 0], 3, 0.4, 2.0, 1.2, &g0);
        assert_eq!(m.n_components(), 8);
        assert!(log_sum_exp(m.log_weights()).abs() < 1e-12);
        for k in 1..m.n_components() {
            assert_eq!(m.shape(k) - m.shape(k - 1), 1.0);
        }
    }

    #[test]
    fn single_component_moments() {
        let mix = GammaMixture::single(3.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| mix.sample(&mut rng)).sum::<f64>() / n as f64;
        let sd = (3.0f64).sqrt() / 2.0 / (n as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn fair_component_selection() {
        let mix = GammaMixture::from_log_weights(vec![0.0, 0.0], 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| mix.sample_component(&mut rng) == 1)
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn mixture_mean_matches_samples() {
        let mix =
            GammaMixture::from_log_weights(vec![0.2f64.ln(), 0.5f64.ln(), 0.3f64.ln()], 1.5, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| mix.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expect: f64 = [0.2, 0.5, 0.3]
            .iter()
            .enumerate()
            .map(|(k, w)| w * (1.5 + k as f64) / 0.8)
            .sum();
        assert!((mix.mean() - expect).abs() < 1e-12);
        assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt());
    }
}
