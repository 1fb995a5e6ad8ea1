//! Independent oracles shared by the acceptance suite.

#![allow(dead_code)]

use tcspc_core::irf::ImpulseResponse;

pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Ordered-pair total variation, neighbors by Chebyshev (order 2) or
/// Manhattan (order 1) distance one.
pub fn tv_ordered(depth: &[u32], rows: usize, cols: usize, order: u8) -> f64 {
    let mut s = 0.0;
    for p in 0..rows * cols {
        for q in 0..rows * cols {
            let (di, dj) = (
                (p / cols) as i64 - (q / cols) as i64,
                (p % cols) as i64 - (q % cols) as i64,
            );
            let near = match order {
                1 => di.abs() + dj.abs() == 1,
                _ => p != q && di.abs() <= 1 && dj.abs() <= 1,
            };
            if near {
                s += (depth[p] as f64 - depth[q] as f64).abs();
            }
        }
    }
    s
}

/// All `bins^n` depth configurations (1-based), first pixel most significant.
pub fn depth_states(n: usize, bins: usize) -> Vec<Vec<u32>> {
    let total = bins.pow(n as u32);
    (0..total)
        .map(|mut s| {
            let mut v = vec![0u32; n];
            for k in (0..n).rev() {
                v[k] = (s % bins) as u32 + 1;
                s /= bins;
            }
            v
        })
        .collect()
}

pub fn state_index(depth: &[u32], bins: usize) -> usize {
    depth.iter().fold(0, |acc, &t| acc * bins + t as usize - 1)
}

/// Exact `ln Z(T) = ln ∫ p(Y | T, R, B) f(R | α0) f(B) dR dB` (up to a
/// constant) for every depth configuration of a 2x2 image.
///
/// `Γ` is integrated analytically, `R` by a tensor-product trapezoid rule
/// on a log grid and each `b` by a 1-D log-grid rule.
pub struct TinyPosterior {
    pub bins: usize,
    pub log_z: Vec<f64>,
    pub phi: Vec<f64>,
}

pub struct TinyModel<'a> {
    pub counts: [&'a [u32]; 4],
    pub g0: &'a ImpulseResponse,
    pub alpha0: f64,
    pub eta: f64,
    pub nu: f64,
    pub r_pad: f64,
    pub order: u8,
}

impl TinyModel<'_> {
    /// `ln ∫ Π_t Pois(y_t | r g(t - τ) + b) Gamma(b | η, ν) db`, constants dropped.
    fn log_lik_b(&self, hist: &[u32], tau: usize, r: f64) -> f64 {
        let (lo, hi, n) = ((1e-10f64).ln(), (60.0f64).ln(), 1200);
        let h = (hi - lo) / (n - 1) as f64;
        let terms: Vec<f64> = (0..n)
            .map(|k| {
                let v = lo + h * k as f64;
                let b = v.exp();
                let mut s = (self.eta - 1.0) * v - b / self.nu + v;
                for (i, &y) in hist.iter().enumerate() {
                    let lam = r * self.g0.response(i + 1, tau) + b;
                    s += y as f64 * lam.ln() - lam;
                }
                s
            })
            .collect();
        log_sum_exp(&terms)
    }

    pub fn solve(&self, grid: usize) -> TinyPosterior {
        self.solve_on(grid, 1e-7, 50.0)
    }

    /// As [`solve`](Self::solve) with the intensity grid restricted to `[r_lo, r_hi]`.
    pub fn solve_on(&self, grid: usize, r_lo: f64, r_hi: f64) -> TinyPosterior {
        let bins = self.g0.n_bins();
        let (lo, hi) = (r_lo.ln(), r_hi.ln());
        let h = (hi - lo) / (grid - 1) as f64;
        let u: Vec<f64> = (0..grid).map(|k| lo + h * k as f64).collect();
        let r: Vec<f64> = u.iter().map(|x| x.exp()).collect();

        // Pixel tables L_p[k][t], scaled per pixel.
        let tables: Vec<Vec<f64>> = (0..4)
            .map(|p| {
                let mut l = vec![0.0; grid * bins];
                for k in 0..grid {
                    for t in 0..bins {
                        l[k * bins + t] = self.log_lik_b(self.counts[p], t + 1, r[k]);
                    }
                }
                let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                l.iter().map(|x| (x - m).exp()).collect()
            })
            .collect();

        // Aux sites of a 2x2 image on the 3x3 lattice and their pixels.
        let mut aux: Vec<Vec<usize>> = Vec::new();
        for ai in 0..3usize {
            for aj in 0..3usize {
                let mut px = Vec::new();
                for i in 0..2usize {
                    for j in 0..2usize {
                        if (i == ai || i + 1 == ai) && (j == aj || j + 1 == aj) {
                            px.push(i * 2 + j);
                        }
                    }
                }
                aux.push(px);
            }
        }

        // E[k] = Π_p r^{α0} Π_a β_a^{-α0} over the 4-D grid.
        let n4 = grid.pow(4);
        let mut e = vec![0.0; n4];
        let mut kk = [0usize; 4];
        for (idx, slot) in e.iter_mut().enumerate() {
            let mut s = idx;
            for d in (0..4).rev() {
                kk[d] = s % grid;
                s /= grid;
            }
            let mut le = self.alpha0 * kk.iter().map(|&k| u[k]).sum::<f64>();
            for px in &aux {
                let sum: f64 =
                    px.iter().map(|&p| r[kk[p]]).sum::<f64>() + self.r_pad * (4 - px.len()) as f64;
                le -= self.alpha0 * (sum / 4.0).ln();
            }
            *slot = le;
        }
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        e.iter_mut().for_each(|x| *x = (*x - m).exp());

        // Contract pixel 3, then 2, 1, 0. Layout after each step:
        // [k_0..k_{d-1}, t_d..t_3].
        let mut cur = e;
        for d in (0..4).rev() {
            let (lead, trail) = (grid.pow(d as u32), bins.pow(3 - d as u32));
            let tab = &tables[d];
            let mut next = vec![0.0; lead * bins * trail];
            for a in 0..lead {
                for k in 0..grid {
                    let src = &cur[(a * grid + k) * trail..(a * grid + k + 1) * trail];
                    for t in 0..bins {
                        let w = tab[k * bins + t];
                        let dst = &mut next[(a * bins + t) * trail..(a * bins + t + 1) * trail];
                        for (o, s) in dst.iter_mut().zip(src) {
                            *o += w * s;
                        }
                    }
                }
            }
            cur = next;
        }
        let states = depth_states(4, bins);
        let phi = states
            .iter()
            .map(|s| tv_ordered(s, 2, 2, self.order))
            .collect();
        TinyPosterior {
            bins,
            log_z: cur.iter().map(|z| z.ln()).collect(),
            phi,
        }
    }
}

impl TinyPosterior {
    pub fn log_joint(&self, c: f64) -> Vec<f64> {
        self.log_z
            .iter()
            .zip(&self.phi)
            .map(|(z, f)| z - c * f)
            .collect()
    }

    /// Per-pixel depth marginals for a fixed `c`.
    pub fn marginals(&self, c: f64) -> Vec<Vec<f64>> {
        let lj = self.log_joint(c);
        let norm = log_sum_exp(&lj);
        let mut m = vec![vec![0.0; self.bins]; 4];
        for (s, state) in depth_states(4, self.bins).iter().enumerate() {
            let w = (lj[s] - norm).exp();
            for p in 0..4 {
                m[p][state[p] as usize - 1] += w;
            }
        }
        m
    }

    /// `ln f(Y | c)` up to a constant independent of `c`.
    pub fn log_marginal_likelihood(&self, c: f64) -> f64 {
        let prior: Vec<f64> = self.phi.iter().map(|f| -c * f).collect();
        log_sum_exp(&self.log_joint(c)) - log_sum_exp(&prior)
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson statistic and degrees of freedom. Cells are merged in order of
/// increasing expected count until every group expects at least 5.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let n = observed.iter().sum::<u64>() as f64;
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for &i in &idx {
        o += observed[i] as f64;
        e += probs[i] * n;
        if e >= 5.0 {
            groups.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => groups.push((o, e)),
        }
    }
    let stat = groups.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, groups.len().saturating_sub(1))
}
