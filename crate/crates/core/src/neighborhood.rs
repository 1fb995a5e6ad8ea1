//! Lattice neighborhoods for the depth MRF and the bipartite intensity /
//! auxiliary graph of the gamma-MRF.

use crate::grid::Grid;

/// Depth MRF neighborhoods `V(i, j)` with a proper graph coloring.
#[derive(Debug, Clone)]
pub struct NeighborhoodSpec {
    rows: usize,
    cols: usize,
    order: u8,
    neighbors: Vec<Vec<usize>>,
    colors: Vec<u8>,
    classes: Vec<Vec<usize>>,
}

impl NeighborhoodSpec {
    /// Order 1 is the 4-pixel structure, order 2 the 8-pixel one. Neighbors
    /// outside the image are dropped.
    pub fn new(rows: usize, cols: usize, order: u8) -> Self {
        assert!(matches!(order, 1 | 2), "neighborhood order must be 1 or 2");
        let offsets: &[(isize, isize)] = if order == 1 {
            &[(-1, 0), (0, -1), (0, 1), (1, 0)]
        } else {
            &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ]
        };
        let mut neighbors = Vec::with_capacity(rows * cols);
        let mut colors = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let nb = offsets
                    .iter()
                    .filter_map(|&(di, dj)| {
                        let (ni, nj) = (i as isize + di, j as isize + dj);
                        (ni >= 0 && nj >= 0 && (ni as usize) < rows && (nj as usize) < cols)
                            .then(|| ni as usize * cols + nj as usize)
                    })
                    .collect();
                neighbors.push(nb);
                // Parity classes: 2 colors for the cross, 4 for the full 3x3 stencil.
                colors.push(if order == 1 {
                    ((i + j) % 2) as u8
                } else {
                    ((i % 2) * 2 + j % 2) as u8
                });
            }
        }
        let n_colors = colors.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut classes = vec![Vec::new(); n_colors];
        for (p, &c) in colors.iter().enumerate() {
            classes[c as usize].push(p);
        }
        Self {
            rows,
            cols,
            order,
            neighbors,
            colors,
            classes,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.neighbors[p]
    }

    pub fn color(&self, p: usize) -> u8 {
        self.colors[p]
    }

    /// Pixel indices grouped by color, in sweep order.
    pub fn color_classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn n_colors(&self) -> usize {
        self.classes.len()
    }

    /// `Σ_{q ∈ V(p)} |t - t_q|` for every candidate `t ∈ {1..n_bins}`;
    /// entry `t - 1` holds candidate `t`.
    pub fn neighbor_cost(&self, depth: &[u32], p: usize, n_bins: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), n_bins);
        out.iter_mut().for_each(|x| *x = 0.0);
        for &q in &self.neighbors[p] {
            let tq = depth[q] as i64;
            for (k, x) in out.iter_mut().enumerate() {
                *x += ((k as i64 + 1) - tq).abs() as f64;
            }
        }
    }
}

/// Total-variation cost `φ(T)` summed over ordered neighbor pairs (each
/// unordered pair contributes twice).
pub fn tv_cost(depth: &Grid<u32>, nb: &NeighborhoodSpec) -> f64 {
    let d = depth.as_slice();
    let mut total: u64 = 0;
    for p in 0..d.len() {
        for &q in nb.neighbors(p) {
            total += (d[p] as i64 - d[q] as i64).unsigned_abs();
        }
    }
    total as f64
}

/// Harmonic mean `4 / Σ γ^{-1}` of the four auxiliary neighbors of an intensity site.
#[inline]
pub fn alpha_weight(gamma_nbrs: &[f64; 4]) -> f64 {
    4.0 / gamma_nbrs.iter().map(|g| g.recip()).sum::<f64>()
}

/// Arithmetic mean of the four intensity neighbors of an auxiliary site.
#[inline]
pub fn beta_weight(r_nbrs: &[f64; 4]) -> f64 {
    r_nbrs.iter().sum::<f64>() / 4.0
}

/// Bipartite edge set between intensity sites and auxiliary sites.
#[derive(Debug, Clone)]
pub struct GmrfEdges {
    rows: usize,
    cols: usize,
    r_pad: f64,
    r_to_aux: Vec<[usize; 4]>,
    aux_to_r: Vec<[Option<usize>; 4]>,
}

impl GmrfEdges {
    pub fn new(rows: usize, cols: usize, r_pad: f64) -> Self {
        let ac = cols + 1;
        let r_to_aux = (0..rows * cols)
            .map(|p| {
                let (i, j) = (p / cols, p % cols);
                [
                    i * ac + j,
                    (i + 1) * ac + j,
                    i * ac + j + 1,
                    (i + 1) * ac + j + 1,
                ]
            })
            .collect();
        let r_at = |i: isize, j: isize| -> Option<usize> {
            (i >= 0 && j >= 0 && (i as usize) < rows && (j as usize) < cols)
                .then(|| i as usize * cols + j as usize)
        };
        let aux_to_r = (0..(rows + 1) * ac)
            .map(|a| {
                let (p, q) = ((a / ac) as isize, (a % ac) as isize);
                [
                    r_at(p - 1, q - 1),
                    r_at(p - 1, q),
                    r_at(p, q - 1),
                    r_at(p, q),
                ]
            })
            .collect();
        Self {
            rows,
            cols,
            r_pad,
            r_to_aux,
            aux_to_r,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn r_pad(&self) -> f64 {
        self.r_pad
    }

    pub fn n_aux(&self) -> usize {
        self.aux_to_r.len()
    }

    pub fn aux_of(&self, p: usize) -> &[usize; 4] {
        &self.r_to_aux[p]
    }

    /// Intensity neighbors of auxiliary site `a`; `None` marks a padded site.
    pub fn intensity_of(&self, a: usize) -> &[Option<usize>; 4] {
        &self.aux_to_r[a]
    }

    pub fn alpha_at(&self, aux: &[f64], p: usize) -> f64 {
        let a = &self.r_to_aux[p];
        alpha_weight(&[aux[a[0]], aux[a[1]], aux[a[2]], aux[a[3]]])
    }

    pub fn beta_at(&self, intensity: &[f64], a: usize) -> f64 {
        let nb = &self.aux_to_r[a];
        let v = |k: usize| nb[k].map_or(self.r_pad, |p| intensity[p]);
        beta_weight(&[v(0), v(1), v(2), v(3)])
    }

    /// Auxiliary field initialized (or evaluated) at `β(R)`.
    pub fn beta_field(&self, intensity: &Grid<f64>) -> Grid<f64> {
        let data = (0..self.n_aux())
            .map(|a| self.beta_at(intensity.as_slice(), a))
            .collect();
        Grid::from_vec(self.rows + 1, self.cols + 1, data)
    }
}
