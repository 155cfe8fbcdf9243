use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, ScatterError};
use crate::potential::{Bump, SparsePotential};
use crate::specfun::{kernel_value, regular_part_at_origin, singular_ball_integral};
use crate::{distance, Point};

/// Depth of the extra dyadic refinement used for the singular part of a self-cell.
const SINGULAR_REFINE_DEPTH: usize = 4;

/// Voxel quadrature over the retained supports.
///
/// Each retained bump gets its own lattice of side `h`, with one voxel
/// centered on the bump center. A voxel is kept when at least one of its
/// `s^d` subcell centers lies in the support ball; its node is the centroid of
/// those subcell centers and its weight their total volume.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NystromGrid {
    pub dim: usize,
    pub h: f64,
    pub subdivision: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// 0-based bump index of every node.
    pub bump_index: Vec<usize>,
    /// Cell average of the potential.
    pub values: Vec<f64>,
    /// `E|y - x_i|² / (2d)` over the cell; a full cube gives `h²/24`.
    pub spread: Vec<f64>,
    #[serde(skip)]
    self_cells: Vec<SelfCell>,
    #[serde(skip)]
    source: Vec<(usize, Bump, Point)>,
}

#[derive(Debug, Clone, PartialEq)]
struct SelfCell {
    sub_volume: f64,
    /// Distances from the node to the inside subcell centers.
    distances: Vec<f64>,
    /// `∫_cell k_sing(|x_i - y|) dy`, independent of the spectral parameter.
    singular_integral: f64,
}

impl NystromGrid {
    pub fn build(p: &SparsePotential, h: f64, subdivision: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(ScatterError::Domain(format!("grid spacing must be positive, got {h}")));
        }
        if subdivision < 2 {
            return Err(ScatterError::Domain(format!("self-cell subdivision must be at least 2, got {subdivision}")));
        }
        let mut grid = Self {
            dim: p.dim(),
            h,
            subdivision,
            nodes: Vec::new(),
            weights: Vec::new(),
            bump_index: Vec::new(),
            values: Vec::new(),
            spread: Vec::new(),
            self_cells: Vec::new(),
            source: Vec::new(),
        };
        for n in p.retained() {
            grid.add_bump(n, &p.bumps()[n], &p.centers()[n]);
        }
        if grid.nodes.is_empty() {
            return Err(ScatterError::Domain("grid has no nodes; refine h".into()));
        }
        Ok(grid)
    }

    /// Grid over a single bump centered at the origin.
    pub fn for_bump(dim: usize, bump: &Bump, h: f64, subdivision: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(ScatterError::Domain(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(h > 0.0) || subdivision < 2 {
            return Err(ScatterError::Domain(format!("invalid grid parameters h = {h}, s = {subdivision}")));
        }
        let mut grid = Self {
            dim,
            h,
            subdivision,
            nodes: Vec::new(),
            weights: Vec::new(),
            bump_index: Vec::new(),
            values: Vec::new(),
            spread: Vec::new(),
            self_cells: Vec::new(),
            source: Vec::new(),
        };
        grid.add_bump(0, bump, &[0.0; 3]);
        Ok(grid)
    }

    /// Whether the grid was built from the retained bumps of `p`.
    pub fn matches(&self, p: &SparsePotential) -> bool {
        self.dim == p.dim()
            && self.source.len() == p.retained().len()
            && self.source.iter().zip(p.retained()).all(|((i, b, c), n)| *i == n && *b == p.bumps()[n] && *c == p.centers()[n])
    }

    fn add_bump(&mut self, index: usize, bump: &Bump, center: &Point) {
        self.source.push((index, *bump, *center));
        let d = self.dim;
        let h = self.h;
        let s = self.subdivision;
        let a = h / s as f64;
        let sub_volume = a.powi(d as i32);
        let reach = (bump.radius / h).ceil() as i64 + 1;
        let zrange = if d == 3 { -reach..=reach } else { 0..=0 };
        let subs_per_axis: Vec<f64> = (0..s).map(|j| -0.5 * h + a * (j as f64 + 0.5)).collect();
        for ix in -reach..=reach {
            for iy in -reach..=reach {
                for iz in zrange.clone() {
                    let vc = [
                        center[0] + h * ix as f64,
                        center[1] + h * iy as f64,
                        center[2] + h * iz as f64,
                    ];
                    let mut inside: Vec<Point> = Vec::new();
                    let mut vsum = 0.0;
                    for &ox in &subs_per_axis {
                        for &oy in &subs_per_axis {
                            let zs: &[f64] = if d == 3 { &subs_per_axis } else { &[0.0] };
                            for &oz in zs {
                                let q = [vc[0] + ox, vc[1] + oy, vc[2] + oz];
                                let r = distance(&q, center);
                                if r <= bump.radius {
                                    inside.push(q);
                                    vsum += bump.value(r);
                                }
                            }
                        }
                    }
                    if inside.is_empty() {
                        continue;
                    }
                    let count = inside.len() as f64;
                    let mut node = [0.0; 3];
                    for q in &inside {
                        for k in 0..3 {
                            node[k] += q[k] / count;
                        }
                    }
                    let distances: Vec<f64> = inside.iter().map(|q| distance(q, &node)).collect();
                    let msd = distances.iter().map(|r| r * r).sum::<f64>() / count + d as f64 * a * a / 12.0;
                    self.spread.push(msd / (2 * d) as f64);
                    let singular_integral =
                        inside.iter().map(|q| singular_cube_integral(d, &node, q, a, SINGULAR_REFINE_DEPTH)).sum();
                    self.nodes.push(node);
                    self.weights.push(count * sub_volume);
                    self.bump_index.push(index);
                    self.values.push(vsum / count);
                    self.self_cells.push(SelfCell { sub_volume, distances, singular_integral });
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of the weights of the nodes of bump `n` (0-based).
    pub fn bump_volume(&self, n: usize) -> f64 {
        self.bump_index.iter().zip(&self.weights).filter(|(b, _)| **b == n).map(|(_, w)| w).sum()
    }

    /// `∫_{cell i} k(|x_i - y|) dy` for wavenumber `k`.
    pub(crate) fn self_integral(&self, i: usize, k: Complex64) -> Complex64 {
        let cell = &self.self_cells[i];
        let d = self.dim;
        let regular_zero = regular_part_at_origin(d, k);
        let mut acc = Complex64::from(0.0);
        for &r in &cell.distances {
            if r < 1e-12 * self.h {
                acc += regular_zero;
            } else {
                acc += kernel_value(d, k, r) - singular_kernel(d, r);
            }
        }
        acc * cell.sub_volume + cell.singular_integral
    }
}

fn singular_kernel(dim: usize, r: f64) -> f64 {
    if dim == 3 {
        1.0 / (4.0 * std::f64::consts::PI * r)
    } else {
        -r.ln() / (2.0 * std::f64::consts::PI)
    }
}

/// `∫ k_sing(|x - y|) dy` over the cube of side `a` centered at `c`.
fn singular_cube_integral(dim: usize, x: &Point, c: &Point, a: f64, depth: usize) -> f64 {
    let r = distance(x, c);
    let near = r < 1.5 * a * (dim as f64).sqrt();
    if !near || depth == 0 {
        if r < 0.5 * a {
            let vol = a.powi(dim as i32);
            let rho = if dim == 3 {
                (3.0 * vol / (4.0 * std::f64::consts::PI)).cbrt()
            } else {
                (vol / std::f64::consts::PI).sqrt()
            };
            return singular_ball_integral(dim, rho);
        }
        return a.powi(dim as i32) * singular_kernel(dim, r);
    }
    let half = 0.5 * a;
    let offsets = [-0.25 * a, 0.25 * a];
    let zoffs: &[f64] = if dim == 3 { &offsets } else { &[0.0] };
    let mut acc = 0.0;
    for &ox in &offsets {
        for &oy in &offsets {
            for &oz in zoffs {
                let cc = [c[0] + ox, c[1] + oy, c[2] + oz];
                acc += singular_cube_integral(dim, x, &cc, half, depth - 1);
            }
        }
    }
    acc
}
