//! Nyström discretization of `F(z) = |V|^{1/2} R₀(z) V^{1/2}` and its relatives.
//!
//! Matrices are stored in the weight-symmetrized basis
//! `A_ij = a_i k(x_i, x_j) b_j √(w_i w_j)`, which is similar to the plain
//! Nyström matrix `a_i k_ij b_j w_j` and whose Euclidean norms approximate
//! `L²` operator norms. Diagonal entries carry the integral of the kernel over
//! the node's own cell.

mod dump;
mod grid;

pub use dump::{read_dump, write_dump};
pub use grid::NystromGrid;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::linalg::{spectral_norm, CMatrix};
use crate::potential::{split_value, SparsePotential};
use crate::specfun::{kernel_value, KernelEnvelope, SpectralPoint};
use crate::distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    F,
    P,
    BS,
    Custom,
}

impl MatrixKind {
    pub(crate) fn tag(self) -> u8 {
        match self {
            MatrixKind::F => 0,
            MatrixKind::P => 1,
            MatrixKind::BS => 2,
            MatrixKind::Custom => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => MatrixKind::F,
            1 => MatrixKind::P,
            2 => MatrixKind::BS,
            3 => MatrixKind::Custom,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub grid: Arc<NystromGrid>,
    pub z: Complex64,
    pub kind: MatrixKind,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, grid: Arc<NystromGrid>, z: Complex64, kind: MatrixKind) -> Result<Self> {
        if !entries.is_square() || entries.nrows() != grid.len() {
            return Err(ScatterError::Domain(format!(
                "matrix of shape {:?} does not match a grid of {} nodes",
                entries.shape(),
                grid.len()
            )));
        }
        Ok(Self { entries, grid, z, kind })
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    /// Plain Nyström entries `a_i k_ij b_j w_j`.
    pub fn nystrom(&self) -> CMatrix {
        let w = &self.grid.weights;
        CMatrix::from_fn(self.len(), self.len(), |i, j| self.entries[(i, j)] * (w[j] / w[i]).sqrt())
    }

    /// Maps samples `φ(x_i)` to weighted coordinates `√w_i φ(x_i)`.
    pub fn to_weighted(&self, samples: &[Complex64]) -> Vec<Complex64> {
        samples.iter().zip(&self.grid.weights).map(|(s, w)| s * w.sqrt()).collect()
    }

    pub fn with_entries(&self, entries: CMatrix, kind: MatrixKind) -> Self {
        Self { entries, grid: Arc::clone(&self.grid), z: self.z, kind }
    }
}

/// Kernel matrix `row_i k(|x_i - x_j|) col_j √(w_i w_j)` for wavenumber `k`.
pub(crate) fn assemble_kernel(grid: &NystromGrid, k: Complex64, row: &[f64], col: &[f64]) -> CMatrix {
    let n = grid.len();
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let mut data = vec![Complex64::from(0.0); n * n];
    // column-major storage; the kernel is symmetric so column j is computed like a row
    data.par_chunks_mut(n).enumerate().for_each(|(j, column)| {
        if col[j] == 0.0 {
            return;
        }
        let xj = &grid.nodes[j];
        let cj = col[j] * sw[j];
        for (i, entry) in column.iter_mut().enumerate() {
            if row[i] == 0.0 {
                continue;
            }
            let kij = if i == j {
                grid.self_integral(i, k) / grid.weights[i]
            } else {
                // cell average of a solution of (Δ + k²)u = 0, symmetrized over the pair
                let spread = 0.5 * (grid.spread[i] + grid.spread[j]);
                kernel_value(grid.dim, k, distance(&grid.nodes[i], xj)) * (1.0 - k * k * spread)
            };
            *entry = kij * (row[i] * sw[i] * cj);
        }
    });
    CMatrix::from_vec(n, n, data)
}

pub(crate) fn root_factors(grid: &NystromGrid) -> (Vec<f64>, Vec<f64>) {
    grid.values.iter().map(|&v| split_value(v)).unzip()
}

fn check_grid(p: &SparsePotential, g: &NystromGrid) -> Result<()> {
    if p.dim() != g.dim {
        return Err(ScatterError::Domain(format!("potential has d = {} but grid has d = {}", p.dim(), g.dim)));
    }
    if !g.matches(p) {
        return Err(ScatterError::Domain("grid was built from a different potential".into()));
    }
    Ok(())
}

/// `F(z)` on the grid; the boundary value `ε = 0` is assembled directly.
pub fn assemble_f(p: &SparsePotential, g: &Arc<NystromGrid>, z: SpectralPoint) -> Result<OperatorMatrix> {
    check_grid(p, g)?;
    let z = SpectralPoint::new(z.lambda, z.epsilon)?;
    let (abs_root, signed_root) = root_factors(g);
    let m = assemble_kernel(g, z.sqrt_z(), &abs_root, &signed_root);
    OperatorMatrix::new(m, Arc::clone(g), z.z(), MatrixKind::F)
}

/// Partition into same-bump (`diag`) and cross-bump (`offdiag`) entries.
pub fn block_split(m: &OperatorMatrix) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if m.kind != MatrixKind::F {
        return Err(ScatterError::Domain("block_split expects an F matrix".into()));
    }
    let b = &m.grid.bump_index;
    let n = m.len();
    let zero = Complex64::from(0.0);
    let diag = CMatrix::from_fn(n, n, |i, j| if b[i] == b[j] { m.entries[(i, j)] } else { zero });
    let off = CMatrix::from_fn(n, n, |i, j| if b[i] != b[j] { m.entries[(i, j)] } else { zero });
    Ok((m.with_entries(diag, MatrixKind::F), m.with_entries(off, MatrixKind::F)))
}

/// Largest singular value of the weighted matrix.
pub fn op_norm(m: &OperatorMatrix) -> f64 {
    spectral_norm(&m.entries)
}

/// Weighted Frobenius norm `(Σ |k_ij|² w_i w_j)^{1/2}`.
pub fn hs_norm(m: &OperatorMatrix) -> f64 {
    m.entries.norm()
}

/// `Σ_{n >= from} n^{1-(d-1)γ}`, summed directly to `from + 2000` with an
/// Euler–Maclaurin remainder.
pub fn offdiag_tail(dim: usize, gamma: f64, from: usize) -> Result<f64> {
    let p = (dim as f64 - 1.0) * gamma - 1.0;
    if !(p > 1.0) || from == 0 {
        return Err(ScatterError::Domain(format!("tail diverges or starts at 0 (d = {dim}, gamma = {gamma})")));
    }
    let stop = from + 2000;
    let direct: f64 = (from..stop).rev().map(|n| (n as f64).powf(-p)).sum();
    let l = stop as f64;
    Ok(direct + l.powf(1.0 - p) / (p - 1.0) + 0.5 * l.powf(-p) + p * l.powf(-p - 1.0) / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffDiagBound {
    pub hs_norm: f64,
    pub constant: f64,
    /// Tail sum from `N + 1`, the smallest larger index of a retained pair.
    pub tail: f64,
    pub bound: f64,
}

/// A priori bound `‖F_off‖_HS <= K (Σ_{n>=N+1} n^{1-(d-1)γ})^{1/2}`.
///
/// `‖F_nm‖²_HS <= m_n m_m sup|k|²` with bump masses `m_n = Σ |V_i| w_i` and
/// `sup|k|` from the envelope at `|x_n - x_m| - 2R`. `K²` is twice the largest
/// value of `m_n m_m env² · max(n,m)^{(d-1)γ}` over retained pairs.
pub fn offdiag_hs_bound(p: &SparsePotential, f: &OperatorMatrix, env: &KernelEnvelope) -> Result<OffDiagBound> {
    check_grid(p, &f.grid)?;
    if env.dim != p.dim() || !(env.a <= f.z.re && f.z.re <= env.b) {
        return Err(ScatterError::Domain("envelope does not cover this matrix".into()));
    }
    let (_, off) = block_split(f)?;
    let g = &f.grid;
    let mut mass = vec![0.0; p.bumps().len()];
    for i in 0..g.len() {
        mass[g.bump_index[i]] += g.values[i].abs() * g.weights[i];
    }
    let two_r = 2.0 * p.support_radius();
    let power = (p.dim() as f64 - 1.0) * p.gamma();
    let window: Vec<usize> = p.retained().collect();
    let mut k2: f64 = 0.0;
    for (a, &n) in window.iter().enumerate() {
        for &m in &window[a + 1..] {
            let gap = distance(&p.centers()[n], &p.centers()[m]) - two_r;
            if !(gap > 0.0) {
                return Err(ScatterError::Hypothesis(format!("bumps {} and {} overlap", n + 1, m + 1)));
            }
            let e = env.bound(gap)?;
            k2 = k2.max(2.0 * mass[n] * mass[m] * e * e * ((m + 1) as f64).powf(power));
        }
    }
    let tail = offdiag_tail(p.dim(), p.gamma(), p.trunc_n() + 1)?;
    let constant = k2.sqrt();
    Ok(OffDiagBound { hs_norm: hs_norm(&off), constant, tail, bound: constant * tail.sqrt() })
}

/// Imaginary part `(G - G^H)/(2i)` of `G = V^{1/2} R₀(z) V^{1/2}` on the grid.
pub fn imaginary_part(p: &SparsePotential, g: &Arc<NystromGrid>, z: SpectralPoint) -> Result<DMatrix<f64>> {
    check_grid(p, g)?;
    let z = SpectralPoint::new(z.lambda, z.epsilon)?;
    let (_, signed_root) = root_factors(g);
    let gm = assemble_kernel(g, z.sqrt_z(), &signed_root, &signed_root);
    let n = gm.nrows();
    // (G - G^H)/(2i) is Hermitian; G is complex symmetric so it is real: Im G
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let d = gm[(i, j)] - gm[(j, i)].conj();
        0.5 * d.im
    }))
}

/// Most negative eigenvalue of the imaginary part of `V^{1/2} R₀(z) V^{1/2}`.
pub fn positivity_check(p: &SparsePotential, g: &Arc<NystromGrid>, z: SpectralPoint) -> Result<f64> {
    if !(z.epsilon > 0.0) {
        return Err(ScatterError::Domain("positivity check needs epsilon > 0".into()));
    }
    let im = imaginary_part(p, g, z)?;
    Ok(im.symmetric_eigenvalues().min())
}
