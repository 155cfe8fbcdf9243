//! Negative spectrum of single bumps through the Birman–Schwinger operator.
//!
//! For `E < 0` let `A(E) = |v|^{1/2} R₀(E) |v|^{1/2}`, a positive operator that
//! increases with `E`. The sign-adjusted eigenvalues are `μ = sgn(v) · a_j(E)`
//! and `E` is an eigenvalue of `H₀ + v` exactly when some `μ_j(E) = -1`. For a
//! well this means `a_j(E) = 1`; for a scaled well `β v` it means
//! `β a_j(E) = 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::opcore::{assemble_kernel, NystromGrid};
use crate::potential::{split_value, Bump, SparsePotential};
use crate::specfun::{k0_k1, wavenumber_below_zero};
use crate::distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BsSettings {
    /// Voxel size of the single-bump grid.
    pub h: f64,
    pub subdivision: usize,
    /// Absolute energy tolerance of the bisection.
    pub energy_tol: f64,
    /// In `d = 2` the search stops at `E = -top_gap` (the kernel diverges at 0).
    pub top_gap: f64,
}

impl Default for BsSettings {
    fn default() -> Self {
        Self { h: 0.2, subdivision: 4, energy_tol: 1e-6, top_gap: 1e-8 }
    }
}

/// Grid over `supp v` centered at the origin.
pub fn bump_grid(dim: usize, v: &Bump, settings: &BsSettings) -> Result<Arc<NystromGrid>> {
    Ok(Arc::new(NystromGrid::for_bump(dim, v, settings.h, settings.subdivision)?))
}

/// `A(E)` in the weighted basis (real symmetric).
pub fn bs_matrix(g: &NystromGrid, energy: f64) -> Result<DMatrix<f64>> {
    if !(energy < 0.0) && !(energy == 0.0 && g.dim == 3) {
        return Err(ScatterError::Domain(format!("Birman-Schwinger energy must be negative, got {energy}")));
    }
    let abs_root: Vec<f64> = g.values.iter().map(|&v| split_value(v).0).collect();
    let m = assemble_kernel(g, wavenumber_below_zero(energy), &abs_root, &abs_root);
    let n = m.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re)))
}

fn sign_of(g: &NystromGrid) -> f64 {
    if g.values.iter().any(|&v| v < 0.0) {
        -1.0
    } else {
        1.0
    }
}

/// Eigenvalues of `A(E)`, descending.
fn a_eigenvalues(g: &NystromGrid, energy: f64) -> Result<Vec<f64>> {
    let mut ev: Vec<f64> = bs_matrix(g, energy)?.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Sign-adjusted eigenvalues `μ_j(E)`, ascending.
pub fn bs_eigs(g: &NystromGrid, energy: f64) -> Result<Vec<f64>> {
    if g.values.iter().any(|&v| v > 0.0) && g.values.iter().any(|&v| v < 0.0) {
        return Err(ScatterError::Domain("Birman-Schwinger sign adjustment needs a single-signed bump".into()));
    }
    let s = sign_of(g);
    let mut mu: Vec<f64> = a_eigenvalues(g, energy)?.into_iter().map(|a| s * a).collect();
    mu.sort_by(|a, b| a.total_cmp(b));
    Ok(mu)
}

fn top_energy(dim: usize, settings: &BsSettings) -> f64 {
    if dim == 3 {
        0.0
    } else {
        -settings.top_gap
    }
}

/// Roots of `β a_j(E) = 1` on `(E_min, E_top)`, ascending.
fn scaled_spectrum(g: &NystromGrid, beta: f64, sup_norm: f64, settings: &BsSettings) -> Result<Vec<f64>> {
    if sign_of(g) > 0.0 || sup_norm == 0.0 || beta <= 0.0 {
        return Ok(Vec::new());
    }
    let e_min = -beta * sup_norm;
    let e_top = top_energy(g.dim, settings);
    if !(e_min < e_top) {
        return Ok(Vec::new());
    }
    let top = a_eigenvalues(g, e_top)?;
    let count = top.iter().filter(|&&a| beta * a > 1.0).count();
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let (mut lo, mut hi) = (e_min, e_top);
        if beta * a_eigenvalues(g, lo)?[j] >= 1.0 {
            return Err(ScatterError::EigenvalueLost(format!(
                "branch {j} is above threshold at the spectral lower bound {e_min}"
            )));
        }
        while hi - lo > settings.energy_tol {
            let mid = 0.5 * (lo + hi);
            if beta * a_eigenvalues(g, mid)?[j] > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

/// Negative eigenvalues of `H₀ + v`, ascending, by per-branch bisection.
pub fn discrete_spectrum(dim: usize, v: &Bump, settings: &BsSettings) -> Result<Vec<f64>> {
    if v.amplitude >= 0.0 {
        return Ok(Vec::new());
    }
    let g = bump_grid(dim, v, settings)?;
    scaled_spectrum(&g, 1.0, v.sup_norm(), settings)
}

/// Well depth at which the first bound state appears (`d = 3`).
///
/// `A(0)` is linear in the depth, so the threshold is `1 / a_max(0)` of the
/// unit-depth well.
pub fn bound_state_threshold(v: &Bump, settings: &BsSettings) -> Result<f64> {
    let unit = Bump { amplitude: -1.0, ..*v };
    let g = bump_grid(3, &unit, settings)?;
    let top = a_eigenvalues(&g, 0.0)?[0];
    Ok(1.0 / top)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpSpectrum {
    /// 1-based bump index.
    pub index: usize,
    pub amplitude: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// More than one point within the resolution.
    pub accumulation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub resolution: f64,
    pub per_bump: Vec<BumpSpectrum>,
    /// All eigenvalues of all retained bumps, sorted, with multiplicity.
    pub klaus_set_sample: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Length of the union of intervals of width `resolution` around the
    /// sample points: a heuristic for the measure of the set.
    pub cover_length: f64,
    pub identical_bumps: bool,
}

/// Union of the discrete spectra of the retained bumps.
pub fn klaus_set(p: &SparsePotential, resolution: f64, settings: &BsSettings) -> Result<SpectrumReport> {
    if !(resolution > 0.0) {
        return Err(ScatterError::Domain(format!("resolution must be positive, got {resolution}")));
    }
    let retained: Vec<usize> = p.retained().collect();
    // bit-identical bumps share one computation
    let mut unique: Vec<Bump> = Vec::new();
    for &n in &retained {
        if !unique.contains(&p.bumps()[n]) {
            unique.push(p.bumps()[n]);
        }
    }
    let spectra = unique
        .par_iter()
        .map(|b| discrete_spectrum(p.dim(), b, settings))
        .collect::<Result<Vec<_>>>()?;
    let per_bump: Vec<BumpSpectrum> = retained
        .iter()
        .map(|&n| {
            let b = p.bumps()[n];
            let k = unique.iter().position(|u| *u == b).expect("bump registered above");
            BumpSpectrum { index: n + 1, amplitude: b.amplitude, eigenvalues: spectra[k].clone() }
        })
        .collect();
    let mut sample: Vec<f64> = per_bump.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect();
    sample.sort_by(|a, b| a.total_cmp(b));
    let clusters = clusters_of(&sample, resolution);
    let cover_length = cover_length(&sample, resolution);
    Ok(SpectrumReport {
        resolution,
        per_bump,
        klaus_set_sample: sample,
        clusters,
        cover_length,
        identical_bumps: unique.len() <= 1,
    })
}

fn clusters_of(sorted: &[f64], resolution: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for &e in sorted {
        match out.last_mut() {
            Some(c) if e - c.hi <= resolution => {
                c.hi = e;
                c.count += 1;
                c.accumulation = true;
            }
            _ => out.push(Cluster { lo: e, hi: e, count: 1, accumulation: false }),
        }
    }
    out
}

/// Measure of `∪ [e - r/2, e + r/2]` over sorted points.
pub fn cover_length(sorted: &[f64], resolution: f64) -> f64 {
    let half = 0.5 * resolution;
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for &e in sorted {
        let (lo, hi) = (e - half, e + half);
        current = match current {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                total += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = current {
        total += b - a;
    }
    total
}

/// Ground-state energy of `H₀ + β v`.
pub fn ground_state(dim: usize, v: &Bump, beta: f64, settings: &BsSettings) -> Result<f64> {
    let g = bump_grid(dim, v, settings)?;
    ground_state_on(&g, beta, v.sup_norm(), settings)
}

fn ground_state_on(g: &NystromGrid, beta: f64, sup_norm: f64, settings: &BsSettings) -> Result<f64> {
    scaled_spectrum(g, beta, sup_norm, settings)?
        .first()
        .copied()
        .ok_or_else(|| ScatterError::EigenvalueLost(format!("no bound state at beta = {beta}")))
}

/// Scalings whose ground states hit rational targets inside a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaFamily {
    pub beta0: f64,
    /// `(E(1 + β₀), E(1 - β₀))`.
    pub window: (f64, f64),
    /// Rational target energies, ascending.
    pub targets: Vec<f64>,
    /// `β_n` with `E(β_n) = target_n`, sorted ascending.
    pub betas: Vec<f64>,
}

/// Reduced fractions `p/q` strictly inside `(lo, hi)`, by increasing denominator.
pub fn rational_targets(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut q: i64 = 1;
    while out.len() < count && q < 1_000_000 {
        let p_lo = (lo * q as f64).floor() as i64;
        let p_hi = (hi * q as f64).ceil() as i64;
        for p in p_lo..=p_hi {
            let x = p as f64 / q as f64;
            if x > lo && x < hi && gcd(p, q) == 1 {
                out.push(x);
                if out.len() == count {
                    break;
                }
            }
        }
        q += 1;
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// The scalings `β_n = E^{-1}(q_n)` for rational `q_n` in the window.
///
/// On the Birman–Schwinger side the inverse is explicit: the ground state of
/// `H₀ + β v` sits at `E` exactly when `β = 1 / a_max(E)`.
pub fn beta_family(dim: usize, v: &Bump, beta0: f64, count: usize, settings: &BsSettings) -> Result<BetaFamily> {
    if !(beta0 > 0.0 && beta0 < 1.0) {
        return Err(ScatterError::Domain(format!("beta0 must lie in (0, 1), got {beta0}")));
    }
    if v.amplitude >= 0.0 {
        return Err(ScatterError::Hypothesis("the scaled family needs a nonpositive bump".into()));
    }
    let g = bump_grid(dim, v, settings)?;
    let e_hi = ground_state_on(&g, 1.0 - beta0, v.sup_norm(), settings)?;
    let e_lo = ground_state_on(&g, 1.0 + beta0, v.sup_norm(), settings)?;
    let targets = rational_targets(e_lo, e_hi, count);
    let mut betas = targets
        .iter()
        .map(|&e| Ok(1.0 / a_eigenvalues(&g, e)?[0]))
        .collect::<Result<Vec<f64>>>()?;
    betas.sort_by(|a, b| a.total_cmp(b));
    Ok(BetaFamily { beta0, window: (e_lo, e_hi), targets, betas })
}

/// `d A / dE`: the kernel of `R₀(E)²` sandwiched by `|v|^{1/2}`.
fn bs_derivative_matrix(g: &NystromGrid, energy: f64) -> DMatrix<f64> {
    let kappa = (-energy).sqrt();
    let n = g.len();
    let root: Vec<f64> = g.values.iter().map(|&v| v.abs().sqrt()).collect();
    let sw: Vec<f64> = g.weights.iter().map(|w| w.sqrt()).collect();
    let kernel = |r: f64| -> f64 {
        if g.dim == 3 {
            (-kappa * r).exp() / (8.0 * PI * kappa)
        } else if r == 0.0 {
            1.0 / (4.0 * PI * kappa * kappa)
        } else {
            r * k0_k1(Complex64::from(kappa * r)).1.re / (4.0 * PI * kappa)
        }
    };
    DMatrix::from_fn(n, n, |i, j| {
        let r = if i == j { 0.0 } else { distance(&g.nodes[i], &g.nodes[j]) };
        root[i] * sw[i] * kernel(r) * root[j] * sw[j]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeynmanHellmann {
    pub betas: Vec<f64>,
    pub energies: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Central finite differences of `E(β)` at interior samples.
    pub fd_derivative: Vec<f64>,
    /// `⟨ψ, v ψ⟩ / ‖ψ‖²` from the eigenvector at the same samples.
    pub expectation_derivative: Vec<f64>,
    pub max_relative_mismatch: f64,
    pub max_second_derivative: f64,
}

/// Tracks the ground state of `H₀ + β v` across `[lo, hi]` and compares its
/// slope with the Feynman–Hellmann expectation value.
pub fn feynman_hellmann_check(
    dim: usize,
    v: &Bump,
    window: (f64, f64),
    samples: usize,
    settings: &BsSettings,
) -> Result<FeynmanHellmann> {
    if v.amplitude > 0.0 {
        return Err(ScatterError::Hypothesis("Feynman-Hellmann monotonicity needs a nonpositive bump".into()));
    }
    let (lo, hi) = window;
    if !(0.0 < lo && lo < hi) || samples < 3 {
        return Err(ScatterError::Domain("need 0 < lo < hi and at least 3 samples".into()));
    }
    let g = bump_grid(dim, v, settings)?;
    let betas: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    let e_floor = -hi * v.sup_norm();
    let energies = betas
        .par_iter()
        .map(|&b| {
            let e = ground_state_on(&g, b, v.sup_norm(), settings)?;
            if !(e > e_floor && e < 0.0) {
                return Err(ScatterError::EigenvalueLost(format!("E({b}) = {e} left the window")));
            }
            Ok(e)
        })
        .collect::<Result<Vec<f64>>>()?;
    let strictly_decreasing = energies.windows(2).all(|w| w[1] < w[0]);
    let step = betas[1] - betas[0];
    let mut fd = Vec::new();
    let mut fh = Vec::new();
    let mut second: f64 = 0.0;
    for i in 1..samples - 1 {
        fd.push((energies[i + 1] - energies[i - 1]) / (2.0 * step));
        second = second.max(((energies[i + 1] - 2.0 * energies[i] + energies[i - 1]) / (step * step)).abs());
        fh.push(expectation_slope(&g, betas[i], energies[i])?);
    }
    let max_relative_mismatch = fd.iter().zip(&fh).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    Ok(FeynmanHellmann {
        betas,
        energies,
        strictly_decreasing,
        fd_derivative: fd,
        expectation_derivative: fh,
        max_relative_mismatch,
        max_second_derivative: second,
    })
}

/// `dE/dβ = ⟨ψ, vψ⟩/‖ψ‖² = -‖φ‖² / (β² ⟨φ, A'(E) φ⟩)` with `φ` the top eigenvector of `A(E)`.
fn expectation_slope(g: &NystromGrid, beta: f64, energy: f64) -> Result<f64> {
    let eig = SymmetricEigen::new(bs_matrix(g, energy)?);
    let top = eig.eigenvalues.imax();
    let phi: DVector<f64> = eig.eigenvectors.column(top).into_owned();
    let deriv = bs_derivative_matrix(g, energy);
    let denom = phi.dot(&(&deriv * &phi));
    Ok(-phi.norm_squared() / (beta * beta * denom))
}
