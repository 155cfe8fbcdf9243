//! Limiting absorption: the Fredholm relation `P(1 + F) = F`, rectangle scans,
//! boundary values and invertibility certificates.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::linalg::{one_norm, spectral_norm, top_singular_value, CMatrix, CVector};
use crate::opcore::{assemble_f, op_norm, MatrixKind, NystromGrid, OperatorMatrix};
use crate::potential::SparsePotential;
use crate::specfun::SpectralPoint;

/// Condition estimates above this are treated as singular.
pub const CONDITION_THRESHOLD: f64 = 1e12;

/// Default ε ladder of a scan (the boundary ε = 0 is always added per λ).
pub const DEFAULT_LADDER: [f64; 10] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.0025, 0.001];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRect {
    pub a: f64,
    pub b: f64,
    pub eps_max: f64,
    pub lambda_samples: usize,
    /// Strictly decreasing, within `(0, eps_max]`.
    pub eps_samples: Vec<f64>,
}

impl SpectralRect {
    pub fn new(a: f64, b: f64, lambda_samples: usize, eps_samples: Vec<f64>) -> Result<Self> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(ScatterError::Hypothesis(format!("need 0 < a < b < inf, got a = {a}, b = {b}")));
        }
        if lambda_samples == 0 {
            return Err(ScatterError::Domain("need at least one lambda sample".into()));
        }
        if eps_samples.is_empty() {
            return Err(ScatterError::Domain("need at least one epsilon sample".into()));
        }
        if eps_samples.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ScatterError::Domain("epsilon samples must be strictly decreasing".into()));
        }
        if !(eps_samples[0] <= 1.0 && *eps_samples.last().unwrap() > 0.0) {
            return Err(ScatterError::Domain("epsilon samples must lie in (0, 1]".into()));
        }
        Ok(Self { a, b, eps_max: 1.0, lambda_samples, eps_samples })
    }

    pub fn with_default_ladder(a: f64, b: f64, lambda_samples: usize) -> Result<Self> {
        Self::new(a, b, lambda_samples, DEFAULT_LADDER.to_vec())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        if self.lambda_samples == 1 {
            return vec![0.5 * (self.a + self.b)];
        }
        let m = (self.lambda_samples - 1) as f64;
        (0..self.lambda_samples).map(|i| self.a + (self.b - self.a) * i as f64 / m).collect()
    }
}

/// Solution of `P(1 + F) = F` on the grid.
#[derive(Debug, Clone)]
pub struct FredholmSolution {
    pub p: OperatorMatrix,
    /// `(1 + F)^{-1}` in the weighted basis.
    pub inverse: CMatrix,
    /// 1-norm condition number of `1 + F`.
    pub condition: f64,
    /// `‖P(1+F) - F‖ / max(1, ‖F‖)`.
    pub residual: f64,
    pub norm_f: f64,
}

fn identity_plus(f: &CMatrix) -> CMatrix {
    let mut a = f.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += 1.0;
    }
    a
}

fn invert_checked(f: &CMatrix) -> Result<(CMatrix, f64)> {
    let a = identity_plus(f);
    let inv = a.clone().try_inverse().ok_or(ScatterError::Singular {
        condition: f64::INFINITY,
        threshold: CONDITION_THRESHOLD,
    })?;
    let condition = one_norm(&a) * one_norm(&inv);
    if !(condition <= CONDITION_THRESHOLD) {
        return Err(ScatterError::Singular { condition, threshold: CONDITION_THRESHOLD });
    }
    Ok((inv, condition))
}

/// Solves `P(1 + F) = F` as `P = 1 - (1 + F)^{-1}`.
pub fn solve_fredholm(f: &OperatorMatrix) -> Result<FredholmSolution> {
    let (inv, condition) = invert_checked(&f.entries)?;
    let n = f.len();
    let mut p = -inv.clone();
    for i in 0..n {
        p[(i, i)] += 1.0;
    }
    let norm_f = op_norm(f);
    // P(1+F) - F = 1 - (1+F)^{-1}(1+F), probed by matrix-vector products
    let a = &f.entries;
    let a_adj = a.adjoint();
    let inv_adj = inv.adjoint();
    let apply = |x: &CVector| -> CVector {
        let y = a * x + x;
        x - &inv * y
    };
    let apply_adj = |x: &CVector| -> CVector {
        let y = &inv_adj * x;
        x - (&a_adj * &y + y)
    };
    let residual = top_singular_value(n, &apply, &apply_adj, 1e-6) / norm_f.max(1.0);
    Ok(FredholmSolution { p: f.with_entries(p, MatrixKind::P), inverse: inv, condition, residual, norm_f })
}

pub fn solve_p(f: &OperatorMatrix) -> Result<OperatorMatrix> {
    Ok(solve_fredholm(f)?.p)
}

/// `‖(1 + F)^{-1}‖`.
pub fn inverse_norm(f: &OperatorMatrix) -> Result<f64> {
    Ok(spectral_norm(&solve_fredholm(f)?.inverse))
}

/// `Σ_{k <= K} (-F)^k`.
pub fn neumann_partial_sum(f: &CMatrix, order: usize) -> CMatrix {
    let n = f.nrows();
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for _ in 0..order {
        term = -(f * &term);
        sum += &term;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeumannCheck {
    pub order: usize,
    pub norm_f: f64,
    /// `‖(1+F)^{-1} - Σ_{k<=K}(-F)^k‖`.
    pub error: f64,
    /// `‖F‖^{K+1} / (1 - ‖F‖)`.
    pub bound: f64,
}

pub fn neumann_check(f: &OperatorMatrix, order: usize) -> Result<NeumannCheck> {
    let norm_f = op_norm(f);
    if !(norm_f < 1.0) {
        return Err(ScatterError::Hypothesis(format!("Neumann series needs ||F|| < 1, got {norm_f}")));
    }
    let (inv, _) = invert_checked(&f.entries)?;
    let error = spectral_norm(&(inv - neumann_partial_sum(&f.entries, order)));
    let bound = norm_f.powi(order as i32 + 1) / (1.0 - norm_f);
    Ok(NeumannCheck { order, norm_f, error, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauchyEntry {
    pub epsilon: f64,
    /// `‖F(λ+iε) - F(λ+i0)‖`.
    pub gap: f64,
    /// Gap divided by `‖F(λ+i0)‖` (zero when the boundary operator vanishes).
    pub relative_gap: f64,
}

#[derive(Debug, Clone)]
pub struct BoundaryLimit {
    pub f_boundary: OperatorMatrix,
    pub table: Vec<CauchyEntry>,
    /// Strictly decreasing gaps (or all zero).
    pub monotone: bool,
    /// Least-squares slope of `log gap` against `log ε`.
    pub alpha: Option<f64>,
}

pub(crate) fn cauchy_table(boundary: &OperatorMatrix, ladder: &[(f64, &OperatorMatrix)]) -> (Vec<CauchyEntry>, bool, Option<f64>) {
    let nb = op_norm(boundary);
    let table: Vec<CauchyEntry> = ladder
        .iter()
        .map(|(eps, f)| {
            let gap = spectral_norm(&(&f.entries - &boundary.entries));
            CauchyEntry { epsilon: *eps, gap, relative_gap: if nb > 0.0 { gap / nb } else { 0.0 } }
        })
        .collect();
    let all_zero = table.iter().all(|e| e.gap == 0.0);
    let monotone = all_zero || table.windows(2).all(|w| w[1].gap < w[0].gap);
    let pts: Vec<(f64, f64)> =
        table.iter().filter(|e| e.gap > 0.0 && e.epsilon > 0.0).map(|e| (e.epsilon.ln(), e.gap.ln())).collect();
    let alpha = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    (table, monotone, alpha)
}

/// `F(λ + iε)` along a ladder compared with the directly assembled `F(λ + i0)`.
pub fn boundary_limit(p: &SparsePotential, g: &Arc<NystromGrid>, lambda: f64, ladder: &[f64]) -> Result<BoundaryLimit> {
    let f_boundary = assemble_f(p, g, SpectralPoint::new(lambda, 0.0)?)?;
    let mats = ladder
        .iter()
        .map(|&e| Ok((e, assemble_f(p, g, SpectralPoint::new(lambda, e)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(f64, &OperatorMatrix)> = mats.iter().map(|(e, m)| (*e, m)).collect();
    let (table, monotone, alpha) = cauchy_table(&f_boundary, &refs);
    Ok(BoundaryLimit { f_boundary, table, monotone, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRecord {
    pub lambda: f64,
    pub epsilon: f64,
    pub norm_f: f64,
    pub norm_p: f64,
    pub inv_norm: f64,
    pub residual: f64,
    pub cauchy_gap: f64,
    pub min_sv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedPoint {
    pub lambda: f64,
    pub epsilon: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCauchy {
    pub lambda: f64,
    pub boundary_norm: f64,
    pub monotone: bool,
    pub terminal_relative_gap: f64,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub points: usize,
    pub sup_norm_f: f64,
    pub sup_norm_p: f64,
    pub sup_inv_norm: f64,
    pub max_residual: f64,
    pub inf_min_sv: f64,
    pub max_terminal_relative_gap: f64,
    pub all_cauchy_monotone: bool,
    pub failures: Vec<FailedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub records: Vec<ScanRecord>,
    pub cauchy: Vec<LambdaCauchy>,
    pub summary: ScanSummary,
}

/// Supplies `F` at scan point (λ index, ε index); `None` is the boundary.
pub type MatrixSource<'a> = dyn Fn(usize, Option<usize>, SpectralPoint) -> Result<OperatorMatrix> + Sync + 'a;

pub fn rect_scan(p: &SparsePotential, g: &Arc<NystromGrid>, rect: &SpectralRect) -> Result<ScanReport> {
    let source = |_: usize, _: Option<usize>, z: SpectralPoint| assemble_f(p, g, z);
    rect_scan_with(rect, &source)
}

/// Scan with matrices from `source`; per-point solver failures are recorded, not fatal.
pub fn rect_scan_with(rect: &SpectralRect, source: &MatrixSource<'_>) -> Result<ScanReport> {
    let lambdas = rect.lambdas();
    let per_lambda: Vec<Result<(Vec<ScanRecord>, LambdaCauchy, Vec<FailedPoint>)>> = lambdas
        .par_iter()
        .enumerate()
        .map(|(li, &lambda)| scan_lambda(rect, source, li, lambda))
        .collect();
    let mut records = Vec::new();
    let mut cauchy = Vec::new();
    let mut failures = Vec::new();
    for item in per_lambda {
        let (r, c, f) = item?;
        records.extend(r);
        cauchy.push(c);
        failures.extend(f);
    }
    records.sort_by(|x, y| x.lambda.total_cmp(&y.lambda).then(y.epsilon.total_cmp(&x.epsilon)));
    let summary = summarize(&records, &cauchy, failures);
    Ok(ScanReport { records, cauchy, summary })
}

fn scan_lambda(
    rect: &SpectralRect,
    source: &MatrixSource<'_>,
    li: usize,
    lambda: f64,
) -> Result<(Vec<ScanRecord>, LambdaCauchy, Vec<FailedPoint>)> {
    let boundary = source(li, None, SpectralPoint::new(lambda, 0.0)?)?;
    let mats = rect
        .eps_samples
        .iter()
        .enumerate()
        .map(|(ei, &e)| Ok((e, source(li, Some(ei), SpectralPoint::new(lambda, e)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(f64, &OperatorMatrix)> = mats.iter().map(|(e, m)| (*e, m)).collect();
    let (table, monotone, alpha) = cauchy_table(&boundary, &refs);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((eps, f), entry) in mats.iter().zip(&table) {
        let norm_f = op_norm(f);
        match solve_fredholm(f) {
            Ok(sol) => {
                let inv_norm = spectral_norm(&sol.inverse);
                records.push(ScanRecord {
                    lambda,
                    epsilon: *eps,
                    norm_f,
                    norm_p: op_norm(&sol.p),
                    inv_norm,
                    residual: sol.residual,
                    cauchy_gap: entry.relative_gap,
                    min_sv: 1.0 / inv_norm,
                });
            }
            Err(e) => {
                failures.push(FailedPoint { lambda, epsilon: *eps, error: e.to_string() });
                records.push(ScanRecord {
                    lambda,
                    epsilon: *eps,
                    norm_f,
                    norm_p: f64::NAN,
                    inv_norm: f64::NAN,
                    residual: f64::NAN,
                    cauchy_gap: entry.relative_gap,
                    min_sv: f64::NAN,
                });
            }
        }
    }
    let lc = LambdaCauchy {
        lambda,
        boundary_norm: op_norm(&boundary),
        monotone,
        terminal_relative_gap: table.last().map_or(0.0, |e| e.relative_gap),
        alpha,
    };
    Ok((records, lc, failures))
}

fn summarize(records: &[ScanRecord], cauchy: &[LambdaCauchy], failures: Vec<FailedPoint>) -> ScanSummary {
    let fmax = |f: &dyn Fn(&ScanRecord) -> f64| records.iter().map(f).filter(|v| !v.is_nan()).fold(0.0, f64::max);
    ScanSummary {
        points: records.len(),
        sup_norm_f: fmax(&|r| r.norm_f),
        sup_norm_p: fmax(&|r| r.norm_p),
        sup_inv_norm: fmax(&|r| r.inv_norm),
        max_residual: fmax(&|r| r.residual),
        inf_min_sv: records.iter().map(|r| r.min_sv).filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min),
        max_terminal_relative_gap: cauchy.iter().map(|c| c.terminal_relative_gap).fold(0.0, f64::max),
        all_cauchy_monotone: cauchy.iter().all(|c| c.monotone),
        failures,
    }
}

/// Two-sided inverse of `1 + F_bnd` built from `(1 + F_eps)^{-1}`.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// `‖(F_bnd - F_eps)(1 + F_eps)^{-1}‖`.
    pub r1: f64,
    /// `‖(1 + F_eps)^{-1}(F_bnd - F_eps)‖`.
    pub r2: f64,
    /// `(1 + F_eps)^{-1}(1 + R₁)^{-1}`.
    pub inverse: CMatrix,
    /// `‖B(1 + R₁)^{-1} - (1 + R₂)^{-1}B‖` with `B = (1 + F_eps)^{-1}`.
    pub agreement: f64,
}

pub fn approx_inverse_certificate(f_eps: &OperatorMatrix, f_bnd: &OperatorMatrix) -> Result<Certificate> {
    if f_eps.len() != f_bnd.len() {
        return Err(ScatterError::Domain("certificate needs matrices on the same grid".into()));
    }
    let (b, _) = invert_checked(&f_eps.entries)?;
    let delta = &f_bnd.entries - &f_eps.entries;
    let r1m = &delta * &b;
    let r2m = &b * &delta;
    let r1 = spectral_norm(&r1m);
    let r2 = spectral_norm(&r2m);
    if !(r1 < 1.0 && r2 < 1.0) {
        return Err(ScatterError::CertificateFailure { r1, r2 });
    }
    let (inv1, _) = invert_checked(&r1m)?;
    let (inv2, _) = invert_checked(&r2m)?;
    let right = &b * inv1;
    let left = inv2 * &b;
    let agreement = spectral_norm(&(&right - &left));
    Ok(Certificate { r1, r2, inverse: right, agreement })
}
