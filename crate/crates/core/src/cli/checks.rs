//! Pass/fail tables for `kernel-check` and `selftest`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use crate::error::Result;
use crate::lap::{neumann_check, solve_fredholm};
use crate::linalg::CMatrix;
use crate::opcore::{MatrixKind, NystromGrid, OperatorMatrix};
use crate::potential::{Bump, Profile, SparsePotential};
use crate::specfun::{
    free_kernel, free_kernel_bessel_form, macdonald_k, KernelEnvelope, KernelSpec, SpectralPoint,
};
use crate::spectra::{bound_state_threshold, BsSettings};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn row_le(check: &str, value: f64, threshold: f64) -> CheckRow {
    CheckRow { check: check.into(), value, threshold, pass: value <= threshold }
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn panels(f: &dyn Fn(f64) -> Complex64, lo: f64, hi: f64, count: usize, rule: &[(f64, f64)]) -> Complex64 {
    let width = (hi - lo) / count as f64;
    let mut acc = Complex64::from(0.0);
    for p in 0..count {
        let mid = lo + width * (p as f64 + 0.5);
        for &(x, w) in rule {
            acc += f(mid + 0.5 * width * x) * (0.5 * width * w);
        }
    }
    acc
}

/// `K_0(w)` for `-π/2 <= arg w <= 0` from `∫ e^{-w cosh t} dt` on a rotated contour.
pub fn k0_contour_quadrature(w: Complex64) -> Complex64 {
    let rule = gauss_legendre(24);
    let theta = w.arg();
    let phi = PI / 4.0 - theta / 2.0;
    let first = panels(&|s| (-w * s.cos()).exp(), 0.0, phi, 8, &rule) * Complex64::i();
    let rho = w.norm();
    let decay = (theta.cos() * phi.cos()).max(-theta.sin() * phi.sin());
    let upper = (45.0 / (rho * decay)).asinh().max(1.0) + 1.0;
    let tail = |u: f64| {
        let c = Complex64::new(u.cosh() * phi.cos(), u.sinh() * phi.sin());
        (-w * c).exp()
    };
    let count = ((upper / 0.1).ceil() as usize).max(8);
    first + panels(&tail, 0.0, upper, count, &rule)
}

fn sample_point(rng: &mut ChaCha8Rng, a: f64, b: f64) -> SpectralPoint {
    let lambda = rng.random_range(a..=b);
    let eps = if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-6.0..=0.0)) };
    SpectralPoint { lambda, epsilon: eps }
}

/// Kernel oracles, envelope dominance and branch continuity.
pub fn kernel_checks(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let kc = &cfg.kernel_check;
    let (a, b) = cfg.rect.as_ref().map_or((1.0, 4.0), |r| (r.a, r.b));
    let radius = cfg.potential.support_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(kc.seed);
    let mut rows = Vec::new();

    let k0 = macdonald_k(0.0, Complex64::from(1.0))?;
    rows.push(row_le("k0_at_1_reference", (k0.re - 0.421_024_438_240_708_34).abs() / 0.421, 1e-12));
    let half = macdonald_k(0.5, Complex64::from(2.0))?;
    rows.push(row_le("k_half_closed_form", (half.re - (PI / 4.0).sqrt() * (-2.0f64).exp()).abs(), 1e-14));

    let d2 = KernelSpec::new(2)?;
    let d3 = KernelSpec::new(3)?;
    let mut worst2: f64 = 0.0;
    let mut worst3: f64 = 0.0;
    for _ in 0..kc.oracle_samples {
        let z = sample_point(&mut rng, a, b);
        let r = 10f64.powf(rng.random_range(-3.0..=1.5));
        let w = -Complex64::i() * z.sqrt_z() * r;
        let oracle = k0_contour_quadrature(w) / (2.0 * PI);
        let k = free_kernel(d2, z, r)?;
        worst2 = worst2.max((k - oracle).norm() / oracle.norm());
        let closed = free_kernel(d3, z, r)?;
        let bessel = free_kernel_bessel_form(d3, z, r)?;
        worst3 = worst3.max((closed - bessel).norm() / closed.norm());
    }
    rows.push(row_le("d2_kernel_vs_contour_quadrature", worst2, 1e-10));
    rows.push(row_le("d3_closed_form_vs_bessel_form", worst3, 1e-10));

    for ks in [d2, d3] {
        if ks.dim == 2 && radius >= 1.0 {
            continue;
        }
        let mut env = KernelEnvelope::calibrate_with(ks, radius, a, b, 33, 17, 80)?;
        env.constant *= kc.envelope_scale;
        let mut violations = 0usize;
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..kc.envelope_samples {
            let z = sample_point(&mut rng, a, b);
            let r = 2.0 * radius * 10f64.powf(rng.random_range(-4.0..=3.0));
            let ratio = free_kernel(ks, z, r)?.norm() / env.bound(r)?;
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 1.0 {
                violations += 1;
            }
        }
        rows.push(CheckRow {
            check: format!("d{}_envelope_dominance", ks.dim),
            value: worst_ratio,
            threshold: 1.0,
            pass: violations == 0,
        });
    }

    let mut continuity_ok = true;
    let mut worst_terminal: f64 = 0.0;
    for _ in 0..50 {
        let lambda = rng.random_range(a..=b);
        let r = 10f64.powf(rng.random_range(-2.0..=1.0));
        for ks in [d2, d3] {
            let limit = free_kernel(ks, SpectralPoint::new(lambda, 0.0)?, r)?;
            let gaps = [1e-2, 1e-4, 1e-6]
                .iter()
                .map(|&e| Ok((free_kernel(ks, SpectralPoint::new(lambda, e)?, r)? - limit).norm()))
                .collect::<Result<Vec<f64>>>()?;
            continuity_ok &= gaps[1] < gaps[0] && gaps[2] < gaps[1];
            worst_terminal = worst_terminal.max(gaps[2] / limit.norm());
        }
    }
    rows.push(CheckRow {
        check: "branch_continuity".into(),
        value: worst_terminal,
        threshold: 1e-4,
        pass: continuity_ok && worst_terminal <= 1e-4,
    });
    Ok(rows)
}

/// Kernel checks plus small solver and spectrum sanity runs.
pub fn selftest_checks(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let mut rows = kernel_checks(cfg)?;

    let b = Bump::new(Profile::ConstantBall, 1.0, 0.5)?;
    let p = SparsePotential::new(3, 0.5, vec![b], vec![[0.0; 3]], 1.0, 2.0)?;
    let g = std::sync::Arc::new(NystromGrid::build(&p, 0.2, 2)?);
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.kernel_check.seed);
    let m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * (2.0 / n as f64)
    });
    let f = OperatorMatrix::new(m, g, Complex64::new(1.0, 0.5), MatrixKind::Custom)?;
    let sol = solve_fredholm(&f)?;
    rows.push(row_le("fredholm_identity_residual", sol.residual, 1e-10));

    let weak = f.with_entries(&f.entries * Complex64::from(0.25), MatrixKind::Custom);
    let nc = neumann_check(&weak, 6)?;
    rows.push(CheckRow {
        check: "neumann_remainder_bound".into(),
        value: nc.error,
        threshold: nc.bound,
        pass: nc.error <= nc.bound * (1.0 + 1e-9),
    });

    let settings = BsSettings { h: 0.25, subdivision: 4, ..Default::default() };
    let threshold = bound_state_threshold(&Bump::new(Profile::ConstantBall, -1.0, 1.0)?, &settings)?;
    let target = PI * PI / 4.0;
    rows.push(row_le("ball_well_threshold_relative_error", (threshold - target).abs() / target, 0.05));
    Ok(rows)
}
