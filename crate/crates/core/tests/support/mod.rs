//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// `K_0(w)` for `-π/2 <= arg w <= 0` from
/// `K_0(w) = e^{-w} e^{-iθ/2} ∫_R e^{-ρv²} (2 + v² e^{-iθ})^{-1/2} dv`,
/// summed with the trapezoid rule.
pub fn k0_oracle(w: Complex64) -> Complex64 {
    let rho = w.norm();
    let theta = w.arg();
    let rot = Complex64::from_polar(1.0, -theta);
    let h = (0.05f64).min(PI / (50.0 * rho).sqrt());
    let vmax = (45.0 / rho).sqrt();
    let steps = (vmax / h).ceil() as usize;
    let f = |v: f64| (-rho * v * v).exp() / (Complex64::from(2.0) + rot * (v * v)).sqrt();
    let mut acc = f(0.0);
    for j in 1..=steps {
        acc += 2.0 * f(j as f64 * h);
    }
    (-w).exp() * Complex64::from_polar(1.0, -theta / 2.0) * acc * h
}

/// Principal `√z` with `Im ≥ 0`.
pub fn sqrt_upper(lambda: f64, eps: f64) -> Complex64 {
    let s = Complex64::new(lambda, eps).sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

pub fn helmholtz_d2(lambda: f64, eps: f64, r: f64) -> Complex64 {
    let kappa = -Complex64::i() * sqrt_upper(lambda, eps);
    k0_oracle(kappa * r) / (2.0 * PI)
}

pub fn helmholtz_d3(lambda: f64, eps: f64, r: f64) -> Complex64 {
    (Complex64::i() * sqrt_upper(lambda, eps) * r).exp() / (4.0 * PI * r)
}

/// `u(ρ) = ∫_{|y|<R} e^{ik|x-y|}/(4π|x-y|) dy` at `|x| = ρ < R`, from the
/// radial solution of `(Δ + k²)u = -χ_B`.
pub fn ball_volume_potential(k: Complex64, radius: f64, rho: f64) -> Complex64 {
    let s = (k * radius).sin();
    let c = (k * radius).cos();
    let e = (Complex64::i() * k * radius).exp();
    let r = radius;
    // -1/k² + a s/R = b e/R ;  a (k c/R - s/R²) = b e (ik/R - 1/R²)
    let m11 = s / r;
    let m12 = -e / r;
    let m21 = k * c / r - s / (r * r);
    let m22 = -e * (Complex64::i() * k / r - 1.0 / (r * r));
    let rhs1 = 1.0 / (k * k);
    let det = m11 * m22 - m12 * m21;
    let a = rhs1 * m22 / det;
    if rho == 0.0 {
        -1.0 / (k * k) + a * k
    } else {
        -1.0 / (k * k) + a * (k * rho).sin() / rho
    }
}

fn rk4(v: &dyn Fn(f64) -> f64, energy: f64, steps: usize) -> (f64, f64) {
    // u'' = (v(r) - E) u on [0, 1], u(0) = 0, u'(0) = 1
    let h = 1.0 / steps as f64;
    let rhs = |r: f64, y: [f64; 2]| [y[1], (v(r) - energy) * y[0]];
    let mut y = [0.0, 1.0];
    for n in 0..steps {
        let r = n as f64 * h;
        let k1 = rhs(r, y);
        let k2 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    (y[0], y[1])
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Depth `v₀` at which `-v₀ χ_{|x|<1}` acquires an s-wave bound state, by
/// shooting the zero-energy radial equation to `u'(1) = 0`.
pub fn shooting_threshold() -> f64 {
    bisect(1.0, 4.0, |v0| rk4(&|_| -v0, 0.0, 4000).1)
}

/// Ground state of `-v₀ χ_{|x|<1}` in d=3 by shooting and matching to `e^{-κr}`.
pub fn shooting_ground_state(v0: f64) -> f64 {
    let mismatch = |kappa: f64| {
        let (u, du) = rk4(&|_| -v0, -kappa * kappa, 4000);
        du + kappa * u
    };
    let kappa = bisect(1e-6, v0.sqrt() - 1e-9, mismatch);
    -kappa * kappa
}

/// `Σ_{n >= from} n^{-p}` summed to 10⁶ terms with an integral tail.
pub fn power_tail(p: f64, from: usize) -> f64 {
    let stop = 1_000_000usize;
    let direct: f64 = (from..stop).rev().map(|n| (n as f64).powf(-p)).sum();
    let m = stop as f64 - 0.5;
    direct + m.powf(1.0 - p) / (p - 1.0)
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}
