//! Free-resolvent kernels of `-Δ` in two and three dimensions.
//!
//! The kernel of `(-Δ - z)^{-1}` is radial and, with `κ = -i√z` and
//! `ν = (d-2)/2`, reads
//!
//! ```text
//! k(r) = (2π)^{-d/2} (κ/r)^ν K_ν(κ r)
//! ```
//!
//! where `√z` is the root with nonnegative imaginary part. For `d = 3` this
//! collapses to `e^{i√z r} / (4π r)` and for `d = 2` to
//! `K_0(-i√z r) / (2π) = (i/4) H_0^{(1)}(√z r)`.
//!
//! The Macdonald functions `K_0`, `K_1` are evaluated in three regimes:
//! ascending series for `|w| <= 2`, Temme's continued fraction (Steed's
//! algorithm) for `2 < |w| <= 25`, and the Hankel asymptotic expansion beyond.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Result, ScatterError};
use crate::lap::SpectralRect;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_RADIUS: f64 = 2.0;
const ASYMPTOTIC_RADIUS: f64 = 25.0;

/// A spectral parameter `z = λ + iε` in the closed rectangle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralPoint {
    pub lambda: f64,
    pub epsilon: f64,
}

impl SpectralPoint {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(ScatterError::Domain(format!("energy must be positive, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ScatterError::Domain(format!(
                "imaginary part must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(Self { lambda, epsilon })
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.lambda, self.epsilon)
    }

    /// Principal square root; `Im √z > 0` whenever `ε > 0`, and `√λ` on the axis.
    pub fn sqrt_z(&self) -> Complex64 {
        if self.epsilon == 0.0 {
            Complex64::new(self.lambda.sqrt(), 0.0)
        } else {
            self.z().sqrt()
        }
    }
}

/// Wavenumber `√E = i√|E|` for a negative energy.
pub fn wavenumber_below_zero(energy: f64) -> Complex64 {
    debug_assert!(energy <= 0.0);
    Complex64::new(0.0, (-energy).sqrt())
}

/// Space dimension and kernel normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct KernelSpec {
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(ScatterError::Domain(format!("dimension must be at least 2, got {dim}")));
        }
        Ok(Self { dim })
    }

    /// Bessel order `(d-2)/2` of the kernel.
    pub fn order(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }

    /// `(2π)^{-d/2}`: the constant in front of the `κ`-form of the kernel.
    pub fn normalization(&self) -> f64 {
        (2.0 * PI).powf(-(self.dim as f64) / 2.0)
    }

    fn check_evaluable(&self) -> Result<()> {
        match self.dim {
            2 | 3 => Ok(()),
            d => Err(ScatterError::Domain(format!("kernel evaluation implemented for d = 2, 3 only (got {d})"))),
        }
    }
}

/// Modified Bessel function of the second kind `K_ν(w)` for `ν ∈ {0, 1/2, 1}`.
///
/// The argument must satisfy `Re w >= 0`, `w != 0`. Arguments on the negative
/// imaginary axis are reached through `K_ν(-iw) = (iπ/2) e^{iνπ/2} H_ν^{(1)}(w)`.
pub fn macdonald_k(nu: f64, w: Complex64) -> Result<Complex64> {
    if w.norm() == 0.0 {
        return Err(ScatterError::Domain("K_nu is singular at w = 0".into()));
    }
    if !(w.re >= -1e-14 * w.norm()) || !w.re.is_finite() || !w.im.is_finite() {
        return Err(ScatterError::Domain(format!("K_nu requires Re(w) >= 0, got {w}")));
    }
    if nu == 0.5 || nu == -0.5 {
        return Ok(half_order_k(w));
    }
    if nu == 0.0 {
        return Ok(k0_k1(w).0);
    }
    if nu == 1.0 || nu == -1.0 {
        return Ok(k0_k1(w).1);
    }
    Err(ScatterError::Domain(format!("K_nu implemented for nu in {{0, 1/2, 1}}, got {nu}")))
}

fn half_order_k(w: Complex64) -> Complex64 {
    (Complex64::from(FRAC_PI_2) / w).sqrt() * (-w).exp()
}

/// `(K_0(w), K_1(w))` for `Re w >= 0`, `w != 0`.
pub(crate) fn k0_k1(w: Complex64) -> (Complex64, Complex64) {
    let modulus = w.norm();
    if modulus <= SERIES_RADIUS {
        k0_k1_series(w)
    } else if modulus <= ASYMPTOTIC_RADIUS {
        k0_k1_continued_fraction(w)
    } else {
        (k_asymptotic(0.0, w), k_asymptotic(1.0, w))
    }
}

fn k0_k1_series(w: Complex64) -> (Complex64, Complex64) {
    let t = w * w * 0.25;
    let log_half = (w * 0.5).ln();

    // term_k = t^k / (k!)^2 and its K_1 companion t^k / (k! (k+1)!)
    let mut term0 = Complex64::from(1.0);
    let mut term1 = Complex64::from(1.0);
    let mut i0 = term0;
    let mut i1_sum = term1;
    let mut harmonic = 0.0;
    let mut k0_tail = Complex64::from(0.0);
    let mut k1_tail = Complex64::from(-2.0 * EULER_GAMMA + 1.0);
    for k in 1..64 {
        let kf = k as f64;
        term0 *= t / (kf * kf);
        term1 *= t / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        i0 += term0;
        i1_sum += term1;
        k0_tail += term0 * harmonic;
        // ψ(k+1) + ψ(k+2) = H_k + H_{k+1} - 2γ
        let psi_pair = 2.0 * harmonic + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA;
        let incr = term1 * psi_pair;
        k1_tail += incr;
        if term0.norm() * harmonic < 1e-18 * k0_tail.norm().max(i0.norm())
            && incr.norm() < 1e-18 * k1_tail.norm()
        {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + k0_tail;
    let i1 = w * 0.5 * i1_sum;
    let k1 = w.inv() + log_half * i1 - w * 0.25 * k1_tail;
    (k0, k1)
}

/// Temme's CF2 evaluated with Steed's algorithm, order `μ = 0`.
fn k0_k1_continued_fraction(x: Complex64) -> (Complex64, Complex64) {
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;
    let one = Complex64::from(1.0);
    let a1 = 0.25;
    let mut b = (one + x) * 2.0;
    let mut d = b.inv();
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::from(0.0);
    let mut q2 = one;
    let mut q = Complex64::from(a1);
    let mut c = a1;
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += qnew * c;
        b += 2.0;
        d = (b + d * a).inv();
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < EPS * s.norm() {
            break;
        }
    }
    h *= a1;
    let k0 = (Complex64::from(FRAC_PI_2) / x).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn k_asymptotic(nu: f64, w: Complex64) -> Complex64 {
    let mu = 4.0 * nu * nu;
    let mut term = Complex64::from(1.0);
    let mut sum = term;
    let mut previous = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64) / w;
        let size = term.norm();
        if size > previous {
            break;
        }
        sum += term;
        previous = size;
        if size < 1e-17 * sum.norm() {
            break;
        }
    }
    (Complex64::from(FRAC_PI_2) / w).sqrt() * (-w).exp() * sum
}

/// Kernel of `(-Δ - k²)^{-1}` at distance `r > 0`, `Im k >= 0`.
///
/// Hot path for matrix assembly: no argument validation.
#[inline]
pub(crate) fn kernel_value(dim: usize, k: Complex64, r: f64) -> Complex64 {
    match dim {
        3 => (Complex64::i() * k * r).exp() / (4.0 * PI * r),
        2 => k0_k1(-Complex64::i() * k * r).0 / (2.0 * PI),
        _ => unreachable!("kernel dimension validated upstream"),
    }
}

/// `k(r) - k_sing(r)` at `r = 0`, where `k_sing = 1/(4πr)` (d=3) or `-ln r / (2π)` (d=2).
pub(crate) fn regular_part_at_origin(dim: usize, k: Complex64) -> Complex64 {
    match dim {
        3 => Complex64::i() * k / (4.0 * PI),
        2 => -((-Complex64::i() * k * 0.5).ln() + EULER_GAMMA) / (2.0 * PI),
        _ => unreachable!("kernel dimension validated upstream"),
    }
}

/// Integral of `k_sing` over the ball of radius `rho` centered at the singularity.
pub(crate) fn singular_ball_integral(dim: usize, rho: f64) -> f64 {
    match dim {
        3 => 0.5 * rho * rho,
        2 => 0.25 * rho * rho - 0.5 * rho * rho * rho.ln(),
        _ => unreachable!("kernel dimension validated upstream"),
    }
}

/// Free-resolvent kernel `k_{0,z}(r)` for `d ∈ {2, 3}`.
pub fn free_kernel(ks: KernelSpec, z: SpectralPoint, r: f64) -> Result<Complex64> {
    ks.check_evaluable()?;
    if !(r > 0.0) {
        return Err(ScatterError::Domain(format!("kernel distance must be positive, got {r}")));
    }
    Ok(kernel_value(ks.dim, z.sqrt_z(), r))
}

/// The same kernel through the general Macdonald form `(2π)^{-d/2} (κ/r)^ν K_ν(κ r)`.
pub fn free_kernel_bessel_form(ks: KernelSpec, z: SpectralPoint, r: f64) -> Result<Complex64> {
    ks.check_evaluable()?;
    if !(r > 0.0) {
        return Err(ScatterError::Domain(format!("kernel distance must be positive, got {r}")));
    }
    let kappa = -Complex64::i() * z.sqrt_z();
    let nu = ks.order();
    let prefactor = if nu == 0.0 { Complex64::from(1.0) } else { (kappa / r).powf(nu) };
    Ok(prefactor * macdonald_k(nu, kappa * r)? * ks.normalization())
}

/// Pointwise bound `|k_{0,z}(r)| <= C · shape(r)` over the closed rectangle.
///
/// Shapes: `ln(2/r)` (d=2) or `r^{2-d}` (d>=3) for `r <= 2R`, and
/// `r^{-(d-1)/2}` beyond. The constant is calibrated by dense sampling with a
/// 10% margin.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KernelEnvelope {
    pub dim: usize,
    pub support_radius: f64,
    pub a: f64,
    pub b: f64,
    pub constant: f64,
}

impl KernelEnvelope {
    pub const SAFETY_MARGIN: f64 = 1.1;

    pub fn calibrate(ks: KernelSpec, support_radius: f64, rect: &SpectralRect) -> Result<Self> {
        Self::calibrate_with(ks, support_radius, rect.a, rect.b, 33, 17, 80)
    }

    /// Calibration on an explicit sampling lattice of `n_lambda × n_eps × 2 n_r` points.
    pub fn calibrate_with(
        ks: KernelSpec,
        support_radius: f64,
        a: f64,
        b: f64,
        n_lambda: usize,
        n_eps: usize,
        n_r: usize,
    ) -> Result<Self> {
        ks.check_evaluable()?;
        if !(support_radius > 0.0) {
            return Err(ScatterError::Domain(format!("support radius must be positive, got {support_radius}")));
        }
        if ks.dim == 2 && support_radius >= 1.0 {
            return Err(ScatterError::Domain(
                "the logarithmic near-field shape ln(2/r) needs support radius R < 1 in d = 2".into(),
            ));
        }
        if !(0.0 < a && a < b) {
            return Err(ScatterError::Domain(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        let mut env = Self { dim: ks.dim, support_radius, a, b, constant: 1.0 };
        let two_r = 2.0 * support_radius;
        let mut radii = log_space(1e-6 * two_r, two_r, n_r);
        radii.extend(log_space(two_r * (1.0 + 1e-9), two_r * 1e4, n_r));
        let mut eps = vec![0.0];
        eps.extend(log_space(1e-4, 1.0, n_eps.saturating_sub(1)));
        let mut worst: f64 = 0.0;
        for i in 0..n_lambda {
            let lambda = a + (b - a) * i as f64 / (n_lambda.max(2) - 1) as f64;
            for &e in &eps {
                let k = SpectralPoint::new(lambda, e)?.sqrt_z();
                for &r in &radii {
                    let ratio = kernel_value(ks.dim, k, r).norm() / env.shape(r);
                    worst = worst.max(ratio);
                }
            }
        }
        env.constant = Self::SAFETY_MARGIN * worst;
        Ok(env)
    }

    /// Envelope shape without the constant.
    pub fn shape(&self, r: f64) -> f64 {
        let d = self.dim as f64;
        if r <= 2.0 * self.support_radius {
            if self.dim == 2 {
                (2.0 / r).ln()
            } else {
                r.powf(-(d - 2.0))
            }
        } else {
            r.powf(-(d - 1.0) / 2.0)
        }
    }

    pub fn bound(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(ScatterError::Domain(format!("envelope distance must be positive, got {r}")));
        }
        Ok(self.constant * self.shape(r))
    }
}

/// One-shot calibration and evaluation of the kernel envelope.
pub fn kernel_envelope(ks: KernelSpec, r: f64, support_radius: f64, rect: &SpectralRect) -> Result<f64> {
    KernelEnvelope::calibrate(ks, support_radius, rect)?.bound(r)
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l0, l1) = (lo.ln(), hi.ln());
            (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn k0_at_one_matches_reference() {
        let v = macdonald_k(0.0, Complex64::from(1.0)).unwrap();
        assert_relative_eq!(v.re, 0.421_024_438_240_708_34, max_relative = 1e-13);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn half_order_closed_form() {
        let v = macdonald_k(0.5, Complex64::from(2.0)).unwrap();
        assert_relative_eq!(v.re, (std::f64::consts::PI / 4.0).sqrt() * (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn k0_logarithmic_blowup() {
        for &w in &[1e-3, 1e-6, 1e-9] {
            let v = macdonald_k(0.0, Complex64::from(w)).unwrap().re;
            let lead = -(w / 2.0).ln() - EULER_GAMMA;
            assert!((v / lead - 1.0).abs() < 10.0 * w * w * (1.0 / w).ln().max(1.0));
        }
    }

    #[test]
    fn zero_argument_and_bad_order_are_rejected() {
        assert!(macdonald_k(0.0, Complex64::from(0.0)).is_err());
        assert!(macdonald_k(0.3, Complex64::from(1.0)).is_err());
        assert!(macdonald_k(0.0, Complex64::from(-1.0)).is_err());
    }

    #[test]
    fn branches_agree_at_switch_radii() {
        for &theta in &[0.0, -0.4, -1.0, -FRAC_PI_2] {
            for &rho in &[SERIES_RADIUS, ASYMPTOTIC_RADIUS] {
                let w = Complex64::from_polar(rho, theta);
                let (a0, a1) = if rho == SERIES_RADIUS { k0_k1_series(w) } else { k0_k1_continued_fraction(w) };
                let (b0, b1) = if rho == SERIES_RADIUS {
                    k0_k1_continued_fraction(w)
                } else {
                    (k_asymptotic(0.0, w), k_asymptotic(1.0, w))
                };
                assert!((a0 - b0).norm() <= 1e-12 * b0.norm(), "K0 at {w}: {a0} vs {b0}");
                assert!((a1 - b1).norm() <= 1e-12 * b1.norm(), "K1 at {w}: {a1} vs {b1}");
            }
        }
    }

    #[test]
    fn wronskian_like_identity_on_real_axis() {
        // I_0 K_1 + I_1 K_0 = 1/x; check through the derivative K_0' = -K_1
        for &x in &[0.5, 1.5, 3.0, 7.0, 12.0] {
            let h = 1e-5 * x;
            let kp = k0_k1(Complex64::from(x + h)).0.re;
            let km = k0_k1(Complex64::from(x - h)).0.re;
            let deriv = (kp - km) / (2.0 * h);
            let k1 = k0_k1(Complex64::from(x)).1.re;
            assert_relative_eq!(-deriv, k1, max_relative = 1e-7);
        }
    }

    #[test]
    fn d3_kernel_at_unit_energy() {
        let ks = KernelSpec::new(3).unwrap();
        let z = SpectralPoint::new(1.0, 0.0).unwrap();
        let k = free_kernel(ks, z, 1.0).unwrap();
        let expected = Complex64::from_polar(1.0 / (4.0 * PI), 1.0);
        assert!((k - expected).norm() < 1e-15);
        assert_relative_eq!(k.norm(), 0.079_577_47, max_relative = 1e-7);
    }

    #[test]
    fn d3_kernel_is_damped_off_axis() {
        let ks = KernelSpec::new(3).unwrap();
        for &e in &[1e-3, 0.1, 1.0] {
            let z = SpectralPoint::new(2.0, e).unwrap();
            for &r in &[0.1, 1.0, 10.0] {
                assert!(free_kernel(ks, z, r).unwrap().norm() < 1.0 / (4.0 * PI * r));
            }
        }
    }

    #[test]
    fn d2_kernel_is_quarter_i_hankel() {
        let ks = KernelSpec::new(2).unwrap();
        let z = SpectralPoint::new(1.0, 0.0).unwrap();
        let k = free_kernel(ks, z, 1.0).unwrap();
        // (i/4)(J0 + i Y0) = (-Y0/4) + i J0/4
        assert!((k.re + 0.088_256_964_2 / 4.0).abs() < 1e-10);
        assert!((k.im - 0.765_197_686_6 / 4.0).abs() < 1e-10);
    }

    #[test]
    fn bessel_form_matches_closed_form_in_d3() {
        let ks = KernelSpec::new(3).unwrap();
        for &(l, e, r) in &[(1.0, 0.0, 1.0), (2.5, 0.3, 0.01), (4.0, 1.0, 7.0)] {
            let z = SpectralPoint::new(l, e).unwrap();
            let a = free_kernel(ks, z, r).unwrap();
            let b = free_kernel_bessel_form(ks, z, r).unwrap();
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn kernel_rejects_bad_inputs() {
        let z = SpectralPoint::new(1.0, 0.5).unwrap();
        assert!(free_kernel(KernelSpec::new(3).unwrap(), z, 0.0).is_err());
        assert!(free_kernel(KernelSpec::new(4).unwrap(), z, 1.0).is_err());
        assert!(KernelSpec::new(1).is_err());
        assert!(SpectralPoint::new(-1.0, 0.1).is_err());
        assert!(SpectralPoint::new(1.0, 1.5).is_err());
    }

    #[test]
    fn regular_part_limit_is_consistent() {
        for &dim in &[2usize, 3] {
            let k = SpectralPoint::new(1.7, 0.4).unwrap().sqrt_z();
            let r = 1e-5;
            let sing = if dim == 3 { Complex64::from(1.0 / (4.0 * PI * r)) } else { Complex64::from(-r.ln() / (2.0 * PI)) };
            let diff = kernel_value(dim, k, r) - sing;
            assert!((diff - regular_part_at_origin(dim, k)).norm() < 1e-4);
        }
    }

    #[test]
    fn d3_envelope_constant_is_stable() {
        let ks = KernelSpec::new(3).unwrap();
        let coarse = KernelEnvelope::calibrate_with(ks, 0.5, 1.0, 4.0, 9, 5, 20).unwrap();
        let fine = KernelEnvelope::calibrate_with(ks, 0.5, 1.0, 4.0, 33, 17, 80).unwrap();
        // sup |k| r = 1/(4π), attained on the real axis
        assert_relative_eq!(fine.constant, 1.1 / (4.0 * PI), max_relative = 1e-9);
        assert_relative_eq!(coarse.constant, fine.constant, max_relative = 1e-9);
        assert_relative_eq!(fine.bound(0.3).unwrap(), fine.constant / 0.3);
    }

    #[test]
    fn d2_envelope_needs_small_support() {
        let ks = KernelSpec::new(2).unwrap();
        assert!(KernelEnvelope::calibrate_with(ks, 1.0, 1.0, 4.0, 5, 3, 10).is_err());
        assert!(KernelEnvelope::calibrate_with(ks, 0.5, 1.0, 4.0, 5, 3, 10).is_ok());
    }
}
