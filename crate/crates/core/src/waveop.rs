//! Split-step wave-operator diagnostics in a periodic two-dimensional box.
//!
//! `H₀ = -Δ` acts as the Fourier multiplier `|k|²`; `H = H₀ + V` is advanced
//! with the Strang splitting `e^{-iK dt/2} e^{-iV dt} e^{-iK dt/2}`. The local
//! wave-operator approximants are `W(t) = e^{iHt} e^{-iH₀t} χ_I(H₀)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Result, ScatterError};
use crate::potential::{eval_potential, SparsePotential};

/// Maximum `dt · ‖V‖_∞` for the splitting.
pub const MAX_PHASE_STEP: f64 = 0.1;
/// Minimum grid points per shortest retained wavelength.
pub const POINTS_PER_WAVELENGTH: f64 = 8.0;

struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let mut scratch = vec![Complex64::from(0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
        fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// Periodic square box `[-L/2, L/2)²` with `n²` points and a sampled potential.
pub struct WaveBox {
    pub n: usize,
    pub length: f64,
    pub dx: f64,
    k2: Vec<f64>,
    potential: Vec<f64>,
    fft: Fft2,
}

impl std::fmt::Debug for WaveBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveBox").field("n", &self.n).field("length", &self.length).finish()
    }
}

impl WaveBox {
    /// Box with `V` sampled from `p` (`None` for the free problem).
    pub fn new(p: Option<&SparsePotential>, n: usize, length: f64) -> Result<Self> {
        if n < 4 || !(length > 0.0) {
            return Err(ScatterError::Domain(format!("invalid box: n = {n}, L = {length}")));
        }
        let dx = length / n as f64;
        let freq: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * m / length
            })
            .collect();
        let k2 = (0..n * n).map(|idx| freq[idx / n].powi(2) + freq[idx % n].powi(2)).collect();
        let mut potential = vec![0.0; n * n];
        if let Some(p) = p {
            if p.dim() != 2 {
                return Err(ScatterError::Domain("wave-operator runs are implemented in two dimensions".into()));
            }
            let half = 0.5 * length;
            for n_b in p.retained() {
                let c = p.centers()[n_b];
                let reach = p.bumps()[n_b].radius + 2.0 * dx;
                if c[0].abs() + reach >= half || c[1].abs() + reach >= half {
                    return Err(ScatterError::Domain(format!(
                        "bump {} at ({:.3}, {:.3}) does not fit inside the box of side {length}",
                        n_b + 1,
                        c[0],
                        c[1]
                    )));
                }
            }
            for i in 0..n {
                for j in 0..n {
                    potential[i * n + j] = eval_potential(p, &[-half + i as f64 * dx, -half + j as f64 * dx, 0.0]);
                }
            }
        }
        Ok(Self { n, length, dx, k2, potential, fft: Fft2::new(n) })
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx
    }

    /// Samples `f(x, y)` on the grid (row index ↦ x).
    pub fn sample(&self, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
        let n = self.n;
        (0..n * n).map(|idx| f(self.coordinate(idx / n), self.coordinate(idx % n))).collect()
    }

    pub fn norm(&self, psi: &[Complex64]) -> f64 {
        (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx * self.dx).sqrt()
    }

    pub fn potential_sup(&self) -> f64 {
        self.potential.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest time before a packet with energies `<= b` wraps around: `L / (2 · 2√b)`.
    pub fn horizon(&self, b: f64) -> f64 {
        self.length / (4.0 * b.sqrt())
    }

    pub fn check_resolution(&self, b: f64) -> Result<()> {
        let wavelength = 2.0 * PI / b.sqrt();
        if self.dx > wavelength / POINTS_PER_WAVELENGTH {
            return Err(ScatterError::Resolution(format!(
                "dx = {} exceeds 1/{POINTS_PER_WAVELENGTH} of the wavelength {wavelength:.4} at energy {b}",
                self.dx
            )));
        }
        Ok(())
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(ScatterError::Domain(format!("time step must be finite and nonzero, got {dt}")));
        }
        if dt.abs() * self.potential_sup() > MAX_PHASE_STEP * (1.0 + 1e-12) {
            return Err(ScatterError::Resolution(format!(
                "|dt| ||V|| = {} exceeds {MAX_PHASE_STEP}",
                dt.abs() * self.potential_sup()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorState {
    pub psi: Vec<Complex64>,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evolution {
    Free,
    Full,
}

/// `e^{-iH₀ t} ψ` exactly.
pub fn free_evolve(bx: &WaveBox, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let mut f = psi.to_vec();
    bx.fft.forward(&mut f);
    for (z, k2) in f.iter_mut().zip(&bx.k2) {
        *z *= Complex64::from_polar(1.0, -k2 * t);
    }
    bx.fft.inverse(&mut f);
    f
}

/// `steps` Strang steps of size `dt` (negative `dt` runs backward).
pub fn propagate(bx: &WaveBox, state: &PropagatorState, dt: f64, steps: usize, which: Evolution) -> Result<PropagatorState> {
    if which == Evolution::Free {
        return Ok(PropagatorState { psi: free_evolve(bx, &state.psi, dt * steps as f64), time: state.time + dt * steps as f64 });
    }
    bx.check_step(dt)?;
    let mut psi = state.psi.clone();
    strang(bx, &mut psi, dt, steps, None);
    Ok(PropagatorState { psi, time: state.time + dt * steps as f64 })
}

/// Strang steps with consecutive half-kinetic factors fused; `observe` sees
/// the position-space field after every step.
fn strang(
    bx: &WaveBox,
    psi: &mut [Complex64],
    dt: f64,
    steps: usize,
    mut observe: Option<&mut dyn FnMut(usize, &[Complex64])>,
) {
    if steps == 0 {
        return;
    }
    let half: Vec<Complex64> = bx.k2.iter().map(|k2| Complex64::from_polar(1.0, -0.5 * k2 * dt)).collect();
    let full: Vec<Complex64> = bx.k2.iter().map(|k2| Complex64::from_polar(1.0, -k2 * dt)).collect();
    let phase: Vec<Complex64> = bx.potential.iter().map(|v| Complex64::from_polar(1.0, -v * dt)).collect();
    let mut view = Vec::new();
    bx.fft.forward(psi);
    for (z, h) in psi.iter_mut().zip(&half) {
        *z *= h;
    }
    for step in 1..=steps {
        bx.fft.inverse(psi);
        for (z, p) in psi.iter_mut().zip(&phase) {
            *z *= p;
        }
        bx.fft.forward(psi);
        if step == steps {
            for (z, h) in psi.iter_mut().zip(&half) {
                *z *= h;
            }
            break;
        }
        if let Some(obs) = observe.as_mut() {
            view.clear();
            view.extend(psi.iter().zip(&half).map(|(z, h)| z * h));
            bx.fft.inverse(&mut view);
            obs(step, &view);
        }
        for (z, h) in psi.iter_mut().zip(&full) {
            *z *= h;
        }
    }
    bx.fft.inverse(psi);
    if let Some(obs) = observe.as_mut() {
        obs(steps, psi);
    }
}

/// Sharp Fourier cutoff onto `|k|² ∈ [a, b]`.
pub fn band_project(bx: &WaveBox, state: &PropagatorState, band: (f64, f64)) -> Result<PropagatorState> {
    let (a, b) = band;
    if !(0.0 < a && a < b) {
        return Err(ScatterError::Domain(format!("energy band must satisfy 0 < a < b, got [{a}, {b}]")));
    }
    Ok(PropagatorState { psi: project(bx, &state.psi, a, b), time: state.time })
}

fn project(bx: &WaveBox, psi: &[Complex64], a: f64, b: f64) -> Vec<Complex64> {
    let mut f = psi.to_vec();
    bx.fft.forward(&mut f);
    for (z, k2) in f.iter_mut().zip(&bx.k2) {
        if !(*k2 >= a && *k2 <= b) {
            *z = Complex64::from(0.0);
        }
    }
    bx.fft.inverse(&mut f);
    f
}

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let s = (t / dt).round();
    if (s * dt - t).abs() > 1e-9 * t.abs().max(1.0) || s < 0.0 {
        return Err(ScatterError::Domain(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(s as usize)
}

fn check_horizon(bx: &WaveBox, b: f64, t: f64) -> Result<()> {
    let horizon = bx.horizon(b);
    if t > horizon {
        return Err(ScatterError::Horizon { t, horizon });
    }
    Ok(())
}

/// `W(t) = e^{iHt} e^{-iH₀t} χ_I ψ₀` for each `t`.
pub fn wave_op_approx(
    bx: &WaveBox,
    psi0: &[Complex64],
    band: (f64, f64),
    t_list: &[f64],
    dt: f64,
) -> Result<Vec<(f64, Vec<Complex64>)>> {
    if t_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ScatterError::Domain("t_list must be increasing".into()));
    }
    bx.check_resolution(band.1)?;
    if let Some(&t_max) = t_list.last() {
        check_horizon(bx, band.1, t_max)?;
    }
    let projected = band_project(bx, &PropagatorState { psi: psi0.to_vec(), time: 0.0 }, band)?;
    t_list
        .iter()
        .map(|&t| {
            let steps = steps_for(t, dt)?;
            let forward = free_evolve(bx, &projected.psi, t);
            let back = propagate(bx, &PropagatorState { psi: forward, time: t }, -dt, steps, Evolution::Full)?;
            Ok((t, back.psi))
        })
        .collect()
}

/// `‖e^{-iHs} W(T)ψ₀ - W(T) e^{-iH₀s} ψ₀‖ / ‖ψ₀‖`, with `ψ₀` already band-limited.
pub fn intertwine_check(
    bx: &WaveBox,
    omega_psi0: &[Complex64],
    psi0: &[Complex64],
    band: (f64, f64),
    t_final: f64,
    s: f64,
    dt: f64,
) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    check_horizon(bx, band.1, t_final + s.abs())?;
    let s_steps = steps_for(s.abs(), dt)?;
    let lhs = propagate(bx, &PropagatorState { psi: omega_psi0.to_vec(), time: 0.0 }, s.signum() * dt, s_steps, Evolution::Full)?;
    let steps = steps_for(t_final, dt)?;
    let moved = free_evolve(bx, psi0, t_final + s);
    let rhs = propagate(bx, &PropagatorState { psi: moved, time: 0.0 }, -dt, steps, Evolution::Full)?;
    let diff: Vec<Complex64> = lhs.psi.iter().zip(&rhs.psi).map(|(a, b)| a - b).collect();
    Ok(bx.norm(&diff) / bx.norm(psi0))
}

/// `∫₀^T ‖|V|^{1/2} e^{-iHt} ψ₀‖² dt` by the trapezoid rule for each `T`.
pub fn smoothness_integral(bx: &WaveBox, psi0: &[Complex64], t_list: &[f64], dt: f64) -> Result<Vec<(f64, f64)>> {
    if t_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ScatterError::Domain("T_list must be increasing".into()));
    }
    let Some(&t_max) = t_list.last() else {
        return Ok(Vec::new());
    };
    bx.check_step(dt)?;
    let targets = t_list.iter().map(|&t| steps_for(t, dt)).collect::<Result<Vec<usize>>>()?;
    let cell = bx.dx * bx.dx;
    let density = |psi: &[Complex64]| -> f64 {
        psi.iter().zip(&bx.potential).map(|(z, v)| v.abs() * z.norm_sqr()).sum::<f64>() * cell
    };
    let mut psi = psi0.to_vec();
    let mut previous = density(&psi);
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(t_list.len());
    let mut next = 0;
    if targets.first() == Some(&0) {
        out.push((t_list[0], 0.0));
        next = 1;
    }
    let mut observe = |step: usize, field: &[Complex64]| {
        let current = density(field);
        acc += 0.5 * dt * (previous + current);
        previous = current;
        while next < targets.len() && targets[next] == step {
            out.push((t_list[next], acc));
            next += 1;
        }
    };
    strang(bx, &mut psi, dt, steps_for(t_max, dt)?, Some(&mut observe));
    Ok(out)
}

/// One row of the wave-operator time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveRow {
    pub t: f64,
    /// `‖W(t)ψ₀ - W(t_prev)ψ₀‖`, NaN at the first ladder time and off-ladder.
    pub cauchy_gap: f64,
    /// `|‖W(t)ψ₀‖ - ‖χ_I ψ₀‖| / ‖χ_I ψ₀‖`, NaN off-ladder.
    pub isometry_defect: f64,
    /// Reported at the final ladder time only.
    pub intertwine_defect: f64,
    /// Partial smoothness integral up to `t`, NaN when `t` is not in the integral list.
    pub smooth_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveReport {
    pub rows: Vec<WaveRow>,
    pub horizon: f64,
    pub gaps: Vec<f64>,
    pub max_isometry_defect: f64,
    pub intertwine_defect: f64,
    /// Increments of the partial smoothness integrals between consecutive times.
    pub smooth_increments: Vec<f64>,
}

/// Parameters of a full diagnostic run.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveRun {
    pub band: (f64, f64),
    pub dt: f64,
    pub t_list: Vec<f64>,
    pub smooth_t_list: Vec<f64>,
    pub s: f64,
}

/// Cauchy ladder, isometry, intertwining and smoothness integrals for one `ψ₀`.
pub fn run_diagnostics(bx: &WaveBox, psi0: &[Complex64], run: &WaveRun) -> Result<WaveReport> {
    let projected = project(bx, psi0, run.band.0, run.band.1);
    let base = bx.norm(&projected);
    if base == 0.0 {
        return Err(ScatterError::Domain("initial state has no component in the energy band".into()));
    }
    let t_final = *run.t_list.last().ok_or_else(|| ScatterError::Domain("t_list is empty".into()))?;
    check_horizon(bx, run.band.1, t_final + run.s.abs())?;
    let ladder = wave_op_approx(bx, &projected, run.band, &run.t_list, run.dt)?;
    let smooth = smoothness_integral(bx, &projected, &run.smooth_t_list, run.dt)?;
    let (_, omega) = ladder.last().expect("t_list is nonempty");
    let intertwine = intertwine_check(bx, omega, &projected, run.band, t_final, run.s, run.dt)?;

    let mut times: Vec<f64> = run.t_list.iter().chain(&run.smooth_t_list).copied().collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let mut gaps = Vec::new();
    let mut rows = Vec::new();
    let mut max_iso: f64 = 0.0;
    for &t in &times {
        let mut row = WaveRow {
            t,
            cauchy_gap: f64::NAN,
            isometry_defect: f64::NAN,
            intertwine_defect: f64::NAN,
            smooth_integral: f64::NAN,
        };
        if let Some(k) = ladder.iter().position(|(tl, _)| *tl == t) {
            row.isometry_defect = (bx.norm(&ladder[k].1) - base).abs() / base;
            max_iso = max_iso.max(row.isometry_defect);
            if k > 0 {
                let diff: Vec<Complex64> = ladder[k].1.iter().zip(&ladder[k - 1].1).map(|(a, b)| a - b).collect();
                row.cauchy_gap = bx.norm(&diff) / base;
                gaps.push(row.cauchy_gap);
            }
            if t == t_final {
                row.intertwine_defect = intertwine;
            }
        }
        if let Some((_, v)) = smooth.iter().find(|(ts, _)| *ts == t) {
            row.smooth_integral = *v;
        }
        rows.push(row);
    }
    let smooth_increments = smooth.windows(2).map(|w| w[1].1 - w[0].1).collect();
    Ok(WaveReport {
        rows,
        horizon: bx.horizon(run.band.1),
        gaps,
        max_isometry_defect: max_iso,
        intertwine_defect: intertwine,
        smooth_increments,
    })
}

/// Centered Gaussian `exp(-|x|²/(2σ²))`.
pub fn gaussian(bx: &WaveBox, sigma: f64) -> Vec<Complex64> {
    bx.sample(|x, y| Complex64::from((-(x * x + y * y) / (2.0 * sigma * sigma)).exp()))
}
