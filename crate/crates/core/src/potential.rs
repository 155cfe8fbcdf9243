//! Sparse bump potentials `V = Σ_{n >= N} v_n(· - x_n)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::{distance, Point};

/// Radial bump shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `amplitude` on the closed ball.
    ConstantBall,
    /// `amplitude · exp(1 - 1/(1 - (r/ρ)^2))`, smooth and compactly supported.
    SmoothBump,
    /// `amplitude` on the inner half-ball, `amplitude/2` on the outer shell.
    StepWell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub profile: Profile,
    pub amplitude: f64,
    pub radius: f64,
}

impl Bump {
    pub fn new(profile: Profile, amplitude: f64, radius: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(ScatterError::Domain(format!("bump amplitude must be finite, got {amplitude}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(ScatterError::Domain(format!("bump radius must be positive, got {radius}")));
        }
        Ok(Self { profile, amplitude, radius })
    }

    /// Value at distance `r` from the bump center.
    pub fn value(&self, r: f64) -> f64 {
        if r > self.radius {
            return 0.0;
        }
        match self.profile {
            Profile::ConstantBall => self.amplitude,
            Profile::SmoothBump => {
                let q = r / self.radius;
                if q >= 1.0 {
                    0.0
                } else {
                    self.amplitude * (1.0 - 1.0 / (1.0 - q * q)).exp()
                }
            }
            Profile::StepWell => {
                if r <= 0.5 * self.radius {
                    self.amplitude
                } else {
                    0.5 * self.amplitude
                }
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs()
    }

    /// Sign of the bump (`0` for a vanishing amplitude).
    pub fn sign(&self) -> f64 {
        if self.amplitude > 0.0 {
            1.0
        } else if self.amplitude < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    pub fn scaled(&self, beta: f64) -> Self {
        Self { amplitude: beta * self.amplitude, ..*self }
    }
}

/// Result of the support-geometry audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    /// First retained index, 1-based.
    pub n: usize,
    /// 1-based indices below `n`.
    pub dropped: Vec<usize>,
    /// Set when no nonempty window qualifies.
    pub window_empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePotential {
    dim: usize,
    support_radius: f64,
    bumps: Vec<Bump>,
    centers: Vec<Point>,
    sparsity_c: f64,
    gamma: f64,
    truncation: Truncation,
}

impl SparsePotential {
    /// Builds the potential, computes the truncation index and checks the
    /// separation `dist(x_n, {x_m}) >= C n^γ` on the retained window.
    pub fn new(
        dim: usize,
        support_radius: f64,
        bumps: Vec<Bump>,
        centers: Vec<Point>,
        sparsity_c: f64,
        gamma: f64,
    ) -> Result<Self> {
        check_dimension(dim)?;
        check_gamma(dim, gamma)?;
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(ScatterError::Domain(format!("support radius must be positive, got {support_radius}")));
        }
        if !(sparsity_c > 0.0) {
            return Err(ScatterError::Hypothesis(format!("sparsity constant C must be positive, got {sparsity_c}")));
        }
        if bumps.is_empty() {
            return Err(ScatterError::Domain("a sparse potential needs at least one bump".into()));
        }
        if bumps.len() != centers.len() {
            return Err(ScatterError::Domain(format!(
                "{} bumps but {} centers",
                bumps.len(),
                centers.len()
            )));
        }
        for (n, b) in bumps.iter().enumerate() {
            if b.radius > support_radius * (1.0 + 1e-12) {
                return Err(ScatterError::Hypothesis(format!(
                    "bump {} has radius {} exceeding R = {support_radius}",
                    n + 1,
                    b.radius
                )));
            }
        }
        if dim == 2 && centers.iter().any(|c| c[2] != 0.0) {
            return Err(ScatterError::Domain("two-dimensional centers must have zero third component".into()));
        }
        let truncation = truncation_window(support_radius, &bumps, &centers);
        let p = Self { dim, support_radius, bumps, centers, sparsity_c, gamma, truncation };
        p.check_sparse_condition()?;
        Ok(p)
    }

    /// `count` identical bumps on generated sparse centers.
    pub fn generated(
        dim: usize,
        support_radius: f64,
        sparsity_c: f64,
        gamma: f64,
        count: usize,
        seed: u64,
        bump: Bump,
    ) -> Result<Self> {
        let centers = gen_sparse_centers(dim, sparsity_c, gamma, count, seed)?;
        Self::new(dim, support_radius, vec![bump; count], centers, sparsity_c, gamma)
    }

    /// Same geometry with each bump replaced by `f(index, bump)`.
    pub fn map_bumps(&self, f: impl Fn(usize, &Bump) -> Bump) -> Result<Self> {
        let bumps = self.bumps.iter().enumerate().map(|(n, b)| f(n, b)).collect();
        Self::new(self.dim, self.support_radius, bumps, self.centers.clone(), self.sparsity_c, self.gamma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }
    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }
    pub fn centers(&self) -> &[Point] {
        &self.centers
    }
    pub fn sparsity_c(&self) -> f64 {
        self.sparsity_c
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }
    /// First retained bump, 1-based.
    pub fn trunc_n(&self) -> usize {
        self.truncation.n
    }

    /// 0-based indices of the retained bumps.
    pub fn retained(&self) -> std::ops::Range<usize> {
        (self.truncation.n - 1).min(self.bumps.len())..self.bumps.len()
    }

    /// `max |v_n|` over retained bumps.
    pub fn sup_norm(&self) -> f64 {
        self.retained().map(|n| self.bumps[n].sup_norm()).fold(0.0, f64::max)
    }

    pub fn check_sparse_condition(&self) -> Result<()> {
        let window = self.retained();
        for n in window.clone() {
            let required = self.sparsity_c * ((n + 1) as f64).powf(self.gamma);
            for m in window.clone() {
                if m != n && distance(&self.centers[n], &self.centers[m]) < required {
                    return Err(ScatterError::Hypothesis(format!(
                        "sparse condition fails at n = {}: |x_n - x_m| = {:.6} < C n^gamma = {:.6} (m = {})",
                        n + 1,
                        distance(&self.centers[n], &self.centers[m]),
                        required,
                        m + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_dimension(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(ScatterError::Domain(format!("dimension must be 2 or 3, got {dim}")))
    }
}

fn check_gamma(dim: usize, gamma: f64) -> Result<()> {
    let threshold = 2.0 / (dim as f64 - 1.0);
    if gamma > threshold {
        Ok(())
    } else {
        Err(ScatterError::Hypothesis(format!("gamma = {gamma} must exceed 2/(d-1) = {threshold}")))
    }
}

/// Deterministic sparse centers on a jittered golden-angle spiral.
///
/// Center `n` (1-based) is pushed outward along its spiral direction until it
/// is at least `C n^γ` away from every earlier center. Later centers are
/// farther apart still, so the full sequence obeys the separation bound.
pub fn gen_sparse_centers(dim: usize, c: f64, gamma: f64, count: usize, seed: u64) -> Result<Vec<Point>> {
    check_dimension(dim)?;
    check_gamma(dim, gamma)?;
    if count == 0 {
        return Err(ScatterError::Domain("count must be at least 1".into()));
    }
    if !(c > 0.0) {
        return Err(ScatterError::Hypothesis(format!("sparsity constant C must be positive, got {c}")));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Point> = vec![[0.0; 3]];
    let mut azimuth = 0.0;
    for n in 2..=count {
        let s = c * (n as f64).powf(gamma);
        azimuth += golden + rng.random_range(-0.2..0.2);
        let dir = if dim == 2 {
            [azimuth.cos(), azimuth.sin(), 0.0]
        } else {
            let u = (n as f64 * inv_phi + rng.random_range(-0.05..0.05)).rem_euclid(1.0);
            let cos_t = 1.0 - 2.0 * u;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            [sin_t * azimuth.cos(), sin_t * azimuth.sin(), cos_t]
        };
        let mut rho = s;
        loop {
            let x = [rho * dir[0], rho * dir[1], rho * dir[2]];
            if centers.iter().all(|y| distance(&x, y) >= s) {
                centers.push(x);
                break;
            }
            rho += 0.05 * s;
        }
    }
    Ok(centers)
}

fn truncation_window(support_radius: f64, bumps: &[Bump], centers: &[Point]) -> Truncation {
    // pair (m, n), m < n, is admissible when the supports are 2R apart
    let mut first = 1;
    for n in 0..centers.len() {
        for m in 0..n {
            let gap = distance(&centers[m], &centers[n]) - bumps[m].radius - bumps[n].radius;
            if gap <= 2.0 * support_radius {
                first = first.max(m + 2);
            }
        }
    }
    Truncation { n: first, dropped: (1..first).collect(), window_empty: first > centers.len() }
}

/// Least `N` such that the supports of bumps `m ≠ n >= N` are pairwise more
/// than `2R` apart.
pub fn choose_truncation_n(p: &SparsePotential) -> usize {
    truncation_window(p.support_radius, &p.bumps, &p.centers).n
}

/// Retained-bump sum at `x`.
pub fn eval_potential(p: &SparsePotential, x: &Point) -> f64 {
    p.retained()
        .map(|n| {
            let b = &p.bumps[n];
            let r = distance(x, &p.centers[n]);
            if r <= b.radius {
                b.value(r)
            } else {
                0.0
            }
        })
        .sum()
}

/// `(|V(x)|^{1/2}, sgn(V(x)) |V(x)|^{1/2})`.
pub fn split_sqrt(p: &SparsePotential, x: &Point) -> (f64, f64) {
    split_value(eval_potential(p, x))
}

pub(crate) fn split_value(v: f64) -> (f64, f64) {
    let root = v.abs().sqrt();
    (root, if v < 0.0 { -root } else { root })
}
