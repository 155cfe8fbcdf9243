//! TOML run configuration.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Result, ScatterError};
use crate::lap::{SpectralRect, DEFAULT_LADDER};
use crate::potential::{Bump, Profile, SparsePotential};
use crate::spectra::{beta_family, BetaFamily, BsSettings};
use crate::Point;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub rect: Option<RectConfig>,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub waveop: Option<WaveConfig>,
    #[serde(default)]
    pub kernel_check: KernelCheckConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Every bump is `profile · amplitude` on `radius`.
    #[default]
    Identical,
    /// Bumps `β_n v` hitting rational energies in a window (needs `[spectrum]`).
    Beta,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub profile: Profile,
    pub amplitude: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub dim: usize,
    /// Global support radius `R`.
    pub support_radius: f64,
    pub sparsity_c: f64,
    pub gamma: f64,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default)]
    pub amplitude: f64,
    /// Bump radius; defaults to `R`.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub family: Family,
    /// Explicit bumps, overriding the profile keys.
    #[serde(default)]
    pub bumps: Option<Vec<BumpConfig>>,
    /// Explicit centers, overriding the generator.
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
}

fn default_profile() -> Profile {
    Profile::ConstantBall
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_lambda_samples")]
    pub lambda_samples: usize,
    #[serde(default = "default_ladder")]
    pub eps_samples: Vec<f64>,
}

fn default_lambda_samples() -> usize {
    20
}

fn default_ladder() -> Vec<f64> {
    DEFAULT_LADDER.to_vec()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub h: f64,
    pub subdivision: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { h: 1.0 / 3.0, subdivision: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub bs: BsSettings,
    /// Half-width `β₀` of the scaling window of the `beta` family.
    #[serde(default)]
    pub beta0: Option<f64>,
    /// Scaling window for the monotonicity check on the first retained bump (sign flipped if repulsive).
    #[serde(default)]
    pub feynman_hellmann: Option<[f64; 2]>,
    #[serde(default = "default_fh_samples")]
    pub fh_samples: usize,
}

fn default_resolution() -> f64 {
    1e-3
}

fn default_fh_samples() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub n: usize,
    pub length: f64,
    pub band: [f64; 2],
    pub dt: f64,
    pub sigma: f64,
    pub t_list: Vec<f64>,
    pub smooth_t_list: Vec<f64>,
    #[serde(default = "default_s")]
    pub s: f64,
}

fn default_s() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckConfig {
    pub oracle_samples: usize,
    pub envelope_samples: usize,
    /// Multiplies the calibrated envelope constant; values below 1 inject violations.
    pub envelope_scale: f64,
    pub seed: u64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        Self { oracle_samples: 1000, envelope_samples: 10_000, envelope_scale: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dump_matrices: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ScatterError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScatterError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn rect(&self) -> Result<SpectralRect> {
        let r = self.rect.as_ref().ok_or_else(|| ScatterError::Config("missing [rect] section".into()))?;
        SpectralRect::new(r.a, r.b, r.lambda_samples, r.eps_samples.clone())
    }

    /// Checks the hypotheses that do not need any computation.
    pub fn validate(&self) -> Result<()> {
        let p = &self.potential;
        if p.dim != 2 && p.dim != 3 {
            return Err(ScatterError::Config(format!("potential.dim must be 2 or 3, got {}", p.dim)));
        }
        let threshold = 2.0 / (p.dim as f64 - 1.0);
        if !(p.gamma > threshold) {
            return Err(ScatterError::Hypothesis(format!("gamma = {} must exceed 2/(d-1) = {threshold}", p.gamma)));
        }
        if !(p.support_radius > 0.0) || !(p.sparsity_c > 0.0) || p.count == 0 {
            return Err(ScatterError::Config("support_radius, sparsity_c and count must be positive".into()));
        }
        if let Some(r) = p.radius {
            if r > p.support_radius {
                return Err(ScatterError::Hypothesis(format!("bump radius {r} exceeds R = {}", p.support_radius)));
            }
        }
        if let Some(r) = &self.rect {
            if !(r.a > 0.0 && r.b > r.a) {
                return Err(ScatterError::Hypothesis(format!("need 0 < a < b, got a = {}, b = {}", r.a, r.b)));
            }
        }
        if !(self.discretization.h > 0.0) || self.discretization.subdivision < 2 {
            return Err(ScatterError::Config("discretization needs h > 0 and subdivision >= 2".into()));
        }
        if let Some(w) = &self.waveop {
            if p.dim != 2 {
                return Err(ScatterError::Config("waveop runs need potential.dim = 2".into()));
            }
            if !(0.0 < w.band[0] && w.band[0] < w.band[1]) {
                return Err(ScatterError::Hypothesis("waveop.band must satisfy 0 < a < b".into()));
            }
        }
        if p.family == Family::Beta {
            let ok = self.spectrum.as_ref().and_then(|s| s.beta0).is_some();
            if !ok {
                return Err(ScatterError::Config("family = \"beta\" needs spectrum.beta0".into()));
            }
        }
        Ok(())
    }

    fn base_bump(&self) -> Result<Bump> {
        let p = &self.potential;
        Bump::new(p.profile, p.amplitude, p.radius.unwrap_or(p.support_radius))
    }

    fn centers(&self) -> Result<Vec<Point>> {
        let p = &self.potential;
        match &p.centers {
            Some(list) => list
                .iter()
                .map(|c| match c.as_slice() {
                    [x, y] if p.dim == 2 => Ok([*x, *y, 0.0]),
                    [x, y, z] if p.dim == 3 => Ok([*x, *y, *z]),
                    _ => Err(ScatterError::Config(format!("center {c:?} does not have {} components", p.dim))),
                })
                .collect(),
            None => crate::potential::gen_sparse_centers(p.dim, p.sparsity_c, p.gamma, p.count, p.seed),
        }
    }

    /// Builds the potential; for the `beta` family also returns the scalings.
    pub fn build_potential(&self) -> Result<(SparsePotential, Option<BetaFamily>)> {
        self.validate()?;
        let p = &self.potential;
        let centers = self.centers()?;
        let (bumps, family) = match (&p.bumps, p.family) {
            (Some(list), _) => {
                let bumps = list.iter().map(|b| Bump::new(b.profile, b.amplitude, b.radius)).collect::<Result<Vec<_>>>()?;
                (bumps, None)
            }
            (None, Family::Identical) => (vec![self.base_bump()?; centers.len()], None),
            (None, Family::Beta) => {
                let spec = self.spectrum.as_ref().expect("validated above");
                let beta0 = spec.beta0.expect("validated above");
                let base = self.base_bump()?;
                let fam = beta_family(p.dim, &base, beta0, centers.len(), &spec.bs)?;
                if fam.betas.len() != centers.len() {
                    return Err(ScatterError::Config(format!(
                        "only {} rational targets found for {} bumps",
                        fam.betas.len(),
                        centers.len()
                    )));
                }
                (fam.betas.iter().map(|&b| base.scaled(b)).collect(), Some(fam))
            }
        };
        if bumps.len() != centers.len() {
            return Err(ScatterError::Config(format!("{} bumps for {} centers", bumps.len(), centers.len())));
        }
        let sp = SparsePotential::new(p.dim, p.support_radius, bumps, centers, p.sparsity_c, p.gamma)?;
        Ok((sp, family))
    }
}
