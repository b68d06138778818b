use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Shape;
use crate::mask_ops::default_p_blend;
use crate::resample::DEFAULT_REPEATS;

/// Where the guidance blend is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlendSpace {
    /// On the noisy state after each denoising step.
    #[serde(rename = "xt")]
    Xt,
    /// On the clean-image prediction before the step consumes it.
    #[serde(rename = "x0")]
    X0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Ddpm,
    /// Deterministic (η = 0).
    Ddim,
}

impl std::fmt::Display for BlendSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Xt => "xt",
            Self::X0 => "x0",
        })
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Ddpm => "ddpm",
            Self::Ddim => "ddim",
        })
    }
}

impl std::str::FromStr for BlendSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xt" => Ok(Self::Xt),
            "x0" => Ok(Self::X0),
            _ => Err(Error::Config(format!("unknown blend space {s:?} (expected xt or x0)"))),
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpm" => Ok(Self::Ddpm),
            "ddim" => Ok(Self::Ddim),
            _ => Err(Error::Config(format!("unknown sampler {s:?} (expected ddpm or ddim)"))),
        }
    }
}

/// Region-wise guidance and sampler settings.
///
/// `t_in`/`t_out` are the fractions of backward steps guided inside/outside
/// the mask, `n_in`/`n_out` the low-pass factors per region, `r` the
/// fraction of final steps that are resampled `u` times each, and `p_blend`
/// the outward mask-smoothing width in pixels (`None` picks
/// `4·max(n_in, n_out)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub t_in: f64,
    pub t_out: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub r: f64,
    pub u: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_blend: Option<usize>,
    pub blend_space: BlendSpace,
    pub sampler: SamplerKind,
    pub steps: usize,
    pub seed: u64,
    /// Classifier-free guidance scale applied when a condition is given.
    pub guidance_scale: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            t_in: 0.5,
            t_out: 1.0,
            n_in: 2,
            n_out: 1,
            r: 0.2,
            u: DEFAULT_REPEATS,
            p_blend: None,
            blend_space: BlendSpace::Xt,
            sampler: SamplerKind::Ddim,
            steps: 50,
            seed: 0,
            guidance_scale: 7.5,
        }
    }
}

impl GuidanceConfig {
    /// Guidance disabled everywhere and no resampling.
    pub fn unguided(sampler: SamplerKind, steps: usize, seed: u64) -> Self {
        Self { t_in: 0.0, t_out: 0.0, r: 0.0, u: 1, p_blend: Some(0), sampler, steps, seed, ..Self::default() }
    }

    pub fn effective_p_blend(&self) -> usize {
        self.p_blend.unwrap_or_else(|| default_p_blend(self.n_in, self.n_out))
    }

    pub fn validate(&self, shape: Shape) -> Result<()> {
        for (name, v) in [("t_in", self.t_in), ("t_out", self.t_out), ("r", self.r)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let longest = shape.height.max(shape.width);
        for (name, n) in [("n_in", self.n_in), ("n_out", self.n_out)] {
            if n == 0 || n > longest {
                return Err(Error::Config(format!("{name} = {n} outside 1..={longest}")));
            }
        }
        if self.u == 0 {
            return Err(Error::Config("u must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.guidance_scale < 0.0 || !self.guidance_scale.is_finite() {
            return Err(Error::Config(format!("guidance_scale = {} must be finite and ≥ 0", self.guidance_scale)));
        }
        Ok(())
    }
}
