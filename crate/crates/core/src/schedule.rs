//! Noise schedules and the closed-form forward / inverse transforms.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Scalar;

/// Reference step count the linear ramp endpoints are quoted for.
const REFERENCE_STEPS: f64 = 1000.0;
const SIGMA_START: f64 = 1e-4;
const SIGMA_END: f64 = 0.02;
/// Upper clamp for per-step variances; short schedules would otherwise reach
/// α_t ≤ 0.
pub const SIGMA_MAX: f64 = 0.999;

/// Per-step variances σ_t, α_t = 1 − σ_t and ᾱ_t = Π_{s≤t} α_s.
///
/// All arrays have length `steps + 1`; index 0 is clean data (σ_0 = 0,
/// ᾱ_0 = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule<S> {
    steps: usize,
    sigma: Vec<S>,
    alpha: Vec<S>,
    alpha_bar: Vec<S>,
}

impl<S: Scalar> NoiseSchedule<S> {
    /// Linear σ ramp from `1e-4·(1000/T)` to `0.02·(1000/T)`, clamped to
    /// [`SIGMA_MAX`]. A single-step schedule uses the end value.
    pub fn linear(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Schedule("step count must be at least 1".into()));
        }
        let rescale = REFERENCE_STEPS / steps as f64;
        let (start, end) = (SIGMA_START * rescale, SIGMA_END * rescale);
        let sigmas = (1..=steps).map(|t| {
            let s = if steps == 1 {
                end
            } else {
                start + (end - start) * (t - 1) as f64 / (steps - 1) as f64
            };
            s.min(SIGMA_MAX)
        });
        Self::from_sigmas(sigmas.collect())
    }

    /// Builds a schedule from σ_1..σ_T; every value must lie in (0, 1).
    pub fn from_sigmas(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::Schedule("step count must be at least 1".into()));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(Error::Schedule(format!("variance {s} outside (0, 1)")));
        }
        Ok(Self::from_sigmas_unchecked(&sigmas))
    }

    /// Same as [`from_sigmas`](Self::from_sigmas) without range checks; lets
    /// tests build degenerate schedules (σ_t = 0).
    #[doc(hidden)]
    pub fn from_sigmas_unchecked(sigmas: &[f64]) -> Self {
        let steps = sigmas.len();
        let mut sigma = Vec::with_capacity(steps + 1);
        let mut alpha = Vec::with_capacity(steps + 1);
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        sigma.push(S::zero());
        alpha.push(S::one());
        alpha_bar.push(S::one());
        let mut prod = 1.0f64;
        for &s in sigmas {
            prod *= 1.0 - s;
            sigma.push(S::of(s));
            alpha.push(S::of(1.0 - s));
            alpha_bar.push(S::of(prod));
        }
        Self { steps, sigma, alpha, alpha_bar }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sigma(&self, t: usize) -> S {
        self.sigma[t]
    }

    pub fn alpha(&self, t: usize) -> S {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> S {
        self.alpha_bar[t]
    }

    pub fn sigmas(&self) -> &[S] {
        &self.sigma
    }

    pub fn alpha_bars(&self) -> &[S] {
        &self.alpha_bar
    }

    fn check_step(&self, t: usize, min: usize) -> Result<()> {
        if t < min || t > self.steps {
            return Err(Error::Step(format!("t = {t} outside {min}..={}", self.steps)));
        }
        Ok(())
    }

    /// Hex SHA-256 over the little-endian f64 bits of σ_1..σ_T.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.steps as u64).to_le_bytes());
        for s in &self.sigma[1..] {
            h.update(s.as_f64().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Human-readable key-value block for reproducibility logs.
    pub fn to_config_block(&self) -> String {
        format!(
            "kind = \"linear-sigma\"\nsteps = {}\nsigma_first = {:e}\nsigma_last = {:e}\nalpha_bar_last = {:e}\ndigest = \"{}\"\n",
            self.steps,
            self.sigma[1].as_f64(),
            self.sigma[self.steps].as_f64(),
            self.alpha_bar[self.steps].as_f64(),
            self.digest()
        )
    }

    /// `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`.
    pub fn forward_noise(&self, x0: &ImageGrid<S>, t: usize, eps: &ImageGrid<S>) -> Result<ImageGrid<S>> {
        self.check_step(t, 0)?;
        let ab = self.alpha_bar[t];
        let (a, b) = (ab.sqrt(), (S::one() - ab).sqrt());
        x0.zip_map(eps, |x, e| a * x + b * e)
    }

    /// Clean-image estimate `x̂0 = x_t/√ᾱ_t − √(1−ᾱ_t)·ε̂/√ᾱ_t`.
    pub fn predict_x0(&self, x_t: &ImageGrid<S>, eps_hat: &ImageGrid<S>, t: usize) -> Result<ImageGrid<S>> {
        self.check_step(t, 1)?;
        let ab = self.alpha_bar[t];
        let root = ab.sqrt();
        let noise = (S::one() - ab).sqrt();
        x_t.zip_map(eps_hat, |x, e| x / root - noise * e / root)
    }

    /// Noise estimate consistent with a given clean estimate:
    /// `ε̂ = (x_t − √ᾱ_t·x̂0)/√(1−ᾱ_t)`.
    pub fn eps_from_x0(&self, x_t: &ImageGrid<S>, x0: &ImageGrid<S>, t: usize) -> Result<ImageGrid<S>> {
        self.check_step(t, 1)?;
        let ab = self.alpha_bar[t];
        let (root, noise) = (ab.sqrt(), (S::one() - ab).sqrt());
        x_t.zip_map(x0, |x, c| (x - root * c) / noise)
    }

    /// One forward transition `x_t ~ q(x_t | x_{t−1}) = N(√α_t·x_{t−1}, σ_t I)`
    /// given standard normal `z`.
    pub fn renoise_step(&self, x_prev: &ImageGrid<S>, t: usize, z: &ImageGrid<S>) -> Result<ImageGrid<S>> {
        self.check_step(t, 1)?;
        let (a, b) = (self.alpha[t].sqrt(), self.sigma[t].sqrt());
        x_prev.zip_map(z, |x, e| a * x + b * e)
    }
}
