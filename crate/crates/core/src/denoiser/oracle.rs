//! Exact noise predictor for data drawn from an isotropic Gaussian mixture.
//!
//! Under `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε` with `x0 ~ Σ w_k N(μ_k, s_k² I)`, the
//! marginal of `x_t` is `Σ w_k N(√ᾱ_t μ_k, v_k I)` with
//! `v_k = ᾱ_t s_k² + 1 − ᾱ_t`, and the posterior mean `E[x0 | x_t]` is
//! available in closed form. The ε that a perfect denoiser would return
//! follows from inverting the forward map.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Denoiser, DenoiserRequest, NoisePrediction};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Shape};
use crate::scalar::Scalar;
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent<S> {
    pub weight: f64,
    pub mean: ImageGrid<S>,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<S> {
    components: Vec<MixtureComponent<S>>,
}

impl<S: Scalar> GaussianMixture<S> {
    pub fn new(components: Vec<MixtureComponent<S>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Config("mixture needs at least one component".into()))?;
        let shape = first.mean.shape();
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            if c.weight <= 0.0 || !c.weight.is_finite() {
                return Err(Error::Config(format!("component {k} weight {} must be positive", c.weight)));
            }
            if c.std < 0.0 || !c.std.is_finite() {
                return Err(Error::Config(format!("component {k} std {} must be finite and ≥ 0", c.std)));
            }
            c.mean.expect_shape(shape)?;
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    /// Equal-weight mixture with a shared standard deviation.
    pub fn uniform(means: Vec<ImageGrid<S>>, std: f64) -> Result<Self> {
        let w = 1.0 / means.len().max(1) as f64;
        Self::new(means.into_iter().map(|mean| MixtureComponent { weight: w, mean, std }).collect())
    }

    pub fn components(&self) -> &[MixtureComponent<S>] {
        &self.components
    }

    pub fn shape(&self) -> Shape {
        self.components[0].mean.shape()
    }

    /// Component posterior probabilities given `x_t`, accumulated in the log
    /// domain.
    pub fn responsibilities(&self, x_t: &ImageGrid<S>, t: usize, schedule: &NoiseSchedule<S>) -> Result<Vec<f64>> {
        x_t.expect_shape(self.shape())?;
        let ab = schedule.alpha_bar(t).as_f64();
        let root = ab.sqrt();
        let dim = x_t.data().len() as f64;
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let v = ab * c.std * c.std + (1.0 - ab);
                let sq: f64 = x_t
                    .data()
                    .iter()
                    .zip(c.mean.data())
                    .map(|(&x, &m)| {
                        let d = x.as_f64() - root * m.as_f64();
                        d * d
                    })
                    .sum();
                c.weight.ln() - 0.5 * dim * (2.0 * std::f64::consts::PI * v).ln() - sq / (2.0 * v)
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }

    /// `E[x0 | x_t]`.
    pub fn posterior_mean(&self, x_t: &ImageGrid<S>, t: usize, schedule: &NoiseSchedule<S>) -> Result<ImageGrid<S>> {
        check_step(t, schedule)?;
        let gamma = self.responsibilities(x_t, t, schedule)?;
        let ab = schedule.alpha_bar(t).as_f64();
        let root = ab.sqrt();
        let mut acc = vec![0.0f64; x_t.data().len()];
        for (c, &g) in self.components.iter().zip(&gamma) {
            if g == 0.0 {
                continue;
            }
            let v = ab * c.std * c.std + (1.0 - ab);
            let gain = root * c.std * c.std / v;
            for ((a, &x), &m) in acc.iter_mut().zip(x_t.data()).zip(c.mean.data()) {
                let m = m.as_f64();
                *a += g * (m + gain * (x.as_f64() - root * m));
            }
        }
        let shape = x_t.shape();
        ImageGrid::new(shape.height, shape.width, shape.channels, acc.into_iter().map(S::of).collect())
    }

    /// `ε̂ = (x_t − √ᾱ_t·E[x0|x_t]) / √(1−ᾱ_t)`.
    pub fn eps(&self, x_t: &ImageGrid<S>, t: usize, schedule: &NoiseSchedule<S>) -> Result<ImageGrid<S>> {
        let mean = self.posterior_mean(x_t, t, schedule)?;
        let ab = schedule.alpha_bar(t).as_f64();
        let (root, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
        x_t.zip_map(&mean, |x, m| S::of((x.as_f64() - root * m.as_f64()) / noise))
    }

    /// Draws `x0` and returns it with its component index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, ImageGrid<S>) {
        let u: f64 = rng.random();
        let mut k = self.components.len() - 1;
        let mut cum = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            cum += c.weight;
            if u < cum {
                k = i;
                break;
            }
        }
        let c = &self.components[k];
        let data = c
            .mean
            .data()
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                S::of(m.as_f64() + c.std * z)
            })
            .collect();
        let shape = c.mean.shape();
        (k, ImageGrid::new(shape.height, shape.width, shape.channels, data).expect("shape from existing grid"))
    }
}

fn check_step<S: Scalar>(t: usize, schedule: &NoiseSchedule<S>) -> Result<()> {
    if t == 0 || t > schedule.steps() {
        return Err(Error::Step(format!("t = {t} outside 1..={}", schedule.steps())));
    }
    Ok(())
}

/// Backend returning the mixture's exact ε for its schedule.
#[derive(Debug, Clone)]
pub struct OracleDenoiser<S> {
    mixture: GaussianMixture<S>,
    schedule: NoiseSchedule<S>,
}

impl<S: Scalar> OracleDenoiser<S> {
    pub fn new(mixture: GaussianMixture<S>, schedule: NoiseSchedule<S>) -> Self {
        Self { mixture, schedule }
    }

    pub fn mixture(&self) -> &GaussianMixture<S> {
        &self.mixture
    }
}

impl<S: Scalar> Denoiser<S> for OracleDenoiser<S> {
    fn grid_shape(&self) -> Shape {
        self.mixture.shape()
    }

    fn declared_steps(&self) -> Option<usize> {
        Some(self.schedule.steps())
    }

    fn predict(&mut self, request: &DenoiserRequest<'_, S>) -> Result<NoisePrediction<S>> {
        Ok(NoisePrediction::Single(self.mixture.eps(request.x_t, request.t, &self.schedule)?))
    }
}
