//! Unguided samples from a known two-component mixture.

use rayon::prelude::*;
use serde::Serialize;
use xdc_core::sampler::Silent;
use xdc_core::{sample, GaussianMixture, Grid, GuidanceConfig, ImageGrid, NoiseSchedule, OracleDenoiser};

use crate::config::RunConfig;
use crate::error::CliError;

/// `±0.5` on a checkerboard of 4×4 blocks, equal weights, shared `std`.
pub fn toy_mixture(height: usize, width: usize, std: f64) -> Result<GaussianMixture<f64>, CliError> {
    let mu = ImageGrid::from_fn(height, width, 1, |y, x, _| if (y / 4 + x / 4) % 2 == 0 { 0.5 } else { -0.5 });
    Ok(GaussianMixture::uniform(vec![mu.clone(), mu.scale(-1.0)], std)?)
}

/// Index of the nearest component mean and the RMS distance to it.
pub fn assign(gmm: &GaussianMixture<f64>, x: &Grid) -> (usize, f64) {
    gmm.components()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let sq: f64 = x.data().iter().zip(c.mean.data()).map(|(a, b)| (a - b).powi(2)).sum();
            (k, (sq / x.data().len() as f64).sqrt())
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("mixture is non-empty")
}

#[derive(Debug, Clone, Serialize)]
pub struct ToySample {
    pub index: usize,
    pub seed: u64,
    pub component: usize,
    pub rms_to_mean: f64,
    #[serde(skip)]
    pub image: Grid,
}

/// Draws `count` samples with seeds `cfg.seed + i`, honouring the sampler,
/// step count and resampling settings.
pub fn run(cfg: &RunConfig, gmm: &GaussianMixture<f64>, count: usize) -> Result<Vec<ToySample>, CliError> {
    let shape = gmm.shape();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|index| {
                let seed = cfg.seed.wrapping_add(index as u64);
                let g = GuidanceConfig { seed, t_in: 0.0, t_out: 0.0, ..cfg.guidance() };
                let mut backend = OracleDenoiser::new(gmm.clone(), NoiseSchedule::linear(g.steps)?);
                let out = sample(shape, &g, &mut backend, None, &mut Silent)?;
                let (component, rms_to_mean) = assign(gmm, &out.image);
                Ok(ToySample { index, seed, component, rms_to_mean, image: out.image })
            })
            .collect()
    })
}
