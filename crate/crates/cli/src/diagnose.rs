//! Boundary-energy comparison across the two aliasing mitigations.

use rayon::prelude::*;
use serde::Serialize;
use xdc_core::sampler::{boundary_energy, Silent};
use xdc_core::{default_p_blend, BlendSpace};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{self, Inputs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub seed: u64,
    pub p_blend: usize,
    pub blend_space: BlendSpace,
    pub band: usize,
    pub boundary_energy: f64,
}

/// Smoothing width used for the "mitigated" variants: the configured width
/// when non-zero, otherwise the default for the filter factors.
pub fn smoothing_width(cfg: &RunConfig) -> usize {
    cfg.p_blend.filter(|&p| p > 0).unwrap_or_else(|| default_p_blend(cfg.n_in, cfg.n_out))
}

/// The four variants `p_blend ∈ {0, width} × blend_space ∈ {xt, x0}`.
pub fn variants(cfg: &RunConfig) -> Vec<(usize, BlendSpace)> {
    let p = smoothing_width(cfg);
    [0, p].into_iter().flat_map(|p| [(p, BlendSpace::Xt), (p, BlendSpace::X0)]).collect()
}

/// Runs every variant for each seed in `seeds` and measures the boundary
/// energy of the output around the mask.
pub fn run(cfg: &RunConfig, inputs: &Inputs, seeds: &[u64]) -> Result<Vec<Record>, CliError> {
    let jobs: Vec<(u64, usize, BlendSpace)> =
        seeds.iter().flat_map(|&s| variants(cfg).into_iter().map(move |(p, b)| (s, p, b))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(seed, p_blend, blend_space)| {
                let mut c = cfg.clone();
                c.seed = seed;
                c.p_blend = Some(p_blend);
                c.blend_space = blend_space;
                let out = pipeline::run(&c, inputs, &mut Silent)?;
                let e = boundary_energy(&out.image, &inputs.mask, cfg.band)?;
                Ok(Record { seed, p_blend, blend_space, band: cfg.band, boundary_energy: e })
            })
            .collect()
    })
}
