//! Seeded noise streams.
//!
//! A run owns two independent ChaCha8 streams derived from one seed: the
//! sampler stream (initial state, DDPM noise, renoising) and the reference
//! stream (noising the guidance image). Keeping them apart means the sampler
//! trajectory consumes the same random numbers whatever the guidance
//! settings are.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{ImageGrid, Shape};
use crate::scalar::Scalar;

pub const SAMPLER_STREAM: u64 = 0;
pub const REFERENCE_STREAM: u64 = 1;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Grid of i.i.d. standard normal values, drawn in storage order.
pub fn gaussian_grid<S: Scalar, R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> ImageGrid<S> {
    let data = (0..shape.len())
        .map(|_| S::of(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    ImageGrid::new(shape.height, shape.width, shape.channels, data).expect("shape is non-empty")
}
