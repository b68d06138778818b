//! Masked low-frequency guidance updates.
//!
//! Both updates replace, at gated pixels, the low-pass band `φ(·; M_b)` of
//! the current estimate with that of the reference:
//! `x ← x + M_t(t)·(φ(ref) − φ(x))`. In `x_t` space the estimate is the
//! proposal `x'_{t−1}` and the reference is `y` noised to `t − 1`; in `x̂0`
//! space both are clean images and the noise estimate is re-derived from the
//! blended prediction.

use crate::error::Result;
use crate::filter::blend_filter;
use crate::grid::{ImageGrid, Mask};
use crate::mask_ops::{blur_outwards, SmoothingFunction};
use crate::scalar::Scalar;
use crate::schedule::NoiseSchedule;
use crate::time_mask::TimeMask;

/// Blend mask `M_b`, time mask `M_T` and the per-region filter factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceMasks<S> {
    pub blend: Mask<S>,
    pub time: TimeMask<S>,
    pub n_in: usize,
    pub n_out: usize,
}

impl<S: Scalar> GuidanceMasks<S> {
    /// Smooths `mask` outwards by `p_blend` pixels (when non-zero) and
    /// derives both masks from the result.
    pub fn build(
        mask: &Mask<S>,
        p_blend: usize,
        t_in: f64,
        t_out: f64,
        n_in: usize,
        n_out: usize,
        steps: usize,
    ) -> Result<Self> {
        let blend = if p_blend == 0 {
            mask.clone()
        } else {
            blur_outwards(mask, p_blend, &SmoothingFunction::linear())?.values
        };
        let time = TimeMask::build(&blend, t_in, t_out, steps)?;
        Ok(Self { blend, time, n_in, n_out })
    }

    fn open_pixels(&self, t: usize) -> Vec<bool> {
        (0..self.blend.data().len()).map(|p| self.time.is_open(p, t)).collect()
    }

    fn filter(&self, x: &ImageGrid<S>) -> Result<ImageGrid<S>> {
        blend_filter(x, &self.blend, self.n_in, self.n_out)
    }
}

/// Result of one guidance update: the new grid and how many pixels the gate
/// let through.
#[derive(Debug, Clone, PartialEq)]
pub struct Guided<S> {
    pub grid: ImageGrid<S>,
    pub guided_pixels: usize,
}

/// `x_{t−1} = x' + M_t(t)·(φ(y_{t−1}; M_b) − φ(x'; M_b))`.
///
/// `y_prev` is the reference already noised to step `t − 1`.
pub fn guidance_update_xt<S: Scalar>(
    x_prime: &ImageGrid<S>,
    y_prev: &ImageGrid<S>,
    t: usize,
    masks: &GuidanceMasks<S>,
) -> Result<Guided<S>> {
    x_prime.expect_shape(y_prev.shape())?;
    masks.blend.expect_matches(x_prime.shape())?;
    let open = masks.open_pixels(t);
    let guided_pixels = open.iter().filter(|&&o| o).count();
    if guided_pixels == 0 {
        return Ok(Guided { grid: x_prime.clone(), guided_pixels });
    }
    let fy = masks.filter(y_prev)?;
    let fx = masks.filter(x_prime)?;
    let mut out = x_prime.clone();
    let pixels = open.len();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if open[i % pixels] {
            *v += fy.data()[i] - fx.data()[i];
        }
    }
    Ok(Guided { grid: out, guided_pixels })
}

/// Clean estimate and matching noise estimate after blending in `x̂0` space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedPrediction<S> {
    pub x0: ImageGrid<S>,
    pub eps: ImageGrid<S>,
    pub guided_pixels: usize,
}

/// Blends the denoiser's clean-image prediction towards the reference:
/// `x̂0' = x̂0 + M_t(t)·(φ(y0; M_b) − φ(x̂0; M_b))`, then recomputes
/// `ε̂' = (x_t − √ᾱ_t·x̂0')/√(1−ᾱ_t)` at gated pixels. Ungated pixels keep
/// the original ε̂ bit for bit.
pub fn guidance_update_x0<S: Scalar>(
    x_t: &ImageGrid<S>,
    eps_hat: &ImageGrid<S>,
    y0: &ImageGrid<S>,
    t: usize,
    masks: &GuidanceMasks<S>,
    schedule: &NoiseSchedule<S>,
) -> Result<BlendedPrediction<S>> {
    x_t.expect_shape(y0.shape())?;
    let x0 = schedule.predict_x0(x_t, eps_hat, t)?;
    let open = masks.open_pixels(t);
    let guided_pixels = open.iter().filter(|&&o| o).count();
    if guided_pixels == 0 {
        return Ok(BlendedPrediction { x0, eps: eps_hat.clone(), guided_pixels });
    }
    let fy = masks.filter(y0)?;
    let fx = masks.filter(&x0)?;
    let ab = schedule.alpha_bar(t);
    let (root, noise) = (ab.sqrt(), (S::one() - ab).sqrt());
    let mut blended = x0;
    let mut eps = eps_hat.clone();
    let pixels = open.len();
    for i in 0..blended.data().len() {
        if open[i % pixels] {
            let v = blended.data()[i] + (fy.data()[i] - fx.data()[i]);
            blended.data_mut()[i] = v;
            eps.data_mut()[i] = (x_t.data()[i] - root * v) / noise;
        }
    }
    Ok(BlendedPrediction { x0: blended, eps, guided_pixels })
}
