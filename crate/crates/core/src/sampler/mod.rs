//! The backward-diffusion loop with region-controlled guidance.
//!
//! A run starts from `x_T ~ N(0, I)` and walks the resample schedule. Each
//! denoise action queries the backend (combining conditional and
//! unconditional predictions with classifier-free guidance when a condition
//! is supplied), then either
//!
//! * `x_t` space: takes the DDPM/DDIM step to get the proposal `x'_{t−1}`
//!   and applies [`guidance_update_xt`] against the reference freshly noised
//!   to `t − 1`; or
//! * `x̂0` space: blends the clean prediction with [`guidance_update_x0`]
//!   and takes the step on the blended pair.
//!
//! Renoise actions apply one forward transition `q(x_t | x_{t−1})`.

mod config;
pub mod diagnostics;
pub mod guidance;
pub mod step;
pub mod trace;

pub use config::{BlendSpace, GuidanceConfig, SamplerKind};
pub use diagnostics::{boundary_energy, boundary_shell};
pub use guidance::{guidance_update_x0, guidance_update_xt, BlendedPrediction, Guided, GuidanceMasks};
pub use step::{ddim_from_prediction, ddim_step, ddpm_mean, ddpm_step};
pub use trace::JsonTrace;

use crate::denoiser::{Condition, Denoiser, DenoiserRequest};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask, Shape};
use crate::resample::{Action, ResampleSchedule};
use crate::rng::{gaussian_grid, stream, REFERENCE_STREAM, SAMPLER_STREAM};
use crate::scalar::Scalar;
use crate::schedule::NoiseSchedule;

/// What happened at one schedule action.
#[derive(Debug)]
pub struct StepRecord<'a, S> {
    /// Position in the action list.
    pub seq: usize,
    pub action: Action,
    /// State after the action.
    pub state: &'a ImageGrid<S>,
    /// Pixels where the guidance gate was open (0 for renoise actions).
    pub guided_pixels: usize,
    /// Gate used for this action, when guidance is active.
    pub gate: Option<&'a Mask<S>>,
}

pub trait StepObserver<S> {
    fn on_step(&mut self, record: &StepRecord<'_, S>);
}

impl<S, F: FnMut(&StepRecord<'_, S>)> StepObserver<S> for F {
    fn on_step(&mut self, record: &StepRecord<'_, S>) {
        self(record)
    }
}

/// Observer that ignores everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct Silent;

impl<S> StepObserver<S> for Silent {
    fn on_step(&mut self, _record: &StepRecord<'_, S>) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<S> {
    pub image: ImageGrid<S>,
    /// Backend calls made.
    pub evaluations: usize,
    /// Sum over denoise actions of gated pixels.
    pub guided_pixel_steps: usize,
    pub schedule_digest: String,
}

struct Guidance<'a, S> {
    reference: &'a ImageGrid<S>,
    masks: GuidanceMasks<S>,
}

/// Guided compositing run: samples an image whose low-frequency content
/// follows `reference` per the region settings in `cfg`.
pub fn run_composite<S: Scalar, D: Denoiser<S>>(
    reference: &ImageGrid<S>,
    mask: &Mask<S>,
    cfg: &GuidanceConfig,
    backend: &mut D,
    condition: Option<&Condition>,
) -> Result<RunOutput<S>> {
    run_composite_observed(reference, mask, cfg, backend, condition, &mut Silent)
}

pub fn run_composite_observed<S: Scalar, D: Denoiser<S>>(
    reference: &ImageGrid<S>,
    mask: &Mask<S>,
    cfg: &GuidanceConfig,
    backend: &mut D,
    condition: Option<&Condition>,
    observer: &mut dyn StepObserver<S>,
) -> Result<RunOutput<S>> {
    cfg.validate(reference.shape())?;
    mask.expect_matches(reference.shape())?;
    let masks = GuidanceMasks::build(
        mask,
        cfg.effective_p_blend(),
        cfg.t_in,
        cfg.t_out,
        cfg.n_in,
        cfg.n_out,
        cfg.steps,
    )?;
    run(reference.shape(), Some(Guidance { reference, masks }), cfg, backend, condition, observer)
}

/// Plain sampling with no reference. Guidance fields of `cfg` are ignored;
/// resampling still follows `r` and `u`.
pub fn sample<S: Scalar, D: Denoiser<S>>(
    shape: Shape,
    cfg: &GuidanceConfig,
    backend: &mut D,
    condition: Option<&Condition>,
    observer: &mut dyn StepObserver<S>,
) -> Result<RunOutput<S>> {
    cfg.validate(shape)?;
    run(shape, None, cfg, backend, condition, observer)
}

fn run<S: Scalar, D: Denoiser<S>>(
    shape: Shape,
    guidance: Option<Guidance<'_, S>>,
    cfg: &GuidanceConfig,
    backend: &mut D,
    condition: Option<&Condition>,
    observer: &mut dyn StepObserver<S>,
) -> Result<RunOutput<S>> {
    if backend.grid_shape() != shape {
        return Err(Error::Shape(format!("backend works on {}, run is {shape}", backend.grid_shape())));
    }
    if let Some(declared) = backend.declared_steps() {
        if declared != cfg.steps {
            return Err(Error::Protocol(format!("backend declares {declared} steps, run uses {}", cfg.steps)));
        }
    }
    let schedule = NoiseSchedule::<S>::linear(cfg.steps)?;
    let plan = ResampleSchedule::build(cfg.steps, cfg.r, cfg.u)?;
    let g = S::of(cfg.guidance_scale);

    let mut sampler_rng = stream(cfg.seed, SAMPLER_STREAM);
    let mut reference_rng = stream(cfg.seed, REFERENCE_STREAM);
    let mut x: ImageGrid<S> = gaussian_grid(&mut sampler_rng, shape);
    let mut evaluations = 0;
    let mut guided_pixel_steps = 0;

    for (seq, &action) in plan.actions().iter().enumerate() {
        let mut guided_pixels = 0;
        let mut gate = None;
        match action {
            Action::Denoise(t) => {
                let request = DenoiserRequest { x_t: &x, t, condition, remote_guidance: None };
                let eps = backend
                    .predict(&request)
                    .and_then(|p| p.resolve(g))
                    .map_err(|e| e.at_step(t))?;
                evaluations += 1;
                eps.expect_shape(shape).map_err(|e| e.at_step(t))?;
                x = match (&guidance, cfg.blend_space) {
                    (None, _) => take_step(&x, &eps, t, cfg.sampler, &schedule, &mut sampler_rng)?,
                    (Some(gd), BlendSpace::Xt) => {
                        let proposal = take_step(&x, &eps, t, cfg.sampler, &schedule, &mut sampler_rng)?;
                        let noise = gaussian_grid(&mut reference_rng, shape);
                        let y_prev = schedule.forward_noise(gd.reference, t - 1, &noise)?;
                        let out = guidance_update_xt(&proposal, &y_prev, t, &gd.masks)?;
                        guided_pixels = out.guided_pixels;
                        out.grid
                    }
                    (Some(gd), BlendSpace::X0) => {
                        let blended = guidance_update_x0(&x, &eps, gd.reference, t, &gd.masks, &schedule)?;
                        guided_pixels = blended.guided_pixels;
                        match cfg.sampler {
                            SamplerKind::Ddim => ddim_from_prediction(&blended.x0, &blended.eps, t, &schedule)?,
                            SamplerKind::Ddpm => ddpm_step(&x, &blended.eps, t, &schedule, &mut sampler_rng)?,
                        }
                    }
                };
                if let Some(gd) = &guidance {
                    gate = Some(gd.masks.time.gate(t));
                }
            }
            Action::Renoise(t) => {
                let z = gaussian_grid(&mut sampler_rng, shape);
                x = schedule.renoise_step(&x, t, &z)?;
            }
        }
        if !x.is_finite() {
            let t = match action {
                Action::Denoise(t) | Action::Renoise(t) => t,
            };
            return Err(Error::Diagnostic("state became non-finite".into()).at_step(t));
        }
        guided_pixel_steps += guided_pixels;
        observer.on_step(&StepRecord { seq, action, state: &x, guided_pixels, gate: gate.as_ref() });
    }

    Ok(RunOutput { image: x, evaluations, guided_pixel_steps, schedule_digest: schedule.digest() })
}

fn take_step<S: Scalar>(
    x: &ImageGrid<S>,
    eps: &ImageGrid<S>,
    t: usize,
    kind: SamplerKind,
    schedule: &NoiseSchedule<S>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<ImageGrid<S>> {
    match kind {
        SamplerKind::Ddpm => ddpm_step(x, eps, t, schedule, rng),
        SamplerKind::Ddim => ddim_step(x, eps, t, schedule),
    }
}
