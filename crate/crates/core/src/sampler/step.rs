//! Single backward-diffusion transitions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::rng::gaussian_grid;
use crate::scalar::Scalar;
use crate::schedule::NoiseSchedule;

fn check_step<S: Scalar>(t: usize, schedule: &NoiseSchedule<S>) -> Result<()> {
    if t == 0 || t > schedule.steps() {
        return Err(Error::Step(format!("t = {t} outside 1..={}", schedule.steps())));
    }
    Ok(())
}

/// Posterior mean `μ = (x_t − σ_t/√(1−ᾱ_t)·ε̂)/√α_t`.
pub fn ddpm_mean<S: Scalar>(
    x_t: &ImageGrid<S>,
    eps_hat: &ImageGrid<S>,
    t: usize,
    schedule: &NoiseSchedule<S>,
) -> Result<ImageGrid<S>> {
    check_step(t, schedule)?;
    let inv_root_alpha = S::one() / schedule.alpha(t).sqrt();
    let coef = schedule.sigma(t) / (S::one() - schedule.alpha_bar(t)).sqrt();
    x_t.zip_map(eps_hat, |x, e| inv_root_alpha * (x - coef * e))
}

/// Ancestral step: `μ + √σ_t·z` for `t > 1`, the bare mean at `t = 1`.
/// Draws from `rng` only when noise is added.
pub fn ddpm_step<S: Scalar, R: Rng + ?Sized>(
    x_t: &ImageGrid<S>,
    eps_hat: &ImageGrid<S>,
    t: usize,
    schedule: &NoiseSchedule<S>,
    rng: &mut R,
) -> Result<ImageGrid<S>> {
    let mean = ddpm_mean(x_t, eps_hat, t, schedule)?;
    if t == 1 {
        return Ok(mean);
    }
    let z = gaussian_grid(rng, mean.shape());
    let std = schedule.sigma(t).sqrt();
    mean.zip_map(&z, |m, z| m + std * z)
}

/// Deterministic DDIM step from an explicit clean estimate and noise:
/// `√ᾱ_{t−1}·x̂0 + √(1−ᾱ_{t−1})·ε̂`.
pub fn ddim_from_prediction<S: Scalar>(
    x0_hat: &ImageGrid<S>,
    eps_hat: &ImageGrid<S>,
    t: usize,
    schedule: &NoiseSchedule<S>,
) -> Result<ImageGrid<S>> {
    check_step(t, schedule)?;
    let ab = schedule.alpha_bar(t - 1);
    let (a, b) = (ab.sqrt(), (S::one() - ab).sqrt());
    x0_hat.zip_map(eps_hat, |x, e| a * x + b * e)
}

/// Deterministic DDIM step (η = 0).
pub fn ddim_step<S: Scalar>(
    x_t: &ImageGrid<S>,
    eps_hat: &ImageGrid<S>,
    t: usize,
    schedule: &NoiseSchedule<S>,
) -> Result<ImageGrid<S>> {
    let x0 = schedule.predict_x0(x_t, eps_hat, t)?;
    ddim_from_prediction(&x0, eps_hat, t, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn grid(seed: usize) -> ImageGrid<f64> {
        ImageGrid::from_fn(3, 3, 2, |y, x, c| (((y * 5 + x * 3 + c * 7 + seed) % 11) as f64 - 5.0) / 5.0)
    }

    #[test]
    fn last_step_is_deterministic() {
        let s = NoiseSchedule::<f64>::linear(10).unwrap();
        let a = ddpm_step(&grid(1), &grid(2), 1, &s, &mut stream(1, 0)).unwrap();
        let b = ddpm_step(&grid(1), &grid(2), 1, &s, &mut stream(2, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, ddpm_mean(&grid(1), &grid(2), 1, &s).unwrap());
    }

    #[test]
    fn seeded_steps_repeat() {
        let s = NoiseSchedule::<f64>::linear(10).unwrap();
        let a = ddpm_step(&grid(1), &grid(2), 5, &s, &mut stream(9, 0)).unwrap();
        let b = ddpm_step(&grid(1), &grid(2), 5, &s, &mut stream(9, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ddpm_mean(&grid(1), &grid(2), 5, &s).unwrap());
    }

    #[test]
    fn single_step_schedule_closed_form() {
        // T = 1: ᾱ_1 = α_1, so μ = (x_1 − √(1−α_1)·ε)/√α_1 = x0 when ε is the true noise.
        let s = NoiseSchedule::<f64>::linear(1).unwrap();
        let x0 = grid(3);
        let eps = grid(4);
        let x1 = s.forward_noise(&x0, 1, &eps).unwrap();
        let mean = ddpm_step(&x1, &eps, 1, &s, &mut stream(0, 0)).unwrap();
        let a1 = s.alpha(1);
        let want = x1.zip_map(&eps, |x, e| (x - (1.0 - a1) / (1.0 - a1).sqrt() * e) / a1.sqrt()).unwrap();
        assert!(mean.max_abs_diff(&want).unwrap() < 1e-6);
        assert!(mean.max_abs_diff(&x0).unwrap() < 1e-6);
    }

    #[test]
    fn ddim_flat_schedule_fixed_point() {
        // σ_2 = 0 makes ᾱ_1 = ᾱ_2, so the step must return its input.
        let s = NoiseSchedule::<f64>::from_sigmas_unchecked(&[0.3, 0.0]);
        let x = grid(5);
        let got = ddim_step(&x, &grid(6), 2, &s).unwrap();
        assert!(got.max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn step_range_checked() {
        let s = NoiseSchedule::<f64>::linear(4).unwrap();
        assert!(ddim_step(&grid(0), &grid(0), 0, &s).is_err());
        assert!(ddpm_step(&grid(0), &grid(0), 5, &s, &mut stream(0, 0)).is_err());
    }
}
