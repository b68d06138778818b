//! Resampling schedule: the plain descending step sequence, with extra
//! renoise/denoise round trips once the backward process reaches the last
//! `R` fraction of steps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::time_mask::snap_integer;

/// Default number of denoiser passes per step inside the resampling region.
pub const DEFAULT_REPEATS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    /// Denoise `x_t → x_{t−1}`.
    Denoise(usize),
    /// Renoise `x_{t−1} → x_t` with one forward transition.
    Renoise(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleSchedule {
    steps: usize,
    start: usize,
    repeats: usize,
    actions: Vec<Action>,
}

impl ResampleSchedule {
    /// `R` is the fraction of steps (counted from the clean end) that are
    /// resampled; each resampled step runs the denoiser `repeats` times with
    /// jump length 1.
    pub fn build(steps: usize, r: f64, repeats: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("R = {r} outside [0, 1]")));
        }
        if repeats == 0 {
            return Err(Error::Config("resample repeats U must be at least 1".into()));
        }
        if steps == 0 {
            return Err(Error::Schedule("step count must be at least 1".into()));
        }
        let start = snap_integer(r * steps as f64).ceil() as usize;
        let mut actions = Vec::with_capacity(steps + 2 * (repeats - 1) * start);
        for t in (1..=steps).rev() {
            actions.push(Action::Denoise(t));
            if t <= start {
                for _ in 1..repeats {
                    actions.push(Action::Renoise(t));
                    actions.push(Action::Denoise(t));
                }
            }
        }
        Ok(Self { steps, start, repeats, actions })
    }

    pub fn plain(steps: usize) -> Result<Self> {
        Self::build(steps, 0.0, 1)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Largest step index that is resampled (`ceil(R·T)`; 0 for none).
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Denoiser evaluations the schedule performs.
    pub fn evaluations(&self) -> usize {
        self.actions.iter().filter(|a| matches!(a, Action::Denoise(_))).count()
    }

    /// `T + (U − 1)·ceil(R·T)`.
    pub fn expected_evaluations(&self) -> usize {
        self.steps + (self.repeats - 1) * self.start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_r_is_plain() {
        for u in 1..5 {
            let s = ResampleSchedule::build(50, 0.0, u).unwrap();
            assert_eq!(s.evaluations(), 50);
            let want: Vec<Action> = (1..=50).rev().map(Action::Denoise).collect();
            assert_eq!(s.actions(), want.as_slice());
        }
    }

    #[test]
    fn immersion_setting_count() {
        let s = ResampleSchedule::build(50, 0.2, 2).unwrap();
        assert_eq!(s.start(), 10);
        assert_eq!(s.evaluations(), 60);
        // t = 11 is plain, t = 10 is the first resampled step
        let pos = s.actions().iter().position(|a| *a == Action::Denoise(10)).unwrap();
        assert_eq!(s.actions()[pos - 1], Action::Denoise(11));
        assert_eq!(&s.actions()[pos..pos + 3], &[Action::Denoise(10), Action::Renoise(10), Action::Denoise(10)]);
    }

    #[test]
    fn single_repeat_equals_plain() {
        assert_eq!(
            ResampleSchedule::build(37, 1.0, 1).unwrap().actions(),
            ResampleSchedule::build(37, 0.0, 1).unwrap().actions()
        );
    }

    #[test]
    fn every_renoise_followed_by_denoise_at_same_step() {
        let s = ResampleSchedule::build(20, 0.55, 3).unwrap();
        for w in s.actions().windows(2) {
            if let Action::Renoise(t) = w[0] {
                assert_eq!(w[1], Action::Denoise(t));
            }
        }
        assert_eq!(s.actions().last(), Some(&Action::Denoise(1)));
    }

    #[test]
    fn count_formula_on_sweep() {
        for steps in [1, 7, 50, 250] {
            for r in [0.0, 0.1, 0.2, 0.33, 0.5, 0.7, 1.0] {
                for u in [1, 2, 4, 7] {
                    let s = ResampleSchedule::build(steps, r, u).unwrap();
                    assert_eq!(s.evaluations(), s.expected_evaluations());
                }
            }
        }
        assert_eq!(ResampleSchedule::build(10, 0.7, 2).unwrap().start(), 7);
    }

    #[test]
    fn invalid_parameters() {
        assert!(ResampleSchedule::build(10, 1.5, 2).is_err());
        assert!(ResampleSchedule::build(10, 0.5, 0).is_err());
    }
}
