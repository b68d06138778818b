//! Per-pixel guidance stop times.
//!
//! `M_T = (1−T_in)·T·M + (1−T_out)·T·(1−M)` gives, for every pixel, the
//! state index below which guidance is no longer applied. The denoising step
//! at `t` (producing `x_{t−1}`) is guided at a pixel iff `t − 1 ≥ M_T` there,
//! so a strength of `T_in` guides exactly `T_in·T` steps inside the mask,
//! always the leading block of the backward process.

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::scalar::Scalar;

/// Snaps values within rounding noise of an integer onto it, so thresholds
/// like `(1 − 0.2)·50` land on 40 rather than 40 + ε.
pub(crate) fn snap_integer(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r
    } else {
        v
    }
}

fn check_strength(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMask<S> {
    steps: usize,
    height: usize,
    width: usize,
    thresholds: Vec<S>,
}

impl<S: Scalar> TimeMask<S> {
    /// Builds the threshold grid from a (possibly smoothed) region mask.
    pub fn build(mask: &Mask<S>, t_in: f64, t_out: f64, steps: usize) -> Result<Self> {
        check_strength("T_in", t_in)?;
        check_strength("T_out", t_out)?;
        let total = steps as f64;
        let inside = snap_integer(total - t_in * total);
        let outside = snap_integer(total - t_out * total);
        let thresholds = mask
            .data()
            .iter()
            .map(|&m| {
                let m = m.as_f64();
                let v = if m == 1.0 {
                    inside
                } else if m == 0.0 {
                    outside
                } else {
                    snap_integer(m * inside + (1.0 - m) * outside)
                };
                S::of(v)
            })
            .collect();
        Ok(Self { steps, height: mask.height(), width: mask.width(), thresholds })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn thresholds(&self) -> &[S] {
        &self.thresholds
    }

    pub fn threshold(&self, y: usize, x: usize) -> S {
        self.thresholds[y * self.width + x]
    }

    /// Whether the denoising step at `t` is guided at flat pixel index `p`.
    #[inline]
    pub fn is_open(&self, p: usize, t: usize) -> bool {
        S::of_usize(t.saturating_sub(1)) >= self.thresholds[p]
    }

    /// Binary gate `M_t(t)` for the denoising step at `t`.
    pub fn gate(&self, t: usize) -> Mask<S> {
        let data = (0..self.thresholds.len())
            .map(|p| if self.is_open(p, t) { S::one() } else { S::zero() })
            .collect();
        Mask::new(self.height, self.width, data).expect("gate values are binary")
    }

    /// Number of denoising steps in `1..=T` guided at pixel `(y, x)`.
    pub fn guided_steps(&self, y: usize, x: usize) -> usize {
        let p = y * self.width + x;
        (1..=self.steps).filter(|&t| self.is_open(p, t)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_mask() -> Mask<f64> {
        Mask::from_fn(2, 2, |_, x| if x == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn twenty_percent_inside_all_outside() {
        let tm = TimeMask::build(&half_mask(), 0.2, 1.0, 50).unwrap();
        assert_eq!(tm.threshold(0, 0), 40.0);
        assert_eq!(tm.threshold(0, 1), 0.0);
        let guided: Vec<usize> = (1..=50).rev().filter(|&t| tm.is_open(0, t)).collect();
        assert_eq!(guided, (41..=50).rev().collect::<Vec<_>>());
        assert_eq!(tm.guided_steps(0, 1), 50);
    }

    #[test]
    fn saturated_strengths() {
        let full = TimeMask::build(&half_mask(), 1.0, 0.0, 50).unwrap();
        assert_eq!(full.guided_steps(0, 0), 50);
        assert_eq!(full.guided_steps(0, 1), 0);
        let none = TimeMask::build(&half_mask(), 0.0, 1.0, 50).unwrap();
        assert_eq!(none.threshold(0, 0), 50.0);
        assert_eq!(none.guided_steps(0, 0), 0);
    }

    #[test]
    fn rejects_out_of_range_strength() {
        assert!(matches!(TimeMask::build(&half_mask(), 1.2, 1.0, 50), Err(Error::Config(_))));
        assert!(matches!(TimeMask::build(&half_mask(), 0.5, -0.1, 50), Err(Error::Config(_))));
    }

    #[test]
    fn gate_monotone_in_t_and_strength() {
        let m = Mask::from_fn(3, 3, |y, x| (y * 3 + x) as f64 / 8.0);
        for steps in [7, 50, 250] {
            let mut prev: Option<Vec<usize>> = None;
            for k in 0..=10 {
                let t_in = k as f64 / 10.0;
                let tm = TimeMask::build(&m, t_in, 0.3, steps).unwrap();
                for p in 0..9 {
                    let open: Vec<bool> = (1..=steps).map(|t| tm.is_open(p, t)).collect();
                    // once open at t, open for every larger t
                    assert!(open.windows(2).all(|w| !w[0] || w[1]));
                }
                let counts: Vec<usize> = (0..9).map(|p| tm.guided_steps(p / 3, p % 3)).collect();
                if let Some(prev) = &prev {
                    assert!(counts.iter().zip(prev).all(|(c, p)| c >= p));
                }
                prev = Some(counts);
            }
        }
    }

    #[test]
    fn guided_count_is_strength_times_steps() {
        let m = Mask::<f64>::ones(1, 1);
        for steps in [10, 50, 250] {
            for k in 0..=20 {
                let t_in = k as f64 / 20.0;
                let tm = TimeMask::build(&m, t_in, 0.0, steps).unwrap();
                let expected = (t_in * steps as f64 + 1e-9).floor() as usize;
                assert_eq!(tm.guided_steps(0, 0), expected, "steps {steps} t_in {t_in}");
            }
        }
    }
}
