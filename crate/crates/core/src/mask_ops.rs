//! Outward mask smoothing and the one-pixel morphology it needs.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::scalar::Scalar;

/// Blend width used when none is configured: four pixels per unit of the
/// coarser filter factor.
pub fn default_p_blend(n_in: usize, n_out: usize) -> usize {
    4 * n_in.max(n_out)
}

/// Monotone map `s: [0,1] → [0,1]` with `s(0) = 0`, `s(1) = 1`.
#[derive(Clone)]
pub struct SmoothingFunction {
    name: &'static str,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for SmoothingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothingFunction({})", self.name)
    }
}

impl Default for SmoothingFunction {
    fn default() -> Self {
        Self::linear()
    }
}

impl SmoothingFunction {
    pub fn linear() -> Self {
        Self { name: "linear", f: Arc::new(|x| x) }
    }

    /// Cubic Hermite `3x² − 2x³`.
    pub fn smoothstep() -> Self {
        Self { name: "smoothstep", f: Arc::new(|x| x * x * (3.0 - 2.0 * x)) }
    }

    /// Wraps an arbitrary function after checking the endpoint conditions and
    /// monotonicity on a 1025-point grid.
    pub fn custom(name: &'static str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if f(0.0) != 0.0 || f(1.0) != 1.0 {
            return Err(Error::Mask(format!("smoothing function {name} must map 0→0 and 1→1")));
        }
        let samples: Vec<f64> = (0..=1024).map(|i| f(i as f64 / 1024.0)).collect();
        if samples.windows(2).any(|w| w[1] < w[0] || w[1].is_nan()) || samples.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Mask(format!("smoothing function {name} must be monotone into [0, 1]")));
        }
        Ok(Self { name, f: Arc::new(f) })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// Max over each pixel and its 4-connected neighbours.
pub fn dilate<S: Scalar>(mask: &Mask<S>) -> Mask<S> {
    morph(mask, S::max)
}

/// Min over each pixel and its 4-connected neighbours; pixels beyond the
/// border do not take part.
pub fn erode<S: Scalar>(mask: &Mask<S>) -> Mask<S> {
    morph(mask, S::min)
}

fn morph<S: Scalar>(mask: &Mask<S>, pick: fn(S, S) -> S) -> Mask<S> {
    let (h, w) = (mask.height(), mask.width());
    Mask::from_fn(h, w, |y, x| {
        let mut v = mask.get(y, x);
        if y > 0 {
            v = pick(v, mask.get(y - 1, x));
        }
        if y + 1 < h {
            v = pick(v, mask.get(y + 1, x));
        }
        if x > 0 {
            v = pick(v, mask.get(y, x - 1));
        }
        if x + 1 < w {
            v = pick(v, mask.get(y, x + 1));
        }
        v
    })
}

/// A binary mask blurred outwards over `p_blend` one-pixel shells.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedMask<S> {
    pub base: Mask<S>,
    pub p_blend: usize,
    pub values: Mask<S>,
}

/// Blurs a binary mask only outside its support.
///
/// Shell `d` (pixels first reached by the `d`-th dilation, `d < p_blend`)
/// receives the telescoped weight sum
/// `Σ_{p=d}^{p_blend−1} s((p+1)/p_blend) − s(p/p_blend) = 1 − s(d/p_blend)`,
/// which is exactly 1 on the original support and 0 beyond the last shell.
pub fn blur_outwards<S: Scalar>(
    mask: &Mask<S>,
    p_blend: usize,
    smoothing: &SmoothingFunction,
) -> Result<SmoothedMask<S>> {
    if !mask.is_binary() {
        return Err(Error::Mask("blur_outwards expects a binary mask".into()));
    }
    if p_blend == 0 {
        return Ok(SmoothedMask { base: mask.clone(), p_blend, values: mask.clone() });
    }
    let n = mask.data().len();
    let mut shell: Vec<Option<usize>> = vec![None; n];
    let mut current = mask.clone();
    for d in 0..p_blend {
        for (p, v) in current.data().iter().enumerate() {
            if shell[p].is_none() && *v == S::one() {
                shell[p] = Some(d);
            }
        }
        if d + 1 < p_blend {
            current = dilate(&current);
        }
    }
    let values: Vec<S> = shell
        .iter()
        .map(|d| match d {
            Some(0) => S::one(),
            Some(d) => S::of((1.0 - smoothing.eval(*d as f64 / p_blend as f64)).clamp(0.0, 1.0)),
            None => S::zero(),
        })
        .collect();
    let values = Mask::new(mask.height(), mask.width(), values)?;
    Ok(SmoothedMask { base: mask.clone(), p_blend, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct transcription of the accumulate-then-dilate loop.
    fn accumulate_reference(mask: &Mask<f64>, p_blend: usize, s: &SmoothingFunction) -> Vec<f64> {
        let mut out = vec![0.0; mask.data().len()];
        let mut m = mask.clone();
        for p in 0..p_blend {
            let wgt = s.eval((p + 1) as f64 / p_blend as f64) - s.eval(p as f64 / p_blend as f64);
            for (o, v) in out.iter_mut().zip(m.data()) {
                *o += wgt * v;
            }
            m = dilate(&m);
        }
        out
    }

    fn row(values: &[f64]) -> Mask<f64> {
        Mask::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn hand_trace_1d() {
        let m = row(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        let s = blur_outwards(&m, 2, &SmoothingFunction::linear()).unwrap();
        assert_eq!(s.values.data(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        assert_eq!(accumulate_reference(&m, 2, &SmoothingFunction::linear()), vec![0.0, 0.5, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn zero_width_is_identity() {
        let m = row(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(blur_outwards(&m, 0, &SmoothingFunction::linear()).unwrap().values, m);
    }

    #[test]
    fn full_mask_fixed_point() {
        let m = Mask::<f64>::ones(5, 6);
        for p in [1, 3, 10] {
            for s in [SmoothingFunction::linear(), SmoothingFunction::smoothstep()] {
                assert_eq!(blur_outwards(&m, p, &s).unwrap().values, m);
            }
        }
    }

    #[test]
    fn rejects_fractional_input() {
        let m = row(&[0.0, 0.5]);
        assert!(matches!(blur_outwards(&m, 2, &SmoothingFunction::linear()), Err(Error::Mask(_))));
    }

    #[test]
    fn dilation_examples() {
        let centre = Mask::<f64>::from_fn(3, 3, |y, x| if (y, x) == (1, 1) { 1.0 } else { 0.0 });
        let d = dilate(&centre);
        assert_eq!(d.data(), &[0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let empty = Mask::<f64>::zeros(4, 4);
        assert_eq!(dilate(&empty), empty);
    }

    fn support(m: &Mask<f64>) -> Vec<(usize, usize)> {
        (0..m.height())
            .flat_map(|y| (0..m.width()).map(move |x| (y, x)))
            .filter(|&(y, x)| m.get(y, x) > 0.0)
            .collect()
    }

    fn single(y0: usize, x0: usize) -> Mask<f64> {
        Mask::from_fn(7, 7, |y, x| if (y, x) == (y0, x0) { 1.0 } else { 0.0 })
    }

    #[test]
    fn diagonal_supports_by_enumeration() {
        // Touching diagonal neighbours: the two plus shapes share (2,3) and (3,2).
        let a = support(&dilate(&single(2, 2)));
        let b = support(&dilate(&single(3, 3)));
        let shared: Vec<_> = a.iter().filter(|p| b.contains(p)).copied().collect();
        assert_eq!(shared, vec![(2, 3), (3, 2)]);
        // One pixel further apart along the diagonal they stay disjoint.
        let c = support(&dilate(&single(4, 4)));
        assert!(a.iter().all(|p| !c.contains(p)));
    }

    #[test]
    fn custom_smoothing_validation() {
        assert!(SmoothingFunction::custom("sq", |x| x * x).is_ok());
        assert!(SmoothingFunction::custom("bad", |x| 1.0 - x).is_err());
        assert!(SmoothingFunction::custom("wiggle", |x| if x == 1.0 { 1.0 } else { (x * 20.0).sin().abs() * x }).is_err());
    }

    fn random_mask() -> impl Strategy<Value = Mask<f64>> {
        (2usize..24, 2usize..24).prop_flat_map(|(h, w)| {
            proptest::collection::vec(proptest::bool::weighted(0.08), h * w)
                .prop_map(move |b| Mask::new(h, w, b.into_iter().map(|v| v as u8 as f64).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn closed_form_matches_accumulation(m in random_mask(), p in 1usize..12) {
            for s in [SmoothingFunction::linear(), SmoothingFunction::smoothstep()] {
                let got = blur_outwards(&m, p, &s).unwrap();
                let want = accumulate_reference(&m, p, &s);
                for (g, w) in got.values.data().iter().zip(&want) {
                    prop_assert!((g - w).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn linear_shells_decay_by_one_over_p(m in random_mask(), p in 1usize..10) {
            let got = blur_outwards(&m, p, &SmoothingFunction::linear()).unwrap();
            let mut shell = m.clone();
            let mut seen = vec![false; m.data().len()];
            for d in 0..p + 2 {
                for (i, seen) in seen.iter_mut().enumerate() {
                    if !*seen && shell.data()[i] == 1.0 {
                        *seen = true;
                        let want = if d < p { 1.0 - d as f64 / p as f64 } else { 0.0 };
                        prop_assert!((got.values.data()[i] - want).abs() < 1e-12);
                    }
                }
                shell = dilate(&shell);
            }
        }
    }
}
