//! Linear low-pass filtering and the mask-blended filter pair.
//!
//! The low-pass operator downsamples by an integer factor with an N×N box
//! average, then upsamples back with half-pixel-centred, edge-clamped
//! bilinear interpolation. Dimensions that are not a multiple of N are
//! reflect-padded before downsampling and cropped after upsampling.
//!
//! Both resampling stages are written so that constant inputs come back
//! bit-identical: block means are taken relative to the first sample of the
//! block and interpolation uses `a + f * (b - a)`.

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Scalar;

/// Low-pass filter with integer scale factor. A factor of 1 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LowPassFilter {
    factor: usize,
}

impl LowPassFilter {
    pub fn new(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidFilter("scale factor must be at least 1".into()));
        }
        Ok(Self { factor })
    }

    pub fn identity() -> Self {
        Self { factor: 1 }
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn is_identity(&self) -> bool {
        self.factor == 1
    }

    pub fn apply<S: Scalar>(&self, x: &ImageGrid<S>) -> Result<ImageGrid<S>> {
        low_pass(x, self.factor)
    }
}

/// Mirror index into `0..n` without repeating the edge sample; a length-1
/// axis maps everything to 0.
#[inline]
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let k = i % period;
    if k < n {
        k
    } else {
        period - k
    }
}

/// Source coordinate and interpolation weight for output sample `i` when
/// upsampling a length-`n` axis by `factor`.
#[inline]
fn bilinear_tap<S: Scalar>(i: usize, factor: usize, n: usize) -> (usize, usize, S) {
    let u = (i as f64 + 0.5) / factor as f64 - 0.5;
    let u = u.clamp(0.0, (n - 1) as f64);
    let i0 = u.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, S::of(u - i0 as f64))
}

#[inline]
fn lerp<S: Scalar>(a: S, b: S, f: S) -> S {
    if f == S::zero() {
        a
    } else {
        a + f * (b - a)
    }
}

/// Bilinear down-then-up low-pass filter with scale factor `factor`.
///
/// Output has the dimensions of `x`. `factor` must lie in
/// `1..=max(height, width)`; an axis shorter than the factor is padded by
/// reflection like any other.
pub fn low_pass<S: Scalar>(x: &ImageGrid<S>, factor: usize) -> Result<ImageGrid<S>> {
    let (h, w) = (x.height(), x.width());
    if factor == 0 || factor > h.max(w) {
        return Err(Error::InvalidFilter(format!(
            "scale factor {factor} outside 1..={} for a {h}x{w} grid",
            h.max(w)
        )));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let n = factor;
    let dh = h.div_ceil(n);
    let dw = w.div_ceil(n);
    let count = S::of_usize(n * n);

    let row_taps: Vec<(usize, usize, S)> = (0..h).map(|i| bilinear_tap(i, n, dh)).collect();
    let col_taps: Vec<(usize, usize, S)> = (0..w).map(|j| bilinear_tap(j, n, dw)).collect();

    let mut out = ImageGrid::zeros_like(x);
    let mut down = vec![S::zero(); dh * dw];
    let mut rows = vec![S::zero(); dh * w];
    for c in 0..x.channels() {
        let src = x.plane(c);
        for by in 0..dh {
            for bx in 0..dw {
                let pivot = src[reflect(by * n, h) * w + reflect(bx * n, w)];
                let mut acc = S::zero();
                for dy in 0..n {
                    let row = reflect(by * n + dy, h) * w;
                    for dx in 0..n {
                        acc += src[row + reflect(bx * n + dx, w)] - pivot;
                    }
                }
                down[by * dw + bx] = pivot + acc / count;
            }
        }
        // horizontal pass on the coarse rows, then vertical
        for by in 0..dh {
            for (j, &(x0, x1, f)) in col_taps.iter().enumerate() {
                rows[by * w + j] = lerp(down[by * dw + x0], down[by * dw + x1], f);
            }
        }
        let dst = out.plane_mut(c);
        for (i, &(y0, y1, f)) in row_taps.iter().enumerate() {
            for j in 0..w {
                dst[i * w + j] = lerp(rows[y0 * w + j], rows[y1 * w + j], f);
            }
        }
    }
    Ok(out)
}

/// `mask * inside + (1 - mask) * outside`, per pixel and broadcast over
/// channels. Saturated mask values select one side exactly.
pub fn blend_by_mask<S: Scalar>(
    inside: &ImageGrid<S>,
    outside: &ImageGrid<S>,
    mask: &Mask<S>,
) -> Result<ImageGrid<S>> {
    inside.expect_shape(outside.shape())?;
    mask.expect_matches(inside.shape())?;
    let mut out = outside.clone();
    let m = mask.data();
    let pixels = m.len();
    for c in 0..inside.channels() {
        let a = inside.plane(c);
        let dst = out.plane_mut(c);
        for p in 0..pixels {
            let mv = m[p];
            if mv == S::one() {
                dst[p] = a[p];
            } else if mv != S::zero() {
                dst[p] = dst[p] + mv * (a[p] - dst[p]);
            }
        }
    }
    Ok(out)
}

/// Combined low-pass operator: `M_b * φ_in(x) + (1 - M_b) * φ_out(x)`.
pub fn blend_filter<S: Scalar>(
    x: &ImageGrid<S>,
    blend_mask: &Mask<S>,
    n_in: usize,
    n_out: usize,
) -> Result<ImageGrid<S>> {
    blend_mask.expect_matches(x.shape())?;
    let outside = low_pass(x, n_out)?;
    if n_in == n_out {
        return Ok(outside);
    }
    let inside = low_pass(x, n_in)?;
    blend_by_mask(&inside, &outside, blend_mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straightforward 1-D reference: box average over aligned pairs then
    /// half-pixel bilinear upsampling with clamped coordinates.
    fn reference_1d(values: &[f64], n: usize) -> Vec<f64> {
        let coarse: Vec<f64> = values.chunks(n).map(|c| c.iter().sum::<f64>() / n as f64).collect();
        (0..values.len())
            .map(|i| {
                let u = ((i as f64 + 0.5) / n as f64 - 0.5).clamp(0.0, (coarse.len() - 1) as f64);
                let i0 = u.floor() as usize;
                let i1 = (i0 + 1).min(coarse.len() - 1);
                let f = u - i0 as f64;
                (1.0 - f) * coarse[i0] + f * coarse[i1]
            })
            .collect()
    }

    #[test]
    fn column_example_matches_reference() {
        let x = ImageGrid::new(4, 1, 1, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let y = low_pass(&x, 2).unwrap();
        let expected = reference_1d(&[1.0, 3.0, 5.0, 7.0], 2);
        assert_eq!(expected, vec![2.0, 3.0, 5.0, 6.0]);
        assert_eq!(y.data(), expected.as_slice());
    }

    #[test]
    fn factor_one_is_identity() {
        let x = ImageGrid::<f64>::from_fn(5, 7, 2, |y, x, c| (y * 31 + x * 7 + c) as f64 * 0.37);
        assert_eq!(low_pass(&x, 1).unwrap(), x);
    }

    #[test]
    fn invalid_factors() {
        let x = ImageGrid::<f32>::zeros(4, 6, 1);
        assert!(matches!(low_pass(&x, 0), Err(Error::InvalidFilter(_))));
        assert!(matches!(low_pass(&x, 7), Err(Error::InvalidFilter(_))));
        assert!(low_pass(&x, 6).is_ok());
        assert!(LowPassFilter::new(0).is_err());
    }

    #[test]
    fn non_divisible_dimensions_are_preserved() {
        let x = ImageGrid::<f64>::from_fn(7, 5, 3, |y, x, c| ((y * 3 + x * 5 + c) % 7) as f64);
        for n in 1..=5 {
            let y = low_pass(&x, n).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.is_finite());
        }
    }

    #[test]
    fn saturated_blend_masks_select_one_branch() {
        let x = ImageGrid::<f64>::from_fn(8, 8, 1, |y, x, _| ((y * 13 + x * 29) % 11) as f64 / 11.0);
        let ones = Mask::ones(8, 8);
        let zeros = Mask::zeros(8, 8);
        assert_eq!(blend_filter(&x, &ones, 4, 2).unwrap(), low_pass(&x, 4).unwrap());
        assert_eq!(blend_filter(&x, &zeros, 4, 2).unwrap(), low_pass(&x, 2).unwrap());
    }

    #[test]
    fn blend_mask_shape_mismatch() {
        let x = ImageGrid::<f64>::zeros(8, 8, 1);
        let m = Mask::ones(4, 8);
        assert!(matches!(blend_filter(&x, &m, 2, 1), Err(Error::Shape(_))));
    }

    fn grid_strategy() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>)> {
        (1usize..12, 1usize..12, 1usize..4).prop_flat_map(|(h, w, c)| {
            let n = h * w * c;
            (
                Just(h),
                Just(w),
                Just(c),
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn low_pass_is_linear(
            (h, w, c, xs, ys) in grid_strategy(),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            nf in 0.0f64..1.0,
        ) {
            let n = 1 + (nf * h.max(w) as f64) as usize;
            let n = n.min(h.max(w));
            let x = ImageGrid::new(h, w, c, xs).unwrap();
            let y = ImageGrid::new(h, w, c, ys).unwrap();
            let combo = x.scale(a).add(&y.scale(b)).unwrap();
            let lhs = low_pass(&combo, n).unwrap();
            let rhs = low_pass(&x, n).unwrap().scale(a).add(&low_pass(&y, n).unwrap().scale(b)).unwrap();
            let scale = lhs.data().iter().chain(rhs.data()).fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-6 * scale);
        }

        #[test]
        fn constants_are_preserved_exactly(
            h in 1usize..10, w in 1usize..10, c in 1usize..3,
            value in -1.0f64..1.0, nf in 0.0f64..1.0,
            n_in_f in 0.0f64..1.0, mvals in proptest::collection::vec(0.0f64..=1.0, 100),
        ) {
            let nmax = h.max(w);
            let n = (1 + (nf * nmax as f64) as usize).min(nmax);
            let n_in = (1 + (n_in_f * nmax as f64) as usize).min(nmax);
            let x = ImageGrid::filled(h, w, c, value);
            prop_assert_eq!(low_pass(&x, n).unwrap(), x.clone());
            let m = Mask::new(h, w, mvals[..h * w].to_vec()).unwrap();
            prop_assert_eq!(blend_filter(&x, &m, n_in, n).unwrap(), x);
        }

        #[test]
        fn equal_factors_degenerate_to_low_pass(
            (h, w, c, xs, _ys) in grid_strategy(),
            mvals in proptest::collection::vec(0.0f64..=1.0, 144),
            nf in 0.0f64..1.0,
        ) {
            let n = (1 + (nf * h.max(w) as f64) as usize).min(h.max(w));
            let x = ImageGrid::new(h, w, c, xs).unwrap();
            let m = Mask::new(h, w, mvals[..h * w].to_vec()).unwrap();
            prop_assert_eq!(blend_filter(&x, &m, n, n).unwrap(), low_pass(&x, n).unwrap());
        }
    }
}
