//! Alpha-compositing an object onto a background to build the reference
//! image and edit mask for immersion.

use crate::error::{Error, Result};
use crate::filter::blend_by_mask;
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Scalar;

/// Alpha cut-off used to turn an object's alpha into a binary edit mask.
pub const ALPHA_THRESHOLD: f64 = 0.5;

/// Colour grid plus straight (non-premultiplied) alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbaObject<S> {
    pub color: ImageGrid<S>,
    pub alpha: Mask<S>,
}

impl<S: Scalar> RgbaObject<S> {
    pub fn new(color: ImageGrid<S>, alpha: Mask<S>) -> Result<Self> {
        alpha.expect_matches(color.shape())?;
        Ok(Self { color, alpha })
    }

    /// Object with alpha 1 everywhere.
    pub fn opaque(color: ImageGrid<S>) -> Self {
        let alpha = Mask::ones(color.height(), color.width());
        Self { color, alpha }
    }

    fn resized(&self, height: usize, width: usize) -> Self {
        if height == self.color.height() && width == self.color.width() {
            return self.clone();
        }
        let (sh, sw) = (self.color.height(), self.color.width());
        let ys: Vec<_> = (0..height).map(|i| tap::<S>(i, height, sh)).collect();
        let xs: Vec<_> = (0..width).map(|j| tap::<S>(j, width, sw)).collect();
        let sample = |get: &dyn Fn(usize, usize) -> S, i: usize, j: usize| {
            let (y0, y1, fy) = ys[i];
            let (x0, x1, fx) = xs[j];
            let top = get(y0, x0) + fx * (get(y0, x1) - get(y0, x0));
            let bottom = get(y1, x0) + fx * (get(y1, x1) - get(y1, x0));
            top + fy * (bottom - top)
        };
        let color = ImageGrid::from_fn(height, width, self.color.channels(), |i, j, c| {
            sample(&|y, x| self.color.get(y, x, c), i, j)
        });
        let alpha = Mask::from_fn(height, width, |i, j| sample(&|y, x| self.alpha.get(y, x), i, j));
        Self { color, alpha }
    }
}

fn tap<S: Scalar>(i: usize, dst: usize, src: usize) -> (usize, usize, S) {
    let u = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let i0 = u.floor() as usize;
    (i0, (i0 + 1).min(src - 1), S::of(u - i0 as f64))
}

/// Composites `object`, resized by `scale`, onto `background` with its top-left
/// corner at `position = (row, col)`.
///
/// Returns the composited reference and the binary footprint mask
/// (`alpha > 0.5` after resizing).
pub fn paste<S: Scalar>(
    object: &RgbaObject<S>,
    background: &ImageGrid<S>,
    position: (isize, isize),
    scale: S,
) -> Result<(ImageGrid<S>, Mask<S>)> {
    if object.color.channels() != background.channels() {
        return Err(Error::Shape(format!(
            "object has {} channels, background has {}",
            object.color.channels(),
            background.channels()
        )));
    }
    if scale <= S::zero() || !scale.is_finite() {
        return Err(Error::Placement(format!("scale {scale} must be positive")));
    }
    let oh = (S::of_usize(object.color.height()) * scale).round().as_f64() as usize;
    let ow = (S::of_usize(object.color.width()) * scale).round().as_f64() as usize;
    if oh == 0 || ow == 0 {
        return Err(Error::Placement(format!("scaled object collapses to {oh}x{ow}")));
    }
    let (row, col) = position;
    let (bh, bw) = (background.height() as isize, background.width() as isize);
    if row < 0 || col < 0 || row + oh as isize > bh || col + ow as isize > bw {
        return Err(Error::Placement(format!(
            "{oh}x{ow} object at ({row}, {col}) does not fit in {bh}x{bw} background"
        )));
    }
    let (row, col) = (row as usize, col as usize);
    let scaled = object.resized(oh, ow);

    // Lift the object onto a background-sized canvas and alpha-blend.
    let canvas = ImageGrid::from_fn(background.height(), background.width(), background.channels(), |y, x, c| {
        if (row..row + oh).contains(&y) && (col..col + ow).contains(&x) {
            scaled.color.get(y - row, x - col, c)
        } else {
            background.get(y, x, c)
        }
    });
    let alpha = Mask::from_fn(background.height(), background.width(), |y, x| {
        if (row..row + oh).contains(&y) && (col..col + ow).contains(&x) {
            scaled.alpha.get(y - row, x - col)
        } else {
            S::zero()
        }
    });
    let reference = blend_by_mask(&canvas, background, &alpha)?;
    Ok((reference, alpha.binarize(S::of(ALPHA_THRESHOLD))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn background() -> ImageGrid<f64> {
        ImageGrid::from_fn(4, 4, 3, |y, x, c| (y as f64 - x as f64) * 0.1 + c as f64 * 0.05)
    }

    #[test]
    fn transparent_object_leaves_background() {
        let bg = background();
        let obj = RgbaObject::new(ImageGrid::filled(2, 2, 3, 0.9), Mask::zeros(2, 2)).unwrap();
        let (reference, mask) = paste(&obj, &bg, (1, 1), 1.0).unwrap();
        assert_eq!(reference, bg);
        assert_eq!(mask.count_nonzero(), 0);
    }

    #[test]
    fn opaque_full_canvas_object_replaces_background() {
        let bg = background();
        let color = ImageGrid::from_fn(4, 4, 3, |y, x, c| ((y * 4 + x) as f64 / 16.0) - c as f64 * 0.2);
        let (reference, mask) = paste(&RgbaObject::opaque(color.clone()), &bg, (0, 0), 1.0).unwrap();
        assert_eq!(reference, color);
        assert!(mask.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn patch_footprint_enumerated() {
        let bg = background();
        let obj = RgbaObject::opaque(ImageGrid::filled(2, 2, 3, 1.0));
        let (_, mask) = paste(&obj, &bg, (1, 1), 1.0).unwrap();
        let ones: Vec<(usize, usize)> = (0..4)
            .flat_map(|y| (0..4).map(move |x| (y, x)))
            .filter(|&(y, x)| mask.get(y, x) == 1.0)
            .collect();
        assert_eq!(ones, vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
    }

    #[test]
    fn footprint_counts_alpha_above_threshold() {
        let bg = ImageGrid::<f64>::zeros(6, 6, 1);
        let alpha = Mask::new(2, 3, vec![0.2, 0.5, 0.51, 1.0, 0.0, 0.8]).unwrap();
        let obj = RgbaObject::new(ImageGrid::filled(2, 3, 1, 1.0), alpha).unwrap();
        let (reference, mask) = paste(&obj, &bg, (3, 2), 1.0).unwrap();
        assert_eq!(mask.count_nonzero(), 3);
        assert!((reference.get(3, 2, 0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_placement() {
        let bg = background();
        let obj = RgbaObject::opaque(ImageGrid::filled(2, 2, 3, 1.0));
        assert!(matches!(paste(&obj, &bg, (3, 0), 1.0), Err(Error::Placement(_))));
        assert!(matches!(paste(&obj, &bg, (-1, 0), 1.0), Err(Error::Placement(_))));
        assert!(matches!(paste(&obj, &bg, (0, 0), 2.5), Err(Error::Placement(_))));
        assert!(paste(&obj, &bg, (0, 0), 2.0).is_ok());
    }

    #[test]
    fn scaled_constant_object_stays_constant() {
        let bg = ImageGrid::<f64>::zeros(8, 8, 1);
        let obj = RgbaObject::opaque(ImageGrid::filled(2, 2, 1, 0.75));
        let (reference, mask) = paste(&obj, &bg, (2, 2), 2.0).unwrap();
        assert_eq!(mask.count_nonzero(), 16);
        for y in 2..6 {
            for x in 2..6 {
                assert_eq!(reference.get(y, x, 0), 0.75);
            }
        }
    }
}
