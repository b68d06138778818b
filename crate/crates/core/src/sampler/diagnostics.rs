//! Boundary artifact measurement.

use crate::error::{Error, Result};
use crate::filter::low_pass;
use crate::grid::{ImageGrid, Mask};
use crate::mask_ops::{dilate, erode};
use crate::scalar::Scalar;

/// Pixels within `band` 4-connected steps of the mask edge, on either side.
/// The mask is binarised at 0.5 first.
pub fn boundary_shell<S: Scalar>(mask: &Mask<S>, band: usize) -> Mask<S> {
    let base = mask.binarize(S::of(0.5));
    let mut outer = base.clone();
    let mut inner = base;
    for _ in 0..band {
        outer = dilate(&outer);
        inner = erode(&inner);
    }
    Mask::from_fn(outer.height(), outer.width(), |y, x| {
        if outer.get(y, x) == S::one() && inner.get(y, x) == S::zero() {
            S::one()
        } else {
            S::zero()
        }
    })
}

/// Mean squared high-pass response `x − low_pass(x, 2)` over the boundary
/// shell of `mask`.
pub fn boundary_energy<S: Scalar>(x: &ImageGrid<S>, mask: &Mask<S>, band: usize) -> Result<S> {
    if band == 0 {
        return Err(Error::Diagnostic("band must be at least one pixel".into()));
    }
    mask.expect_matches(x.shape())?;
    let shell = boundary_shell(mask, band);
    let count = shell.count_nonzero();
    if count == 0 {
        return Err(Error::Diagnostic("mask has no boundary".into()));
    }
    let high = x.sub(&low_pass(x, 2)?)?;
    let pixels = shell.data().len();
    let mut acc = S::zero();
    for (i, &h) in high.data().iter().enumerate() {
        if shell.data()[i % pixels] == S::one() {
            acc += h * h;
        }
    }
    Ok(acc / S::of_usize(count * x.channels()))
}
