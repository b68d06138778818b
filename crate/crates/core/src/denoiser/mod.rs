//! Noise-predictor abstraction and classifier-free guidance.

mod oracle;

pub use oracle::{GaussianMixture, MixtureComponent, OracleDenoiser};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Shape};
use crate::scalar::Scalar;

/// Conditioning passed through to the backend untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Text(String),
    Label(u32),
}

/// One noise-prediction request `ε_θ(x_t, t, c)`.
#[derive(Debug, Clone, Copy)]
pub struct DenoiserRequest<'a, S> {
    pub x_t: &'a ImageGrid<S>,
    pub t: usize,
    pub condition: Option<&'a Condition>,
    /// Guidance scale for backend-side CFG. `None` asks the backend for the
    /// raw conditional/unconditional pair so the engine combines them.
    pub remote_guidance: Option<S>,
}

/// Backend output.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisePrediction<S> {
    Single(ImageGrid<S>),
    Pair { uncond: ImageGrid<S>, cond: ImageGrid<S> },
}

impl<S: Scalar> NoisePrediction<S> {
    /// Collapses to a single ε̂, combining a pair with scale `g`.
    pub fn resolve(self, g: S) -> Result<ImageGrid<S>> {
        match self {
            NoisePrediction::Single(e) => Ok(e),
            NoisePrediction::Pair { uncond, cond } => cfg_combine(&uncond, &cond, g),
        }
    }
}

pub trait Denoiser<S: Scalar> {
    /// Grid shape the backend operates on.
    fn grid_shape(&self) -> Shape;

    /// Step count the backend was trained or configured for, if it cares.
    fn declared_steps(&self) -> Option<usize> {
        None
    }

    fn predict(&mut self, request: &DenoiserRequest<'_, S>) -> Result<NoisePrediction<S>>;
}

impl<S: Scalar, D: Denoiser<S> + ?Sized> Denoiser<S> for &mut D {
    fn grid_shape(&self) -> Shape {
        (**self).grid_shape()
    }

    fn declared_steps(&self) -> Option<usize> {
        (**self).declared_steps()
    }

    fn predict(&mut self, request: &DenoiserRequest<'_, S>) -> Result<NoisePrediction<S>> {
        (**self).predict(request)
    }
}

impl<S: Scalar, D: Denoiser<S> + ?Sized> Denoiser<S> for Box<D> {
    fn grid_shape(&self) -> Shape {
        (**self).grid_shape()
    }

    fn declared_steps(&self) -> Option<usize> {
        (**self).declared_steps()
    }

    fn predict(&mut self, request: &DenoiserRequest<'_, S>) -> Result<NoisePrediction<S>> {
        (**self).predict(request)
    }
}

/// `ε_u + g·(ε_c − ε_u)`.
pub fn cfg_combine<S: Scalar>(eps_uncond: &ImageGrid<S>, eps_cond: &ImageGrid<S>, g: S) -> Result<ImageGrid<S>> {
    if eps_uncond.shape() != eps_cond.shape() {
        return Err(Error::Shape(format!(
            "conditional prediction {} vs unconditional {}",
            eps_cond.shape(),
            eps_uncond.shape()
        )));
    }
    if g == S::zero() {
        return Ok(eps_uncond.clone());
    }
    if g == S::one() {
        return Ok(eps_cond.clone());
    }
    eps_uncond.zip_map(eps_cond, |u, c| u + g * (c - u))
}

/// Wraps a backend and counts `predict` calls.
#[derive(Debug)]
pub struct CountingDenoiser<D> {
    pub inner: D,
    pub calls: usize,
}

impl<D> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self { inner, calls: 0 }
    }
}

impl<S: Scalar, D: Denoiser<S>> Denoiser<S> for CountingDenoiser<D> {
    fn grid_shape(&self) -> Shape {
        self.inner.grid_shape()
    }

    fn declared_steps(&self) -> Option<usize> {
        self.inner.declared_steps()
    }

    fn predict(&mut self, request: &DenoiserRequest<'_, S>) -> Result<NoisePrediction<S>> {
        self.calls += 1;
        self.inner.predict(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cfg_limits() {
        let u = ImageGrid::<f64>::from_fn(2, 3, 1, |y, x, _| y as f64 - 0.3 * x as f64);
        let c = ImageGrid::<f64>::from_fn(2, 3, 1, |y, x, _| 0.7 * x as f64 + 0.1 * y as f64);
        assert_eq!(cfg_combine(&u, &c, 0.0).unwrap(), u);
        assert_eq!(cfg_combine(&u, &c, 1.0).unwrap(), c);
        let zeros = ImageGrid::<f64>::zeros(2, 2, 1);
        let ones = ImageGrid::<f64>::filled(2, 2, 1, 1.0);
        assert_eq!(cfg_combine(&zeros, &ones, 2.0).unwrap(), ImageGrid::filled(2, 2, 1, 2.0));
    }

    #[test]
    fn cfg_shape_mismatch() {
        let a = ImageGrid::<f32>::zeros(2, 2, 1);
        let b = ImageGrid::<f32>::zeros(2, 2, 4);
        assert!(matches!(cfg_combine(&a, &b, 3.0), Err(Error::Shape(_))));
    }

    #[test]
    fn pair_resolves_through_cfg() {
        let p = NoisePrediction::Pair {
            uncond: ImageGrid::<f64>::filled(1, 1, 1, 1.0),
            cond: ImageGrid::<f64>::filled(1, 1, 1, 3.0),
        };
        assert_eq!(p.resolve(7.5).unwrap().data(), &[16.0]);
    }

    proptest! {
        #[test]
        fn cfg_is_linear_in_inputs(
            u1 in proptest::collection::vec(-2.0f64..2.0, 6),
            u2 in proptest::collection::vec(-2.0f64..2.0, 6),
            c1 in proptest::collection::vec(-2.0f64..2.0, 6),
            c2 in proptest::collection::vec(-2.0f64..2.0, 6),
            g in 0.0f64..10.0, a in -2.0f64..2.0,
        ) {
            let grid = |v: Vec<f64>| ImageGrid::new(2, 3, 1, v).unwrap();
            let (u1, u2, c1, c2) = (grid(u1), grid(u2), grid(c1), grid(c2));
            let lhs = cfg_combine(&u1.add(&u2.scale(a)).unwrap(), &c1.add(&c2.scale(a)).unwrap(), g).unwrap();
            let rhs = cfg_combine(&u1, &c1, g).unwrap().add(&cfg_combine(&u2, &c2, g).unwrap().scale(a)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-9);
            // continuity in g
            let near = cfg_combine(&u1, &c1, g + 1e-9).unwrap();
            prop_assert!(near.max_abs_diff(&cfg_combine(&u1, &c1, g).unwrap()).unwrap() < 1e-7);
        }
    }
}
