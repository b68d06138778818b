//! Image grids and masks.
//!
//! Grids are stored planar: channel-major, then row-major within each
//! channel, so `data[c * H * W + y * W + x]` addresses pixel `(y, x)` of
//! channel `c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// H×W×C real-valued grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<S> {
    shape: Shape,
    data: Vec<S>,
}

impl<S: Scalar> ImageGrid<S> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<S>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "grid dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let shape = Shape::new(height, width, channels);
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "expected {} values for {shape}, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: S) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "grid dimensions must be positive");
        let shape = Shape::new(height, width, channels);
        Self { shape, data: vec![value; shape.len()] }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, S::zero())
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self { shape: other.shape, data: vec![S::zero(); other.data.len()] }
    }

    /// Builds a grid from `f(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Self {
        let mut grid = Self::zeros(height, width, channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let i = grid.index(y, x, c);
                    grid.data[i] = f(y, x, c);
                }
            }
        }
        grid
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (c * self.shape.height + y) * self.shape.width + x
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> S {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: S) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn plane(&self, c: usize) -> &[S] {
        let n = self.shape.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [S] {
        let n = self.shape.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise combination of two grids of identical shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.expect_shape(other.shape)?;
        Ok(Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: S) -> Self {
        self.map(|v| v * k)
    }

    pub fn expect_shape(&self, shape: Shape) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!("expected {shape}, got {}", self.shape)));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        self.expect_shape(other.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn mean(&self) -> S {
        let sum = self.data.iter().fold(S::zero(), |acc, &v| acc + v);
        sum / S::of_usize(self.data.len())
    }

    /// Converts to another scalar type.
    pub fn cast<T: Scalar>(&self) -> ImageGrid<T> {
        ImageGrid {
            shape: self.shape,
            data: self.data.iter().map(|&v| T::of(v.as_f64())).collect(),
        }
    }

    /// Mirrors the grid left to right.
    pub fn flip_horizontal(&self) -> Self {
        let w = self.width();
        Self::from_fn(self.height(), w, self.channels(), |y, x, c| self.get(y, w - 1 - x, c))
    }
}

/// H×W gate with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask<S> {
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mask<S> {
    pub fn new(height: usize, width: usize, data: Vec<S>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("mask dimensions must be positive, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "expected {} mask values for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(**v >= S::zero() && **v <= S::one())) {
            return Err(Error::Mask(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: S) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be positive");
        assert!(value >= S::zero() && value <= S::one(), "mask value outside [0, 1]");
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, S::zero())
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self::filled(height, width, S::one())
    }

    /// Builds a mask from `f(y, x)`, clamping into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x).max(S::zero()).min(S::one()));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> S {
        self.data[y * self.width + x]
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == S::zero() || v == S::one())
    }

    /// Pixels strictly above `threshold` become 1, the rest 0.
    pub fn binarize(&self, threshold: S) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&v| if v > threshold { S::one() } else { S::zero() })
                .collect(),
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| S::one() - v).collect(),
        }
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v > S::zero()).count()
    }

    pub fn expect_matches(&self, shape: Shape) -> Result<()> {
        if self.height != shape.height || self.width != shape.width {
            return Err(Error::Shape(format!(
                "mask is {}x{}, grid is {}x{}",
                self.height, self.width, shape.height, shape.width
            )));
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> Mask<T> {
        Mask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| T::of(v.as_f64())).collect(),
        }
    }
}
