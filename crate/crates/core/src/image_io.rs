//! 8-bit PNG I/O. Pixel values map `[0, 255] ↔ [-1, 1]`; masks map
//! `[0, 255] ↔ [0, 1]`.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, Rgba};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::paste::RgbaObject;
use crate::scalar::Scalar;

fn to_unit<S: Scalar>(p: u8) -> S {
    S::of(p as f64 / 127.5 - 1.0)
}

fn to_byte<S: Scalar>(v: S) -> u8 {
    ((v.as_f64() + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Reads an image as a 3-channel grid, discarding any alpha.
pub fn read_rgb<S: Scalar>(path: impl AsRef<Path>) -> Result<ImageGrid<S>> {
    let img = open(path.as_ref())?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(ImageGrid::from_fn(h, w, 3, |y, x, c| to_unit(img.get_pixel(x as u32, y as u32)[c])))
}

/// Reads an image with its alpha channel (opaque if the file has none).
pub fn read_rgba<S: Scalar>(path: impl AsRef<Path>) -> Result<RgbaObject<S>> {
    let img = open(path.as_ref())?.to_rgba8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = ImageGrid::from_fn(h, w, 3, |y, x, c| to_unit(img.get_pixel(x as u32, y as u32)[c]));
    let alpha = Mask::from_fn(h, w, |y, x| S::of(img.get_pixel(x as u32, y as u32)[3] as f64 / 255.0));
    RgbaObject::new(color, alpha)
}

/// Reads a grayscale mask.
pub fn read_mask<S: Scalar>(path: impl AsRef<Path>) -> Result<Mask<S>> {
    let img = open(path.as_ref())?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Mask::from_fn(h, w, |y, x| S::of(img.get_pixel(x as u32, y as u32)[0] as f64 / 255.0)))
}

/// Converts a 1-, 3- or 4-channel grid to an 8-bit image.
pub fn to_image<S: Scalar>(grid: &ImageGrid<S>) -> Result<DynamicImage> {
    let (w, h) = (grid.width() as u32, grid.height() as u32);
    let px = |x: u32, y: u32, c: usize| to_byte(grid.get(y as usize, x as usize, c));
    Ok(match grid.channels() {
        1 => DynamicImage::ImageLuma8(ImageBuffer::from_fn(w, h, |x, y| Luma([px(x, y, 0)]))),
        3 => DynamicImage::ImageRgb8(ImageBuffer::from_fn(w, h, |x, y| {
            Rgb([px(x, y, 0), px(x, y, 1), px(x, y, 2)])
        })),
        4 => DynamicImage::ImageRgba8(ImageBuffer::from_fn(w, h, |x, y| {
            Rgba([px(x, y, 0), px(x, y, 1), px(x, y, 2), px(x, y, 3)])
        })),
        c => return Err(Error::Image(format!("cannot encode a {c}-channel grid as PNG"))),
    })
}

pub fn write_png<S: Scalar>(grid: &ImageGrid<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    to_image(grid)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

pub fn write_mask<S: Scalar>(mask: &Mask<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img: GrayImage = ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([(mask.get(y as usize, x as usize).as_f64() * 255.0).round().clamp(0.0, 255.0) as u8])
    });
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}
