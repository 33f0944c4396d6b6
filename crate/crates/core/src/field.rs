//! Raster containers: scalar fields, multi-channel images, binary masks and
//! pixel rectangles. All storage is row-major.

use crate::error::{Error, Result};

/// A `width x height` raster of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    /// A field filled with `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= 1 && height >= 1, "field dimensions must be positive");
        ScalarField {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Wrap row-major `data`; its length must be `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dims("positive width and height", format!("{width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::dims(
                format!("{} values", width * height),
                format!("{} values", data.len()),
            ));
        }
        Ok(ScalarField { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                field.data[y * width + x] = f(x, y);
            }
        }
        field
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Foreground mask `{value >= 0}`.
    pub fn nonnegative(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v >= 0.0).collect(),
        }
    }

    pub(crate) fn same_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::dims(
                format!("{width}x{height}"),
                format!("{}x{}", self.width, self.height),
            ));
        }
        Ok(())
    }
}

/// A raster with `channels` reals per pixel, stored pixel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl VectorImage {
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::dims(
                "positive width, height and channel count",
                format!("{width}x{height}x{channels}"),
            ));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{} values", width * height * channels),
                format!("{} values", data.len()),
            ));
        }
        Ok(VectorImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Interleave equally sized scalar channels.
    pub fn from_channels(channels: &[ScalarField]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::dims("at least one channel", "none"))?;
        let (w, h) = first.dims();
        for c in channels {
            c.same_dims(w, h)?;
        }
        let d = channels.len();
        let mut data = Vec::with_capacity(w * h * d);
        for i in 0..w * h {
            for c in channels {
                data.push(c.data[i]);
            }
        }
        Self::from_vec(w, h, d, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of pixels.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy channel `c` out as a scalar field.
    pub fn channel(&self, c: usize) -> ScalarField {
        assert!(c < self.channels, "channel index out of range");
        let data = (0..self.pixel_count())
            .map(|i| self.data[i * self.channels + c])
            .collect();
        ScalarField {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// The single channel of a gray image, or `ScalarOnly` otherwise.
    pub fn as_scalar(&self, model: &'static str) -> Result<ScalarField> {
        if self.channels != 1 {
            return Err(Error::ScalarOnly { model });
        }
        Ok(self.channel(0))
    }

    /// Per-channel mean over all pixels.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (a, v) in acc.iter_mut().zip(px) {
                *a += v;
            }
        }
        let n = self.pixel_count() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<ScalarField> for VectorImage {
    fn from(field: ScalarField) -> Self {
        VectorImage {
            width: field.width,
            height: field.height,
            channels: 1,
            data: field.data,
        }
    }
}

impl From<&ScalarField> for VectorImage {
    fn from(field: &ScalarField) -> Self {
        VectorImage::from(field.clone())
    }
}

/// A binary raster. `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        Mask {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::dims(
                format!("{} values", width * height),
                format!("{} values", data.len()),
            ));
        }
        Ok(Mask { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Self::new(width, height, false);
        for y in 0..height {
            for x in 0..width {
                mask.data[y * width + x] = f(x, y);
            }
        }
        mask
    }

    /// Mask covering `rect`.
    pub fn from_rect(width: usize, height: usize, rect: Rect) -> Result<Self> {
        rect.check_inside(width, height)?;
        Ok(Self::from_fn(width, height, |x, y| rect.contains(x, y)))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Number of `true` pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// 1.0 on foreground, 0.0 elsewhere.
    pub fn to_indicator(&self) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Number of pixels where the two masks differ.
    pub fn hamming(&self, other: &Mask) -> usize {
        self.data.iter().zip(&other.data).filter(|(a, b)| a != b).count()
    }
}

/// Axis-aligned pixel rectangle: top-left corner plus width and height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// True on the outermost ring of pixels of the rectangle.
    #[inline]
    pub fn on_boundary(&self, x: usize, y: usize) -> bool {
        self.contains(x, y)
            && (x == self.x || y == self.y || x + 1 == self.x + self.w || y + 1 == self.y + self.h)
    }

    pub fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x + self.w > width || self.y + self.h > height {
            return Err(Error::RectOutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            });
        }
        Ok(())
    }
}

impl std::str::FromStr for Rect {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!("rectangle `{s}` must be x,y,w,h")));
        }
        let mut v = [0usize; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::Config(format!("rectangle `{s}`: `{p}` is not a non-negative integer")))?;
        }
        Ok(Rect::new(v[0], v[1], v[2], v[3]))
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}
