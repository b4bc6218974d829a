//! Image tensors and the geometry shared by every transform.
//!
//! Coordinates: `i` indexes width (`0..W`), `j` indexes height (`0..H`), and the
//! continuous domain is `Ω = [0, W−1] × [0, H−1]`. Storage is channel-major with
//! height varying fastest: entry `(k, i, j)` lives at `(k·W + i)·H + j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// A `K × W × H` real image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
    normalized: bool,
}

/// A real-valued location in a given channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub k: usize,
    pub i: f64,
    pub j: f64,
}

impl ImageTensor {
    /// Builds a tensor, checking the length and finiteness of `data`.
    ///
    /// The result is flagged normalized iff every value lies in `[0, 1]`.
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || width == 0 || height == 0 {
            bail!(Argument, "tensor dimensions must be positive, got {channels}x{width}x{height}");
        }
        let expected = channels
            .checked_mul(width)
            .and_then(|v| v.checked_mul(height))
            .ok_or_else(|| Error::Argument(format!("tensor {channels}x{width}x{height} overflows")))?;
        if data.len() != expected {
            return Err(Error::Shape {
                expected: format!("{expected} values"),
                found: format!("{} values", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            bail!(Domain, "non-finite tensor value at flat index {pos}");
        }
        let normalized = data.iter().all(|v| (0.0..=1.0).contains(v));
        Ok(Self { channels, width, height, data, normalized })
    }

    pub fn zeros(channels: usize, width: usize, height: usize) -> Result<Self> {
        Self::new(channels, width, height, vec![0.0; channels * width * height])
    }

    pub fn constant(channels: usize, width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(channels, width, height, vec![value; channels * width * height])
    }

    /// Builds a tensor from `f(k, i, j)`.
    pub fn from_fn(
        channels: usize,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * width * height);
        for k in 0..channels {
            for i in 0..width {
                for j in 0..height {
                    data.push(f(k, i, j));
                }
            }
        }
        Self::new(channels, width, height, data)
    }

    /// Same shape as `self`, new data. Used by transforms whose output is finite by construction.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        let normalized = data.iter().all(|v| (0.0..=1.0).contains(v));
        Self { channels: self.channels, width: self.width, height: self.height, data, normalized }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// True iff every value lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.width + i) * self.height + j
    }

    /// Pixel value at integer coordinates. Panics when out of range.
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(k, i, j)]
    }

    /// Pixel value, or 0 for coordinates outside the grid.
    #[inline]
    pub fn get_or_zero(&self, k: usize, i: i64, j: i64) -> f64 {
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            0.0
        } else {
            self.get(k, i as usize, j as usize)
        }
    }

    /// Geometric center `((W−1)/2, (H−1)/2)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            let (k, w, h) = self.shape();
            let (k2, w2, h2) = other.shape();
            return Err(Error::Shape { expected: format!("{k}x{w}x{h}"), found: format!("{k2}x{w2}x{h2}") });
        }
        Ok(())
    }

    /// Bilinear interpolation at `c`; see [`bilinear`].
    pub fn interpolate(&self, c: PixelCoord) -> Result<f64> {
        bilinear(self, c.k, c.i, c.j)
    }
}

/// Bilinear interpolation `Q_x(k, i, j)`.
///
/// Returns 0 outside `Ω`, the stored value at integer points, and the weighted
/// average of the four surrounding pixels otherwise.
pub fn bilinear(x: &ImageTensor, k: usize, i: f64, j: f64) -> Result<f64> {
    if k >= x.channels {
        bail!(Argument, "channel {k} out of range for {} channels", x.channels);
    }
    Ok(bilinear_unchecked(x, k, i, j))
}

#[inline]
pub(crate) fn bilinear_unchecked(x: &ImageTensor, k: usize, i: f64, j: f64) -> f64 {
    let wmax = (x.width - 1) as f64;
    let hmax = (x.height - 1) as f64;
    // The negated comparison also rejects NaN.
    if !(i >= 0.0 && i <= wmax && j >= 0.0 && j <= hmax) {
        return 0.0;
    }
    let fi = libm::floor(i);
    let fj = libm::floor(j);
    let (i0, di) = if fi >= wmax { (x.width - 1, 0.0) } else { (fi as usize, i - fi) };
    let (j0, dj) = if fj >= hmax { (x.height - 1, 0.0) } else { (fj as usize, j - fj) };
    let i1 = if di > 0.0 { i0 + 1 } else { i0 };
    let j1 = if dj > 0.0 { j0 + 1 } else { j0 };
    let v00 = x.get(k, i0, j0);
    let v10 = x.get(k, i1, j0);
    let v01 = x.get(k, i0, j1);
    let v11 = x.get(k, i1, j1);
    (1.0 - di) * (1.0 - dj) * v00 + di * (1.0 - dj) * v10 + (1.0 - di) * dj * v01 + di * dj * v11
}

/// Euclidean distance over all entries.
pub fn l2_distance(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(libm::sqrt(l2_distance_sq(a, b)?))
}

/// Squared Euclidean distance over all entries.
pub fn l2_distance_sq(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(u, v)| (u - v) * (u - v)).sum())
}

/// ℓ1 distance over all entries.
pub fn l1_distance(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(u, v)| libm::fabs(u - v)).sum())
}

/// ℓ∞ distance over all entries.
pub fn linf_distance(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(u, v)| libm::fabs(u - v)).fold(0.0, f64::max))
}
