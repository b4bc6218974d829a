//! Semantic transforms `φ(x, α)`.
//!
//! Every transform is a pure function of an image and a parameter vector. Angles
//! are in radians.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{bilinear_unchecked, ImageTensor};

/// The supported transform families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    GaussianBlur,
    BrightnessContrast,
    /// Integer translation with wrap-around padding.
    TranslationReflect,
    /// Integer translation with zero padding.
    TranslationBlack,
    Rotation,
    Scaling,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::GaussianBlur,
        TransformKind::BrightnessContrast,
        TransformKind::TranslationReflect,
        TransformKind::TranslationBlack,
        TransformKind::Rotation,
        TransformKind::Scaling,
    ];

    pub fn param_dim(self) -> usize {
        match self {
            TransformKind::BrightnessContrast | TransformKind::TranslationReflect | TransformKind::TranslationBlack => {
                2
            }
            TransformKind::GaussianBlur | TransformKind::Rotation | TransformKind::Scaling => 1,
        }
    }

    /// Whether every `φ(·, α)` has an inverse within the family.
    pub fn reversible(self) -> bool {
        matches!(
            self,
            TransformKind::BrightnessContrast | TransformKind::TranslationReflect | TransformKind::TranslationBlack
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::GaussianBlur => "gaussian_blur",
            TransformKind::BrightnessContrast => "brightness_contrast",
            TransformKind::TranslationReflect => "translation_reflect",
            TransformKind::TranslationBlack => "translation_black",
            TransformKind::Rotation => "rotation",
            TransformKind::Scaling => "scaling",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A transform family with its metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub param_dim: usize,
    pub reversible: bool,
}

impl TransformSpec {
    pub fn new(kind: TransformKind) -> Self {
        Self { kind, param_dim: kind.param_dim(), reversible: kind.reversible() }
    }

    /// Applies the transform with parameter `p`.
    pub fn apply(&self, x: &ImageTensor, p: &TransformParams) -> Result<ImageTensor> {
        if p.dim != self.param_dim {
            bail!(Argument, "{} takes {} parameters, got {}", self.kind.name(), self.param_dim, p.dim);
        }
        let v = p.values;
        match self.kind {
            TransformKind::GaussianBlur => gaussian_blur(x, v[0]),
            TransformKind::BrightnessContrast => Ok(brightness_contrast(x, v[0], v[1])),
            TransformKind::TranslationReflect => Ok(translate(x, v[0], v[1], Padding::Reflect)),
            TransformKind::TranslationBlack => Ok(translate(x, v[0], v[1], Padding::Black)),
            TransformKind::Rotation => Ok(rotate(x, v[0])),
            TransformKind::Scaling => scale(x, v[0]),
        }
    }
}

/// A parameter vector of length 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    values: [f64; 2],
    dim: usize,
}

impl TransformParams {
    pub fn scalar(a: f64) -> Self {
        Self { values: [a, 0.0], dim: 1 }
    }

    pub fn pair(a: f64, b: f64) -> Self {
        Self { values: [a, b], dim: 2 }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [a] => Ok(Self::scalar(*a)),
            [a, b] => Ok(Self::pair(*a, *b)),
            _ => bail!(Argument, "transform parameters have length 1 or 2, got {}", v.len()),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Normalized Gaussian kernel of variance `alpha` on offsets `−r..=r`, `r = ⌈4√α⌉`.
pub fn blur_kernel(alpha: f64) -> Vec<f64> {
    let radius = libm::ceil(4.0 * libm::sqrt(alpha)) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|t| {
            let d = t as f64 - radius as f64;
            libm::exp(-d * d / (2.0 * alpha))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Half-sample symmetric extension: `… 1 0 | 0 1 … n−1 | n−1 n−2 …`.
#[inline]
fn mirror(idx: i64, n: usize) -> usize {
    let period = 2 * n as i64;
    let m = idx.rem_euclid(period) as usize;
    if m >= n {
        2 * n - 1 - m
    } else {
        m
    }
}

/// Gaussian blur `x * G_α`, where `α` is the kernel variance.
///
/// Separable convolution with [`blur_kernel`] and symmetric boundary extension.
pub fn gaussian_blur(x: &ImageTensor, alpha: f64) -> Result<ImageTensor> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        bail!(Argument, "blur parameter must be finite and nonnegative, got {alpha}");
    }
    if alpha == 0.0 {
        return Ok(x.clone());
    }
    let kernel = blur_kernel(alpha);
    let r = (kernel.len() / 2) as i64;
    let (kc, w, h) = x.shape();
    let src = x.data();
    // Along i (width).
    let mut tmp = vec![0.0; src.len()];
    for k in 0..kc {
        for i in 0..w {
            for j in 0..h {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let ii = mirror(i as i64 + t as i64 - r, w);
                    acc += kv * src[(k * w + ii) * h + j];
                }
                tmp[(k * w + i) * h + j] = acc;
            }
        }
    }
    // Along j (height).
    let mut out = vec![0.0; src.len()];
    for k in 0..kc {
        for i in 0..w {
            let row = (k * w + i) * h;
            for j in 0..h {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let jj = mirror(j as i64 + t as i64 - r, h);
                    acc += kv * tmp[row + jj];
                }
                out[row + j] = acc;
            }
        }
    }
    Ok(x.with_data(out))
}

/// `v ↦ e^k (v + b)` on every pixel, without clamping.
pub fn brightness_contrast(x: &ImageTensor, k: f64, b: f64) -> ImageTensor {
    let c = libm::exp(k);
    x.with_data(x.data().iter().map(|v| c * (v + b)).collect())
}

/// Handling of pixels shifted in from outside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Pixels leaving one edge re-enter at the opposite edge.
    Reflect,
    /// Vacated pixels become 0.
    Black,
}

/// Rounds half away from zero, saturating to the `i64` range.
pub fn round_shift(v: f64) -> i64 {
    let r = libm::round(v);
    if r.is_nan() {
        0
    } else {
        r.clamp(i64::MIN as f64, i64::MAX as f64) as i64
    }
}

/// Shifts right by `[dx]` and down by `[dy]` (nearest-integer rounding).
pub fn translate(x: &ImageTensor, dx: f64, dy: f64, padding: Padding) -> ImageTensor {
    translate_int(x, round_shift(dx), round_shift(dy), padding)
}

/// Shifts by integer offsets; output `(k, i, j)` reads source `(k, i − dx, j − dy)`.
pub fn translate_int(x: &ImageTensor, dx: i64, dy: i64, padding: Padding) -> ImageTensor {
    let (kc, w, h) = x.shape();
    let mut out = vec![0.0; x.len()];
    for k in 0..kc {
        for i in 0..w {
            for j in 0..h {
                let si = i as i64 - dx;
                let sj = j as i64 - dy;
                out[x.index(k, i, j)] = match padding {
                    Padding::Black => x.get_or_zero(k, si, sj),
                    Padding::Reflect => x.get(k, si.rem_euclid(w as i64) as usize, sj.rem_euclid(h as i64) as usize),
                };
            }
        }
    }
    x.with_data(out)
}

/// Radius of the disk outside which rotated images are black.
pub fn rotation_disk_radius(w: usize, h: usize) -> f64 {
    let cw = (w as f64 - 1.0) / 2.0;
    let ch = (h as f64 - 1.0) / 2.0;
    cw.min(ch)
}

/// Source coordinates read by output pixel `(i, j)` under rotation by `angle`.
#[inline]
pub fn rotation_source(cw: f64, ch: f64, i: f64, j: f64, angle: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(angle);
    let u = i - cw;
    let v = j - ch;
    (cw + u * c + v * s, ch + v * c - u * s)
}

/// Whether output pixel `(i, j)` lies inside the rotation disk.
#[inline]
pub fn in_rotation_disk(cw: f64, ch: f64, i: usize, j: usize) -> bool {
    let u = i as f64 - cw;
    let v = j as f64 - ch;
    libm::sqrt(u * u + v * v) < cw.min(ch)
}

/// Counter-clockwise rotation by `angle` radians with black padding outside the
/// centered disk of radius `min(c_W, c_H)`.
pub fn rotate(x: &ImageTensor, angle: f64) -> ImageTensor {
    let (kc, w, h) = x.shape();
    let (cw, ch) = x.center();
    let mut out = vec![0.0; x.len()];
    for i in 0..w {
        for j in 0..h {
            if !in_rotation_disk(cw, ch, i, j) {
                continue;
            }
            let (si, sj) = rotation_source(cw, ch, i as f64, j as f64, angle);
            for k in 0..kc {
                out[x.index(k, i, j)] = bilinear_unchecked(x, k, si, sj);
            }
        }
    }
    x.with_data(out)
}

/// Source coordinates read by output pixel `(i, j)` under scaling by `s`.
#[inline]
pub fn scaling_source(cw: f64, ch: f64, i: f64, j: f64, s: f64) -> (f64, f64) {
    (cw + (i - cw) / s, ch + (j - ch) / s)
}

/// Scaling about the image center by factor `s > 0`; pixels whose source leaves
/// `Ω` become 0.
pub fn scale(x: &ImageTensor, s: f64) -> Result<ImageTensor> {
    if !(s > 0.0) || !s.is_finite() {
        bail!(Argument, "scaling factor must be positive and finite, got {s}");
    }
    let (kc, w, h) = x.shape();
    let (cw, ch) = x.center();
    let mut out = vec![0.0; x.len()];
    for i in 0..w {
        for j in 0..h {
            let (si, sj) = scaling_source(cw, ch, i as f64, j as f64, s);
            for k in 0..kc {
                out[x.index(k, i, j)] = bilinear_unchecked(x, k, si, sj);
            }
        }
    }
    Ok(x.with_data(out))
}
