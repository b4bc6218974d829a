//! Concrete base classifiers and exact smoothed confidences for tractable pairings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::radii::{DistributionSpec, NoiseFamily};
use crate::smoothing::{uses_pixel_noise, BaseClassifier};
use crate::statfn::{noncentral_chi2_cdf, phi};
use crate::tensor::{l2_distance_sq, ImageTensor};
use crate::transforms::{translate_int, Padding, TransformKind, TransformSpec};

/// `argmax(W x + b)` over flattened tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    classes: usize,
    shape: (usize, usize, usize),
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearClassifier {
    /// `weights` is row-major `C × (K·W·H)` in tensor storage order.
    pub fn new(classes: usize, shape: (usize, usize, usize), weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            bail!(Argument, "linear classifier needs at least two classes, got {classes}");
        }
        let d = shape.0 * shape.1 * shape.2;
        if d == 0 {
            bail!(Argument, "input shape must be nonempty");
        }
        if weights.len() != classes * d || bias.len() != classes {
            return Err(Error::Shape {
                expected: format!("{} weights and {classes} biases", classes * d),
                found: format!("{} weights and {} biases", weights.len(), bias.len()),
            });
        }
        if let Some(pos) = weights.iter().chain(&bias).position(|v| !v.is_finite()) {
            bail!(Domain, "non-finite classifier parameter at index {pos}");
        }
        Ok(Self { classes, shape, weights, bias })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn row(&self, c: usize) -> &[f64] {
        let d = self.weights.len() / self.classes;
        &self.weights[c * d..(c + 1) * d]
    }

    pub fn scores(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        if x.shape() != self.shape {
            let (k, w, h) = self.shape;
            let (k2, w2, h2) = x.shape();
            return Err(Error::Shape { expected: format!("{k}x{w}x{h}"), found: format!("{k2}x{w2}x{h2}") });
        }
        Ok((0..self.classes)
            .map(|c| self.row(c).iter().zip(x.data()).map(|(w, v)| w * v).sum::<f64>() + self.bias[c])
            .collect())
    }
}

/// Index of the largest score; ties go to the smallest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Label of `c` on `x`.
pub fn linear_classify(c: &LinearClassifier, x: &ImageTensor) -> Result<usize> {
    Ok(argmax(&c.scores(x)?))
}

impl BaseClassifier for LinearClassifier {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn classify(&self, x: &ImageTensor) -> Result<usize> {
        linear_classify(self, x)
    }
}

/// Classifiers whose smoothed confidence can be computed exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticClassifier {
    /// Class 1 iff the mean pixel value exceeds `t`.
    MeanThreshold { t: f64 },
    /// Class 1 iff `‖x − center‖₂ ≤ radius`.
    L2Ball { center: ImageTensor, radius: f64 },
    /// Always `class`.
    Constant { class: usize },
}

impl SyntheticClassifier {
    pub fn mean_threshold(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            bail!(Argument, "mean threshold must lie in (0, 1), got {t}");
        }
        Ok(Self::MeanThreshold { t })
    }

    pub fn l2_ball(center: ImageTensor, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            bail!(Argument, "ball radius must be positive, got {radius}");
        }
        Ok(Self::L2Ball { center, radius })
    }

    pub fn constant(class: usize) -> Self {
        Self::Constant { class }
    }

    /// The class whose probability [`analytic_smoothed_confidence`] returns.
    pub fn positive_class(&self) -> usize {
        match self {
            Self::Constant { class } => *class,
            _ => 1,
        }
    }
}

impl BaseClassifier for SyntheticClassifier {
    fn num_classes(&self) -> usize {
        match self {
            Self::Constant { class } => (*class + 1).max(2),
            _ => 2,
        }
    }

    fn classify(&self, x: &ImageTensor) -> Result<usize> {
        Ok(match self {
            Self::MeanThreshold { t } => usize::from(x.mean() > *t),
            Self::L2Ball { center, radius } => usize::from(l2_distance_sq(x, center)? <= radius * radius),
            Self::Constant { class } => *class,
        })
    }
}

/// Exact probability that the smoothed classifier outputs `s.positive_class()`.
///
/// Tractable pairings:
/// * `Constant` with any transform and noise.
/// * `MeanThreshold` with additive pixel noise, Gaussian brightness/contrast
///   noise, blur, and either translation with Gaussian noise.
/// * `L2Ball` with additive pixel noise.
pub fn analytic_smoothed_confidence(
    s: &SyntheticClassifier,
    transform: TransformSpec,
    noise: &DistributionSpec,
    x: &ImageTensor,
) -> Result<f64> {
    let unsupported = || {
        Err(Error::Unsupported(format!(
            "no closed form for {s:?} under {} with {} noise",
            transform.kind.name(),
            noise.family_name()
        )))
    };
    let t = match s {
        SyntheticClassifier::Constant { .. } => return Ok(1.0),
        SyntheticClassifier::MeanThreshold { t } => *t,
        SyntheticClassifier::L2Ball { center, radius } => {
            return match (uses_pixel_noise(transform.kind), noise.isotropic_sigma()) {
                (true, Some(sigma)) => {
                    let lambda = l2_distance_sq(x, center)? / (sigma * sigma);
                    noncentral_chi2_cdf(x.len() as f64, lambda, (radius / sigma) * (radius / sigma))
                }
                _ => unsupported(),
            };
        }
    };
    let m = x.mean();
    let sigmas = match &noise.family {
        NoiseFamily::Gaussian { sigma } => Some(sigma.as_slice()),
        _ => None,
    };
    match (transform.kind, sigmas) {
        (k, Some(sig)) if uses_pixel_noise(k) => {
            // mean(x + δ) ~ N(m, σ²/D)
            let tau = sig[0] / libm::sqrt(x.len() as f64);
            Ok(phi((m - t) / tau))
        }
        (TransformKind::BrightnessContrast, Some(sig)) => {
            // e^k (m + b) > t  ⇔  b > t e^{−k} − m, integrated over k.
            let (sk, tau) = (sig[0], sig[1]);
            Ok(gauss_expectation(sk, |k| phi((m - t * libm::exp(-k)) / tau)))
        }
        (TransformKind::GaussianBlur, _) | (TransformKind::TranslationReflect, Some(_)) => {
            // Both transforms preserve the mean, so the output is deterministic.
            if libm::fabs(m - t) < 1e-9 {
                return unsupported();
            }
            Ok(if m > t { 1.0 } else { 0.0 })
        }
        (TransformKind::TranslationBlack, Some(sig)) => translation_black_mean_prob(x, t, sig[0], sig[1]),
        _ => unsupported(),
    }
}

/// `E[f(Z)]` for `Z ~ N(0, σ²)` by the trapezoid rule on ±12σ, which converges
/// geometrically for smooth integrands.
fn gauss_expectation(sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    const STEPS: usize = 4000;
    let h = 24.0 / STEPS as f64;
    let mut acc = 0.0;
    for s in 0..=STEPS {
        let z = -12.0 + h * s as f64;
        let w = if s == 0 || s == STEPS { 0.5 } else { 1.0 };
        acc += w * crate::statfn::normal_pdf(z) * f(sigma * z);
    }
    acc * h
}

/// `P[round(ε) = d]` for `ε ~ N(0, σ²)`.
fn round_prob(d: i64, sigma: f64) -> f64 {
    let d = d as f64;
    phi((d + 0.5) / sigma) - phi((d - 0.5) / sigma)
}

fn translation_black_mean_prob(x: &ImageTensor, t: f64, s1: f64, s2: f64) -> Result<f64> {
    let (w, h) = (x.width() as i64, x.height() as i64);
    // Shifts with |d| ≥ frame size leave a black image with mean 0 < t.
    let mut acc = 0.0;
    for dx in -(w - 1)..w {
        let px = round_prob(dx, s1);
        if px == 0.0 {
            continue;
        }
        for dy in -(h - 1)..h {
            let py = round_prob(dy, s2);
            if py == 0.0 {
                continue;
            }
            if translate_int(x, dx, dy, Padding::Black).mean() > t {
                acc += px * py;
            }
        }
    }
    Ok(acc)
}

/// Exact `P[class 1]` for a two-class linear classifier under additive isotropic
/// Gaussian pixel noise of scale `sigma`.
pub fn linear_binary_pixel_confidence(c: &LinearClassifier, x: &ImageTensor, sigma: f64) -> Result<f64> {
    if c.classes != 2 {
        bail!(Unsupported, "closed form needs exactly two classes, got {}", c.classes);
    }
    let s = c.scores(x)?;
    let diff: Vec<f64> = c.row(1).iter().zip(c.row(0)).map(|(a, b)| a - b).collect();
    let norm = libm::sqrt(diff.iter().map(|v| v * v).sum::<f64>());
    let mu = s[1] - s[0];
    if norm == 0.0 {
        return Ok(if mu > 0.0 { 1.0 } else { 0.0 });
    }
    Ok(phi(mu / (sigma * norm)))
}

/// A linear classifier with a single nonzero weight on pixel `(k, i, j)` for class 1:
/// class 1 iff `x[k,i,j] > threshold`.
pub fn pixel_detector(
    shape: (usize, usize, usize),
    k: usize,
    i: usize,
    j: usize,
    threshold: f64,
) -> Result<LinearClassifier> {
    let d = shape.0 * shape.1 * shape.2;
    let mut weights = vec![0.0; 2 * d];
    let idx = (k * shape.1 + i) * shape.2 + j;
    if idx >= d {
        bail!(Argument, "pixel ({k}, {i}, {j}) outside shape {shape:?}");
    }
    weights[d + idx] = 1.0;
    LinearClassifier::new(2, shape, weights, vec![0.0, -threshold])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{sample_counts, SmoothedQuery};
    use crate::statfn::ConfidenceParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_examples() {
        let c = LinearClassifier::new(2, (1, 2, 2), vec![0.0; 8], vec![0.0, 1.0]).unwrap();
        let x = ImageTensor::constant(1, 2, 2, 0.3).unwrap();
        assert_eq!(linear_classify(&c, &x).unwrap(), 1);
        let tie = LinearClassifier::new(3, (1, 2, 2), vec![0.0; 12], vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(linear_classify(&tie, &x).unwrap(), 0);
        let bad = ImageTensor::zeros(1, 3, 2).unwrap();
        assert!(linear_classify(&c, &bad).is_err());
        assert!(LinearClassifier::new(2, (1, 2, 2), vec![f64::NAN; 8], vec![0.0; 2]).is_err());
        assert!(LinearClassifier::new(2, (1, 2, 2), vec![0.0; 7], vec![0.0; 2]).is_err());
    }

    #[test]
    fn pixel_detector_flips_at_threshold() {
        let c = pixel_detector((1, 3, 3), 0, 1, 2, 0.4).unwrap();
        let mut x = ImageTensor::zeros(1, 3, 3).unwrap().into_data();
        x[5] = 0.4;
        let at = ImageTensor::new(1, 3, 3, x.clone()).unwrap();
        assert_eq!(linear_classify(&c, &at).unwrap(), 0);
        x[5] = 0.4 + 1e-12;
        let above = ImageTensor::new(1, 3, 3, x).unwrap();
        assert_eq!(linear_classify(&c, &above).unwrap(), 1);
    }

    #[test]
    fn analytic_examples() {
        let x = ImageTensor::constant(1, 4, 4, 0.3).unwrap();
        let pixel = TransformSpec::new(TransformKind::Rotation);
        let g = DistributionSpec::gaussian_iso(0.4, 1).unwrap();
        let c = SyntheticClassifier::constant(2);
        assert_eq!(analytic_smoothed_confidence(&c, pixel, &g, &x).unwrap(), 1.0);
        let m = SyntheticClassifier::mean_threshold(x.mean()).unwrap();
        assert_eq!(analytic_smoothed_confidence(&m, pixel, &g, &x).unwrap(), 0.5);
        // τ_eff = 0.4/4 = 0.1; mean = t + τ_eff.
        let m = SyntheticClassifier::mean_threshold(0.2).unwrap();
        let p = analytic_smoothed_confidence(&m, pixel, &g, &x).unwrap();
        assert!((p - 0.8413447460685429).abs() < 1e-12);
        let bc = TransformSpec::new(TransformKind::BrightnessContrast);
        let g2 = DistributionSpec::gaussian(vec![1e-12, 0.1]).unwrap();
        let p = analytic_smoothed_confidence(&m, bc, &g2, &x).unwrap();
        assert!((p - 0.8413447460685429).abs() < 1e-9);
        let ball = SyntheticClassifier::l2_ball(x.clone(), 1.0).unwrap();
        assert!(analytic_smoothed_confidence(&ball, bc, &g2, &x).is_err());
    }

    #[test]
    fn analytic_translation_black_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = ImageTensor::from_fn(1, 5, 5, |_, _, _| rng.random::<f64>()).unwrap();
        let m = SyntheticClassifier::mean_threshold(0.3).unwrap();
        let spec = TransformSpec::new(TransformKind::TranslationBlack);
        let noise = DistributionSpec::gaussian_iso(1.0, 2).unwrap();
        let p = analytic_smoothed_confidence(&m, spec, &noise, &x).unwrap();
        let mut q = 0.0;
        for dx in -12i64..=12 {
            for dy in -12i64..=12 {
                let y = translate_int(&x, dx, dy, Padding::Black);
                if y.mean() > 0.3 {
                    q += round_prob(dx, 1.0) * round_prob(dy, 1.0);
                }
            }
        }
        assert!((p - q).abs() < 1e-14);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn monte_carlo_agreement() {
        let x = ImageTensor::constant(1, 3, 3, 0.5).unwrap();
        let center = ImageTensor::constant(1, 3, 3, 0.45).unwrap();
        let ball = SyntheticClassifier::l2_ball(center, 0.6).unwrap();
        let spec = TransformSpec::new(TransformKind::Scaling);
        let noise = DistributionSpec::gaussian_iso(0.2, 1).unwrap();
        let p = analytic_smoothed_confidence(&ball, spec, &noise, &x).unwrap();
        let n = 20_000;
        let q = SmoothedQuery::new(&ball, spec, noise, ConfidenceParams::new(0.001, n, 100).unwrap(), 11).unwrap();
        let freq = sample_counts(&q, &x, n).unwrap().counts[1] as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "freq={freq} p={p}");
    }

    #[test]
    fn linear_pixel_confidence() {
        let c = pixel_detector((1, 2, 2), 0, 0, 1, 0.5).unwrap();
        let x = ImageTensor::constant(1, 2, 2, 0.6).unwrap();
        let p = linear_binary_pixel_confidence(&c, &x, 0.1).unwrap();
        assert!((p - 0.8413447460685429).abs() < 1e-12);
    }
}
