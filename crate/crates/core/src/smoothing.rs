//! Monte-Carlo evaluation of smoothed classifiers: sampling, prediction,
//! certification and progressive certification.
//!
//! Every noise draw is addressed by `(seed, domain, index)` through [`DrawRng`],
//! so counts are identical whether draws are evaluated sequentially or fanned
//! out across workers.
//!
//! For [`TransformKind::Rotation`] and [`TransformKind::Scaling`] the smoothing
//! noise is additive isotropic Gaussian noise on pixels (the transform is applied
//! to anchors beforehand); for all other kinds the noise perturbs the transform
//! parameter.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::noise::DrawRng;
use crate::radii::{closed_form_radius, ConfidencePair, DistributionSpec};
use crate::statfn::{binom_two_sided_p, clopper_pearson_lower, ConfidenceParams};
use crate::tensor::ImageTensor;
use crate::transforms::{TransformKind, TransformParams, TransformSpec};

/// A deterministic classifier `h: X → {0, …, C−1}`.
pub trait BaseClassifier: Sync {
    fn num_classes(&self) -> usize;
    fn classify(&self, x: &ImageTensor) -> Result<usize>;
}

impl<T: BaseClassifier + ?Sized> BaseClassifier for &T {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn classify(&self, x: &ImageTensor) -> Result<usize> {
        (**self).classify(x)
    }
}

/// Draw-stream domains.
pub mod domain {
    pub const SAMPLE: u64 = 0;
    pub const PREDICT: u64 = 1;
    pub const CERTIFY: u64 = 2;
}

/// Everything needed to evaluate `g^ε(x)` by sampling.
#[derive(Clone)]
pub struct SmoothedQuery<'a> {
    pub classifier: &'a dyn BaseClassifier,
    pub transform: TransformSpec,
    pub noise: DistributionSpec,
    pub conf: ConfidenceParams,
    pub seed: u64,
}

impl core::fmt::Debug for SmoothedQuery<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SmoothedQuery")
            .field("transform", &self.transform)
            .field("noise", &self.noise)
            .field("conf", &self.conf)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Whether `kind` is smoothed with additive pixel noise.
pub fn uses_pixel_noise(kind: TransformKind) -> bool {
    matches!(kind, TransformKind::Rotation | TransformKind::Scaling)
}

impl<'a> SmoothedQuery<'a> {
    pub fn new(
        classifier: &'a dyn BaseClassifier,
        transform: TransformSpec,
        noise: DistributionSpec,
        conf: ConfidenceParams,
        seed: u64,
    ) -> Result<Self> {
        let q = Self { classifier, transform, noise, conf, seed };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.conf.validate()?;
        if self.classifier.num_classes() < 2 {
            bail!(Argument, "classifier must have at least two classes");
        }
        if self.noise.dim != self.transform.param_dim {
            bail!(
                Config,
                "{} noise has dimension {}, {} needs {}",
                self.noise.family_name(),
                self.noise.dim,
                self.transform.kind.name(),
                self.transform.param_dim
            );
        }
        if uses_pixel_noise(self.transform.kind) && self.noise.isotropic_sigma().is_none() {
            bail!(Config, "{} is smoothed with isotropic gaussian pixel noise", self.transform.kind.name());
        }
        if self.transform.kind == TransformKind::GaussianBlur && !self.noise.nonnegative_support() {
            bail!(Config, "blur needs noise with nonnegative support, got {}", self.noise.family_name());
        }
        Ok(())
    }

    /// The noisy input for draw `index` of stream `domain`.
    pub fn noisy_input(&self, x: &ImageTensor, domain: u64, index: u64) -> Result<ImageTensor> {
        let mut rng = DrawRng::new(self.seed, domain, index);
        if uses_pixel_noise(self.transform.kind) {
            let sigma = self.noise.isotropic_sigma().unwrap_or(1.0);
            let data: Vec<f64> = x.data().iter().map(|v| v + sigma * rng.normal()).collect();
            return Ok(x.with_data(data));
        }
        let mut eps = [0.0; 2];
        let eps = &mut eps[..self.noise.dim];
        self.noise.sample_into(&mut rng, eps);
        self.transform.apply(x, &TransformParams::from_slice(eps)?)
    }

    /// Label of the base classifier on draw `index` of stream `domain`.
    pub fn draw_label(&self, x: &ImageTensor, domain: u64, index: u64) -> Result<usize> {
        let label = self.classifier.classify(&self.noisy_input(x, domain, index)?)?;
        if label >= self.classifier.num_classes() {
            bail!(Evaluation, "label {label} out of range for {} classes", self.classifier.num_classes());
        }
        Ok(label)
    }
}

/// Per-class hit counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    pub counts: Vec<u64>,
}

impl CountVector {
    pub fn zeros(classes: usize) -> Self {
        Self { counts: vec![0; classes] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &CountVector) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Class with the most hits; ties go to the smallest index.
    pub fn top(&self) -> usize {
        self.top_two().0
    }

    /// `(top class, top count, runner-up count)`.
    pub fn top_two(&self) -> (usize, u64, u64) {
        let mut best = 0;
        for (c, &n) in self.counts.iter().enumerate() {
            if n > self.counts[best] {
                best = c;
            }
        }
        let runner = self.counts.iter().enumerate().filter(|&(c, _)| c != best).map(|(_, &n)| n).max().unwrap_or(0);
        (best, self.counts[best], runner)
    }
}

/// Tallies draws `start..start + n` of stream `domain`.
pub fn sample_counts_range(
    q: &SmoothedQuery<'_>,
    x: &ImageTensor,
    domain: u64,
    start: u64,
    n: u64,
) -> Result<CountVector> {
    let mut cv = CountVector::zeros(q.classifier.num_classes());
    for idx in start..start + n {
        cv.counts[q.draw_label(x, domain, idx)?] += 1;
    }
    Ok(cv)
}

/// Tallies `n` draws of the smoothing distribution.
pub fn sample_counts(q: &SmoothedQuery<'_>, x: &ImageTensor, n: u64) -> Result<CountVector> {
    if n == 0 {
        bail!(Argument, "sample count must be positive");
    }
    sample_counts_range(q, x, domain::SAMPLE, 0, n)
}

/// Smoothed prediction or abstention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Class(usize),
    Abstain,
}

/// Predicts with `n0` draws; abstains unless the top class beats the runner-up
/// in a two-sided binomial test at level `alpha`.
pub fn predict(q: &SmoothedQuery<'_>, x: &ImageTensor) -> Result<Prediction> {
    let counts = sample_counts_range(q, x, domain::PREDICT, 0, q.conf.n0_samples)?;
    Ok(predict_from_counts(&counts, q.conf.alpha))
}

pub fn predict_from_counts(counts: &CountVector, alpha: f64) -> Prediction {
    let (top, na, nb) = counts.top_two();
    match binom_two_sided_p(na, na + nb) {
        Ok(p) if p <= alpha => Prediction::Class(top),
        _ => Prediction::Abstain,
    }
}

/// Outcome of [`certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    /// `None` when abstaining.
    pub label: Option<usize>,
    /// Class selected from the first `n0` draws.
    pub guess: usize,
    pub p_a_lower: f64,
    pub hits: u64,
    pub samples_used: u64,
}

/// Selects a class from draws `0..n0`, then lower-bounds its probability from
/// draws `n0..n0 + n`; abstains when the bound is at most ½.
pub fn certify(q: &SmoothedQuery<'_>, x: &ImageTensor) -> Result<Certification> {
    let (n0, n) = (q.conf.n0_samples, q.conf.n_samples);
    let guess = sample_counts_range(q, x, domain::CERTIFY, 0, n0)?.top();
    let hits = sample_counts_range(q, x, domain::CERTIFY, n0, n)?.counts[guess];
    certification_from_hits(guess, hits, n, n0, q.conf.alpha)
}

pub fn certification_from_hits(guess: usize, hits: u64, n: u64, n0: u64, alpha: f64) -> Result<Certification> {
    let p_a_lower = clopper_pearson_lower(hits, n, alpha)?;
    let label = if p_a_lower > 0.5 { Some(guess) } else { None };
    Ok(Certification { label, guess, p_a_lower, hits, samples_used: n0 + n })
}

/// Status of a progressive run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgressiveStatus {
    Certified,
    /// `p_a_lower > ½` but the radius never exceeded the target.
    NotCertified,
    /// `p_a_lower ≤ ½` after all samples.
    Abstain,
}

/// Outcome of [`progressive_certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressiveOutcome {
    pub status: ProgressiveStatus,
    pub guess: usize,
    pub p_a_lower: f64,
    pub radius: f64,
    pub hits: u64,
    /// Estimation draws consumed (excluding the `n0` selection draws).
    pub estimation_samples: u64,
    pub samples_used: u64,
    /// Error rate used at each check.
    pub alpha_per_check: f64,
}

/// Number of checks a progressive run may perform.
pub fn progressive_checks(n: u64, batch: u64) -> u64 {
    n.div_ceil(batch)
}

/// Accumulates estimation draws in batches and stops once the certified radius
/// exceeds `target_radius`.
///
/// The error budget `alpha` is split evenly over the `⌈n/batch⌉` possible checks.
pub fn progressive_certify(
    q: &SmoothedQuery<'_>,
    x: &ImageTensor,
    target_radius: f64,
    batch: u64,
) -> Result<ProgressiveOutcome> {
    progressive_certify_with(q, x, target_radius, batch, |start, len| {
        sample_counts_range(q, x, domain::CERTIFY, start, len)
    })
}

/// [`progressive_certify`] with a caller-supplied tally of draws `start..start+len`
/// of the certification stream. The tally must equal [`sample_counts_range`].
pub fn progressive_certify_with(
    q: &SmoothedQuery<'_>,
    _x: &ImageTensor,
    target_radius: f64,
    batch: u64,
    mut tally: impl FnMut(u64, u64) -> Result<CountVector>,
) -> Result<ProgressiveOutcome> {
    if !(target_radius >= 0.0) {
        bail!(Argument, "target radius must be nonnegative, got {target_radius}");
    }
    if batch == 0 {
        bail!(Argument, "batch size must be positive");
    }
    let (n0, n) = (q.conf.n0_samples, q.conf.n_samples);
    let alpha_per_check = q.conf.alpha / progressive_checks(n, batch) as f64;
    let guess = tally(0, n0)?.top();
    let mut hits = 0;
    let mut used = 0;
    let mut p_a_lower = 0.0;
    let mut radius = 0.0;
    while used < n {
        let len = batch.min(n - used);
        hits += tally(n0 + used, len)?.counts[guess];
        used += len;
        p_a_lower = clopper_pearson_lower(hits, used, alpha_per_check)?;
        radius = radius_for(&q.noise, p_a_lower)?;
        if p_a_lower > 0.5 && radius > target_radius {
            return Ok(ProgressiveOutcome {
                status: ProgressiveStatus::Certified,
                guess,
                p_a_lower,
                radius,
                hits,
                estimation_samples: used,
                samples_used: n0 + used,
                alpha_per_check,
            });
        }
    }
    let status = if p_a_lower > 0.5 { ProgressiveStatus::NotCertified } else { ProgressiveStatus::Abstain };
    Ok(ProgressiveOutcome {
        status,
        guess,
        p_a_lower,
        radius,
        hits,
        estimation_samples: used,
        samples_used: n0 + used,
        alpha_per_check,
    })
}

/// Two-class radius `R(p, 1 − p)`, or 0 when `p ≤ ½`.
pub fn radius_for(noise: &DistributionSpec, p_a_lower: f64) -> Result<f64> {
    if p_a_lower <= 0.5 {
        return Ok(0.0);
    }
    Ok(closed_form_radius(noise, ConfidencePair::two_class(p_a_lower)?)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statfn::{binom_survival, phi, phi_inv};

    struct Constant(usize);
    impl BaseClassifier for Constant {
        fn num_classes(&self) -> usize {
            4
        }
        fn classify(&self, _: &ImageTensor) -> Result<usize> {
            Ok(self.0)
        }
    }

    /// Class 1 iff the mean pixel exceeds `t`.
    struct MeanAbove(f64);
    impl BaseClassifier for MeanAbove {
        fn num_classes(&self) -> usize {
            2
        }
        fn classify(&self, x: &ImageTensor) -> Result<usize> {
            Ok(usize::from(x.mean() > self.0))
        }
    }

    fn bc_query(c: &dyn BaseClassifier, sigma: f64, n: u64, seed: u64) -> SmoothedQuery<'_> {
        SmoothedQuery::new(
            c,
            TransformSpec::new(TransformKind::BrightnessContrast),
            DistributionSpec::gaussian(vec![1e-9, sigma]).unwrap(),
            ConfidenceParams::new(0.001, n, 100.min(n)).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn constant_counts() {
        let c = Constant(3);
        let x = ImageTensor::zeros(1, 3, 3).unwrap();
        let q = bc_query(&c, 0.1, 100, 0);
        let cv = sample_counts(&q, &x, 100).unwrap();
        assert_eq!(cv.counts, vec![0, 0, 0, 100]);
    }

    #[test]
    fn counts_are_reproducible_and_splittable() {
        let c = MeanAbove(0.5);
        let x = ImageTensor::constant(1, 3, 3, 0.45).unwrap();
        let q = bc_query(&c, 0.1, 1000, 42);
        let a = sample_counts(&q, &x, 1000).unwrap();
        let b = sample_counts(&q, &x, 1000).unwrap();
        assert_eq!(a, b);
        let mut parts = sample_counts_range(&q, &x, domain::SAMPLE, 0, 300).unwrap();
        parts.add(&sample_counts_range(&q, &x, domain::SAMPLE, 300, 700).unwrap());
        assert_eq!(parts, a);
    }

    #[test]
    fn brightness_frequency_matches_normal_cdf() {
        let c = MeanAbove(0.5);
        let x = ImageTensor::constant(1, 3, 3, 0.45).unwrap();
        let tau = 0.1;
        let n = 20_000;
        let q = bc_query(&c, tau, n, 7);
        let hits = sample_counts(&q, &x, n).unwrap().counts[1] as f64;
        // mean(x + b) > t  ⇔  b > t − mean.
        let p = phi((0.45 - 0.5) / tau);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn predict_examples() {
        let c = Constant(2);
        let x = ImageTensor::zeros(1, 2, 2).unwrap();
        let q = bc_query(&c, 0.1, 1000, 0);
        assert_eq!(predict(&q, &x).unwrap(), Prediction::Class(2));
        let cv = CountVector { counts: vec![99, 1] };
        assert_eq!(predict_from_counts(&cv, 0.001), Prediction::Class(0));
        let cv = CountVector { counts: vec![50, 50] };
        assert_eq!(predict_from_counts(&cv, 0.001), Prediction::Abstain);
    }

    #[test]
    fn predict_abstains_under_null() {
        // Exact abstention probability at a fair coin with n0 = 100: the test
        // rejects only when the split is extreme.
        let n0 = 100u64;
        let mut reject = 0.0;
        for s in 0..=n0 {
            if binom_two_sided_p(s, n0).unwrap() <= 0.001 {
                reject += binom_survival(s, n0, 0.5) - binom_survival(s + 1, n0, 0.5);
            }
        }
        assert!(reject <= 0.001);
        // Empirically with a classifier that is a fair coin.
        let c = MeanAbove(0.5);
        let x = ImageTensor::constant(1, 2, 2, 0.5).unwrap();
        let mut abstained = 0;
        for seed in 0..200 {
            let q = bc_query(&c, 0.2, 100, seed);
            if predict(&q, &x).unwrap() == Prediction::Abstain {
                abstained += 1;
            }
        }
        assert!(abstained >= 198);
    }

    #[test]
    fn certify_constant() {
        let c = Constant(1);
        let x = ImageTensor::zeros(1, 2, 2).unwrap();
        let q = bc_query(&c, 0.1, 10_000, 3);
        let out = certify(&q, &x).unwrap();
        assert_eq!(out.label, Some(1));
        assert!((out.p_a_lower - 0.001f64.powf(1e-4)).abs() < 1e-12);
        assert_eq!(out.samples_used, 10_100);
    }

    #[test]
    fn certify_lower_bound_below_frequency() {
        let c = MeanAbove(0.5);
        let x = ImageTensor::constant(1, 2, 2, 0.55).unwrap();
        let q = bc_query(&c, 0.1, 5_000, 9);
        let out = certify(&q, &x).unwrap();
        assert!(out.p_a_lower <= out.hits as f64 / 5_000.0);
    }

    #[test]
    fn certify_abstains_at_half() {
        let c = MeanAbove(0.5);
        let x = ImageTensor::constant(1, 2, 2, 0.5).unwrap();
        let mut abstained = 0;
        for seed in 0..100 {
            let q = bc_query(&c, 0.2, 500, seed);
            if certify(&q, &x).unwrap().label.is_none() {
                abstained += 1;
            }
        }
        assert!(abstained >= 99);
    }

    fn pixel_query(c: &dyn BaseClassifier, sigma: f64, n: u64) -> SmoothedQuery<'_> {
        SmoothedQuery::new(
            c,
            TransformSpec::new(TransformKind::Rotation),
            DistributionSpec::gaussian_iso(sigma, 1).unwrap(),
            ConfidenceParams::new(0.001, n, 100).unwrap(),
            5,
        )
        .unwrap()
    }

    #[test]
    fn progressive_examples() {
        let c = Constant(0);
        let x = ImageTensor::zeros(1, 3, 3).unwrap();
        let q = pixel_query(&c, 0.5, 100_000);
        let out = progressive_certify(&q, &x, 0.1, 400).unwrap();
        assert_eq!(out.status, ProgressiveStatus::Certified);
        assert_eq!(out.estimation_samples, 400);
        let a = 0.001 / 250.0;
        let want = 0.5 * phi_inv(f64::powf(a, 1.0 / 400.0));
        assert!((out.radius - want).abs() < 1e-12);
        assert_eq!(out.alpha_per_check, a);

        let q = pixel_query(&c, 0.5, 2_000);
        let out = progressive_certify(&q, &x, f64::INFINITY, 400).unwrap();
        assert_eq!(out.status, ProgressiveStatus::NotCertified);
        assert_eq!(out.estimation_samples, 2_000);

        let c = MeanAbove(0.0);
        let x = ImageTensor::constant(1, 3, 3, 0.2).unwrap();
        let q = pixel_query(&c, 0.5, 4_000);
        let out = progressive_certify(&q, &x, 0.0, 400).unwrap();
        assert_eq!(out.status, ProgressiveStatus::Certified);
        assert_eq!(out.estimation_samples, 400);
    }

    #[test]
    fn progressive_early_stop_recomputes() {
        let c = MeanAbove(0.0);
        let x = ImageTensor::constant(1, 3, 3, 0.05).unwrap();
        let q = pixel_query(&c, 0.3, 20_000);
        let out = progressive_certify(&q, &x, 0.2, 400).unwrap();
        if out.status == ProgressiveStatus::Certified {
            let p = clopper_pearson_lower(out.hits, out.estimation_samples, out.alpha_per_check).unwrap();
            assert!(0.3 * phi_inv(p) > 0.2);
        }
    }

    #[test]
    fn query_validation() {
        let c = Constant(0);
        let bad_dim = SmoothedQuery::new(
            &c,
            TransformSpec::new(TransformKind::BrightnessContrast),
            DistributionSpec::gaussian_iso(1.0, 1).unwrap(),
            ConfidenceParams::default(),
            0,
        );
        assert!(bad_dim.is_err());
        let bad_blur = SmoothedQuery::new(
            &c,
            TransformSpec::new(TransformKind::GaussianBlur),
            DistributionSpec::laplace(1.0).unwrap(),
            ConfidenceParams::default(),
            0,
        );
        assert!(matches!(bad_blur, Err(crate::Error::Config(_))));
        let bad_pixel = SmoothedQuery::new(
            &c,
            TransformSpec::new(TransformKind::Scaling),
            DistributionSpec::exponential(1.0, 1).unwrap(),
            ConfidenceParams::default(),
            0,
        );
        assert!(bad_pixel.is_err());
    }
}
