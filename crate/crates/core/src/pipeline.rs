//! Per-transform certification pipelines.
//!
//! * blur and reflect-padded translation: closed-form radius of the parameter noise;
//! * brightness/contrast: lemma chain over a rectangle of `(k, b)`;
//! * rotation and scaling: aliasing bound plus progressive certification of every anchor;
//! * black-padded translation: exhaustive enumeration of integer shifts.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::aliasing::{aliasing_bound, AliasKind, AliasingBound, IntervalGrid};
use crate::error::{bail, Result};
use crate::radii::{bc_confidence_shift, bc_rhs, closed_form_radius, ConfidencePair, NoiseFamily, RadiusResult};
use crate::smoothing::{
    certify, progressive_certify, BaseClassifier, Prediction, ProgressiveOutcome, ProgressiveStatus, SmoothedQuery,
};
use crate::tensor::ImageTensor;
use crate::transforms::{translate_int, Padding, TransformKind, TransformParams};

/// Region of transform parameters to certify.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterSet {
    /// Blur variances `[0, alpha_max]`.
    BlurInterval { alpha_max: f64 },
    /// Shifts `(Δx, Δy)` with `√(Δx² + Δy²) ≤ rho`.
    TranslationDisk { rho: f64 },
    /// Log-contrast `[k_min, k_max]` times brightness `[b_min, b_max]`.
    BcRectangle { k_min: f64, k_max: f64, b_min: f64, b_max: f64 },
    /// Rotation angle (radians) or scaling factor interval `[a, b]`.
    Interval { a: f64, b: f64 },
}

impl ParameterSet {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParameterSet::BlurInterval { alpha_max } => {
                if !(alpha_max >= 0.0 && alpha_max.is_finite()) {
                    bail!(Argument, "blur region needs a finite alpha_max >= 0, got {alpha_max}");
                }
            }
            ParameterSet::TranslationDisk { rho } => {
                if !(rho >= 0.0 && rho.is_finite()) {
                    bail!(Argument, "translation radius must be finite and >= 0, got {rho}");
                }
            }
            ParameterSet::BcRectangle { k_min, k_max, b_min, b_max } => {
                let finite = [k_min, k_max, b_min, b_max].iter().all(|v| v.is_finite());
                if !(finite && k_min <= k_max && b_min <= b_max) {
                    bail!(Argument, "invalid brightness/contrast rectangle [{k_min}, {k_max}] x [{b_min}, {b_max}]");
                }
            }
            ParameterSet::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    bail!(Argument, "invalid interval [{a}, {b}]");
                }
            }
        }
        Ok(())
    }

    /// Short label used in reports.
    pub fn describe(&self) -> String {
        match *self {
            ParameterSet::BlurInterval { alpha_max } => format!("alpha<={alpha_max}"),
            ParameterSet::TranslationDisk { rho } => format!("rho<={rho}"),
            ParameterSet::BcRectangle { k_min, k_max, b_min, b_max } => {
                format!("k[{k_min},{k_max}]xb[{b_min},{b_max}]")
            }
            ParameterSet::Interval { a, b } => format!("[{a},{b}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    Abstain,
    NotCertified,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Abstain => "abstain",
            Verdict::NotCertified => "not_certified",
        }
    }
}

/// Worst-case quantities of the brightness/contrast chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcChain {
    /// Upper bound of the ellipse left-hand side over the rectangle.
    pub lhs_max: f64,
    /// Smallest shifted confidence over the rectangle.
    pub p_shifted: f64,
    pub rhs: f64,
}

/// Per-anchor summary of a rotation or scaling certification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSummary {
    pub anchors: usize,
    /// Anchors processed before the verdict was settled.
    pub evaluated: usize,
    pub min_radius: f64,
    /// Worst-case error probability over all anchors, `min(1, N·α)`.
    pub joint_alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationResult {
    pub kind: TransformKind,
    pub verdict: Verdict,
    pub predicted_class: Option<usize>,
    pub p_a_lower: f64,
    /// Absent for enumeration.
    pub radius: Option<RadiusResult>,
    pub aliasing: Option<AliasingBound>,
    pub bc: Option<BcChain>,
    pub anchors: Option<AnchorSummary>,
    /// First displacement that changed the prediction.
    pub witness: Option<(i64, i64)>,
    pub samples_used: u64,
    /// Wall-clock seconds, filled in by callers that measure time.
    pub elapsed: Option<f64>,
}

impl CertificationResult {
    fn empty(kind: TransformKind) -> Self {
        Self {
            kind,
            verdict: Verdict::Abstain,
            predicted_class: None,
            p_a_lower: 0.0,
            radius: None,
            aliasing: None,
            bc: None,
            anchors: None,
            witness: None,
            samples_used: 0,
            elapsed: None,
        }
    }
}

/// Whether every parameter of `region` satisfies the condition of `radius`.
///
/// All closed-form conditions are monotone in the size of the perturbation, so
/// the extreme point of the region decides.
pub fn region_admitted(radius: &RadiusResult, region: &ParameterSet) -> bool {
    match *region {
        ParameterSet::BlurInterval { alpha_max } => radius.admits(&[alpha_max]),
        ParameterSet::TranslationDisk { rho } => match &radius.condition {
            crate::radii::RadiusCondition::WeightedL2 { sigma, threshold } => {
                let smin = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
                sigma.len() == 2 && (*threshold == f64::INFINITY || rho / smin < *threshold)
            }
            _ => false,
        },
        _ => false,
    }
}

/// Certifies blur or reflect-padded translation through the closed-form radius
/// of the parameter noise.
pub fn certify_resolvable(
    x: &ImageTensor,
    label: usize,
    q: &SmoothedQuery<'_>,
    region: &ParameterSet,
) -> Result<CertificationResult> {
    q.validate()?;
    region.validate()?;
    let kind = q.transform.kind;
    match (kind, region, &q.noise.family) {
        (
            TransformKind::GaussianBlur,
            ParameterSet::BlurInterval { .. },
            NoiseFamily::Exponential { .. } | NoiseFamily::Uniform { .. } | NoiseFamily::FoldedGaussian { .. },
        ) => {}
        (TransformKind::TranslationReflect, ParameterSet::TranslationDisk { .. }, NoiseFamily::Gaussian { sigma })
            if sigma.len() == 2 => {}
        _ => bail!(Config, "{} noise with {} cannot certify {}", q.noise.family_name(), kind.name(), region.describe()),
    }
    let c = certify(q, x)?;
    let mut out = CertificationResult::empty(kind);
    out.p_a_lower = c.p_a_lower;
    out.samples_used = c.samples_used;
    let Some(pred) = c.label else {
        return Ok(out);
    };
    out.predicted_class = Some(pred);
    let radius = closed_form_radius(&q.noise, ConfidencePair::two_class(c.p_a_lower)?)?;
    out.verdict =
        if pred == label && region_admitted(&radius, region) { Verdict::Certified } else { Verdict::NotCertified };
    out.radius = Some(radius);
    Ok(out)
}

/// Worst-case chain quantities for a rectangle at lower confidence bound `p_a_lower`.
///
/// The left-hand side is bounded by `√((max|k|/σ)² + (max|b|·e^{k_max}/τ)²)`, which
/// dominates `√((k/σ)² + (b·e^k/τ)²)` on the whole rectangle. The shifted
/// confidence is nonincreasing in `|k|`, so its minimum lies at `k_min` or `k_max`.
pub fn bc_chain(p_a_lower: f64, sigma: f64, tau: f64, rect: &ParameterSet) -> Result<BcChain> {
    let ParameterSet::BcRectangle { k_min, k_max, b_min, b_max } = *rect else {
        bail!(Argument, "expected a brightness/contrast rectangle, got {}", rect.describe());
    };
    let kabs = k_min.abs().max(k_max.abs());
    let babs = b_min.abs().max(b_max.abs());
    let u = kabs / sigma;
    let v = babs * libm::exp(k_max) / tau;
    let lhs_max = libm::sqrt(u * u + v * v);
    let p_shifted = bc_confidence_shift(p_a_lower, k_min)?.min(bc_confidence_shift(p_a_lower, k_max)?);
    let rhs = if p_shifted > 0.5 { bc_rhs(ConfidencePair::two_class(p_shifted)?) } else { 0.0 };
    Ok(BcChain { lhs_max, p_shifted, rhs })
}

/// Certifies a rectangle of brightness/contrast parameters.
pub fn certify_bc_rectangle(
    x: &ImageTensor,
    label: usize,
    q: &SmoothedQuery<'_>,
    rect: &ParameterSet,
) -> Result<CertificationResult> {
    q.validate()?;
    rect.validate()?;
    let kind = q.transform.kind;
    let (sigma, tau) = match (&q.noise.family, kind) {
        (NoiseFamily::Gaussian { sigma }, TransformKind::BrightnessContrast) if sigma.len() == 2 => {
            (sigma[0], sigma[1])
        }
        _ => bail!(Config, "brightness/contrast needs 2-d gaussian parameter noise"),
    };
    if !matches!(rect, ParameterSet::BcRectangle { .. }) {
        bail!(Config, "brightness/contrast certifies rectangles, got {}", rect.describe());
    }
    let c = certify(q, x)?;
    let mut out = CertificationResult::empty(kind);
    out.p_a_lower = c.p_a_lower;
    out.samples_used = c.samples_used;
    let Some(pred) = c.label else {
        return Ok(out);
    };
    out.predicted_class = Some(pred);
    let chain = bc_chain(c.p_a_lower, sigma, tau, rect)?;
    out.radius = Some(closed_form_radius(&q.noise, ConfidencePair::two_class(c.p_a_lower)?)?);
    out.verdict = if pred == label && chain.p_shifted > 0.5 && chain.lhs_max < chain.rhs {
        Verdict::Certified
    } else {
        Verdict::NotCertified
    };
    out.bc = Some(chain);
    Ok(out)
}

/// Certifies a rotation or scaling interval with per-anchor progressive
/// certification against `√M`.
pub fn certify_diff_resolvable(
    x: &ImageTensor,
    label: usize,
    q: &SmoothedQuery<'_>,
    interval: &ParameterSet,
    grid: &IntervalGrid,
    batch: u64,
) -> Result<CertificationResult> {
    certify_diff_resolvable_with(x, label, q, interval, grid, |anchor, target| {
        progressive_certify(q, anchor, target, batch)
    })
}

/// [`certify_diff_resolvable`] with a caller-supplied progressive run per anchor
/// image and target radius.
pub fn certify_diff_resolvable_with(
    x: &ImageTensor,
    label: usize,
    q: &SmoothedQuery<'_>,
    interval: &ParameterSet,
    grid: &IntervalGrid,
    mut run: impl FnMut(&ImageTensor, f64) -> Result<ProgressiveOutcome>,
) -> Result<CertificationResult> {
    q.validate()?;
    interval.validate()?;
    grid.validate()?;
    let kind = q.transform.kind;
    let alias = match kind {
        TransformKind::Rotation => AliasKind::Rotation,
        TransformKind::Scaling => AliasKind::Scaling,
        _ => bail!(Config, "{} is not certified through anchors", kind.name()),
    };
    if grid.kind != alias {
        bail!(Config, "grid kind {:?} does not match {}", grid.kind, kind.name());
    }
    match *interval {
        ParameterSet::Interval { a, b } if a == grid.a && b == grid.b => {}
        _ => bail!(Config, "region {} must equal the grid range [{}, {}]", interval.describe(), grid.a, grid.b),
    }
    let bound = aliasing_bound(x, grid)?;
    let target = bound.sqrt_m;
    let anchors = grid.anchors();
    let mut out = CertificationResult::empty(kind);
    let mut min_radius = f64::INFINITY;
    let mut min_p = 1.0f64;
    let mut verdict = Verdict::Certified;
    let mut evaluated = 0;
    for &a in &anchors {
        let xa = q.transform.apply(x, &TransformParams::scalar(a))?;
        let o = run(&xa, target)?;
        evaluated += 1;
        out.samples_used += o.samples_used;
        min_p = min_p.min(o.p_a_lower);
        min_radius = min_radius.min(o.radius);
        let v = match o.status {
            ProgressiveStatus::Abstain => Verdict::Abstain,
            ProgressiveStatus::NotCertified => Verdict::NotCertified,
            ProgressiveStatus::Certified if o.guess != label => Verdict::NotCertified,
            ProgressiveStatus::Certified => Verdict::Certified,
        };
        if o.status != ProgressiveStatus::Abstain {
            out.predicted_class.get_or_insert(o.guess);
        }
        if v != Verdict::Certified {
            verdict = v;
            break;
        }
    }
    out.verdict = verdict;
    out.p_a_lower = min_p;
    out.radius = Some(if min_p > 0.5 {
        closed_form_radius(&q.noise, ConfidencePair::two_class(min_p)?)?
    } else {
        RadiusResult::zero(crate::radii::RadiusKind::L2Weighted)
    });
    out.anchors = Some(AnchorSummary {
        anchors: anchors.len(),
        evaluated,
        min_radius,
        joint_alpha: (anchors.len() as f64 * q.conf.alpha).min(1.0),
    });
    out.aliasing = Some(bound);
    Ok(out)
}

/// Integer shifts of the closed disk of radius `rho`, row by row.
pub fn disk_displacements(rho: f64) -> Vec<(i64, i64)> {
    let r = libm::floor(rho) as i64;
    let mut out = Vec::new();
    for dx in -r..=r {
        for dy in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= rho * rho {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Exact certification of black-padded translation by evaluating `h` on every
/// integer shift in the disk.
pub fn certify_translation_enum(
    x: &ImageTensor,
    label: usize,
    h: &dyn BaseClassifier,
    region: &ParameterSet,
) -> Result<CertificationResult> {
    let ParameterSet::TranslationDisk { rho } = *region else {
        bail!(Config, "enumeration certifies translation disks, got {}", region.describe());
    };
    region.validate()?;
    let mut out = CertificationResult::empty(TransformKind::TranslationBlack);
    out.predicted_class = Some(h.classify(x)?);
    out.p_a_lower = 1.0;
    out.verdict = Verdict::Certified;
    for (dx, dy) in disk_displacements(rho) {
        out.samples_used += 1;
        if h.classify(&translate_int(x, dx, dy, Padding::Black))? != label {
            out.verdict = Verdict::NotCertified;
            out.witness = Some((dx, dy));
            break;
        }
    }
    Ok(out)
}

/// Robust accuracy of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAccuracy {
    pub region: String,
    pub certified_correct: usize,
    pub total: usize,
    pub robust_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub total: usize,
    pub clean_correct: usize,
    pub clean_accuracy: f64,
    pub regions: Vec<RegionAccuracy>,
}

/// Clean accuracy of `predict` and, per region, the fraction of samples
/// certified with the correct class.
pub fn robust_accuracy_report(
    dataset: &[(ImageTensor, usize)],
    regions: &[ParameterSet],
    mut predict: impl FnMut(&ImageTensor) -> Result<Prediction>,
    mut certify_one: impl FnMut(&ImageTensor, usize, &ParameterSet) -> Result<CertificationResult>,
) -> Result<AccuracyReport> {
    if dataset.is_empty() {
        bail!(Argument, "empty dataset");
    }
    let total = dataset.len();
    let mut clean_correct = 0;
    for (x, y) in dataset {
        if predict(x)? == Prediction::Class(*y) {
            clean_correct += 1;
        }
    }
    let mut out = Vec::with_capacity(regions.len());
    for region in regions {
        let mut ok = 0;
        for (x, y) in dataset {
            let r = certify_one(x, *y, region)?;
            if r.verdict == Verdict::Certified && r.predicted_class == Some(*y) {
                ok += 1;
            }
        }
        out.push(RegionAccuracy {
            region: region.describe(),
            certified_correct: ok,
            total,
            robust_accuracy: ok as f64 / total as f64,
        });
    }
    Ok(AccuracyReport { total, clean_correct, clean_accuracy: clean_correct as f64 / total as f64, regions: out })
}
