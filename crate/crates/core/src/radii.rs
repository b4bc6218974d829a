//! Closed-form robustness radii per smoothing distribution, and the
//! brightness/contrast confidence shift.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::noise::DrawRng;
use crate::statfn::{phi, phi_inv};

/// Smoothing noise family and its scale parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseFamily {
    /// `N(0, diag(σ²))`, one standard deviation per dimension.
    Gaussian { sigma: Vec<f64> },
    /// `Exp(λ)` per dimension, `λ` is the rate.
    Exponential { lambda: f64 },
    /// `U([a, b])` per dimension.
    Uniform { a: f64, b: f64 },
    /// `Laplace(0, b)`.
    Laplace { b: f64 },
    /// `|N(0, σ²)|`.
    FoldedGaussian { sigma: f64 },
}

/// A smoothing distribution over `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub family: NoiseFamily,
    pub dim: usize,
}

impl DistributionSpec {
    pub fn gaussian(sigma: Vec<f64>) -> Result<Self> {
        let dim = sigma.len();
        Self::checked(NoiseFamily::Gaussian { sigma }, dim)
    }

    pub fn gaussian_iso(sigma: f64, dim: usize) -> Result<Self> {
        Self::gaussian(vec![sigma; dim])
    }

    pub fn exponential(lambda: f64, dim: usize) -> Result<Self> {
        Self::checked(NoiseFamily::Exponential { lambda }, dim)
    }

    pub fn uniform(a: f64, b: f64, dim: usize) -> Result<Self> {
        Self::checked(NoiseFamily::Uniform { a, b }, dim)
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Self::checked(NoiseFamily::Laplace { b }, 1)
    }

    pub fn folded_gaussian(sigma: f64) -> Result<Self> {
        Self::checked(NoiseFamily::FoldedGaussian { sigma }, 1)
    }

    /// The member of `family_name`'s family with unit variance per dimension.
    pub fn unit_variance(family_name: &str) -> Result<Self> {
        match family_name {
            "gaussian" => Self::gaussian_iso(1.0, 1),
            "exponential" => Self::exponential(1.0, 1),
            "uniform" => Self::uniform(-libm::sqrt(3.0), libm::sqrt(3.0), 1),
            "laplace" => Self::laplace(core::f64::consts::FRAC_1_SQRT_2),
            "folded_gaussian" => {
                let pi = core::f64::consts::PI;
                Self::folded_gaussian(libm::sqrt(pi / (pi - 2.0)))
            }
            other => bail!(Argument, "unknown noise family {other:?}"),
        }
    }

    fn checked(family: NoiseFamily, dim: usize) -> Result<Self> {
        let d = Self { family, dim };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.dim == 0 {
            bail!(Argument, "noise dimension must be positive");
        }
        match &self.family {
            NoiseFamily::Gaussian { sigma } => {
                if sigma.len() != self.dim || !sigma.iter().all(|&s| pos(s)) {
                    bail!(Argument, "gaussian needs {} positive scales, got {sigma:?}", self.dim);
                }
            }
            NoiseFamily::Exponential { lambda } => {
                if !pos(*lambda) {
                    bail!(Argument, "exponential rate must be positive, got {lambda}");
                }
            }
            NoiseFamily::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    bail!(Argument, "uniform needs a < b, got [{a}, {b}]");
                }
            }
            NoiseFamily::Laplace { b } => {
                if !pos(*b) || self.dim != 1 {
                    bail!(Argument, "laplace needs a positive scale and dim 1");
                }
            }
            NoiseFamily::FoldedGaussian { sigma } => {
                if !pos(*sigma) || self.dim != 1 {
                    bail!(Argument, "folded gaussian needs a positive scale and dim 1");
                }
            }
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            NoiseFamily::Gaussian { .. } => "gaussian",
            NoiseFamily::Exponential { .. } => "exponential",
            NoiseFamily::Uniform { .. } => "uniform",
            NoiseFamily::Laplace { .. } => "laplace",
            NoiseFamily::FoldedGaussian { .. } => "folded_gaussian",
        }
    }

    /// True when every draw is componentwise nonnegative.
    pub fn nonnegative_support(&self) -> bool {
        match self.family {
            NoiseFamily::Exponential { .. } | NoiseFamily::FoldedGaussian { .. } => true,
            NoiseFamily::Uniform { a, .. } => a >= 0.0,
            _ => false,
        }
    }

    /// Isotropic Gaussian scale, if this is an isotropic Gaussian.
    pub fn isotropic_sigma(&self) -> Option<f64> {
        match &self.family {
            NoiseFamily::Gaussian { sigma } if sigma.iter().all(|&s| s == sigma[0]) => Some(sigma[0]),
            _ => None,
        }
    }

    /// Fills `out` (length `dim`) with one draw.
    pub fn sample_into(&self, rng: &mut DrawRng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.family {
            NoiseFamily::Gaussian { sigma } => {
                for (o, s) in out.iter_mut().zip(sigma) {
                    *o = s * rng.normal();
                }
            }
            NoiseFamily::Exponential { lambda } => out.iter_mut().for_each(|o| *o = rng.exponential(*lambda)),
            NoiseFamily::Uniform { a, b } => out.iter_mut().for_each(|o| *o = a + (b - a) * rng.uniform()),
            NoiseFamily::Laplace { b } => out.iter_mut().for_each(|o| *o = rng.laplace(*b)),
            NoiseFamily::FoldedGaussian { sigma } => out.iter_mut().for_each(|o| *o = sigma * libm::fabs(rng.normal())),
        }
    }
}

/// Confidence bounds: top class probability `≥ p_a`, every other class `≤ p_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidencePair {
    pub p_a: f64,
    pub p_b: f64,
}

impl ConfidencePair {
    pub fn new(p_a: f64, p_b: f64) -> Result<Self> {
        let c = Self { p_a, p_b };
        c.validate()?;
        Ok(c)
    }

    /// `(p_a, 1 − p_a)`.
    pub fn two_class(p_a: f64) -> Result<Self> {
        Self::new(p_a, 1.0 - p_a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_b && self.p_b <= self.p_a && self.p_a <= 1.0) {
            bail!(Argument, "confidence pair needs 0 <= p_b <= p_a <= 1, got ({}, {})", self.p_a, self.p_b);
        }
        Ok(())
    }
}

/// Norm in which a radius is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusKind {
    L2Weighted,
    L1,
    PerDimProduct,
    Scalar,
}

impl RadiusKind {
    pub fn name(self) -> &'static str {
        match self {
            RadiusKind::L2Weighted => "l2_weighted",
            RadiusKind::L1 => "l1",
            RadiusKind::PerDimProduct => "per_dim_product",
            RadiusKind::Scalar => "scalar",
        }
    }
}

/// The exact certification condition a radius stands for.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusCondition {
    /// `√Σ(αᵢ/σᵢ)² < threshold`.
    WeightedL2 { sigma: Vec<f64>, threshold: f64 },
    /// `αᵢ ≥ 0` and `‖α‖₁ < threshold`.
    L1Nonneg { threshold: f64 },
    /// `product_threshold < ∏(1 − |αᵢ|/width)₊`.
    UniformProduct { width: f64, product_threshold: f64 },
    /// `|α| < threshold`.
    Abs { threshold: f64 },
    /// `0 ≤ α < threshold`.
    Nonneg { threshold: f64 },
}

/// A certified radius and the condition it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusResult {
    pub kind: RadiusKind,
    /// Largest certified ball in the natural norm: ℓ2 for Gaussian (by the smallest
    /// scale), ℓ1 for exponential, ℓ∞ for uniform, `|α|` for the scalar families.
    pub value: f64,
    pub condition: RadiusCondition,
}

impl RadiusResult {
    pub fn zero(kind: RadiusKind) -> Self {
        Self { kind, value: 0.0, condition: RadiusCondition::Abs { threshold: 0.0 } }
    }

    /// Uniform product threshold `1 − (p_A − p_B)/2`, when applicable.
    pub fn product_threshold(&self) -> Option<f64> {
        match self.condition {
            RadiusCondition::UniformProduct { product_threshold, .. } => Some(product_threshold),
            _ => None,
        }
    }

    /// Human-readable inequality.
    pub fn condition_descriptor(&self) -> alloc::string::String {
        match &self.condition {
            RadiusCondition::WeightedL2 { threshold, .. } => format!("sqrt(sum (a_i/s_i)^2) < {threshold}"),
            RadiusCondition::L1Nonneg { threshold } => format!("a >= 0 and |a|_1 < {threshold}"),
            RadiusCondition::UniformProduct { width, product_threshold } => {
                format!("{product_threshold} < prod (1 - |a_i|/{width})_+")
            }
            RadiusCondition::Abs { threshold } => format!("|a| < {threshold}"),
            RadiusCondition::Nonneg { threshold } => format!("0 <= a < {threshold}"),
        }
    }

    /// Whether the perturbation `alpha` satisfies the certification condition.
    pub fn admits(&self, alpha: &[f64]) -> bool {
        match &self.condition {
            RadiusCondition::WeightedL2 { sigma, threshold } => {
                alpha.len() == sigma.len()
                    && (*threshold == f64::INFINITY || {
                        let s: f64 = alpha.iter().zip(sigma).map(|(a, s)| (a / s) * (a / s)).sum();
                        libm::sqrt(s) < *threshold
                    })
            }
            RadiusCondition::L1Nonneg { threshold } => {
                alpha.iter().all(|&a| a >= 0.0) && alpha.iter().sum::<f64>() < *threshold
            }
            RadiusCondition::UniformProduct { width, product_threshold } => {
                let prod: f64 = alpha.iter().map(|a| (1.0 - libm::fabs(*a) / width).max(0.0)).product();
                *product_threshold < prod
            }
            RadiusCondition::Abs { threshold } => alpha.len() == 1 && libm::fabs(alpha[0]) < *threshold,
            RadiusCondition::Nonneg { threshold } => alpha.len() == 1 && alpha[0] >= 0.0 && alpha[0] < *threshold,
        }
    }
}

/// The closed-form certified radius for `dist` at confidence `conf`.
pub fn closed_form_radius(dist: &DistributionSpec, conf: ConfidencePair) -> Result<RadiusResult> {
    dist.validate()?;
    conf.validate()?;
    let (pa, pb) = (conf.p_a, conf.p_b);
    Ok(match &dist.family {
        NoiseFamily::Gaussian { sigma } => {
            let t = if pa == pb { 0.0 } else { 0.5 * (phi_inv(pa) - phi_inv(pb)) };
            let smin = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
            RadiusResult {
                kind: RadiusKind::L2Weighted,
                value: t * smin,
                condition: RadiusCondition::WeightedL2 { sigma: sigma.clone(), threshold: t },
            }
        }
        NoiseFamily::Exponential { lambda } => {
            let t = -libm::log(1.0 - pa + pb) / lambda;
            RadiusResult { kind: RadiusKind::L1, value: t, condition: RadiusCondition::L1Nonneg { threshold: t } }
        }
        NoiseFamily::Uniform { a, b } => {
            let width = b - a;
            let product_threshold = 1.0 - (pa - pb) / 2.0;
            // Largest t with (1 − t/width)^m > product_threshold.
            let value = width * (1.0 - libm::pow(product_threshold, 1.0 / dist.dim as f64));
            RadiusResult {
                kind: RadiusKind::PerDimProduct,
                value,
                condition: RadiusCondition::UniformProduct { width, product_threshold },
            }
        }
        NoiseFamily::Laplace { b } => {
            let t = if pa >= 0.5 && pa > pb { -b * libm::log(1.0 - pa + pb) } else { 0.0 };
            RadiusResult { kind: RadiusKind::Scalar, value: t, condition: RadiusCondition::Abs { threshold: t } }
        }
        NoiseFamily::FoldedGaussian { sigma } => {
            let m = pa.min(1.0 - pb);
            let t = (sigma * (phi_inv((1.0 + m) / 2.0) - phi_inv(0.75))).max(0.0);
            RadiusResult { kind: RadiusKind::Scalar, value: t, condition: RadiusCondition::Nonneg { threshold: t } }
        }
    })
}

/// Lower bound on the smoothed confidence after a contrast change `k`, given
/// confidence `p` at `k = 0`.
pub fn bc_confidence_shift(p: f64, k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        bail!(Domain, "confidence must lie in [0, 1], got {p}");
    }
    if k.is_nan() {
        bail!(Domain, "log-contrast is NaN");
    }
    if k == 0.0 {
        return Ok(p);
    }
    let c = libm::exp(k);
    let v =
        if k < 0.0 { 2.0 * phi(c * phi_inv((1.0 + p) / 2.0)) - 1.0 } else { 2.0 * phi(-c * phi_inv(1.0 - p / 2.0)) };
    Ok(v.clamp(0.0, 1.0))
}

/// Whether `(k, b)` is certified under shifted confidences `conf_shifted`.
pub fn bc_condition(k: f64, b: f64, sigma: f64, tau: f64, conf_shifted: ConfidencePair) -> Result<bool> {
    if !(sigma > 0.0 && tau > 0.0) {
        bail!(Argument, "noise scales must be positive, got sigma={sigma}, tau={tau}");
    }
    conf_shifted.validate()?;
    Ok(bc_lhs(k, b, sigma, tau) < bc_rhs(conf_shifted))
}

/// `√((k/σ)² + (b·e^k/τ)²)`.
pub fn bc_lhs(k: f64, b: f64, sigma: f64, tau: f64) -> f64 {
    let u = k / sigma;
    let v = b * libm::exp(k) / tau;
    libm::sqrt(u * u + v * v)
}

/// `½(Φ⁻¹(p_A) − Φ⁻¹(p_B))`.
pub fn bc_rhs(conf: ConfidencePair) -> f64 {
    if conf.p_a == conf.p_b {
        0.0
    } else {
        0.5 * (phi_inv(conf.p_a) - phi_inv(conf.p_b))
    }
}
