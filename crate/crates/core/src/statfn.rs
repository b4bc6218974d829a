//! Standard normal CDF and quantile, exact binomial confidence bounds and tests.

use crate::error::{bail, Result};

/// Error rate and sample sizes for Monte-Carlo certification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    pub alpha: f64,
    pub n_samples: u64,
    pub n0_samples: u64,
}

impl ConfidenceParams {
    pub fn new(alpha: f64, n_samples: u64, n0_samples: u64) -> Result<Self> {
        let p = Self { alpha, n_samples, n0_samples };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!(Argument, "alpha must lie in (0, 1), got {}", self.alpha);
        }
        if self.n_samples == 0 || self.n0_samples == 0 {
            bail!(Argument, "sample counts must be positive");
        }
        if self.n0_samples > self.n_samples {
            bail!(Argument, "n0 ({}) exceeds n ({})", self.n0_samples, self.n_samples);
        }
        Ok(())
    }
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self { alpha: 0.001, n_samples: 100_000, n0_samples: 100 }
    }
}

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF `Φ(z)`.
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if z.is_nan() {
        bail!(Domain, "normal CDF of NaN");
    }
    Ok(phi(z))
}

#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// Standard normal quantile `Φ⁻¹(p)`, with `Φ⁻¹(0) = −∞` and `Φ⁻¹(1) = +∞`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        bail!(Domain, "normal quantile needs p in [0, 1], got {p}");
    }
    Ok(phi_inv(p))
}

/// `Φ⁻¹` for `p ∈ [0, 1]`.
pub(crate) fn phi_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    // Work in the lower tail, where q is represented without cancellation.
    let (q, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = ppnd16(q);
    // One Newton step on Φ(x) = q.
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        x -= (phi(x) - q) / pdf;
    }
    sign * x
}

/// Wichura's AS241 rational approximation, valid for `0 < p < 1`.
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if libm::fabs(q) <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_672_7e3 * r + 3.343_057_558_358_812_810_5e4) * r
            + 6.726_577_092_700_870_085_3e4)
            * r
            + 4.592_195_393_154_987_145_7e4)
            * r
            + 1.373_169_376_550_946_112_5e4)
            * r
            + 1.971_590_950_306_551_442_7e3)
            * r
            + 1.331_416_678_917_843_774_5e2)
            * r
            + 3.387_132_872_796_366_608_0)
            * q;
        let den = ((((((5.226_495_278_852_854_561_0e3 * r + 2.872_908_573_572_194_267_4e4) * r
            + 3.930_789_580_009_271_061_0e4)
            * r
            + 2.121_379_430_158_659_586_7e4)
            * r
            + 5.394_196_021_424_751_107_7e3)
            * r
            + 6.871_870_074_920_579_083_0e2)
            * r
            + 4.231_333_070_160_091_125_2e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414_076_4e-4 * r + 2.272_384_498_926_918_458_33e-2) * r
            + 2.417_807_251_774_506_117_7e-1)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34;
        let den = ((((((1.050_750_071_644_416_843_24e-9 * r + 5.475_938_084_995_344_946e-4) * r
            + 1.519_866_656_361_645_719_66e-2)
            * r
            + 1.481_039_764_274_800_745_9e-1)
            * r
            + 6.897_673_349_851_000_045_5e-1)
            * r
            + 1.676_384_830_183_803_849_4)
            * r
            + 2.053_191_626_637_758_821_87)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_132_65e-7 * r + 2.711_555_568_743_487_578_15e-5) * r
            + 1.242_660_947_388_078_438_6e-3)
            * r
            + 2.653_218_952_657_612_309_3e-2)
            * r
            + 2.965_605_718_285_048_912_3e-1)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2;
        let den = ((((((2.044_263_103_389_939_785_64e-15 * r + 1.421_511_758_316_445_888_7e-7) * r
            + 1.846_318_317_510_054_681_8e-5)
            * r
            + 7.868_691_311_456_132_591e-4)
            * r
            + 1.487_536_129_085_061_485_25e-2)
            * r
            + 1.369_298_809_227_358_053_1e-1)
            * r
            + 5.998_322_065_558_879_376_9e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn check_counts(successes: u64, trials: u64) -> Result<()> {
    if trials == 0 {
        bail!(Argument, "binomial trials must be positive");
    }
    if successes > trials {
        bail!(Argument, "successes ({successes}) exceed trials ({trials})");
    }
    Ok(())
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let n = n as f64;
    let k = k as f64;
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

fn ln_pmf(n: u64, k: u64, ln_p: f64, ln_q: f64) -> f64 {
    let a = if k == 0 { 0.0 } else { k as f64 * ln_p };
    let b = if k == n { 0.0 } else { (n - k) as f64 * ln_q };
    ln_choose(n, k) + a + b
}

/// Sum of the pmf over `k = from, from+step, ...` while inside `[0, n]`,
/// assuming terms decrease in that direction from `from`.
fn tail_sum(n: u64, from: u64, upward: bool, p: f64) -> f64 {
    let ln_p = libm::log(p);
    let ln_q = libm::log1p(-p);
    let ratio_up = p / (1.0 - p);
    let mut term = libm::exp(ln_pmf(n, from, ln_p, ln_q));
    let mut sum = 0.0;
    let mut k = from;
    loop {
        sum += term;
        if upward {
            if k == n {
                break;
            }
            term *= (n - k) as f64 / (k + 1) as f64 * ratio_up;
            k += 1;
        } else {
            if k == 0 {
                break;
            }
            term *= k as f64 / (n - k + 1) as f64 / ratio_up;
            k -= 1;
        }
        if term <= sum * 1e-18 {
            break;
        }
    }
    sum
}

/// `P[X ≥ s]` for `X ~ Binomial(n, p)`.
pub fn binom_survival(s: u64, n: u64, p: f64) -> f64 {
    if s == 0 {
        return 1.0;
    }
    if s > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let mode = libm::floor((n as f64 + 1.0) * p) as u64;
    if s > mode {
        tail_sum(n, s, true, p).min(1.0)
    } else {
        (1.0 - tail_sum(n, s - 1, false, p)).max(0.0)
    }
}

/// One-sided Clopper-Pearson lower confidence bound at level `1 − alpha`.
///
/// The returned `p` satisfies `P[Binomial(trials, p) ≥ successes] ≤ alpha`, with
/// equality up to floating-point resolution.
pub fn clopper_pearson_lower(successes: u64, trials: u64, alpha: f64) -> Result<f64> {
    check_counts(successes, trials)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(Argument, "alpha must lie in (0, 1), got {alpha}");
    }
    if successes == 0 {
        return Ok(0.0);
    }
    if successes == trials {
        return Ok(libm::pow(alpha, 1.0 / trials as f64));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binom_survival(successes, trials, mid) > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Two-sided exact binomial test p-value against success probability ½.
pub fn binom_two_sided_p(successes: u64, trials: u64) -> Result<f64> {
    check_counts(successes, trials)?;
    let extreme = successes.max(trials - successes);
    Ok((2.0 * binom_survival(extreme, trials, 0.5)).min(1.0))
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) {
        bail!(Domain, "incomplete gamma needs a > 0 and x >= 0, got a={a}, x={x}");
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let ln_front = -x + a * libm::log(x) - libm::lgamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= x / (a + n);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        Ok((sum * libm::exp(ln_front)).min(1.0))
    } else {
        // Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0;
        loop {
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if libm::fabs(d) < tiny {
                d = tiny;
            }
            c = b + an / c;
            if libm::fabs(c) < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if libm::fabs(delta - 1.0) < 1e-16 || i > 10_000.0 {
                break;
            }
            i += 1.0;
        }
        Ok((1.0 - libm::exp(ln_front) * h).max(0.0))
    }
}

/// CDF of the chi-square distribution with `k` degrees of freedom.
pub fn chi2_cdf(k: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    regularized_gamma_p(k / 2.0, x / 2.0)
}

/// CDF of the noncentral chi-square distribution (`k` degrees of freedom,
/// noncentrality `lambda`), as a Poisson mixture of central CDFs.
pub fn noncentral_chi2_cdf(k: f64, lambda: f64, x: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        bail!(Domain, "noncentrality must be nonnegative, got {lambda}");
    }
    if lambda == 0.0 {
        return chi2_cdf(k, x);
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let mu = lambda / 2.0;
    let spread = 12.0 * libm::sqrt(mu) + 30.0;
    let lo = libm::floor((mu - spread).max(0.0)) as u64;
    let hi = libm::ceil(mu + spread) as u64;
    let ln_mu = libm::log(mu);
    let mut acc = 0.0;
    for j in lo..=hi {
        let jf = j as f64;
        let w = libm::exp(-mu + jf * ln_mu - libm::lgamma(jf + 1.0));
        if w > 0.0 {
            acc += w * regularized_gamma_p(k / 2.0 + jf, x / 2.0)?;
        }
    }
    Ok(acc.clamp(0.0, 1.0))
}
