//! Run configuration: a TOML file whose keys mirror the command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semcert_core::aliasing::{AliasKind, IntervalGrid};
use semcert_core::classifiers::{LinearClassifier, SyntheticClassifier};
use semcert_core::pipeline::ParameterSet;
use semcert_core::radii::DistributionSpec;
use semcert_core::smoothing::BaseClassifier;
use semcert_core::statfn::ConfidenceParams;
use semcert_core::tensor::ImageTensor;
use semcert_core::transforms::TransformKind;

use crate::error::{CliError, Result};
use crate::formats::{load_linear_classifier, read_tensor};

pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_N0: u64 = 100;
pub const DEFAULT_BATCH: u64 = 400;
pub const ROTATION_GRID: (usize, usize) = (10_000, 1_000);
pub const SCALING_GRID: (usize, usize) = (1_000, 250);
pub const DEFAULT_MAX_ROTATION_DEG: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Transform name, e.g. `rotation`.
    pub transform: String,
    /// Region numbers: blur `[alpha_max]`, translation `[rho]`,
    /// brightness/contrast `[k_min, k_max, b_min, b_max]`, rotation `[a, b]` in
    /// degrees, scaling `[a, b]`.
    pub region: Vec<f64>,
    /// Noise family; empty selects the transform's usual family.
    pub noise: String,
    /// Family scales: gaussian `[σ]` or per-dimension `[σ₁, σ₂]`, exponential
    /// `[λ]`, uniform `[a, b]`, laplace `[b]`, folded gaussian `[σ]`.
    pub noise_params: Vec<f64>,
    pub alpha: f64,
    pub n: u64,
    pub n0: u64,
    pub batch: u64,
    pub grid_n: Option<usize>,
    pub grid_r: Option<usize>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub stride: usize,
    pub limit: Option<usize>,
    pub weights: Option<PathBuf>,
    /// `constant:C`, `mean_threshold:T` or `l2_ball:R:center.semt`.
    pub synthetic: Option<String>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub record_timing: bool,
    /// Largest rotation angle accepted in a region, in degrees.
    pub max_rotation_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            transform: String::new(),
            region: Vec::new(),
            noise: String::new(),
            noise_params: Vec::new(),
            alpha: DEFAULT_ALPHA,
            n: DEFAULT_N,
            n0: DEFAULT_N0,
            batch: DEFAULT_BATCH,
            grid_n: None,
            grid_r: None,
            images: None,
            labels: None,
            stride: 1,
            limit: None,
            weights: None,
            synthetic: None,
            seed: 0,
            output: None,
            summary: None,
            record_timing: false,
            max_rotation_deg: DEFAULT_MAX_ROTATION_DEG,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Parses a TOML file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.images, &mut cfg.labels, &mut cfg.weights, &mut cfg.output, &mut cfg.summary] {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        if let Some(s) = cfg.synthetic.as_mut() {
            if let Some(rest) = s.strip_prefix("l2_ball:") {
                if let Some((r, center)) = rest.split_once(':') {
                    if Path::new(center).is_relative() {
                        *s = format!("l2_ball:{r}:{}", base.join(center).display());
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn transform_kind(&self) -> Result<TransformKind> {
        TransformKind::from_name(&self.transform).ok_or_else(|| {
            let names: Vec<_> = TransformKind::ALL.iter().map(|k| k.name()).collect();
            config_err(format!("unknown transform {:?}; expected one of {}", self.transform, names.join(", ")))
        })
    }

    pub fn region(&self) -> Result<ParameterSet> {
        let r = &self.region;
        let want = |n: usize| {
            if r.len() == n {
                Ok(())
            } else {
                Err(config_err(format!("{} region needs {n} numbers, got {}", self.transform, r.len())))
            }
        };
        let set = match self.transform_kind()? {
            TransformKind::GaussianBlur => {
                want(1)?;
                ParameterSet::BlurInterval { alpha_max: r[0] }
            }
            TransformKind::TranslationReflect | TransformKind::TranslationBlack => {
                want(1)?;
                ParameterSet::TranslationDisk { rho: r[0] }
            }
            TransformKind::BrightnessContrast => {
                want(4)?;
                ParameterSet::BcRectangle { k_min: r[0], k_max: r[1], b_min: r[2], b_max: r[3] }
            }
            TransformKind::Rotation => {
                want(2)?;
                let m = self.max_rotation_deg;
                if r.iter().any(|d| d.abs() > m) {
                    return Err(config_err(format!(
                        "rotation region [{}, {}] degrees exceeds +-{m}; raise `max_rotation_deg` to allow it",
                        r[0], r[1]
                    )));
                }
                ParameterSet::Interval { a: r[0].to_radians(), b: r[1].to_radians() }
            }
            TransformKind::Scaling => {
                want(2)?;
                ParameterSet::Interval { a: r[0], b: r[1] }
            }
        };
        set.validate()?;
        Ok(set)
    }

    /// Smoothing noise; `None` for the enumeration certifier.
    pub fn noise_spec(&self) -> Result<Option<DistributionSpec>> {
        let kind = self.transform_kind()?;
        if kind == TransformKind::TranslationBlack {
            return Ok(None);
        }
        build_noise(kind, &self.noise, &self.noise_params).map(Some)
    }

    pub fn confidence(&self) -> Result<ConfidenceParams> {
        Ok(ConfidenceParams::new(self.alpha, self.n, self.n0)?)
    }

    /// Anchor grid over the region for rotation and scaling.
    pub fn grid(&self) -> Result<Option<IntervalGrid>> {
        let (kind, (dn, dr)) = match self.transform_kind()? {
            TransformKind::Rotation => (AliasKind::Rotation, ROTATION_GRID),
            TransformKind::Scaling => (AliasKind::Scaling, SCALING_GRID),
            _ => return Ok(None),
        };
        let ParameterSet::Interval { a, b } = self.region()? else { unreachable!() };
        Ok(Some(IntervalGrid::new(a, b, self.grid_n.unwrap_or(dn), self.grid_r.unwrap_or(dr), kind)?))
    }

    /// Checks that every referenced input exists, before any work starts.
    pub fn check_inputs(&self) -> Result<()> {
        let images = self.images.as_ref().ok_or_else(|| CliError::Usage("no dataset: set `images`".into()))?;
        for p in [Some(images), self.labels.as_ref(), self.weights.as_ref()].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::MissingInput(p.clone()));
            }
        }
        if self.stride == 0 {
            return Err(config_err("stride must be at least 1"));
        }
        if self.weights.is_some() == self.synthetic.is_some() {
            return Err(CliError::Usage("set exactly one of `weights` and `synthetic`".into()));
        }
        Ok(())
    }

    pub fn classifier(&self) -> Result<Classifier> {
        load_classifier(self.weights.as_deref(), self.synthetic.as_deref())
    }
}

/// Builds the noise for `kind` from a family name and its scales.
pub fn build_noise(kind: TransformKind, family: &str, params: &[f64]) -> Result<DistributionSpec> {
    let dim = kind.param_dim();
    let family = match (family, kind) {
        ("", TransformKind::GaussianBlur) => "exponential",
        ("", _) => "gaussian",
        (f, _) => f,
    };
    let p = |n: usize| -> Result<()> {
        if params.len() == n {
            Ok(())
        } else {
            Err(config_err(format!("{family} noise needs {n} parameter(s), got {}", params.len())))
        }
    };
    let d = match family {
        "gaussian" if params.len() == 1 => DistributionSpec::gaussian_iso(params[0], dim)?,
        "gaussian" => {
            p(dim)?;
            DistributionSpec::gaussian(params.to_vec())?
        }
        "exponential" => {
            p(1)?;
            DistributionSpec::exponential(params[0], dim)?
        }
        "uniform" => {
            p(2)?;
            DistributionSpec::uniform(params[0], params[1], dim)?
        }
        "laplace" => {
            p(1)?;
            DistributionSpec::laplace(params[0])?
        }
        "folded_gaussian" => {
            p(1)?;
            DistributionSpec::folded_gaussian(params[0])?
        }
        other => return Err(config_err(format!("unknown noise family {other:?}"))),
    };
    Ok(d)
}

/// A loaded base classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Linear(LinearClassifier),
    Synthetic(SyntheticClassifier),
}

impl BaseClassifier for Classifier {
    fn num_classes(&self) -> usize {
        match self {
            Classifier::Linear(c) => c.num_classes(),
            Classifier::Synthetic(c) => c.num_classes(),
        }
    }

    fn classify(&self, x: &ImageTensor) -> semcert_core::Result<usize> {
        match self {
            Classifier::Linear(c) => c.classify(x),
            Classifier::Synthetic(c) => c.classify(x),
        }
    }
}

impl Classifier {
    pub fn input_shape(&self) -> Option<(usize, usize, usize)> {
        match self {
            Classifier::Linear(c) => Some(c.shape()),
            Classifier::Synthetic(SyntheticClassifier::L2Ball { center, .. }) => Some(center.shape()),
            Classifier::Synthetic(_) => None,
        }
    }
}

pub fn parse_synthetic(spec: &str) -> Result<SyntheticClassifier> {
    let bad = || config_err(format!("bad synthetic classifier {spec:?}"));
    let (name, rest) = spec.split_once(':').ok_or_else(bad)?;
    Ok(match name {
        "constant" => SyntheticClassifier::constant(rest.parse().map_err(|_| bad())?),
        "mean_threshold" => SyntheticClassifier::mean_threshold(rest.parse().map_err(|_| bad())?)?,
        "l2_ball" => {
            let (r, center) = rest.split_once(':').ok_or_else(bad)?;
            SyntheticClassifier::l2_ball(read_tensor(Path::new(center))?, r.parse().map_err(|_| bad())?)?
        }
        _ => return Err(bad()),
    })
}

pub fn load_classifier(weights: Option<&Path>, synthetic: Option<&str>) -> Result<Classifier> {
    match (weights, synthetic) {
        (Some(w), None) => Ok(Classifier::Linear(load_linear_classifier(w)?)),
        (None, Some(s)) => Ok(Classifier::Synthetic(parse_synthetic(s)?)),
        _ => Err(CliError::Usage("set exactly one of --weights and --synthetic".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_with_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            transform = "rotation"
            region = [-10.0, 10.0]
            noise_params = [0.25]
            synthetic = "mean_threshold:0.4"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.n, 100_000);
        assert_eq!(cfg.n0, 100);
        assert_eq!(cfg.batch, 400);
        assert_eq!(cfg.transform_kind().unwrap(), TransformKind::Rotation);
        let ParameterSet::Interval { a, b } = cfg.region().unwrap() else { panic!() };
        assert!((b - 10f64.to_radians()).abs() < 1e-15 && a == -b);
        let g = cfg.grid().unwrap().unwrap();
        assert_eq!((g.n_outer, g.n_inner), ROTATION_GRID);
        assert_eq!(cfg.noise_spec().unwrap().unwrap().isotropic_sigma(), Some(0.25));
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn noise_building() {
        let d = build_noise(TransformKind::GaussianBlur, "", &[0.1]).unwrap();
        assert_eq!(d.family_name(), "exponential");
        let d = build_noise(TransformKind::BrightnessContrast, "gaussian", &[0.2, 0.3]).unwrap();
        assert_eq!(d.dim, 2);
        assert!(build_noise(TransformKind::BrightnessContrast, "gaussian", &[0.2, 0.3, 0.4]).is_err());
        assert!(build_noise(TransformKind::GaussianBlur, "cauchy", &[1.0]).is_err());
    }

    #[test]
    fn synthetic_specs() {
        assert_eq!(parse_synthetic("constant:3").unwrap(), SyntheticClassifier::constant(3));
        assert!(parse_synthetic("mean_threshold:2").is_err());
        assert!(parse_synthetic("nope").is_err());
    }

    #[test]
    fn rotation_range_is_limited() {
        let mut cfg = RunConfig { transform: "rotation".into(), region: vec![-30.0, 30.0], ..RunConfig::default() };
        assert!(cfg.region().is_ok());
        cfg.region = vec![-5.0, 31.0];
        assert!(matches!(cfg.region(), Err(CliError::Config(_))));
        cfg.max_rotation_deg = 45.0;
        assert!(cfg.region().is_ok());
    }
}
