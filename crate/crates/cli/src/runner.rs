//! Dataset-level certification runs.
//!
//! Samples are processed in parallel; each sample is sequential and uses its own
//! seed, so rows are identical regardless of thread count and are emitted in
//! sample order.

use std::time::Instant;

use rayon::prelude::*;

use semcert_core::aliasing::IntervalGrid;
use semcert_core::pipeline::{
    certify_bc_rectangle, certify_diff_resolvable, certify_resolvable, certify_translation_enum, CertificationResult,
    ParameterSet,
};
use semcert_core::radii::DistributionSpec;
use semcert_core::smoothing::{predict, BaseClassifier, Prediction, SmoothedQuery};
use semcert_core::statfn::ConfidenceParams;
use semcert_core::tensor::ImageTensor;
use semcert_core::transforms::{TransformKind, TransformSpec};

use crate::config::{Classifier, RunConfig};
use crate::error::{CliError, Result};
use crate::idx::read_idx;
use crate::report::{ReportRow, Summary};

/// Seed of sample `index` (SplitMix64 finalizer of `seed + index`).
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything needed to certify one sample.
pub struct Plan {
    pub kind: TransformKind,
    pub region: ParameterSet,
    pub noise: Option<DistributionSpec>,
    pub conf: ConfidenceParams,
    pub grid: Option<IntervalGrid>,
    pub batch: u64,
    pub seed: u64,
    pub record_timing: bool,
}

impl Plan {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            kind: cfg.transform_kind()?,
            region: cfg.region()?,
            noise: cfg.noise_spec()?,
            conf: cfg.confidence()?,
            grid: cfg.grid()?,
            batch: cfg.batch,
            seed: cfg.seed,
            record_timing: cfg.record_timing,
        })
    }

    fn query<'a>(&self, h: &'a dyn BaseClassifier, index: usize) -> Result<SmoothedQuery<'a>> {
        let noise = self.noise.clone().ok_or_else(|| CliError::Config("missing noise".into()))?;
        Ok(SmoothedQuery::new(h, TransformSpec::new(self.kind), noise, self.conf, sample_seed(self.seed, index))?)
    }

    /// Certifies sample `index` and reports whether its clean prediction is correct.
    pub fn certify(
        &self,
        h: &dyn BaseClassifier,
        index: usize,
        x: &ImageTensor,
        label: usize,
    ) -> Result<(CertificationResult, bool)> {
        let start = Instant::now();
        let (mut r, clean) = if self.kind == TransformKind::TranslationBlack {
            let r = certify_translation_enum(x, label, h, &self.region)?;
            let clean = r.predicted_class == Some(label);
            (r, clean)
        } else {
            let q = self.query(h, index)?;
            let r = match self.kind {
                TransformKind::GaussianBlur | TransformKind::TranslationReflect => {
                    certify_resolvable(x, label, &q, &self.region)?
                }
                TransformKind::BrightnessContrast => certify_bc_rectangle(x, label, &q, &self.region)?,
                TransformKind::Rotation | TransformKind::Scaling => {
                    let grid = self.grid.as_ref().ok_or_else(|| CliError::Config("missing grid".into()))?;
                    certify_diff_resolvable(x, label, &q, &self.region, grid, self.batch)?
                }
                TransformKind::TranslationBlack => unreachable!(),
            };
            let clean = predict(&q, x)? == Prediction::Class(label);
            (r, clean)
        };
        if self.record_timing {
            r.elapsed = Some(start.elapsed().as_secs_f64());
        }
        Ok((r, clean))
    }
}

pub struct RunOutput {
    pub rows: Vec<ReportRow>,
    pub results: Vec<CertificationResult>,
    pub summary: Summary,
}

/// Loads the dataset and classifier named by `cfg` and certifies the selected samples.
pub fn run_certify(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.check_inputs()?;
    let plan = Plan::from_config(cfg)?;
    let images = cfg.images.as_deref().expect("checked");
    let (xs, ys) = read_idx(images, cfg.labels.as_deref())?;
    let ys = ys.ok_or_else(|| CliError::Usage("certify needs `labels`".into()))?;
    let h = cfg.classifier()?;
    if let (Some(shape), Some(x)) = (h.input_shape(), xs.first()) {
        if shape != x.shape() {
            return Err(CliError::Config(format!("classifier expects shape {shape:?}, dataset has {:?}", x.shape())));
        }
    }
    let mut picked: Vec<usize> = (0..xs.len()).step_by(cfg.stride).collect();
    if let Some(l) = cfg.limit {
        picked.truncate(l);
    }
    run_samples(&plan, &h, &picked, &xs, &ys, cfg)
}

pub fn run_samples(
    plan: &Plan,
    h: &Classifier,
    picked: &[usize],
    xs: &[ImageTensor],
    ys: &[usize],
    cfg: &RunConfig,
) -> Result<RunOutput> {
    let out: Vec<(CertificationResult, bool)> =
        picked.par_iter().map(|&i| plan.certify(h, i, &xs[i], ys[i])).collect::<Result<_>>()?;
    let rows: Vec<ReportRow> =
        picked.iter().zip(&out).map(|(&i, (r, _))| ReportRow::from_result(i, ys[i], r)).collect();
    let clean = out.iter().filter(|(_, c)| *c).count();
    let joint = plan.grid.as_ref().map(|g| (g.n_outer as f64 * plan.conf.alpha).min(1.0));
    let summary = Summary::new(cfg, &rows, clean, joint);
    Ok(RunOutput { rows, results: out.into_iter().map(|(r, _)| r).collect(), summary })
}
