//! Command-line front end for `semcert-core`: dataset and weight formats, run
//! configuration, parallel certification runs and reports.

pub mod config;
pub mod error;
pub mod formats;
pub mod idx;
pub mod report;
pub mod runner;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use semcert_core::aliasing::{aliasing_bound, AliasKind, IntervalGrid};
use semcert_core::radii::{closed_form_radius, ConfidencePair, DistributionSpec};
use semcert_core::smoothing::{predict, Prediction, SmoothedQuery};
use semcert_core::statfn::ConfidenceParams;
use semcert_core::tensor::ImageTensor;
use semcert_core::transforms::{TransformKind, TransformSpec};

use crate::config::{build_noise, load_classifier, RunConfig, DEFAULT_ALPHA, DEFAULT_N0, ROTATION_GRID, SCALING_GRID};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "semcert", version, about = "Certify smoothed classifiers against semantic transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Certify a dataset; writes CSV rows and an optional JSON summary.
    Certify(CertifyArgs),
    /// Radius curves over a grid of p_A values as CSV.
    RadiusTable(RadiusArgs),
    /// Aliasing bound M and Lipschitz constant for one image.
    Aliasing(AliasingArgs),
    /// Smoothed prediction of one image.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    transform: Option<String>,
    /// Comma-separated region numbers (rotation in degrees).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    region: Option<Vec<f64>>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    noise_params: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    n0: Option<u64>,
    #[arg(long)]
    batch: Option<u64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_r: Option<usize>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    record_timing: bool,
    /// Largest rotation angle accepted in a region, in degrees.
    #[arg(long)]
    max_rotation_deg: Option<f64>,
}

impl CertifyArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f; } )* };
        }
        set!(transform, region, noise, noise_params, alpha, n, n0, batch, stride, seed, max_rotation_deg);
        set_opt!(grid_n, grid_r, images, labels, limit, output, summary);
        if self.weights.is_some() {
            c.weights = self.weights;
            c.synthetic = None;
        }
        if self.synthetic.is_some() {
            c.synthetic = self.synthetic;
            c.weights = None;
        }
        c.record_timing |= self.record_timing;
        if c.transform.is_empty() {
            return Err(CliError::Usage("no transform given".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct RadiusArgs {
    #[arg(long)]
    family: String,
    /// Gaussian or folded-gaussian scale.
    #[arg(long)]
    sigma: Option<f64>,
    /// Exponential rate.
    #[arg(long)]
    lambda: Option<f64>,
    /// Uniform support `[a, b]`.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Laplace scale.
    #[arg(long)]
    scale: Option<f64>,
    /// Grid step in thousandths of p_A.
    #[arg(long, default_value_t = 1)]
    step: u32,
}

#[derive(Debug, Args)]
struct ImageSource {
    /// SEMT1 tensor file.
    #[arg(long)]
    image: Option<PathBuf>,
    /// IDX image file, used with --index.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: usize,
}

impl ImageSource {
    fn load(&self) -> Result<ImageTensor> {
        match (&self.image, &self.images) {
            (Some(p), None) => formats::read_tensor(p),
            (None, Some(p)) => {
                let (xs, _) = idx::read_idx(p, None)?;
                xs.into_iter()
                    .nth(self.index)
                    .ok_or_else(|| CliError::Usage(format!("index {} out of range", self.index)))
            }
            _ => Err(CliError::Usage("give exactly one of --image and --images".into())),
        }
    }
}

#[derive(Debug, Args)]
struct AliasingArgs {
    #[command(flatten)]
    source: ImageSource,
    /// `rotation` or `scaling`.
    #[arg(long)]
    kind: String,
    /// Interval start (degrees for rotation).
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_r: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    source: ImageSource,
    #[arg(long)]
    transform: String,
    #[arg(long, default_value = "")]
    noise: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    noise_params: Vec<f64>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = DEFAULT_N0)]
    n0: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Certify(a) => certify_cmd(a, out),
        Command::RadiusTable(a) => radius_table_cmd(a, out),
        Command::Aliasing(a) => aliasing_cmd(a, out),
        Command::Predict(a) => predict_cmd(a, out),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    Ok(std::fs::write(path, bytes)?)
}

fn certify_cmd(a: CertifyArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.into_config()?;
    let run = runner::run_certify(&cfg)?;
    let csv = report::write_csv(&run.rows)?;
    match &cfg.output {
        Some(p) => write_file(p, &csv)?,
        None => out.write_all(&csv)?,
    }
    if let Some(p) = &cfg.summary {
        write_file(p, &serde_json::to_vec_pretty(&run.summary)?)?;
    }
    Ok(())
}

fn radius_noise(a: &RadiusArgs) -> Result<DistributionSpec> {
    const FAMILIES: [&str; 5] = ["gaussian", "exponential", "uniform", "laplace", "folded_gaussian"];
    if !FAMILIES.contains(&a.family.as_str()) {
        return Err(CliError::Usage(format!("unknown family {:?}; expected one of {}", a.family, FAMILIES.join(", "))));
    }
    let given = a.sigma.is_some() || a.lambda.is_some() || a.a.is_some() || a.b.is_some() || a.scale.is_some();
    if !given {
        return Ok(DistributionSpec::unit_variance(&a.family)?);
    }
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("{} needs --{flag}", a.family)));
    Ok(match a.family.as_str() {
        "gaussian" => DistributionSpec::gaussian_iso(need(a.sigma, "sigma")?, 1)?,
        "exponential" => DistributionSpec::exponential(need(a.lambda, "lambda")?, 1)?,
        "uniform" => DistributionSpec::uniform(need(a.a, "a")?, need(a.b, "b")?, 1)?,
        "laplace" => DistributionSpec::laplace(need(a.scale, "scale")?)?,
        "folded_gaussian" => DistributionSpec::folded_gaussian(need(a.sigma, "sigma")?)?,
        _ => unreachable!("family checked above"),
    })
}

fn radius_table_cmd(a: RadiusArgs, out: &mut dyn Write) -> Result<()> {
    let noise = radius_noise(&a)?;
    if a.step == 0 {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    writeln!(out, "p_a,radius")?;
    for k in (501..=999).step_by(a.step as usize) {
        let p = f64::from(k) / 1000.0;
        let r = closed_form_radius(&noise, ConfidencePair::two_class(p)?)?;
        writeln!(out, "{p},{}", r.value)?;
    }
    Ok(())
}

fn aliasing_cmd(a: AliasingArgs, out: &mut dyn Write) -> Result<()> {
    let x = a.source.load()?;
    let (kind, (lo, hi), (dn, dr)) = match a.kind.as_str() {
        "rotation" => (AliasKind::Rotation, (a.a.to_radians(), a.b.to_radians()), ROTATION_GRID),
        "scaling" => (AliasKind::Scaling, (a.a, a.b), SCALING_GRID),
        other => return Err(CliError::Usage(format!("unknown aliasing kind {other:?}"))),
    };
    let grid = IntervalGrid::new(lo, hi, a.grid_n.unwrap_or(dn), a.grid_r.unwrap_or(dr), kind)?;
    let b = aliasing_bound(&x, &grid)?;
    writeln!(out, "kind,a,b,n_outer,n_inner,m,sqrt_m,lipschitz")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        a.kind, a.a, a.b, grid.n_outer, grid.n_inner, b.m_value, b.sqrt_m, b.lipschitz_l
    )?;
    Ok(())
}

fn predict_cmd(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let x = a.source.load()?;
    let kind = TransformKind::from_name(&a.transform)
        .ok_or_else(|| CliError::Usage(format!("unknown transform {:?}", a.transform)))?;
    let h = load_classifier(a.weights.as_deref(), a.synthetic.as_deref())?;
    let noise = build_noise(kind, &a.noise, &a.noise_params)?;
    let conf = ConfidenceParams::new(a.alpha, a.n0, a.n0)?;
    let q = SmoothedQuery::new(&h, TransformSpec::new(kind), noise, conf, a.seed)?;
    match predict(&q, &x)? {
        Prediction::Class(c) => writeln!(out, "{c}")?,
        Prediction::Abstain => writeln!(out, "abstain")?,
    }
    Ok(())
}
