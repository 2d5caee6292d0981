//! Command-line interface: `theory`, `mc`, `exact`, `compare` and `ie`.
//!
//! Exit codes: 0 on success (warnings go to stderr), 2 for configuration and
//! parameter errors, 3 for numerical accuracy failures.

use crate::asymptotics::{theory_curve, EvaluationPoint, Scaling, TheoryKind};
use crate::exactrep::{exact_density, GStrategy, QuadSettings};
use crate::model::{JordanSpec, ModelParams};
use crate::output::{self, ExactRow};
use crate::sampler::{estimate_density_batch, EstimatorConfig, SpectrumMethod};
use crate::specfun;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "ginibre-overlap", version, about = "Eigenvector self-overlaps of deformed complex Ginibre matrices")]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true, env = "GINIBRE_OVERLAP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a large-N limit law on a grid.
    Theory(TheoryArgs),
    /// Monte Carlo estimate of the self-overlap density.
    Mc(McArgs),
    /// Exact finite-N density by quadrature (rank 1 and 2).
    Exact(ExactArgs),
    /// Compare Monte Carlo, theory and exact tables point by point.
    Compare(CompareArgs),
    /// Evaluate the iterated erfc functions IE_s(x).
    Ie(IeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Law {
    Edge,
    OutlierJordan,
    OutlierIdentity,
    OnePoint,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Regime {
    Edge,
    Outlier,
    OutlierNormalized,
    Additive,
}

/// Where to evaluate: a scaling around `z0` and a list or grid of `zhat`.
#[derive(Args, Debug, Clone)]
struct PointArgs {
    #[arg(long, value_enum)]
    regime: Option<Regime>,
    /// Exponent for `--regime additive`.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Base point "re,im"; defaults to sqrt(tau) at the edge and to the first
    /// eigenvalue of X0 for outliers.
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    /// Rescaled point "re,im" (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    zhat: Vec<String>,
    /// Grid start:stop:step over Re zhat.
    #[arg(long, allow_hyphen_values = true)]
    re_zhat: Option<String>,
    /// Grid start:stop:step over |zhat| (points on the positive real axis).
    #[arg(long, allow_hyphen_values = true)]
    abs_zhat: Option<String>,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(value_enum)]
    law: Law,
    /// Geometric multiplicity at the edge point.
    #[arg(long, default_value_t = 0)]
    t: u32,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Block size or multiplicity of the outlier.
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    /// Jordan data of X0 as a JSON file (outlier-jordan, one-point).
    #[arg(long)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    zhat: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    re_zhat: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    abs_zhat: Option<String>,
    /// Output CSV; a JSON sidecar is written next to it. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Experiment configuration in JSON; replaces the model, regime and
    /// estimator flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// "none" or a JSON file with the Jordan data of X0.
    #[arg(long, default_value = "none")]
    x0: String,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bin radius in zhat units.
    #[arg(long, default_value_t = 0.2)]
    eps_hat: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Raw captured samples (trial, re_z, im_z, overlap).
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Local,
}

impl From<MethodArg> for SpectrumMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => SpectrumMethod::Auto,
            MethodArg::Dense => SpectrumMethod::Dense,
            MethodArg::Local => SpectrumMethod::Local,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    MuExtraction,
    PrintedMinors,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value = "none")]
    x0: String,
    /// Physical point "re,im" (repeatable); written as zhat with z0 = 0.
    #[arg(long, allow_hyphen_values = true)]
    z: Vec<String>,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value_t = 64)]
    radial: usize,
    #[arg(long, default_value_t = 32)]
    angular: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::MuExtraction)]
    strategy: StrategyArg,
    /// Skip the node-doubling check.
    #[arg(long)]
    no_check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    mc: PathBuf,
    #[arg(long)]
    theory: PathBuf,
    #[arg(long)]
    exact: Option<PathBuf>,
    /// Largest acceptable |z-score|.
    #[arg(long, default_value_t = 3.5)]
    threshold: f64,
    /// Exit with code 3 when the verdict fails.
    #[arg(long)]
    strict: bool,
    /// Report JSON; default stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IeArgs {
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    /// Argument (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Grid start:stop:step of arguments.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Print exp(x^2/2) IE_s(x) instead.
    #[arg(long)]
    scaled: bool,
}

/// Where the Jordan data of `X0` comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Source {
    Inline(JordanSpec),
    /// `"none"` or a path to a JSON spec.
    Named(String),
}

impl X0Source {
    pub fn resolve(&self) -> Result<JordanSpec> {
        match self {
            X0Source::Inline(s) => Ok(s.clone()),
            X0Source::Named(s) => load_spec(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub tau: f64,
    pub x0: X0Source,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub scaling: Scaling,
    pub z0: C,
    pub zhat: Vec<C>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub dump: Option<PathBuf>,
}

/// A complete Monte Carlo experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub regime: RegimeConfig,
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.n, self.model.tau, self.model.x0.resolve()?)
    }

    pub fn points(&self) -> Vec<EvaluationPoint> {
        self.regime.zhat.iter().map(|&z| EvaluationPoint::new(self.regime.z0, z, self.regime.scaling)).collect()
    }
}

fn load_spec(s: &str) -> Result<JordanSpec> {
    if s == "none" {
        return Ok(JordanSpec::empty());
    }
    if s.trim_start().starts_with('{') {
        return JordanSpec::from_json(s);
    }
    let text = std::fs::read_to_string(s).map_err(|e| Error::Config(format!("cannot read {s}: {e}")))?;
    JordanSpec::from_json(&text)
}

fn zhat_list(list: &[String], re: &Option<String>, abs: &Option<String>, default: &str) -> Result<Vec<C>> {
    let mut out: Vec<C> = list.iter().map(|s| output::parse_complex(s)).collect::<Result<_>>()?;
    if let Some(g) = re {
        out.extend(output::parse_grid(g)?.into_iter().map(|x| C::new(x, 0.0)));
    }
    if let Some(g) = abs {
        out.extend(output::parse_grid(g)?.into_iter().map(|x| C::new(x, 0.0)));
    }
    if out.is_empty() {
        out = output::parse_grid(default)?.into_iter().map(|x| C::new(x, 0.0)).collect();
    }
    Ok(out)
}

fn regime_scaling(regime: Regime, rho: f64) -> Scaling {
    match regime {
        Regime::Edge => Scaling::EdgeMultiplicative,
        Regime::Outlier => Scaling::OutlierAdditive,
        Regime::OutlierNormalized => Scaling::OutlierAdditiveNormalized,
        Regime::Additive => Scaling::Additive { rho },
    }
}

fn default_z0(regime: Regime, tau: f64, spec: &JordanSpec) -> Result<C> {
    match regime {
        Regime::Edge => Ok(C::new(tau.sqrt(), 0.0)),
        _ => spec
            .groups()
            .first()
            .map(|g| g.theta)
            .ok_or_else(|| Error::Config("--z0 is required when X0 has no eigenvalues".into())),
    }
}

fn regime_from(p: &PointArgs, tau: f64, spec: &JordanSpec) -> Result<RegimeConfig> {
    let regime = p.regime.ok_or_else(|| Error::Config("--regime is required".into()))?;
    let z0 = match &p.z0 {
        Some(s) => output::parse_complex(s)?,
        None => default_z0(regime, tau, spec)?,
    };
    let zhat = zhat_list(&p.zhat, &p.re_zhat, &p.abs_zhat, "0:0:1")?;
    Ok(RegimeConfig { scaling: regime_scaling(regime, p.rho), z0, zhat })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_theory(a: TheoryArgs) -> Result<()> {
    let z0 = a.z0.as_deref().map(output::parse_complex).transpose()?;
    let spec = || -> Result<JordanSpec> {
        match &a.x0 {
            Some(s) => load_spec(s),
            None => {
                let z0 = z0.ok_or_else(|| Error::Config("--z0 or --x0 is required".into()))?;
                JordanSpec::single_block(z0, a.r)
            }
        }
    };
    let need_z0 = || z0.ok_or_else(|| Error::Config("--z0 is required".into()));
    let kind = match a.law {
        Law::Edge => TheoryKind::Edge { t: a.t, tau: a.tau },
        Law::OutlierJordan => TheoryKind::OutlierJordan { spec: spec()?, tau: a.tau },
        Law::OutlierIdentity => TheoryKind::OutlierIdentity { r: a.r as u32, tau: a.tau, z0: need_z0()? },
        Law::OnePoint => {
            let spec = spec()?;
            let z0 = match z0 {
                Some(z) => z,
                None => spec.groups().first().map(|g| g.theta).ok_or_else(|| Error::Config("--z0 is required".into()))?,
            };
            TheoryKind::OnePoint { spec, z0 }
        }
    };
    let default = if matches!(a.law, Law::Edge) { "-3:3:0.1" } else { "0:4:0.1" };
    let zhats = zhat_list(&a.zhat, &a.re_zhat, &a.abs_zhat, default)?;
    let curve = theory_curve(kind, &zhats)?;
    output::write_curve(a.out.as_deref(), &curve.points)?;
    if let Some(p) = &a.out {
        let meta = json!({
            "command": "theory",
            "version": VERSION,
            "law": curve.kind,
            "scaling": curve.kind.scaling(),
            "points": zhats.len(),
        });
        output::write_sidecar(p, &meta)?;
    }
    Ok(())
}

fn cmd_mc(a: McArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?
        }
        None => {
            let n = a.n.ok_or_else(|| Error::Config("--n is required".into()))?;
            let spec = load_spec(&a.x0)?;
            let regime = regime_from(&a.point, a.tau, &spec)?;
            let mut estimator = EstimatorConfig::new(a.trials, a.eps_hat, a.seed);
            estimator.method = a.method.into();
            ExperimentConfig {
                model: ModelConfig { n, tau: a.tau, x0: X0Source::Inline(spec) },
                regime,
                estimator,
                outputs: OutputConfig::default(),
            }
        }
    };
    if a.out.is_some() {
        cfg.outputs.csv = a.out.clone();
    }
    if a.dump.is_some() {
        cfg.outputs.dump = a.dump.clone();
    }
    let params = cfg.params()?;
    cfg.model.x0 = X0Source::Inline(params.spec.clone());
    let points = cfg.points();
    let batch = estimate_density_batch(&params, &points, &cfg.estimator, cfg.outputs.dump.is_some())?;
    let starved: Vec<C> = batch.estimates.iter().filter(|e| e.starved).map(|e| e.zhat).collect();
    for z in &starved {
        eprintln!("warning: no eigenvalue fell in the bin at zhat = {},{}", z.re, z.im);
    }
    output::write_estimates(cfg.outputs.csv.as_deref(), &batch.estimates)?;
    if let Some(d) = &cfg.outputs.dump {
        output::write_dump(d, &batch.samples)?;
    }
    if let Some(p) = &cfg.outputs.csv {
        let meta = json!({
            "command": "mc",
            "version": VERSION,
            "config": cfg,
            "method": batch.method,
            "resampled_degenerate": batch.resampled_degenerate,
            "resampled_ill_conditioned": batch.resampled_ill_conditioned,
            "starved": starved,
        });
        output::write_sidecar(p, &meta)?;
    }
    Ok(())
}

fn cmd_exact(a: ExactArgs) -> Result<()> {
    let spec = load_spec(&a.x0)?;
    let params = ModelParams::new(a.n, a.tau, spec)?;
    let points: Vec<EvaluationPoint> = if !a.z.is_empty() {
        a.z.iter()
            .map(|s| Ok(EvaluationPoint::new(C::new(0.0, 0.0), output::parse_complex(s)?, Scaling::Additive { rho: 0.0 })))
            .collect::<Result<_>>()?
    } else {
        let regime = regime_from(&a.point, a.tau, &params.spec)?;
        regime.zhat.iter().map(|&z| EvaluationPoint::new(regime.z0, z, regime.scaling)).collect()
    };
    let quad = QuadSettings {
        radial: a.radial,
        angular: a.angular,
        strategy: match a.strategy {
            StrategyArg::MuExtraction => GStrategy::MuExtraction,
            StrategyArg::PrintedMinors => GStrategy::PrintedMinors,
        },
        check: !a.no_check,
    };
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let r = exact_density(&params, p, &quad)?;
        rows.push(ExactRow { zhat: p.zhat, value: r.normalized, nodes: r.nodes, delta: r.delta });
    }
    output::write_exact(a.out.as_deref(), &rows)?;
    if let Some(p) = &a.out {
        let meta = json!({
            "command": "exact",
            "version": VERSION,
            "model": params,
            "points": points,
            "quadrature": quad,
        });
        output::write_sidecar(p, &meta)?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mc = output::read_table(&a.mc)?;
    let theory = output::read_table(&a.theory)?;
    let exact = a.exact.as_deref().map(output::read_table).transpose()?;
    let resamples = std::fs::read_to_string(output::sidecar_path(&a.mc))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| Some((v.get("resampled_degenerate")?.as_u64()?, v.get("resampled_ill_conditioned")?.as_u64()?)));
    let report = output::compare(&mc, &theory, exact.as_deref(), a.threshold, resamples)?;
    write_json(a.out.as_deref(), &serde_json::to_value(&report)?)?;
    if !report.summary.pass {
        let msg = format!(
            "comparison fails: max |z| = {:?} against threshold {}",
            report.summary.max_abs_z_score, a.threshold
        );
        if a.strict {
            return Err(Error::Accuracy(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}

fn cmd_ie(a: IeArgs) -> Result<()> {
    let mut xs = a.x.clone();
    if let Some(g) = &a.grid {
        xs.extend(output::parse_grid(g)?);
    }
    if xs.is_empty() {
        return Err(Error::Config("give --x or --grid".into()));
    }
    println!("s,x,value");
    for x in xs {
        let v = if a.scaled { specfun::ie_scaled(a.s, x)? } else { specfun::ie(a.s, x)? };
        println!("{},{},{}", a.s, x, v);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Command::Theory(a) => cmd_theory(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Ie(a) => cmd_ie(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
