//! `filament`: generate point clouds, run the detector, calibrate thresholds
//! and run the Monte Carlo experiments from the command line.
//!
//! Exit codes: 0 success or accept, 3 reject, 1 usage error, 2 data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use filament::experiments::{self, ScalingOptions, ThresholdPolicy};
use filament::holder::HolderCurve;
use filament::io;
use filament::strip::scale_params;
use filament::synth::{self, MixtureSpec};
use filament::thresholds::{self, Provenance, ThresholdConfig, ThresholdSet, DEFAULT_P0};
use filament::{CurveSpec, ScanMode};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_REJECT: u8 = 3;

/// Curve used by `power` when none is given.
const DEFAULT_CURVE: &str = "sine:a=0.02,b=0.5,c=0.5";

#[derive(Parser, Debug)]
#[command(name = "filament", version, about = "Multiscale significant-runs filament detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "camelCase", tag = "command")]
enum Command {
    /// Sample a uniform or mixture point cloud to CSV.
    Generate(GenerateArgs),
    /// Run the detector on a CSV point cloud.
    Detect(DetectArgs),
    /// Simulate the null distribution of the longest run.
    Calibrate(CalibrateArgs),
    /// Estimate rejection rates over a grid of curve weights.
    Power(PowerArgs),
    /// Fit how the 50%-power curve weight scales with n.
    Scaling(ScalingArgs),
    /// Print the closed-form thresholds.
    Thresholds(ThresholdsArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Curve as `name:key=value,...`, e.g. `sine:a=0.1,b=1,c=0.5`.
    #[arg(long)]
    curve: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize, Clone, Copy)]
#[serde(rename_all = "camelCase")]
struct ThresholdArgs {
    /// Per-path false-alarm budget used for any threshold not given explicitly.
    #[arg(long, default_value_t = DEFAULT_P0)]
    p0: f64,
    #[arg(long)]
    nstar: Option<u32>,
    #[arg(long)]
    lstar: Option<f64>,
}

impl ThresholdArgs {
    fn resolve(&self, n: usize, slope_bound: f64) -> anyhow::Result<ThresholdSet> {
        let base = thresholds::derive_thresholds(&ThresholdConfig::new(self.p0, n, slope_bound)?);
        if let Some(l) = self.lstar {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(filament::Error::InvalidParameter {
                    name: "lstar",
                    value: l.to_string(),
                    reason: "must be finite and nonnegative",
                }
                .into());
            }
        }
        Ok(base.with_overrides(self.nstar, self.lstar, Provenance::Override))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Exhaustive,
    ExactMax,
    Decision,
}

impl From<ModeArg> for ScanMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exhaustive => ScanMode::Exhaustive,
            ModeArg::ExactMax => ScanMode::ExactMax,
            ModeArg::Decision => ScanMode::Decision,
        }
    }
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct DetectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "S", default_value_t = 2.0)]
    slope_bound: f64,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Which scales to visit; `exhaustive` reports every scale.
    #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CalibrateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "S", default_value_t = 2.0)]
    slope_bound: f64,
    #[arg(long, default_value_t = 8)]
    nstar: u32,
    #[arg(long, default_value_t = 1200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Histogram CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct PowerArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "S", default_value_t = 2.0)]
    slope_bound: f64,
    #[arg(long, default_value = DEFAULT_CURVE)]
    curve: String,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.05,0.1")]
    epsilons: Vec<f64>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    Fixed,
    Asymptotic,
    Calibrated,
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ScalingArgs {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Explicit curve; replaces the (alpha, beta) family member.
    #[arg(long)]
    curve: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "256,1024,4096")]
    ns: Vec<usize>,
    #[arg(long = "S", default_value_t = 2.0)]
    slope_bound: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Asymptotic)]
    policy: PolicyArg,
    #[arg(long, default_value_t = 8)]
    nstar: u32,
    /// Length threshold for `--policy fixed`.
    #[arg(long, default_value_t = 3.0)]
    lstar: f64,
    #[arg(long, default_value_t = DEFAULT_P0)]
    p0: f64,
    /// Null level for `--policy calibrated`.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps_lo: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ThresholdsArgs {
    #[arg(long, default_value_t = DEFAULT_P0)]
    p0: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long = "S", default_value_t = 2.0)]
    slope_bound: f64,
    /// Also write the printed lines to this file, with a manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ReplayArgs {
    manifest: PathBuf,
}

/// Everything needed to re-run a command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    parameters: serde_json::Value,
    seed: Option<u64>,
    tool_version: String,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    outputs: Vec<PathBuf>,
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

struct Run {
    argv: Vec<String>,
    started: u128,
}

impl Run {
    fn finish(&self, cmd: &Command, seed: Option<u64>, manifest: Option<&Path>, outputs: &[&Path]) -> anyhow::Result<()> {
        let Some(first) = outputs.first() else { return Ok(()) };
        let path = manifest.map(Path::to_path_buf).unwrap_or_else(|| {
            let mut s = first.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        });
        let parameters = serde_json::to_value(cmd)?;
        let m = RunManifest {
            command: parameters["command"].as_str().unwrap_or_default().to_string(),
            argv: self.argv.clone(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: self.started,
            finished_unix_ms: unix_ms(),
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
        };
        io::write_atomic(&path, serde_json::to_string_pretty(&m)?.as_bytes())
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

fn parse_curve(spec: &str) -> anyhow::Result<CurveSpec> {
    Ok(spec.parse::<CurveSpec>()?)
}

/// Shortest decimal with at least one fractional digit, e.g. `9.0`.
fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    let s = rounded.to_string();
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

fn execute(cmd: Command, run: &Run) -> anyhow::Result<u8> {
    match &cmd {
        Command::Generate(a) => {
            let curve = a.curve.as_deref().map(parse_curve).transpose()?;
            let spec = MixtureSpec {
                n: a.n,
                epsilon: a.epsilon,
                curve,
                seed: a.seed,
            };
            let sample = synth::sample_mixture::<f64>(&spec)?;
            io::write_points_csv(&a.out, &sample.cloud)?;
            eprintln!("wrote {} points ({} on the curve) to {}", a.n, sample.curve_points, a.out.display());
            run.finish(&cmd, Some(a.seed), a.manifest.as_deref(), &[&a.out])?;
            Ok(0)
        }
        Command::Detect(a) => {
            let cloud = io::read_points_csv(&a.input).map_err(DataError)?;
            let ts = a.thresholds.resolve(cloud.len(), a.slope_bound)?;
            let result = filament::detect_with(&cloud, a.slope_bound, &ts, a.mode.into())?;
            io::write_atomic(&a.out, serde_json::to_string_pretty(&result)?.as_bytes())?;
            let mut outputs: Vec<&Path> = vec![&a.out];
            if let Some(svg) = &a.svg {
                let witness = result.witness();
                let params = witness
                    .first()
                    .map(|id| scale_params(cloud.len(), id.j, a.slope_bound))
                    .transpose()?;
                io::write_atomic(svg, io::render_svg(&cloud, params.as_ref(), witness).as_bytes())?;
                outputs.push(svg);
            }
            println!(
                "lmax={} lstar={} nstar={} reject={}",
                result.lmax,
                fmt_num(result.lstar),
                result.nstar,
                result.reject
            );
            run.finish(&cmd, None, a.manifest.as_deref(), &outputs)?;
            Ok(if result.reject { EXIT_REJECT } else { 0 })
        }
        Command::Calibrate(a) => {
            let report = experiments::calibrate_null(a.n, a.slope_bound, a.nstar, a.trials, a.seed)?;
            io::write_atomic(&a.out, io::calibration_csv(&report).as_bytes())?;
            for (level, l) in &report.quantiles {
                println!("level={} lstar={}", fmt_num(*level), l);
            }
            run.finish(&cmd, Some(a.seed), a.manifest.as_deref(), &[&a.out])?;
            Ok(0)
        }
        Command::Power(a) => {
            let curve = parse_curve(&a.curve)?;
            let ts = a.thresholds.resolve(a.n, a.slope_bound)?;
            let points = experiments::power_curve(a.n, a.slope_bound, &curve, &a.epsilons, &ts, a.trials, a.seed)?;
            io::write_atomic(&a.out, io::power_csv(&points).as_bytes())?;
            for p in &points {
                println!("epsilon={} power={}", fmt_num(p.epsilon), fmt_num(p.power));
            }
            run.finish(&cmd, Some(a.seed), a.manifest.as_deref(), &[&a.out])?;
            Ok(0)
        }
        Command::Scaling(a) => {
            let curve = match &a.curve {
                Some(s) => parse_curve(s)?,
                None => CurveSpec::for_smoothness(a.alpha, a.beta)?,
            };
            let policy = match a.policy {
                PolicyArg::Fixed => ThresholdPolicy::Fixed { nstar: a.nstar, lstar: a.lstar },
                PolicyArg::Asymptotic => ThresholdPolicy::Asymptotic { p0: a.p0 },
                PolicyArg::Calibrated => ThresholdPolicy::Calibrated {
                    nstar: a.nstar,
                    level: a.level,
                    trials: a.trials,
                },
            };
            let opts = ScalingOptions {
                slope_bound: a.slope_bound,
                trials: a.trials,
                seed_base: a.seed,
                policy,
                eps_lo: a.eps_lo,
                eps_hi: a.eps_hi,
                ..ScalingOptions::default()
            };
            let fit = experiments::scaling_fit_for(&curve, &a.ns, &opts)?;
            io::write_atomic(&a.out, io::scaling_csv(&fit).as_bytes())?;
            for p in &fit.points {
                println!("n={} epsHalf={}", p.n, fmt_num(p.eps_half));
            }
            println!("slope={}", fmt_num(fit.slope));
            println!("rSquared={}", fmt_num(fit.r_squared));
            println!("theory={}", fmt_num(-curve.alpha() / (1.0 + curve.alpha())));
            run.finish(&cmd, Some(a.seed), a.manifest.as_deref(), &[&a.out])?;
            Ok(0)
        }
        Command::Thresholds(a) => {
            let ts = thresholds::derive_thresholds(&ThresholdConfig::new(a.p0, a.n, a.slope_bound)?);
            if !(a.alpha >= 1.0 && a.alpha <= 2.0) {
                bail!(filament::Error::InvalidParameter {
                    name: "alpha",
                    value: a.alpha.to_string(),
                    reason: "must lie in [1, 2]",
                });
            }
            let t_star = thresholds::detectability_constant(a.alpha, a.beta, a.slope_bound, ts.lambda_star);
            let lines = [
                ("Nstar", ts.nstar.to_string()),
                ("Lstar", fmt_num(ts.lstar)),
                ("p1", fmt_num(ts.p1)),
                ("lambdaStar", fmt_num(ts.lambda_star)),
                ("Tstar", fmt_num(t_star)),
                ("epsThreshold", fmt_num(thresholds::epsilon_threshold(t_star, a.alpha, a.n))),
            ];
            let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
            print!("{text}");
            if let Some(out) = &a.out {
                io::write_atomic(out, text.as_bytes())?;
                run.finish(&cmd, None, a.manifest.as_deref(), &[out])?;
            }
            Ok(0)
        }
        Command::Replay(a) => {
            let text = std::fs::read_to_string(&a.manifest)
                .with_context(|| format!("reading manifest {}", a.manifest.display()))
                .map_err(DataError)?;
            let m: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("parsing manifest {}", a.manifest.display()))
                .map_err(DataError)?;
            if m.argv.first().map(String::as_str) == Some("replay") {
                bail!("a manifest cannot replay another replay");
            }
            let mut argv = vec!["filament".to_string()];
            argv.extend(m.argv);
            run_args(argv)
        }
    }
}

/// Marks failures caused by input data rather than by flags.
#[derive(Debug)]
struct DataError<E>(E);

impl<E: std::fmt::Display> std::fmt::Display for DataError<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl<E: std::fmt::Debug + std::fmt::Display> std::error::Error for DataError<E> {}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    let is_data = err.chain().any(|e| {
        e.is::<DataError<filament::Error>>()
            || e.is::<DataError<anyhow::Error>>()
            || matches!(
                e.downcast_ref::<filament::Error>(),
                Some(
                    filament::Error::Malformed(_)
                        | filament::Error::PointOutOfRange { .. }
                        | filament::Error::Csv(_)
                        | filament::Error::Io(_)
                        | filament::Error::Json(_)
                        | filament::Error::InsufficientPowerRange { .. }
                )
            )
    });
    if is_data {
        EXIT_DATA
    } else {
        EXIT_USAGE
    }
}

fn describe(err: &anyhow::Error) -> String {
    for e in err.chain() {
        if let Some(filament::Error::InvalidParameter { name, value, reason }) = e.downcast_ref::<filament::Error>() {
            return format!("invalid value {value} for --{name}: {reason}");
        }
    }
    format!("{err:#}")
}

fn run_args(argv: Vec<String>) -> anyhow::Result<u8> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return Ok(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let run = Run {
        argv: argv[1..].to_vec(),
        started: unix_ms(),
    };
    execute(cli.command, &run)
}

fn main() -> ExitCode {
    match run_args(std::env::args().collect()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code_for(&err))
        }
    }
}
