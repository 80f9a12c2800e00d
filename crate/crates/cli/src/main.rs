mod pgm;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use semiot::generators::{Activation, Generator};
use semiot::measures::{load_dataset, DatasetFormat, LatentKind, LatentSampler};
use semiot::oracle::suites::{run_suite, Suite};
use semiot::trainer::{counterexample, Checkpoint, PsiMode, TrainConfig, Trainer};
use semiot::Error;

const SEED_ENV: &str = "SEMIOT_SEED";

#[derive(Parser)]
#[command(name = "semiot", version, about = "Entropic semi-discrete OT generative modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-atom toy problem, with and without regularization.
    Counterexample(CounterexampleArgs),
    /// Train a generator on a dataset.
    Train(TrainArgs),
    /// Draw samples from a trained checkpoint.
    Sample(SampleArgs),
    /// Run oracle validation suites.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Regularization of the converging run (must be > 0).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Plain gradient step size.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Initial parameter as "x,y".
    #[arg(long, default_value = "0.8,-0.6", value_parser = parse_pair)]
    theta0: [f64; 2],
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: DatasetFormat,
    /// JSON configuration: trainer keys plus optional "generator" and "latent".
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the configured seed (and SEMIOT_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of outer steps; with --resume this is
    /// the new total.
    #[arg(long)]
    outer_steps: Option<usize>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    count: usize,
    /// Output CSV; 784-dimensional samples also get a `.pgm` montage beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    suite: Suite,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report and a manifest here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected \"x,y\", got {s:?}"));
    };
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("not a finite number: {t:?}"))
    };
    Ok([num(a)?, num(b)?])
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. } | Error::NonFiniteSample { .. } | Error::Divergence { .. } => 3,
            _ => 2,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Counterexample(a) => cmd_counterexample(a),
        Command::Train(a) => cmd_train(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

/// `--seed`, then `SEMIOT_SEED`, then `fallback`.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(fallback),
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(dir: &Path, command: &str, seed: u64, config: Value) -> CliResult {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "args": std::env::args().skip(1).collect::<Vec<_>>(),
        "config": config,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
    write(&dir.join("manifest.json"), text + "\n")
}

fn cmd_counterexample(a: CounterexampleArgs) -> CliResult {
    if !(a.lambda.is_finite() && a.lambda > 0.0) {
        return Err(Failure::usage(format!("--lambda must be > 0, got {}", a.lambda)));
    }
    if !(a.tau.is_finite() && a.tau > 0.0) {
        return Err(Failure::usage(format!("--tau must be > 0, got {}", a.tau)));
    }
    let seed = resolve_seed(a.seed, 0)?;
    create_dir(&a.out_dir)?;
    let unreg = counterexample::run(0.0, a.tau, a.steps, a.theta0, PsiMode::Exact)?;
    let reg = counterexample::run(a.lambda, a.tau, a.steps, a.theta0, PsiMode::Exact)?;
    write(&a.out_dir.join("traj_unreg.csv"), semiot::trainer::trajectory_csv(&unreg))?;
    write(&a.out_dir.join("traj_reg.csv"), semiot::trainer::trajectory_csv(&reg))?;
    let unreg_th = counterexample::thetas(&unreg);
    let reg_th = counterexample::thetas(&reg);
    write(&a.out_dir.join("fig1.svg"), svg::figure(&unreg_th, &reg_th, a.lambda))?;
    write_manifest(
        &a.out_dir,
        "counterexample",
        seed,
        json!({
            "lambda": a.lambda,
            "tau": a.tau,
            "steps": a.steps,
            "theta0": a.theta0,
            "y1": counterexample::Y1,
            "y2": counterexample::Y2,
            "psi_mode": "exact",
        }),
    )?;
    let last = reg_th.last().expect("at least the initial row");
    println!(
        "regularized final theta = ({:.6e}, {:.6e}), distance to optimum = {:.3e}",
        last[0],
        last[1],
        counterexample::distance_to_optimum(*last)
    );
    let last = unreg_th.last().expect("at least the initial row");
    println!("unregularized final theta = ({:.6e}, {:.6e})", last[0], last[1]);
    Ok(())
}

/// Splits a config object into trainer keys and the optional generator and
/// latent descriptions.
fn parse_train_config(text: &str) -> CliResult<(TrainConfig, Option<Generator>, Option<LatentKind>)> {
    let bad = |e: serde_json::Error| Failure::usage(format!("invalid config: {e}"));
    let mut map: Map<String, Value> = serde_json::from_str(text).map_err(bad)?;
    let generator = map
        .remove("generator")
        .map(serde_json::from_value)
        .transpose()
        .map_err(bad)?;
    let latent = map
        .remove("latent")
        .map(serde_json::from_value)
        .transpose()
        .map_err(bad)?;
    let config = serde_json::from_value(Value::Object(map)).map_err(bad)?;
    Ok((config, generator, latent))
}

fn default_generator(data_dim: usize, latent: Option<&LatentSampler>) -> CliResult<Generator> {
    let z = latent.map_or(data_dim.min(10), LatentSampler::dim);
    Ok(Generator::mlp(vec![z, 64, data_dim], Activation::Tanh)?)
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let nu = load_dataset(&a.data, a.format)?;
    create_dir(&a.out_dir)?;
    let mut trainer = match &a.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let mut t = Trainer::from_checkpoint(ckpt, &nu)?;
            if let Some(n) = a.outer_steps {
                t.set_outer_steps(n)?;
            }
            t
        }
        None => {
            let (mut config, generator, latent) = match &a.config {
                Some(p) => parse_train_config(&fs::read_to_string(p).map_err(|e| {
                    Failure::usage(format!("cannot read config {}: {e}", p.display()))
                })?)?,
                None => (TrainConfig::default(), None, None),
            };
            config.seed = resolve_seed(a.seed, config.seed)?;
            if let Some(n) = a.outer_steps {
                config.outer_steps = n;
            }
            let latent = latent
                .map(|kind| LatentSampler::new(kind, config.seed))
                .transpose()?;
            let generator = match generator {
                Some(g) => g,
                None => default_generator(nu.dim(), latent.as_ref())?,
            };
            generator.validate()?;
            let latent = match latent {
                Some(l) => l,
                None => LatentSampler::standard_gaussian(generator.latent_dim(), config.seed)?,
            };
            Trainer::new(config, &nu, generator, latent, None)?
        }
    };
    let ckpt = trainer.checkpoint();
    write_manifest(
        &a.out_dir,
        "train",
        trainer.config().seed,
        json!({
            "data": a.data,
            "format": format!("{:?}", a.format).to_lowercase(),
            "resumed_from": a.resume,
            "resumed_at_step": trainer.state().step,
            "train": ckpt.config,
            "generator": ckpt.generator,
            "latent": ckpt.latent,
            "target_atoms": nu.len(),
            "target_dim": nu.dim(),
        }),
    )?;
    let outcome = trainer.run_with_checkpoints(&a.out_dir);
    write(
        &a.out_dir.join("trajectory.csv"),
        semiot::trainer::trajectory_csv(&trainer.state().trajectory),
    )?;
    outcome?;
    trainer.checkpoint().save(a.out_dir.join("checkpoint.json"))?;
    if let Some(last) = trainer.state().trajectory.last() {
        println!(
            "step {}: objective = {:e}, marginal violation = {:e}",
            last.step, last.objective, last.marginal_violation
        );
    }
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> CliResult {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let seed = resolve_seed(a.seed, ckpt.latent.seed)?;
    let latent = ckpt.latent.clone().with_seed(seed);
    let zs = latent.sample(a.count, u64::MAX);
    let points = zs
        .iter()
        .map(|z| ckpt.generator.forward(&ckpt.state.theta, z))
        .collect::<Result<Vec<_>, _>>()?;
    let dim = ckpt.generator.output_dim();
    let mut csv = (0..dim).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for p in &points {
        csv.push_str(&p.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write(&a.out, csv)?;
    let dir = a.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut config = json!({
        "checkpoint": a.checkpoint,
        "count": a.count,
        "generator": ckpt.generator,
        "outer_step": ckpt.state.step,
    });
    if dim == pgm::MNIST_PIXELS && !points.is_empty() {
        let pgm_path = a.out.with_extension("pgm");
        write(&pgm_path, pgm::montage(&points, pgm::MNIST_SIDE))?;
        config["montage"] = json!(pgm_path);
    }
    write_manifest(&dir, "sample", seed, config)
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let seed = resolve_seed(a.seed, 0)?;
    let checks = run_suite(a.suite, seed)?;
    let mut report = String::new();
    for c in &checks {
        report.push_str(&c.to_string());
        report.push('\n');
    }
    print!("{report}");
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    println!(
        "summary: suite={} checks={} failed={}",
        a.suite,
        checks.len(),
        failed.len()
    );
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        write(&dir.join("validate.txt"), &report)?;
        write_manifest(dir, "validate", seed, json!({ "suite": a.suite.to_string() }))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            msg: format!("failed checks: {}", failed.join(", ")),
        })
    }
}
