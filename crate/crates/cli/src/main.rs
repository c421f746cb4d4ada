//! `psaem`: generate data, identify models by PSAEM, simulate and evaluate.
//!
//! Exit codes:
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success                                                   |
//! | 1    | other failure (internal invariant, dimension mismatch)    |
//! | 2    | usage error (bad or conflicting flags)                    |
//! | 3    | input error (unreadable, malformed or invalid file)       |
//! | 4    | divergence (non-finite state during filtering/simulation) |
//! | 5    | rank deficiency in the M-step (add regularization)        |
//!
//! No output file is written unless the whole command succeeds.

mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use psaem_core::evaluation::{central_interval, grid_rmse, uniform_grid};
use psaem_core::io::{
    function_grid, load_dataset, load_model_with_warnings, model_to_json, write_dataset,
    write_diagnostics, write_function_grid, write_states, write_trace, RunConfig,
};
use psaem_core::systems::{example1_transition, generate_example1, generate_linear};
use psaem_core::{bootstrap_filter, metrics, psaem_identify, simulate, Dataset, Error, ModelParams};
use serde_json::{json, Value};

use output::Staging;

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_RANK: u8 = 5;

#[derive(Parser)]
#[command(name = "psaem", version, about = "Nonlinear state-space identification by particle SAEM")]
struct Cli {
    /// Print one JSON document on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated dataset.
    Generate(GenerateArgs),
    /// Identify a model from data with a run configuration.
    Identify(IdentifyArgs),
    /// Simulate a stored model.
    Simulate(SimulateArgs),
    /// Report simulation and prediction errors of a model on data.
    Evaluate(EvaluateArgs),
    /// Rank several models on the same data.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemKind {
    /// x' = -10x/(1+3x²) + w, y = x + e, Q = 0.1, R = 0.5.
    Example1,
    /// x' = a·x + w, y = c·x + e.
    Linear,
    /// Replay a stored model file (--model).
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthSystem {
    Example1,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    system: SystemKind,
    /// Number of samples.
    #[arg(long = "T", visible_alias = "length")]
    t_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the latent states.
    #[arg(long)]
    states: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Initial state (comma separated); linear default 1, file default init_mean.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x1: Option<Vec<f64>>,
    /// Model file for `--system file`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset whose input columns drive `--system file`.
    #[arg(long)]
    inputs: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dataset; overrides the configured one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Defaults to `<output_dir>/model.json`.
    #[arg(long)]
    out_model: Option<PathBuf>,
    /// Parameter trace (JSON lines); defaults next to the model.
    #[arg(long)]
    out_trace: Option<PathBuf>,
    /// Per-iteration diagnostics (JSON lines); defaults next to the model.
    #[arg(long)]
    out_diagnostics: Option<PathBuf>,
    /// Overrides `iterations` in the config.
    #[arg(long)]
    iterations: Option<usize>,
    /// Overrides `particles` in the config.
    #[arg(long)]
    particles: Option<usize>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset file to write (inputs and simulated outputs).
    #[arg(long)]
    out: PathBuf,
    /// Dataset supplying the input sequence.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Number of samples, for models without inputs.
    #[arg(long = "T", visible_alias = "length")]
    t_len: Option<usize>,
    /// Initial state (comma separated); defaults to the model's init_mean.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x1: Option<Vec<f64>>,
    /// Add process and measurement noise.
    #[arg(long)]
    noise: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    states: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ScoringArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model whose state function is the reference for grid RMSE.
    #[arg(long, conflicts_with = "truth_system")]
    truth_model: Option<PathBuf>,
    /// Built-in system whose transition is the reference for grid RMSE.
    #[arg(long, value_enum)]
    truth_system: Option<TruthSystem>,
    /// Grid interval `LO,HI`; defaults to the central mass of the inferred states.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    interval: Option<Vec<f64>>,
    /// Probability mass of the default grid interval.
    #[arg(long, default_value_t = 0.95)]
    mass: f64,
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    /// Particles for filtering (prediction error, inferred states).
    #[arg(long, default_value_t = 200)]
    particles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Write `(x, f(x))` of the first state coordinate on the grid.
    #[arg(long)]
    export_grid: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(e) => match e {
                Error::Parse { .. } | Error::Format(_) | Error::Io(_) | Error::InvalidArgument(_) => EXIT_INPUT,
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                Error::RankDeficient { .. } => EXIT_RANK,
                _ => EXIT_OTHER,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Core(e) => match e {
                Error::Parse { .. } => "parse",
                Error::Format(_) => "format",
                Error::Io(_) => "io",
                Error::InvalidArgument(_) => "invalid_argument",
                Error::Divergence { .. } => "divergence",
                Error::RankDeficient { .. } => "rank_deficient",
                Error::Dimension { .. } => "dimension",
                Error::Invariant(_) => "invariant",
                Error::DegenerateWeights => "degenerate_weights",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }

    fn details(&self) -> Value {
        let mut v = json!({ "kind": self.kind(), "message": self.message() });
        if let Failure::Core(e) = self {
            match e {
                Error::Divergence { time, iteration } => {
                    v["time"] = json!(time);
                    v["iteration"] = json!(iteration);
                }
                Error::RankDeficient { equation, row } => {
                    v["equation"] = json!(equation);
                    v["row"] = json!(row);
                }
                Error::Parse { line, .. } => v["line"] = json!(line),
                _ => {}
            }
        }
        v
    }
}

type CmdResult = Result<Report, Failure>;

/// What a successful command prints: a JSON document or text lines.
struct Report {
    json: Value,
    text: String,
    warnings: Vec<String>,
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Generate(_) => "generate",
        Command::Identify(_) => "identify",
        Command::Simulate(_) => "simulate",
        Command::Evaluate(_) => "evaluate",
        Command::Compare(_) => "compare",
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Identify(a) => identify(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(report) => {
            if cli.json {
                let mut doc = json!({ "command": name, "status": "ok" });
                if let (Some(obj), Value::Object(extra)) = (doc.as_object_mut(), report.json) {
                    obj.extend(extra);
                }
                doc["warnings"] = json!(report.warnings);
                emit(&format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")));
            } else {
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                emit(&report.text);
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            if cli.json {
                let doc = json!({
                    "command": name,
                    "status": "error",
                    "exit_code": failure.code(),
                    "error": failure.details(),
                });
                emit(&format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")));
            } else {
                eprintln!("error: {}", failure.message());
            }
            ExitCode::from(failure.code())
        }
    }
}

/// Writes to stdout; a closed pipe is not an error of the command.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn bytes_of<F: FnOnce(&mut Vec<u8>) -> psaem_core::Result<()>>(f: F) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Refuses to overwrite any input file.
fn check_outputs(inputs: &[&Path], outputs: &[&Path]) -> Result<(), Failure> {
    let canon = |p: &Path| std::fs::canonicalize(p).ok();
    for (i, out) in outputs.iter().enumerate() {
        if outputs[..i].contains(out) {
            return usage(format!("{} is named as two different outputs", out.display()));
        }
        let Some(o) = canon(out) else { continue };
        if inputs.iter().any(|inp| canon(inp).as_ref() == Some(&o)) {
            return usage(format!("refusing to overwrite input file {}", out.display()));
        }
    }
    Ok(())
}

fn load_model(path: &Path, warnings: &mut Vec<String>) -> Result<ModelParams, Failure> {
    let (model, w) = load_model_with_warnings(path)?;
    warnings.extend(w.into_iter().map(|w| format!("{}: {w}", path.display())));
    Ok(model)
}

fn initial_state(model: &ModelParams, x1: Option<Vec<f64>>) -> Result<Vec<f64>, Failure> {
    match x1 {
        None => Ok(model.init_mean.iter().copied().collect()),
        Some(v) if v.len() == model.n_x => Ok(v),
        Some(v) => usage(format!("--x1 has {} values but the model has {} states", v.len(), model.n_x)),
    }
}

/// Input sequence for a simulation: the `u` columns of `inputs`, or `T`
/// empty rows for a model without inputs.
fn input_sequence(model: &ModelParams, inputs: Option<&Path>, t_len: Option<usize>) -> Result<DMatrix<f64>, Failure> {
    match (inputs, t_len) {
        (Some(_), Some(_)) => usage("give either --inputs or --T, not both"),
        (Some(path), None) => {
            let data = load_dataset(path)?;
            if data.n_u() != model.n_u {
                return Err(Error::Dimension {
                    what: "input columns",
                    expected: model.n_u,
                    got: data.n_u(),
                }
                .into());
            }
            Ok(data.u)
        }
        (None, Some(t)) if model.n_u == 0 => Ok(DMatrix::zeros(t, 0)),
        (None, Some(_)) => usage("the model has inputs; supply them with --inputs"),
        (None, None) => usage("--T (or --inputs) is required"),
    }
}

fn generate(args: GenerateArgs) -> CmdResult {
    let linear_flags = args.a.is_some() || args.q.is_some() || args.c.is_some() || args.r.is_some();
    let mut warnings = Vec::new();
    match args.system {
        SystemKind::Example1 | SystemKind::Linear if args.model.is_some() || args.inputs.is_some() => {
            return usage("--model and --inputs apply only to --system file")
        }
        SystemKind::Example1 | SystemKind::File if linear_flags => {
            return usage("--a, --q, --c and --r apply only to --system linear")
        }
        SystemKind::Example1 if args.x1.is_some() => return usage("--x1 does not apply to --system example1"),
        _ => {}
    }
    let outputs: Vec<&Path> = std::iter::once(args.out.as_path()).chain(args.states.as_deref()).collect();
    let inputs: Vec<&Path> = args.model.iter().chain(args.inputs.iter()).map(PathBuf::as_path).collect();
    check_outputs(&inputs, &outputs)?;

    let (data, states, label) = match args.system {
        SystemKind::Example1 => {
            let Some(t) = args.t_len else { return usage("--T is required") };
            let (data, x) = generate_example1(t, args.seed);
            (data, x, "example1".to_string())
        }
        SystemKind::Linear => {
            let Some(t) = args.t_len else { return usage("--T is required") };
            let x1 = match args.x1.as_deref() {
                None => 1.0,
                Some([v]) => *v,
                Some(_) => return usage("--x1 takes one value for the scalar linear system"),
            };
            let (a, q, c, r) = (args.a.unwrap_or(0.9), args.q.unwrap_or(0.1), args.c.unwrap_or(1.0), args.r.unwrap_or(0.1));
            let (data, x) = generate_linear(a, q, c, r, x1, t, args.seed)?;
            (data, x, format!("linear a={a} q={q} c={c} r={r}"))
        }
        SystemKind::File => {
            let Some(model_path) = args.model.as_deref() else {
                return usage("--system file needs --model");
            };
            let model = load_model(model_path, &mut warnings)?;
            let u = input_sequence(&model, args.inputs.as_deref(), args.t_len)?;
            let x1 = initial_state(&model, args.x1)?;
            let sim = simulate(&model, &u, &x1, args.seed, true)?;
            (Dataset::new(u, sim.y)?, sim.x, format!("model {}", model_path.display()))
        }
    };

    let mut staging = Staging::new();
    staging.stage(&args.out, &bytes_of(|b| write_dataset(&data, b))?)?;
    if let Some(p) = &args.states {
        staging.stage(p, &bytes_of(|b| write_states(&states, b))?)?;
    }
    let written = staging.commit()?;
    let text = format!(
        "wrote {} samples of {label} to {}\n",
        data.len(),
        args.out.display()
    );
    Ok(Report {
        json: json!({
            "system": label,
            "T": data.len(),
            "n_u": data.n_u(),
            "n_y": data.n_y(),
            "seed": args.seed,
            "files": written,
        }),
        text,
        warnings,
    })
}

fn sibling(model: &Path, suffix: &str) -> PathBuf {
    let stem = model.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    model.with_file_name(format!("{stem}.{suffix}"))
}

fn identify(args: IdentifyArgs) -> CmdResult {
    // resolve every path before doing any work
    let (mut config, mut warnings) = RunConfig::load_with_warnings(&args.config)?;
    warnings = warnings
        .into_iter()
        .map(|w| format!("{}: {w}", args.config.display()))
        .collect();
    let data_path = match (&args.data, &config.dataset) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p.clone(),
        (None, None) => return usage("no dataset: pass --data or set `dataset` in the config"),
    };
    let out_model = match (&args.out_model, &config.output_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join("model.json"),
        (None, None) => return usage("no output: pass --out-model or set `output_dir` in the config"),
    };
    let out_trace = args.out_trace.clone().unwrap_or_else(|| sibling(&out_model, "trace.jsonl"));
    let out_diag = args
        .out_diagnostics
        .clone()
        .unwrap_or_else(|| sibling(&out_model, "diagnostics.jsonl"));
    check_outputs(
        &[args.config.as_path(), data_path.as_path()],
        &[out_model.as_path(), out_trace.as_path(), out_diag.as_path()],
    )?;
    if let Some(k) = args.iterations {
        config.iterations = k;
    }
    if let Some(n) = args.particles {
        config.particles = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }

    let data = load_dataset(&data_path)?;
    let run = config.build(&data)?;
    let result = psaem_identify(&data, &run)?;

    let mut staging = Staging::new();
    let mut model_text = model_to_json(&result.model)?;
    model_text.push('\n');
    staging.stage(&out_model, model_text.as_bytes())?;
    staging.stage(&out_trace, &bytes_of(|b| write_trace(&result.trace, b))?)?;
    staging.stage(&out_diag, &bytes_of(|b| write_diagnostics(&result.records, b))?)?;
    let written = staging.commit()?;

    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    let text = format!(
        "identified {} iterations, {} particles, T = {}\n\
         degenerate weight steps: {}, covariance floor activations: {}\n\
         model: {}\ntrace: {}\ndiagnostics: {}\n",
        run.iterations,
        run.particles,
        data.len(),
        result.degenerate_steps(),
        result.floor_activations(),
        out_model.display(),
        out_trace.display(),
        out_diag.display()
    );
    Ok(Report {
        json: json!({
            "iterations": run.iterations,
            "particles": run.particles,
            "seed": run.seed,
            "T": data.len(),
            "degenerate_steps": result.degenerate_steps(),
            "floor_activations": result.floor_activations(),
            "Q": rows(&result.model.q),
            "R": rows(&result.model.r),
            "files": written,
        }),
        text,
        warnings,
    })
}

fn simulate_cmd(args: SimulateArgs) -> CmdResult {
    let mut warnings = Vec::new();
    let outputs: Vec<&Path> = std::iter::once(args.out.as_path()).chain(args.states.as_deref()).collect();
    let inputs: Vec<&Path> = std::iter::once(args.model.as_path()).chain(args.inputs.as_deref()).collect();
    check_outputs(&inputs, &outputs)?;
    let model = load_model(&args.model, &mut warnings)?;
    let u = input_sequence(&model, args.inputs.as_deref(), args.t_len)?;
    let x1 = initial_state(&model, args.x1)?;
    let sim = simulate(&model, &u, &x1, args.seed, args.noise)?;
    let data = Dataset::new(u, sim.y.clone())?;

    let mut staging = Staging::new();
    staging.stage(&args.out, &bytes_of(|b| write_dataset(&data, b))?)?;
    if let Some(p) = &args.states {
        staging.stage(p, &bytes_of(|b| write_states(&sim.x, b))?)?;
    }
    let written = staging.commit()?;
    Ok(Report {
        json: json!({ "T": data.len(), "noise": args.noise, "seed": args.seed, "files": written }),
        text: format!(
            "simulated {} samples ({}) to {}\n",
            data.len(),
            if args.noise { "with noise" } else { "noise-free" },
            args.out.display()
        ),
        warnings,
    })
}

/// The reference transition for grid RMSE, if any.
enum Truth {
    System(TruthSystem),
    Model(ModelParams),
}

impl Truth {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Truth::System(TruthSystem::Example1) => example1_transition(x),
            Truth::Model(m) => m.state_fn_x(&[x]).map_or(f64::NAN, |v| v[0]),
        }
    }

    fn label(&self, path: Option<&Path>) -> String {
        match self {
            Truth::System(TruthSystem::Example1) => "example1".into(),
            Truth::Model(_) => path.map_or_else(String::new, |p| p.display().to_string()),
        }
    }
}

struct Scoring {
    data: Dataset,
    truth: Option<Truth>,
    label: String,
}

fn prepare_scoring(args: &ScoringArgs, warnings: &mut Vec<String>) -> Result<Scoring, Failure> {
    if !(args.mass > 0.0 && args.mass <= 1.0) {
        return usage("--mass must lie in (0, 1]");
    }
    if args.grid_points < 2 {
        return usage("--grid-points must be at least 2");
    }
    if args.particles == 0 {
        return usage("--particles must be at least 1");
    }
    if let Some(iv) = &args.interval {
        if iv.len() != 2 {
            return usage("--interval takes two values, LO,HI");
        }
        if !(iv[0] < iv[1]) {
            return usage("--interval needs LO < HI");
        }
    }
    let data = load_dataset(&args.data)?;
    let truth = match (&args.truth_model, args.truth_system) {
        (Some(p), _) => {
            let m = load_model(p, warnings)?;
            if m.n_x != 1 {
                return usage("grid RMSE needs a truth model with a scalar state");
            }
            Some(Truth::Model(m))
        }
        (None, Some(s)) => Some(Truth::System(s)),
        (None, None) => None,
    };
    let label = truth.as_ref().map(|t| t.label(args.truth_model.as_deref())).unwrap_or_default();
    Ok(Scoring { data, truth, label })
}

struct Score {
    sim_mean: f64,
    sim_std: f64,
    sim_rmse: f64,
    pred_rmse: f64,
    filtered_x: DMatrix<f64>,
}

fn score(model: &ModelParams, scoring: &Scoring, args: &ScoringArgs) -> Result<Score, Failure> {
    let data = &scoring.data;
    if data.n_u() != model.n_u || data.n_y() != model.n_y {
        return Err(Error::Dimension {
            what: "dataset columns for this model",
            expected: model.n_u + model.n_y,
            got: data.n_u() + data.n_y(),
        }
        .into());
    }
    let x1: Vec<f64> = model.init_mean.iter().copied().collect();
    let sim = simulate(model, &data.u, &x1, 0, false)?;
    let sim_err = metrics(&data.y, &sim.y)?;
    let filter = bootstrap_filter(model, data, args.particles, args.seed)?;
    let pred = metrics(&data.y, &filter.predicted_y)?;
    Ok(Score {
        sim_mean: sim_err.mean_error,
        sim_std: sim_err.std_error,
        sim_rmse: sim_err.rmse,
        pred_rmse: pred.rmse,
        filtered_x: filter.filtered_x,
    })
}

fn grid_for(args: &ScoringArgs, filtered_x: &DMatrix<f64>) -> Result<(f64, f64, Vec<f64>), Failure> {
    let (lo, hi) = match &args.interval {
        Some(iv) => (iv[0], iv[1]),
        None => {
            let xs: Vec<f64> = filtered_x.column(0).iter().copied().collect();
            central_interval(&xs, args.mass)?
        }
    };
    Ok((lo, hi, uniform_grid(lo, hi, args.grid_points)))
}

fn evaluate(args: EvaluateArgs) -> CmdResult {
    let mut warnings = Vec::new();
    let mut inputs = vec![args.model.as_path(), args.scoring.data.as_path()];
    inputs.extend(args.scoring.truth_model.as_deref());
    let outputs: Vec<&Path> = args.export_grid.iter().map(PathBuf::as_path).collect();
    check_outputs(&inputs, &outputs)?;
    let scoring = prepare_scoring(&args.scoring, &mut warnings)?;
    let model = load_model(&args.model, &mut warnings)?;
    let s = score(&model, &scoring, &args.scoring)?;

    let mut doc = json!({
        "model": args.model,
        "data": args.scoring.data,
        "T": scoring.data.len(),
        "simulation_error": { "mean": s.sim_mean, "std": s.sim_std, "rms": s.sim_rmse },
        "prediction_rmse": s.pred_rmse,
    });
    let mut text = format!(
        "mean simulation error                  {:.6}\n\
         standard deviation of simulation error {:.6}\n\
         RMS simulation error                   {:.6}\n\
         one-step-ahead prediction RMSE         {:.6}\n",
        s.sim_mean, s.sim_std, s.sim_rmse, s.pred_rmse
    );
    let needs_grid = scoring.truth.is_some() || args.export_grid.is_some();
    let mut staging = Staging::new();
    if needs_grid {
        let (lo, hi, grid) = grid_for(&args.scoring, &s.filtered_x)?;
        if let Some(truth) = &scoring.truth {
            let rmse = grid_rmse(&model, |x| truth.eval(x), &grid)?;
            doc["grid_rmse"] = json!({ "value": rmse, "interval": [lo, hi], "points": grid.len(), "truth": scoring.label });
            text.push_str(&format!(
                "grid RMSE vs {} on [{lo:.4}, {hi:.4}]   {rmse:.6}\n",
                scoring.label
            ));
        }
        if let Some(path) = &args.export_grid {
            let points = function_grid(&model, 0, &grid)?;
            staging.stage(path, &bytes_of(|b| write_function_grid(&points, b))?)?;
            doc["grid_file"] = json!(path);
            text.push_str(&format!("function grid written to {}\n", path.display()));
        }
    }
    staging.commit()?;
    Ok(Report { json: doc, text, warnings })
}

fn compare(args: CompareArgs) -> CmdResult {
    let mut warnings = Vec::new();
    let scoring = prepare_scoring(&args.scoring, &mut warnings)?;
    let models = args
        .models
        .iter()
        .map(|p| load_model(p, &mut warnings))
        .collect::<Result<Vec<_>, _>>()?;

    struct Row {
        path: PathBuf,
        score: Option<Score>,
        grid: Option<f64>,
        failure: Option<String>,
    }
    let mut rows = Vec::with_capacity(models.len());
    for (path, model) in args.models.iter().zip(&models) {
        match score(model, &scoring, &args.scoring) {
            Ok(s) => rows.push(Row { path: path.clone(), score: Some(s), grid: None, failure: None }),
            Err(Failure::Core(e @ Error::Divergence { .. })) => rows.push(Row {
                path: path.clone(),
                score: None,
                grid: None,
                failure: Some(e.to_string()),
            }),
            Err(f) => return Err(f),
        }
    }
    // one interval for every model: the flag, or the states inferred by the
    // first model that could be filtered
    let mut interval = None;
    if let Some(truth) = &scoring.truth {
        let reference = rows.iter().find_map(|r| r.score.as_ref().map(|s| &s.filtered_x));
        if let Some(fx) = reference {
            let (lo, hi, grid) = grid_for(&args.scoring, fx)?;
            interval = Some((lo, hi));
            for (row, model) in rows.iter_mut().zip(&models) {
                if row.score.is_some() {
                    row.grid = Some(grid_rmse(model, |x| truth.eval(x), &grid)?);
                }
            }
        }
    }
    let key = |r: &Row| match (&r.score, r.grid) {
        (None, _) => f64::INFINITY,
        (Some(_), Some(g)) => g,
        (Some(s), None) => s.sim_rmse,
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| key(&rows[a]).total_cmp(&key(&rows[b])));

    let by = if scoring.truth.is_some() { "grid_rmse" } else { "rms_simulation_error" };
    let mut text = format!("{:<5} {:<40} {:>14} {:>14} {:>14}\n", "rank", "model", "sim RMS", "pred RMSE", "grid RMSE");
    let mut ranked = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        let r = &rows[i];
        let fmt = |v: Option<f64>| match v {
            None => "-".to_string(),
            Some(v) if v.abs() >= 1e6 => format!("{v:.4e}"),
            Some(v) => format!("{v:.6}"),
        };
        let (sim, pred) = match &r.score {
            Some(s) => (Some(s.sim_rmse), Some(s.pred_rmse)),
            None => (None, None),
        };
        text.push_str(&format!(
            "{:<5} {:<40} {:>14} {:>14} {:>14}{}\n",
            rank + 1,
            r.path.display(),
            if r.failure.is_some() { "diverged".into() } else { fmt(sim) },
            fmt(pred),
            fmt(r.grid),
            r.failure.as_ref().map_or_else(String::new, |f| format!("  ({f})"))
        ));
        ranked.push(json!({
            "rank": rank + 1,
            "model": r.path,
            "simulation_error": r.score.as_ref().map(|s| json!({ "mean": s.sim_mean, "std": s.sim_std, "rms": s.sim_rmse })),
            "prediction_rmse": pred,
            "grid_rmse": r.grid,
            "failure": r.failure,
        }));
    }
    if let Some((lo, hi)) = interval {
        text.push_str(&format!("grid RMSE vs {} on [{lo:.4}, {hi:.4}]\n", scoring.label));
    }
    Ok(Report {
        json: json!({
            "data": args.scoring.data,
            "ranked_by": by,
            "interval": interval.map(|(lo, hi)| [lo, hi]),
            "models": ranked,
        }),
        text,
        warnings,
    })
}
