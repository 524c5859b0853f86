use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trajint::attention::{attention_matrix, CoefficientVariant};
use trajint::bench::{run_bench, BenchConfig};
use trajint::config::PipelineConfig;
use trajint::encoder::{encode_interactions, EncoderWeights, EMBED_DIM, MODEL_DIM};
use trajint::error::{Error, Result};
use trajint::eval::{min_ade, min_fde, predict_ca, predict_cv, rmse, rmse_by_horizon, PredictionSet};
use trajint::geometry::SanityLimits;
use trajint::ingest::{load_trajectories, window_scenes, LaneSource, Window};
use trajint::lane::LaneGraph;
use trajint::scene::{AgentId, AgentState, SceneHistory};
use trajint::selection::{build_interaction_tensor, select_per_frame, SelectionMode};
use trajint::synth::{overtake_scene, synthesize, LaneLayout, MotionKind, SynthSpec};

/// Lane-aware interaction modelling for trajectory prediction.
#[derive(Debug, Parser)]
#[command(name = "trajint", version)]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic data and encoder weights.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Output path (a directory for `synth`, a file otherwise; stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-frame neighbour selection as JSON.
    Select(SelectArgs),
    /// Attention matrix as CSV.
    Attn(AttnArgs),
    /// Kinematic prediction for the target as CSV.
    Predict(PredictArgs),
    /// Metrics over every window as JSON.
    Eval(EvalArgs),
    /// Per-stage latency against neighbour selection baselines as CSV.
    Bench(BenchArgs),
    /// Writes a synthetic scenario (tracks.csv, lanes.json).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fixture {
    Overtake,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Cv,
    Ca,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    All,
    Current,
}

impl From<Mode> for SelectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::All => SelectionMode::All,
            Mode::Current => SelectionMode::Current,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SynthOptions {
    /// straight-multilane | merge | intersection-cross
    #[arg(long, default_value = "straight-multilane", value_parser = LaneLayout::from_str)]
    layout: LaneLayout,
    /// Agents including the target.
    #[arg(long, default_value_t = 8)]
    agents: usize,
    /// cv | ca | lane-change
    #[arg(long, default_value = "cv", value_parser = MotionKind::from_str)]
    motion: MotionKind,
    #[arg(long, default_value_t = 30.0)]
    radius: f64,
}

#[derive(Debug, Clone, Args)]
struct SourceArgs {
    /// Trajectory CSV; synthetic data is generated when omitted.
    #[arg(long, requires = "target")]
    tracks: Option<PathBuf>,
    /// Lane graph JSON; the recorded `lane_id` column is used when omitted.
    #[arg(long)]
    lanes: Option<PathBuf>,
    #[arg(long)]
    target: Option<AgentId>,
    /// Built-in scene instead of tracks or synthetic data.
    #[arg(long, value_enum, conflicts_with = "tracks")]
    fixture: Option<Fixture>,
    /// Window index for single-scene commands.
    #[arg(long, default_value_t = 0)]
    window: usize,
    #[command(flatten)]
    synth: SynthOptions,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "all")]
    mode: Mode,
}

#[derive(Debug, Args)]
struct AttnArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "all")]
    mode: Mode,
    /// a | b | ab; overrides the configured variant.
    #[arg(long, value_parser = CoefficientVariant::from_str)]
    part: Option<CoefficientVariant>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "cv")]
    model: Model,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "cv")]
    model: Model,
    /// Repeat the prediction to K modes.
    #[arg(long, default_value_t = 1)]
    modes: usize,
    /// Per-sample ADE/FDE CSV.
    #[arg(long)]
    per_sample: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    scenes: usize,
    /// Agents around the target.
    #[arg(long, default_value_t = 25)]
    agents: usize,
    #[arg(long, default_value_t = 30.0)]
    radius: f64,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 4)]
    k_nearest: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    synth: SynthOptions,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

fn load_windows(src: &SourceArgs, seed: u64, cfg: &PipelineConfig) -> Result<Vec<Window>> {
    if let Some(Fixture::Overtake) = src.fixture {
        return Ok(vec![Window { scene: overtake_scene(), future: Vec::new() }]);
    }
    match &src.tracks {
        Some(path) => {
            let (tracks, diagnostics) = load_trajectories(path, &SanityLimits::default())?;
            for d in &diagnostics {
                log::warn!("{}:{}: {}", path.display(), d.line, d.message);
            }
            let target = src.target.ok_or_else(|| Error::InvalidInput("--target is required with --tracks".into()))?;
            let graph = src.lanes.as_ref().map(LaneGraph::load).transpose()?;
            let lanes = match &graph {
                Some(g) => LaneSource::Predicted(g),
                None => LaneSource::Recorded,
            };
            window_scenes(&tracks, &cfg.dataset, target, lanes)
        }
        None => {
            let spec = synth_spec(&src.synth, seed);
            Ok(synthesize(&spec, &cfg.dataset)?.windows)
        }
    }
}

fn synth_spec(o: &SynthOptions, seed: u64) -> SynthSpec {
    SynthSpec {
        seed,
        layout: o.layout,
        n_agents: o.agents,
        density_radius: o.radius,
        motion: o.motion,
    }
}

fn one_scene(src: &SourceArgs, seed: u64, cfg: &PipelineConfig) -> Result<Window> {
    let mut windows = load_windows(src, seed, cfg)?;
    let n = windows.len();
    if src.window >= n {
        return Err(Error::InvalidInput(format!("window {} requested but only {n} available", src.window)));
    }
    Ok(windows.swap_remove(src.window))
}

fn target_history(scene: &SceneHistory) -> Vec<AgentState> {
    scene.frames.iter().filter_map(|f| f.target().cloned()).collect()
}

fn predict(model: Model, w: &Window) -> Result<PredictionSet> {
    let history = target_history(&w.scene);
    let horizon = w.future.len();
    match model {
        Model::Cv => predict_cv(&history, horizon, w.scene.dt),
        Model::Ca => predict_ca(&history, horizon, w.scene.dt),
    }
}

#[derive(Serialize)]
struct SelectionRow {
    timestep: i64,
    #[serde(flatten)]
    neighbors: trajint::selection::NeighborSet,
}

#[derive(Serialize)]
struct Metrics {
    samples: usize,
    modes: usize,
    min_ade: f64,
    min_fde: f64,
    rmse: f64,
    rmse_by_horizon: Vec<HorizonRmse>,
}

#[derive(Serialize)]
struct HorizonRmse {
    seconds: f64,
    rmse: f64,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let out = cli.out.as_deref();
    match cli.command {
        Command::Select(a) => {
            let w = one_scene(&a.source, cli.seed, &cfg)?;
            let rows: Vec<SelectionRow> = select_per_frame(&w.scene, cfg.dataset.threshold, a.mode.into())
                .into_iter()
                .zip(&w.scene.frames)
                .map(|(neighbors, f)| SelectionRow { timestep: f.timestep, neighbors })
                .collect();
            emit(out, &(serde_json::to_string_pretty(&rows)? + "\n"))
        }
        Command::Attn(a) => {
            let w = one_scene(&a.source, cli.seed, &cfg)?;
            let mut coeff = cfg.coefficients;
            if let Some(part) = a.part {
                coeff.variant = part;
            }
            let tensor = build_interaction_tensor(&w.scene, cfg.dataset.threshold, a.mode.into());
            let alpha = attention_matrix(&tensor, &coeff)?;
            alpha.check_stochastic(&tensor, 1e-9)?;
            let weights = EncoderWeights::seeded(cli.seed, EMBED_DIM, MODEL_DIM);
            let embedding = encode_interactions(&tensor, &alpha, &weights)?;
            if !embedding.is_finite() {
                return Err(Error::Invariant("interaction embedding is not finite".into()));
            }
            emit(out, &alpha.to_csv(tensor.timesteps()))
        }
        Command::Predict(a) => {
            let w = one_scene(&a.source, cli.seed, &cfg)?;
            if w.future.is_empty() {
                return Err(Error::InvalidInput("scene has no prediction horizon".into()));
            }
            let pred = predict(a.model, &w)?;
            let mut text = String::from("step,x,y\n");
            for (k, p) in pred.trajectories[0].iter().enumerate() {
                text.push_str(&format!("{},{},{}\n", k + 1, p.x, p.y));
            }
            emit(out, &text)
        }
        Command::Eval(a) => {
            if a.modes == 0 {
                return Err(Error::InvalidInput("--modes must be at least 1".into()));
            }
            let windows = load_windows(&a.source, cli.seed, &cfg)?;
            let windows: Vec<Window> = windows.into_iter().filter(|w| !w.future.is_empty()).collect();
            if windows.is_empty() {
                return Err(Error::InvalidInput("no windows with a prediction horizon".into()));
            }
            let single: Vec<PredictionSet> = windows.iter().map(|w| predict(a.model, w)).collect::<Result<_>>()?;
            let gts: Vec<Vec<_>> = windows.iter().map(|w| w.future.clone()).collect();
            let mut per_sample = String::from("sample,ade,fde\n");
            let (mut ade_sum, mut fde_sum) = (0.0, 0.0);
            for (i, (p, gt)) in single.iter().zip(&gts).enumerate() {
                let multi = p.repeated_to(a.modes);
                let (ade, fde) = (min_ade(&multi, gt)?, min_fde(&multi, gt)?);
                ade_sum += ade;
                fde_sum += fde;
                per_sample.push_str(&format!("{i},{ade},{fde}\n"));
            }
            let n = windows.len() as f64;
            let dt = windows[0].scene.dt;
            let metrics = Metrics {
                samples: windows.len(),
                modes: a.modes,
                min_ade: ade_sum / n,
                min_fde: fde_sum / n,
                rmse: rmse(&single, &gts)?,
                rmse_by_horizon: rmse_by_horizon(&single, &gts, dt)?
                    .into_iter()
                    .map(|(seconds, rmse)| HorizonRmse { seconds, rmse })
                    .collect(),
            };
            if let Some(path) = &a.per_sample {
                fs::write(path, per_sample).map_err(|e| io_error(path, e))?;
            }
            emit(out, &(serde_json::to_string_pretty(&metrics)? + "\n"))
        }
        Command::Bench(a) => {
            let bench = BenchConfig {
                scenes: a.scenes,
                agents: a.agents,
                radius: a.radius,
                repetitions: a.reps,
                seed: cli.seed,
                k_nearest: a.k_nearest,
            };
            let report = run_bench(&bench, &cfg.dataset, &cfg.coefficients)?;
            emit(out, &report.to_csv())
        }
        Command::Synth(a) => {
            let dir = out.ok_or_else(|| Error::InvalidInput("synth needs --out <dir>".into()))?;
            let scenario = synthesize(&synth_spec(&a.synth, cli.seed), &cfg.dataset)?;
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            let tracks = dir.join("tracks.csv");
            fs::write(&tracks, scenario.tracks.to_csv_string()?).map_err(|e| io_error(&tracks, e))?;
            let lanes = dir.join("lanes.json");
            fs::write(&lanes, scenario.lane_graph.to_json_string()? + "\n").map_err(|e| io_error(&lanes, e))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
