//! `handsyn`: validate inputs, run the design pipeline, export manifold data.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical failure,
//! 3 I/O failure or missing run artifact.

use clap::{Parser, Subcommand, ValueEnum};
use handsyn_core::model::{load_config, load_hand_model, parse_grasp_set, GraspSet, GraspTag};
use handsyn_core::optimize::{run_stage, sample_manifolds, PipelineState, StageResult};
use handsyn_core::report::{DesignReport, StageFailure};
use handsyn_core::{fixtures, synth, DesignConfig, Error, GraspRecord, HandModel, ParamVector, Severity};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "handsyn", version, about = "Actuation-parameter design for tendon-driven hands")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check a hand model and grasp set; prints a JSON summary.
    Validate {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long)]
        grasps: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the pipeline, or one stage of it, into a run directory.
    Optimize {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long)]
        grasps: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::All)]
        stage: StageArg,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export torque and posture manifold samples of a completed run.
    SampleManifolds {
        /// Run directory written by `optimize`.
        #[arg(long = "run")]
        run: PathBuf,
        /// Posture sweep steps per motor, optionally `,<torque grid steps>`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Write a self-consistent example problem (hand, grasps, config, truth).
    Example {
        #[arg(long)]
        out: PathBuf,
        /// Number of desired grasps.
        #[arg(long, default_value_t = 12)]
        grasps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write only the reference hand model of design case 1, 2 or 3.
        #[arg(long)]
        case: Option<u8>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageArg {
    All,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

impl StageArg {
    fn stages(self) -> Vec<u8> {
        match self {
            StageArg::All => vec![1, 2, 3],
            StageArg::One => vec![1],
            StageArg::Two => vec![2],
            StageArg::Three => vec![3],
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) | Error::Parse { .. } => 1,
        Error::Numerical(_) | Error::NoAchievableGrasps { .. } => 2,
        Error::Io { .. } | Error::MissingArtifact(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .parse_default_env()
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Validate { hand, grasps, config } => validate(&hand, &grasps, config.as_deref()),
        Command::Optimize { hand, grasps, config, out, stage, seed } => {
            optimize(&hand, &grasps, config.as_deref(), &out, stage, seed)
        }
        Command::SampleManifolds { run, grid } => manifolds(&run, grid.as_deref()),
        Command::Example { out, grasps, seed, case } => example(&out, grasps, seed, case),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            for d in e.diagnostics() {
                eprintln!("{d}");
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn create_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn load_grasps(path: &Path, hand: &HandModel) -> Result<(Vec<GraspRecord>, Vec<handsyn_core::Diagnostic>), Error> {
    let text = read(path)?;
    parse_grasp_set(&text, &path.display().to_string(), hand)
}

fn validate(hand: &Path, grasps: &Path, config: Option<&Path>) -> Result<u8, Error> {
    let hand = load_hand_model(hand)?;
    if let Some(c) = config {
        load_config(c)?;
    }
    let (grasps, diags) = match load_grasps(grasps, &hand) {
        Ok(x) => x,
        Err(Error::Invalid(d)) => (Vec::new(), d),
        Err(e) => return Err(e),
    };
    let ok = !diags.iter().any(|d| d.severity == Severity::Error);
    let summary = serde_json::json!({
        "valid": ok,
        "hand": hand.name,
        "dofs": hand.dof_count(),
        "tendons": hand.tendons.len(),
        "motors": hand.motors.len(),
        "grasps": grasps.iter().filter(|g| g.tag == GraspTag::Desired).count(),
        "openings": grasps.iter().filter(|g| g.tag == GraspTag::Opening).count(),
        "diagnostics": diags,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(if ok { 0 } else { 1 })
}

fn stage_file(dir: &Path, stage: u8) -> PathBuf {
    dir.join(format!("stage{stage}.json"))
}

fn read_stage(dir: &Path, stage: u8) -> Result<Option<StageResult>, Error> {
    let path = stage_file(dir, stage);
    if !path.exists() {
        return Ok(None);
    }
    let text = read(&path)?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })
}

/// Earlier stages needed by `first` come from the run directory; missing
/// ones are left empty so that `run_stage` reports the gap.
fn load_state(dir: &Path, first: u8) -> Result<PipelineState, Error> {
    let mut state = PipelineState::default();
    if first > 1 {
        state.stage1 = read_stage(dir, 1)?;
    }
    if first > 2 {
        state.stage2 = read_stage(dir, 2)?;
    }
    Ok(state)
}

fn optimize(hand_path: &Path, grasps_path: &Path, config: Option<&Path>, out: &Path, stage: StageArg, seed: Option<u64>) -> Result<u8, Error> {
    let hand = load_hand_model(hand_path)?;
    let mut config = match config {
        Some(c) => load_config(c)?,
        None => DesignConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let (grasps, diags) = load_grasps(grasps_path, &hand)?;
    for d in &diags {
        log::warn!("{d}");
    }
    create_dir(out)?;
    let stages = stage.stages();
    let mut state = load_state(out, stages[0])?;
    write(&out.join("hand.json"), &hand.to_json())?;
    write(&out.join("grasps.json"), &GraspSet::new(grasps.clone()).to_json())?;
    write(&out.join("config.json"), &config.to_json())?;

    let mut error = None;
    handsyn_core::optimize::pipeline::with_workers(config.workers, || {
        for &s in &stages {
            log::info!("stage {s}");
            match run_stage(s, &hand, &grasps, &config, &mut state) {
                Ok(()) => {
                    let r = state.get(s).expect("stage result stored");
                    log::info!("stage {s}: objective {:.6e} {} ({} excluded)", r.objective, r.unit, r.excluded_count());
                }
                Err(e) => {
                    state.failure = Some(StageFailure { stage: s, message: e.to_string() });
                    error = Some(e);
                    break;
                }
            }
        }
    });
    // stale results of later stages would not match the new ones
    for s in stages[0]..=3 {
        let path = stage_file(out, s);
        match state.get(s) {
            Some(r) => write(&path, &serde_json::to_string_pretty(r).expect("stage serializes"))?,
            None if path.exists() => {
                std::fs::remove_file(&path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?
            }
            None => {}
        }
    }
    let report = DesignReport::build(&hand, &grasps, &config, &state);
    write(&out.join("report.json"), &report.to_json())?;
    write(&out.join("metrics.csv"), &report.metrics_csv())?;
    write(&out.join("parameters.csv"), &report.parameters_csv())?;
    for m in &report.metrics {
        log::info!("{} [{}]: {}", m.name, m.unit, m.label);
    }
    match error {
        Some(e) => Err(e),
        None => Ok(0),
    }
}

fn parse_grid(grid: &str, config: &mut DesignConfig) -> Result<(), Error> {
    let bad = || Error::invalid("--grid", format!("expected <posture steps>[,<torque steps>], found \"{grid}\""));
    let mut parts = grid.split(',');
    let posture: usize = parts.next().and_then(|p| p.trim().parse().ok()).ok_or_else(bad)?;
    config.manifold.posture_steps = posture;
    if let Some(t) = parts.next() {
        config.manifold.torque_steps = t.trim().parse().map_err(|_| bad())?;
    }
    if parts.next().is_some() || config.manifold.posture_steps < 2 || config.manifold.torque_steps < 2 {
        return Err(bad());
    }
    Ok(())
}

fn manifolds(run: &Path, grid: Option<&str>) -> Result<u8, Error> {
    let hand = load_hand_model(&run.join("hand.json"))?;
    let mut config = load_config(&run.join("config.json"))?;
    if let Some(g) = grid {
        parse_grid(g, &mut config)?;
    }
    let (grasps, _) = load_grasps(&run.join("grasps.json"), &hand)?;
    let missing = |s: u8| Error::MissingArtifact(format!("{}: missing stage-{s} result (run optimize first)", stage_file(run, s).display()));
    let s1 = read_stage(run, 1)?.ok_or_else(|| missing(1))?;
    let s2 = read_stage(run, 2)?.ok_or_else(|| missing(2))?;
    let s3 = read_stage(run, 3)?.ok_or_else(|| missing(3))?;
    let mut params: ParamVector = hand.params.default_vector();
    params.extend(s2.params.clone());
    params.extend(s3.params.clone());
    // the manifold files carry the hash of the configuration actually used
    let hash = config.hash();
    let sets = handsyn_core::optimize::pipeline::with_workers(config.workers, || {
        sample_manifolds(&hand, &grasps, &params, &s1, &s3, &config)
    })?;
    for s in &sets {
        let path = run.join(s.file_name());
        write(&path, &s.to_csv(&hash))?;
        log::info!("wrote {} ({} samples, {} grasps)", path.display(), s.samples.len(), s.grasps.len());
    }
    Ok(0)
}

fn example(out: &Path, n: usize, seed: u64, case: Option<u8>) -> Result<u8, Error> {
    create_dir(out)?;
    if let Some(c) = case {
        let hand = match c {
            1 => fixtures::case1_hand(),
            2 => fixtures::case2_hand(),
            3 => fixtures::case3_hand(),
            _ => return Err(Error::invalid("--case", format!("no design case {c}; expected 1, 2 or 3"))),
        };
        write(&out.join("hand.json"), &hand.to_json())?;
        return Ok(0);
    }
    if n < 2 {
        return Err(Error::invalid("--grasps", "need at least 2 grasps"));
    }
    let sp = synth::case1_round_trip(n, seed)?;
    let desired: Vec<GraspRecord> = sp.grasps.iter().filter(|g| g.tag == GraspTag::Desired).cloned().collect();
    write(&out.join("hand.json"), &sp.hand.to_json())?;
    write(&out.join("grasps.json"), &GraspSet::new(desired).to_json())?;
    write(&out.join("config.json"), &sp.config.to_json())?;
    write(&out.join("truth.json"), &serde_json::to_string_pretty(&sp.truth).expect("params serialize"))?;
    log::info!("wrote example problem with {n} grasps to {}", out.display());
    Ok(0)
}
