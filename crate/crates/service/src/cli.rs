use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deixis::hand::PointingMode;
use deixis::io::{events_path, replay, Recorder, StreamHeader};
use deixis::selector::{write_event_log, Engine, SelectorConfig};
use deixis::sim::{run_experiment, PopulationModel, SceneSpec};
use deixis::stats::{
    accuracy_table, analyze, bootstrap_orderings, format_accuracy_table, read_trials_path, write_trials,
    write_trials_path, Condition, OrderingSupport, EXPECTED_ORDERINGS,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::log::SessionLog;
use crate::protocol::BlockSpec;
use crate::script::{run_block, ScriptConfig};
use crate::server::{start, ServeConfig};
use crate::session::{LiveSession, SessionConfig};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Parser)]
#[command(name = "deixis", version, about = "Pointing-gesture object selection: simulate, analyze, record, replay, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the virtual 2×2 study and write the trial table.
    Simulate(SimulateArgs),
    /// Report accuracy, times, confusions and the ANOVA for a trial table.
    Analyze(AnalyzeArgs),
    /// Run the engine over a recorded frames file and print the event log.
    Replay(ReplayArgs),
    /// Record a scripted live session to frames, depth and event files.
    Record(RecordArgs),
    /// Host a session over a websocket at /ws.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20)]
    pub participants: u32,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Trial CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scene description (JSON); the six-object desk when absent.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Median keypoint noise, meters.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub trials: PathBuf,
    /// Seed of the participant bootstrap.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: u32,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `.frames.jsonl` file.
    pub frames: PathBuf,
    /// Event log; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pointing mode; defaults to the one stored in the recording.
    #[arg(long)]
    pub pointing: Option<PointingMode>,
    /// Accepted for symmetry; replay is fully determined by the recording.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Base path; writes BASE.frames.jsonl, BASE.depth, BASE.events.jsonl and BASE.trials.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value = "finger")]
    pub pointing: PointingMode,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub feedback: OnOff,
    #[arg(long, default_value_t = 1)]
    pub participant: u32,
    /// Trials per object.
    #[arg(long, default_value_t = 2)]
    pub repetitions: u32,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, value_enum, default_value_t = ModeArg::LiveSim)]
    pub mode: ModeArg,
    /// Frames file streamed in replay mode.
    #[arg(long, required_if_eq("mode", "replay"))]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Directory for the event log and block CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    LiveSim,
    Replay,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cmd: Command) -> Result<(), BoxError> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Record(a) => record(a),
        Command::Serve(a) => serve(a),
    }
}

fn load_scene(path: Option<&Path>) -> Result<SceneSpec, BoxError> {
    match path {
        None => Ok(SceneSpec::desk()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), BoxError> {
    let scene = load_scene(a.scene.as_deref())?;
    let mut pop = PopulationModel::default();
    if let Some(s) = a.sigma {
        pop = pop.with_sigma(s);
    }
    let recs = run_experiment(a.participants, &scene, &pop, &SelectorConfig::default(), a.seed)?;
    eprint!("{}", format_accuracy_table(&accuracy_table(&recs)?));
    match a.out {
        Some(p) => write_trials_path(p, &recs)?,
        None => write_trials(io::stdout().lock(), &recs)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct FullReport {
    #[serde(flatten)]
    report: deixis::stats::AnalysisReport,
    bootstrap_reps: u32,
    orderings: Vec<OrderingSupport>,
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<(), BoxError> {
    let recs = read_trials_path(&a.trials).map_err(|e| format!("{}: {e}", a.trials.display()))?;
    let report = analyze(&recs)?;
    let orderings = bootstrap_orderings(&recs, &EXPECTED_ORDERINGS, a.bootstrap, a.seed)?;
    let mut out = io::stdout().lock();
    write!(out, "{}", report.to_text())?;
    writeln!(out, "\nBootstrap support ({} resamples)", a.bootstrap)?;
    for s in &orderings {
        writeln!(out, "  {} >= {}: {:.3}", s.better, s.worse, s.frequency)?;
    }
    if let Some(p) = a.out {
        let full = FullReport { report, bootstrap_reps: a.bootstrap, orderings };
        std::fs::write(p, serde_json::to_string_pretty(&full)? + "\n")?;
    }
    Ok(())
}

fn replay_cmd(a: ReplayArgs) -> Result<(), BoxError> {
    let mut rp = replay(&a.frames).map_err(|e| format!("{}: {e}", a.frames.display()))?;
    let mut cfg = rp.header().selector.unwrap_or_default();
    if let Some(m) = a.pointing {
        cfg.mode = m;
    }
    let mut engine = Engine::new(cfg, rp.header().intrinsics);
    let mut events = Vec::new();
    while let Some((frame, depth)) = rp.next_frame().map_err(|e| format!("{}: {e}", a.frames.display()))? {
        let ev = engine
            .step(&frame, depth.as_ref())
            .map_err(|e| format!("{}: frame {}: {e}", a.frames.display(), frame.index))?;
        events.extend(ev);
    }
    match a.out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write_event_log(&mut w, &events)?;
            w.flush()?;
        }
        None => write_event_log(io::stdout().lock(), &events)?,
    }
    Ok(())
}

/// `BASE.trials.csv`
pub fn trials_path(base: &Path) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".trials.csv");
    PathBuf::from(s)
}

fn record(a: RecordArgs) -> Result<(), BoxError> {
    let scene = load_scene(a.scene.as_deref())?;
    let mut cfg = SessionConfig::live(scene, a.seed);
    cfg.condition = Condition::new(a.pointing, a.feedback == OnOff::On);
    let mut session = LiveSession::new(cfg)?;
    let mut header = StreamHeader::new(*session.engine().intrinsics(), session.fps(), "deixis record");
    header.selector = Some(*session.engine().config());
    let mut rec = Recorder::create(&a.out, header)?;
    let mut log = SessionLog::to_file(&events_path(&a.out))?;
    let mut failure = None;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x5eed);
    let spec = BlockSpec { participant: a.participant, repetitions: a.repetitions };
    let records = run_block(&mut session, spec, &ScriptConfig::default(), &mut rng, |step| {
        if failure.is_some() {
            return;
        }
        if let Some((f, d)) = &step.frame {
            if let Err(e) = rec.push(f, d.as_ref()) {
                failure = Some(e.to_string());
            }
        }
        for item in &step.log {
            if let Err(e) = log.apply(item) {
                failure = Some(e.to_string());
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    rec.finish()?;
    log.flush()?;
    write_trials_path(trials_path(&a.out), &records)?;
    let correct = records.iter().filter(|r| r.correct()).count();
    eprintln!("recorded {} trials, {correct} correct, {} events", records.len(), log.events.len());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), BoxError> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    let mut session = match a.mode {
        ModeArg::LiveSim => SessionConfig::live(load_scene(a.scene.as_deref())?, a.seed),
        ModeArg::Replay => {
            let path = a.replay.clone().ok_or("replay mode needs --replay")?;
            SessionConfig { seed: a.seed, ..SessionConfig::replay(path) }
        }
    };
    let mut events = None;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        session.out_dir = Some(dir.clone());
        events = Some(dir.join("session.events.jsonl"));
    }
    let cfg = ServeConfig { events_path: events, ..ServeConfig::new(a.port, session) };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let server = start(cfg).await?;
        eprintln!("listening on ws://{}/ws", server.addr);
        let log = server.wait().await?;
        tracing::info!(events = log.events.len(), trials = log.trials.len(), "session closed");
        Ok::<_, BoxError>(())
    })
}
