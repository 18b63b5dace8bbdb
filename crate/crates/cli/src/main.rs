//! `agentlab`: launch, observe and gate research runs.
//!
//! Exit codes: 0 success, 1 run or operation failure, 2 usage error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use agentlab::config::Config;
use agentlab::mle::{LabeledData, Metric};
use agentlab::orchestrator::events::Event;
use agentlab::orchestrator::gate::{submit_decision, Choice, DecisionBody, DecisionSource, GateError, Mailbox, Prompter};
use agentlab::orchestrator::pipeline::{self, PipelineError, RunSpec};
use agentlab::orchestrator::setup::HeldOutSpec;
use agentlab::orchestrator::state::{RunState, RunStatus};
use agentlab::orchestrator::store::{RunDir, RunStore, StoreError};
use agentlab::orchestrator::telemetry::{render_table, totals};
use agentlab::phase::PhaseId;
use agentlab::task::{Mode, ResearchTask};

#[derive(Parser)]
#[command(name = "agentlab", version, about = "Agent-driven research runs from a topic to a LaTeX report")]
struct Cli {
    /// Directory holding one subdirectory per run.
    #[arg(long, global = true, env = "AGENTLAB_RUNS_DIR", default_value = "runs")]
    runs_dir: PathBuf,
    /// Print structured JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a new run and drive it in this process.
    Run(RunArgs),
    /// Continue a saved run.
    Resume {
        run_id: String,
        #[command(flatten)]
        drive: DriveArgs,
    },
    /// Show one run, or list all runs.
    Status { run_id: Option<String> },
    /// Answer the checkpoint a co-pilot run is waiting at.
    Decide(DecideArgs),
    /// Print the per-phase time, cost and attempts of a run.
    Report { run_id: String },
}

#[derive(Args)]
struct RunArgs {
    /// The research idea.
    #[arg(long)]
    topic: String,
    /// TOML file mapping phase names to lists of notes.
    #[arg(long)]
    notes_file: Option<PathBuf>,
    #[arg(long, default_value = "autonomous", value_parser = parse_mode)]
    mode: Mode,
    /// TOML config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replay a scripted model instead of calling a provider: a script file
    /// or a directory with script.json plus recorded HTTP fixtures.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Name for the run directory (generated when absent).
    #[arg(long)]
    run_id: Option<String>,
    /// JSON file with `inputs` and `labels`; experiments are then scored on
    /// a held-out dev split instead of by the reward model.
    #[arg(long)]
    held_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "accuracy", requires = "held_out")]
    metric: MetricArg,
    #[command(flatten)]
    drive: DriveArgs,
}

#[derive(Args)]
struct DriveArgs {
    /// Serve the control API on this address (e.g. 127.0.0.1:8080) while
    /// the run is driven.
    #[arg(long)]
    serve: Option<String>,
    /// Bearer token required by the served API.
    #[arg(long, env = "AGENTLAB_API_TOKEN")]
    token: Option<String>,
    /// Where co-pilot decisions come from; defaults to `api` with --serve
    /// and `stdin` otherwise.
    #[arg(long, value_enum)]
    gate: Option<GateArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GateArg {
    /// Prompt on the terminal and read answers from standard input.
    Stdin,
    /// Wait for decisions submitted through the API or `agentlab decide`.
    Api,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Accuracy,
    MacroF1,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChoiceArg {
    Proceed,
    Retry,
}

#[derive(Args)]
struct DecideArgs {
    run_id: String,
    /// Phase the run is waiting at.
    phase: String,
    choice: ChoiceArg,
    /// Note for the agents; required for retry. Repeatable.
    #[arg(long = "note")]
    notes: Vec<String>,
    /// Makes resubmission idempotent.
    #[arg(long)]
    decision_id: Option<String>,
    /// Post to a running control API instead of writing the run directory.
    #[arg(long)]
    api: Option<String>,
    #[arg(long, env = "AGENTLAB_API_TOKEN")]
    token: Option<String>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

enum CliError {
    Usage(String),
    Failed(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Invalid(m) => CliError::Usage(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidRunId(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(&cli, args),
        Command::Resume { run_id, drive } => resume(&cli, run_id, drive),
        Command::Status { run_id } => status(&cli, run_id.as_deref()),
        Command::Decide(args) => decide(&cli, args),
        Command::Report { run_id } => report(&cli, run_id),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn read_notes(path: &Path) -> Result<BTreeMap<PhaseId, Vec<String>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let raw: BTreeMap<String, Vec<String>> =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    raw.into_iter()
        .map(|(k, v)| k.parse::<PhaseId>().map(|p| (p, v)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))))
        .collect()
}

fn run(cli: &Cli, args: &RunArgs) -> Result<ExitCode, CliError> {
    let config = match &args.config {
        Some(p) => Config::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => Config::default(),
    };
    let mut task = ResearchTask::new(&args.topic, args.mode, args.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = &args.notes_file {
        task = task.with_notes(read_notes(p)?);
    }
    if let Some(p) = &args.mock_script {
        if !p.exists() {
            return Err(CliError::Usage(format!("mock script {} does not exist", p.display())));
        }
    }
    let held_out = match &args.held_out {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let data: LabeledData = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let metric = match args.metric {
                MetricArg::Accuracy => Metric::Accuracy,
                MetricArg::MacroF1 => Metric::MacroF1,
            };
            Some(HeldOutSpec { data, metric })
        }
        None => None,
    };
    let spec = RunSpec { run_id: args.run_id.clone(), task, config, mock_script: args.mock_script.clone(), held_out };
    let store = RunStore::new(&cli.runs_dir);
    let dir = pipeline::create_run(&store, spec)?;
    if !cli.json {
        println!("run {} created in {}", dir.run_id(), dir.path().display());
    }
    drive(cli, &store, &dir, &args.drive, false)
}

fn resume(cli: &Cli, run_id: &str, args: &DriveArgs) -> Result<ExitCode, CliError> {
    let store = RunStore::new(&cli.runs_dir);
    let dir = store.open(run_id)?;
    drive(cli, &store, &dir, args, true)
}

fn drive(cli: &Cli, store: &RunStore, dir: &RunDir, args: &DriveArgs, resuming: bool) -> Result<ExitCode, CliError> {
    if let Some(addr) = &args.serve {
        start_server(store.clone(), addr, args.token.clone())?;
    }
    let config = dir.config()?;
    let gate_kind = args.gate.unwrap_or(if args.serve.is_some() { GateArg::Api } else { GateArg::Stdin });
    let mut gate: Box<dyn DecisionSource> = match gate_kind {
        // prompts go to stderr so stdout stays a clean event stream
        GateArg::Stdin => Box::new(Prompter::new(std::io::BufReader::new(std::io::stdin()), std::io::stderr())),
        GateArg::Api => Box::new(Mailbox::new(config.checkpoint_timeout_secs.map(Duration::from_secs))),
    };
    let json = cli.json;
    let mut observer = |e: &Event| print_event(e, json);
    let state = if resuming {
        pipeline::resume(store, dir.run_id(), gate.as_mut(), &mut observer)?
    } else {
        pipeline::drive(dir, gate.as_mut(), &mut observer)?
    };
    print_outcome(dir, &state, json);
    Ok(match state.status {
        RunStatus::Failed => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    })
}

fn start_server(store: RunStore, addr: &str, token: Option<String>) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind(addr))
        .map_err(|e| CliError::Usage(format!("cannot listen on {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| CliError::Failed(e.to_string()))?;
    eprintln!("control API listening on http://{local}");
    let state = agentlab_api::ApiState::new(store).with_token(token);
    std::thread::spawn(move || {
        if let Err(e) = runtime.block_on(agentlab_api::serve(listener, state)) {
            log::error!("control API stopped: {e}");
        }
    });
    Ok(())
}

fn print_event(e: &Event, json: bool) {
    let mut out = std::io::stdout().lock();
    if json {
        let _ = writeln!(out, "{}", serde_json::to_string(e).unwrap_or_default());
        return;
    }
    let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    let mut payload = e.payload.clone();
    if let Some(obj) = payload.as_object_mut() {
        obj.remove("summary");
    }
    let phase = payload.get("phase").and_then(Value::as_str).unwrap_or("").to_string();
    if let Some(obj) = payload.as_object_mut() {
        obj.remove("phase");
    }
    let rest = match &payload {
        Value::Object(m) if m.is_empty() => String::new(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    let _ = writeln!(out, "[{:>3}] {kind:<16} {phase:<22} {rest}", e.seq);
}

fn outcome(dir: &RunDir, s: &RunState) -> Value {
    let mut v = json!({
        "run_id": s.run_id,
        "status": s.status,
        "phase": s.phase,
        "attempts": s.attempts,
        "rewinds_used": s.rewinds_used,
    });
    match s.status {
        RunStatus::Complete => {
            v["report"] = json!(dir.report_path());
            v["report_compiled"] = json!(s.report_compiled);
        }
        RunStatus::Failed => {
            v["failed_phase"] = json!(s.failed_phase);
            v["failure"] = json!(s.failure);
        }
        RunStatus::AwaitingDecision => v["pending"] = json!(s.pending),
        RunStatus::Running => {}
    }
    v
}

fn print_outcome(dir: &RunDir, s: &RunState, json: bool) {
    if json {
        println!("{}", json!({ "result": outcome(dir, s) }));
        return;
    }
    match s.status {
        RunStatus::Complete => {
            let compiled = if s.report_compiled { "" } else { " (did not pass the LaTeX check)" };
            println!("run {} complete; report: {}{compiled}", s.run_id, dir.report_path().display());
        }
        RunStatus::Failed => println!(
            "run {} failed at {}: {}",
            s.run_id,
            s.failed_phase.map(PhaseId::slug).unwrap_or("?"),
            s.failure.as_deref().unwrap_or("")
        ),
        RunStatus::AwaitingDecision => {
            let phase = s.pending.as_ref().map(|p| p.phase.slug()).unwrap_or("?");
            println!(
                "run {id} waits at the {phase} checkpoint; answer with `agentlab decide {id} {phase} proceed` (or `retry --note ...`) and continue with `agentlab resume {id}`",
                id = s.run_id
            );
        }
        RunStatus::Running => println!("run {} stopped while running {}", s.run_id, s.phase.slug()),
    }
}

fn status(cli: &Cli, run_id: Option<&str>) -> Result<ExitCode, CliError> {
    let store = RunStore::new(&cli.runs_dir);
    match run_id {
        Some(id) => {
            let dir = store.open(id)?;
            let s = dir.load_state()?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&s).unwrap_or_default());
            } else {
                println!("run:    {}", s.run_id);
                println!("topic:  {}", s.task.topic());
                println!("mode:   {:?}", s.task.mode());
                println!("status: {}", json!(s.status).as_str().unwrap_or(""));
                println!("phase:  {}", s.phase.slug());
                if let Some(p) = &s.pending {
                    println!("gate:   {} (attempt {})", p.gate_id, p.attempt);
                }
                if let Some(f) = &s.failure {
                    println!("error:  {f}");
                }
                let done: Vec<&str> = s.outputs.keys().map(|p| p.slug()).collect();
                println!("done:   {}", done.join(", "));
            }
        }
        None => {
            let mut rows = Vec::new();
            for id in store.list()? {
                match store.open(&id).and_then(|d| d.load_state()) {
                    Ok(s) => rows.push(json!({"run_id": id, "status": s.status, "phase": s.phase, "topic": s.task.topic()})),
                    Err(e) => rows.push(json!({"run_id": id, "error": e.to_string()})),
                }
            }
            if cli.json {
                println!("{}", Value::Array(rows));
            } else {
                for r in rows {
                    let status = r["status"].as_str().or(r["error"].as_str()).unwrap_or("");
                    println!("{:<32} {:<18} {:<22} {}", r["run_id"].as_str().unwrap_or(""), status, r["phase"].as_str().unwrap_or(""), r["topic"].as_str().unwrap_or(""));
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn decide(cli: &Cli, args: &DecideArgs) -> Result<ExitCode, CliError> {
    let phase: PhaseId = args.phase.parse().map_err(|e: agentlab::phase::UnknownPhase| CliError::Usage(e.to_string()))?;
    let notes: Vec<String> = args.notes.iter().map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect();
    let choice = match args.choice {
        ChoiceArg::Proceed => Choice::Proceed,
        ChoiceArg::Retry if notes.is_empty() => {
            return Err(CliError::Usage("retry needs at least one --note".into()));
        }
        ChoiceArg::Retry => Choice::Retry,
    };
    let body = DecisionBody {
        decision_id: args.decision_id.clone(),
        run_id: Some(args.run_id.clone()),
        phase,
        decision: choice,
        notes,
    };
    let submitted = match &args.api {
        Some(base) => post_decision(base, args, &body)?,
        None => {
            let dir = RunStore::new(&cli.runs_dir).open(&args.run_id)?;
            let s = submit_decision(&dir, &body, "cli").map_err(|e| match e {
                GateError::Invalid(m) => CliError::Usage(m),
                other => CliError::Failed(other.to_string()),
            })?;
            serde_json::to_value(s).unwrap_or_default()
        }
    };
    if cli.json {
        println!("{submitted}");
    } else {
        let again = if submitted["duplicate"] == true { " (already recorded)" } else { "" };
        println!(
            "decision {} recorded for gate {}{again}",
            submitted["decision"]["decision_id"].as_str().unwrap_or(""),
            submitted["decision"]["gate_id"].as_str().unwrap_or("")
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn post_decision(base: &str, args: &DecideArgs, body: &DecisionBody) -> Result<Value, CliError> {
    let url = format!("{}/runs/{}/decisions", base.trim_end_matches('/'), args.run_id);
    let mut req = reqwest::blocking::Client::new().post(&url).json(body);
    if let Some(t) = &args.token {
        req = req.bearer_auth(t);
    }
    let resp = req.send().map_err(|e| CliError::Failed(format!("{url}: {e}")))?;
    let status = resp.status();
    let value: Value = resp.json().unwrap_or(Value::Null);
    let message = || value["error"].as_str().unwrap_or("").to_string();
    match status.as_u16() {
        200 | 201 => Ok(value),
        400 => Err(CliError::Usage(message())),
        409 => Err(CliError::Failed(format!("conflict: {}", message()))),
        _ => Err(CliError::Failed(format!("{url}: HTTP {status}: {}", message()))),
    }
}

fn report(cli: &Cli, run_id: &str) -> Result<ExitCode, CliError> {
    let dir = RunStore::new(&cli.runs_dir).open(run_id)?;
    let s = dir.load_state()?;
    if cli.json {
        println!("{}", json!({"run_id": s.run_id, "status": s.status, "rows": s.telemetry, "totals": totals(&s.telemetry)}));
    } else {
        print!("{}", render_table(&s.telemetry));
    }
    Ok(ExitCode::SUCCESS)
}
