use std::fs::OpenOptions;
use std::io::BufReader;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use dialoggate::agents::{AgentConfig, CannedTransport, ResponderKind};
use dialoggate::classifier::classify_initial_question;
use dialoggate::datasets::{load_dataset, DatasetFormat, DatasetManifest};
use dialoggate::experiment::{
    emit_report, emit_sweep, run_context_sweep, run_dataset, AgentSpec, ExperimentConfig, FactoryOptions, JudgeConfig,
    JudgeMode, ReportFormat, SpecFactory,
};
use dialoggate::protocol::transcript::{append_classification, read_transcript};
use dialoggate::rundir::{load_run, write_run, write_sweep, RunManifest};
use dialoggate::QuestionId;
use dialoggate_service::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "dialoggate", version, about = "Multi-turn QA runs, sweeps, transcript classification and the session service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every record of a dataset through a responder and a clarifier.
    Run(RunArgs),
    /// Re-run a finished run with clarifications folded into the first turn.
    Sweep(SweepArgs),
    /// Classify the initial question of a transcript file.
    Classify(ClassifyArgs),
    /// Serve live sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct LlmArgs {
    /// Model name sent to the completion endpoint.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = AgentConfig::DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// JSON file of canned completions used instead of a live endpoint.
    #[arg(long, value_name = "FILE")]
    llm_canned: Option<PathBuf>,
}

impl LlmArgs {
    fn config(&self) -> AgentConfig {
        let mut c = AgentConfig::new(ResponderKind::Llm);
        c.model = self.model.clone();
        c.temperature = self.temperature;
        c
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    /// qa-jsonl, squad, nq-open, ambignq, sharc, meddialog or multiwoz.
    #[arg(long, value_name = "ID")]
    format: DatasetFormat,
    /// Dataset name shown in reports; defaults to the format id.
    #[arg(long)]
    name: Option<String>,
    /// llm, oracle or scripted:<policy>.
    #[arg(long, default_value = "llm")]
    responder: AgentSpec,
    /// Agent asking the questions: llm or scripted:<policy>.
    #[arg(long, default_value = "scripted:passage-clarifier")]
    clarifier: AgentSpec,
    #[arg(long, default_value_t = 3)]
    max_turns: usize,
    #[arg(long, default_value = "exact")]
    judge: JudgeMode,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Seed each session's background with the record's passage.
    #[arg(long)]
    include_passage: bool,
    /// Leave errored sessions out of the totals.
    #[arg(long)]
    exclude_errors: bool,
    /// Report rendering printed to stdout.
    #[arg(long, default_value = "text")]
    report: ReportFormat,
    /// Free-form label stored in the manifest.
    #[arg(long)]
    tag: Option<String>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_name = "RUN_DIR")]
    from: PathBuf,
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    #[arg(long, default_value = "text")]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    transcript: PathBuf,
    /// Append the classification line to the transcript.
    #[arg(long)]
    append: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Holds session transcripts and the run directories served as reports.
    #[arg(long, value_name = "DIR", default_value = "runs")]
    dir: PathBuf,
    /// Responder for sessions that name none.
    #[arg(long, default_value = "llm")]
    responder: AgentSpec,
    #[arg(long, default_value_t = 6)]
    max_turns: usize,
    #[command(flatten)]
    llm: LlmArgs,
}

/// Makes file paths in a spec absolute so a later sweep resolves them from
/// any working directory.
fn anchor(spec: AgentSpec) -> AgentSpec {
    match spec {
        AgentSpec::Scripted(p) if Path::new(&p).is_file() => match std::fs::canonicalize(&p) {
            Ok(abs) => AgentSpec::Scripted(abs.to_string_lossy().into_owned()),
            Err(_) => AgentSpec::Scripted(p),
        },
        other => other,
    }
}

fn run(args: RunArgs) -> Result<()> {
    let name = args.name.clone().unwrap_or_else(|| args.format.to_string());
    let loaded = load_dataset(&DatasetManifest::new(&name, args.format, &args.dataset))
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    for r in &loaded.rejects {
        tracing::warn!(row = r.row, reason = %r.reason, "row rejected");
    }
    let responder = anchor(args.responder);
    let clarifier = anchor(args.clarifier);
    let llm_canned = args
        .llm
        .llm_canned
        .as_deref()
        .map(|p| std::fs::canonicalize(p).with_context(|| format!("canned completions {}", p.display())))
        .transpose()?;

    let mut options = FactoryOptions::new(responder.clone(), clarifier.clone());
    options.llm = args.llm.config();
    if let Some(p) = &llm_canned {
        options = options.with_canned(p)?;
    }
    let factory = SpecFactory::build(options.clone(), &loaded.records)?;
    let config = ExperimentConfig {
        dataset: name,
        max_turns: args.max_turns,
        judge: JudgeConfig::with_mode(args.judge),
        workers: args.workers,
        exclude_errors: args.exclude_errors,
        include_passage: args.include_passage,
    };
    let output = run_dataset(&loaded.records, &config, &factory)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: loaded.manifest.clone(),
        config,
        responder,
        clarifier,
        model: options.llm.model.clone(),
        temperature: options.llm.temperature,
        prompt_template: options.llm.prompt_template.clone(),
        llm_canned,
        tag: args.tag,
        initiator_kind: factory.initiator_id().kind(),
        responder_kind: factory.responder_id().kind(),
        fingerprint: output.report.fingerprint.clone(),
        rejected_rows: loaded.rejects.len(),
    };
    write_run(&args.out, &manifest, &loaded.records, &output)?;
    tracing::info!(dir = %args.out.display(), sessions = output.sessions.len(), "run written");
    print!("{}", emit_report(&output.report, args.report));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let loaded = load_run(&args.from).with_context(|| format!("reading run {}", args.from.display()))?;
    let m = &loaded.manifest;
    let mut options = FactoryOptions::new(m.responder.clone(), m.clarifier.clone());
    options.llm.model = m.model.clone();
    options.llm.temperature = m.temperature;
    options.llm.prompt_template = m.prompt_template.clone();
    if let Some(p) = &m.llm_canned {
        options = options.with_canned(p)?;
    }
    let factory = SpecFactory::build(options, &loaded.records)?;
    let table = run_context_sweep(&loaded.records, &loaded.output, &m.config, &factory, args.k_max)?;
    write_sweep(&args.from, &table)?;
    print!("{}", emit_sweep(&table, args.report));
    Ok(())
}

fn classify(args: ClassifyArgs) -> Result<()> {
    let file = std::fs::File::open(&args.transcript).with_context(|| format!("opening {}", args.transcript.display()))?;
    let transcript = read_transcript(BufReader::new(file)).with_context(|| format!("reading {}", args.transcript.display()))?;
    let status = classify_initial_question(&transcript.interaction)?;
    let categorizer = transcript
        .classifications
        .last()
        .map(|c| c.categorizer.clone())
        .unwrap_or_else(|| "rules".to_string());
    let record = status.to_record(QuestionId(1), &categorizer);
    println!("{}", serde_json::to_string(&record)?);
    if args.append {
        let out = OpenOptions::new().append(true).open(&args.transcript)?;
        append_classification(out, &record)?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    if args.responder == AgentSpec::Human {
        bail!("the responder cannot be the console human");
    }
    let mut config = ServiceConfig::new(&args.dir);
    config.default_responder = args.responder.to_string();
    config.default_max_turns = args.max_turns;
    config.llm = args.llm.config();
    if let Some(p) = &args.llm.llm_canned {
        let text = std::fs::read_to_string(p).with_context(|| format!("canned completions {}", p.display()))?;
        config.transport = Some(Arc::new(CannedTransport::from_json(&text)?));
    }
    let addr = SocketAddr::new(args.host, args.port);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(dialoggate_service::serve(config, addr))?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Classify(a) => classify(a),
        Command::Serve(a) => serve(a),
    }
}
