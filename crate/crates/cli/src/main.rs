//! `forge`: operator entry point for concept repositories, synthesis,
//! augmentation, expert iteration, evaluation, statistics and export.
//!
//! Exit codes: 0 on success, 1 on an operational error, 2 on a usage error.
//! Structured logs are JSON lines (stderr, or `--log-file`); a short human
//! summary is printed to stderr and data goes to stdout or files.

use std::fs::File;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use forge_core::audit::AuditLog;
use forge_core::augment::{AugmentConfig, Augmenter};
use forge_core::config::ForgeConfig;
use forge_core::eval::{self, EvalConfig, EvalResult, Evaluator, PassMode};
use forge_core::iteration::{self, ExportFormat, IterationRunner, RoundConfig};
use forge_core::jsonl;
use forge_core::lean::LeanBridge;
use forge_core::llm::{Gateway, Role};
use forge_core::sync::CancelToken;
use forge_core::synthesis::{SynthesisConfig, Synthesizer, DEFAULT_ROUND_QUOTA};
use forge_core::{ConceptRepository, NlStatement, ParallelStatement};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Synthesize, augment and evaluate parallel NL / Lean 4 statement corpora"
)]
struct Cli {
    /// Configuration file (TOML). Without one, everything runs offline
    /// against the mock toolchain and the scripted model backend.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Write JSON-lines logs here instead of stderr.
    #[arg(long, global = true)]
    log_file: Option<PathBuf>,
    /// Log filter, e.g. `info` or `forge_core=debug`; RUST_LOG overrides it.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a concept repository.
    #[command(subcommand)]
    Repo(RepoCommand),
    /// Generate and/or translate NL statements for one round.
    Synth(SynthArgs),
    /// Augment accepted pairs via proof states and contraposition.
    Augment(AugmentArgs),
    /// Run expert-iteration rounds, resuming after the last completed one.
    Iterate(IterateArgs),
    /// Evaluate translation pass@k on a benchmark, or compare two reports.
    Eval(EvalArgs),
    /// Per-round statistics of a run: CSV on stdout, JSON series in the run directory.
    Stats(StatsArgs),
    /// Export run data as SFT training pairs.
    Export(ExportArgs),
}

#[derive(Subcommand)]
enum RepoCommand {
    /// Check a repository file for structural problems.
    Validate { path: PathBuf },
    /// Print domain, topic and concept counts (bundled repository by default).
    Stats { path: Option<PathBuf> },
}

#[derive(Args)]
struct SynthArgs {
    /// Round number recorded on every statement.
    #[arg(long)]
    round: u32,
    /// Number of new NL statements to generate (ignored with --input).
    #[arg(long, default_value_t = DEFAULT_ROUND_QUOTA)]
    quota: usize,
    /// Translate these NL statements (JSONL) instead of generating new ones.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Concept repository; the bundled one by default.
    #[arg(long)]
    repo: Option<PathBuf>,
    /// Output directory for accepted.jsonl, carryover.jsonl and notes.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Accepted pairs (JSONL).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    round: u32,
    /// Output JSONL of augmented pairs; records go next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_proof: bool,
    #[arg(long)]
    no_contraposition: bool,
}

#[derive(Args)]
struct IterateArgs {
    /// Run identifier; data lives under `<run_dir>/<run>/`.
    #[arg(long, default_value = "default")]
    run: String,
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    #[arg(long, default_value_t = DEFAULT_ROUND_QUOTA)]
    quota: usize,
    #[arg(long)]
    repo: Option<PathBuf>,
    /// Pause between rounds until Enter is pressed and reload the
    /// configuration, so the student backend can be rebound after external
    /// fine-tuning.
    #[arg(long)]
    checkpoint: bool,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct EvalArgs {
    #[command(subcommand)]
    compare: Option<EvalCommand>,
    /// Benchmark JSONL with {id, nl_text, source, msc_class?} records.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// The benchmark uses ProofNet's {name, informal_prefix} records.
    #[arg(long)]
    proofnet: bool,
    /// Comma-separated k values; n = max(k) candidates are drawn per item and seed.
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_K)]
    k: Vec<u32>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_SEEDS)]
    seeds: Vec<u64>,
    /// Role whose backend translates: translator (student) or teacher_translate.
    #[arg(long, default_value = "translator")]
    translator: String,
    /// Count success on the first k candidates instead of the unbiased estimator.
    #[arg(long)]
    first_k: bool,
    /// Report file (JSON); the per-seed table is printed as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Welch t-test per k between two eval reports.
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, default_value = "default")]
    run: String,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value = "default")]
    run: String,
    /// First round to export.
    #[arg(long, default_value_t = 1)]
    from: u32,
    /// Last round to export; the last completed round by default.
    #[arg(long)]
    to: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

/// Everything a subcommand needs from the configuration.
struct Env {
    config: ForgeConfig,
    config_path: Option<PathBuf>,
    seed: u64,
    audit: Arc<AuditLog>,
    gateway: Gateway,
    lean: LeanBridge,
    cancel: CancelToken,
}

impl Env {
    fn load(path: Option<&Path>, seed: u64, cancel: CancelToken) -> Result<Self> {
        let config = match path {
            Some(p) => ForgeConfig::load(p).with_context(|| format!("config {}", p.display()))?,
            None => ForgeConfig::default(),
        };
        let audit = Arc::new(AuditLog::new());
        let gateway = config.build_gateway(seed, audit.clone())?;
        let lean = config.build_lean(audit.clone())?;
        Ok(Self {
            config,
            config_path: path.map(Path::to_path_buf),
            seed,
            audit,
            gateway,
            lean,
            cancel,
        })
    }

    fn reload(&mut self) -> Result<()> {
        let fresh = Self::load(self.config_path.as_deref(), self.seed, self.cancel.clone())?;
        *self = fresh;
        Ok(())
    }

    fn run_dir(&self, run: &str) -> PathBuf {
        self.config.run_dir.join(run)
    }

    fn synthesis_config(&self) -> SynthesisConfig {
        SynthesisConfig {
            workers: self.config.pools.llm_workers,
            compile_workers: self.config.pools.lean_workers,
            ..SynthesisConfig::default()
        }
    }

    fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            workers: self.config.pools.llm_workers,
            ..AugmentConfig::default()
        }
    }
}

fn load_repo(path: Option<&Path>) -> Result<ConceptRepository> {
    Ok(match path {
        Some(p) => ConceptRepository::load(p).with_context(|| format!("repository {}", p.display()))?,
        None => ConceptRepository::bundled(),
    })
}

fn init_logging(cli: &Cli) -> Result<()> {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(&cli.log_level));
    let builder = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_current_span(false);
    match &cli.log_file {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("log file {}", path.display()))?;
            builder.with_writer(Arc::new(file)).init();
        }
        None => builder.with_writer(std::io::stderr).init(),
    }
    Ok(())
}

fn install_interrupt(cancel: &CancelToken) {
    let token = cancel.clone();
    let result = ctrlc::set_handler(move || {
        if token.is_cancelled() {
            eprintln!("forge: second interrupt, exiting without flushing");
            std::process::exit(130);
        }
        eprintln!("forge: interrupt received, finishing in-flight work (press again to abort)");
        token.cancel();
    });
    if let Err(e) = result {
        tracing::warn!(error = %e, "could not install interrupt handler");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging(&cli) {
        eprintln!("forge: {e:#}");
        return ExitCode::from(1);
    }
    let cancel = CancelToken::new();
    install_interrupt(&cancel);
    match run(cli, cancel) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = %format!("{e:#}"), "command failed");
            eprintln!("forge: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli, cancel: CancelToken) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Repo(cmd) => repo(cmd),
        Command::Synth(args) => synth(Env::load(config, cli.seed, cancel)?, args),
        Command::Augment(args) => augment(Env::load(config, cli.seed, cancel)?, args),
        Command::Iterate(args) => iterate(Env::load(config, cli.seed, cancel)?, args),
        Command::Eval(args) => match args.compare {
            Some(EvalCommand::Compare { a, b }) => compare(&a, &b),
            None => evaluate(Env::load(config, cli.seed, cancel)?, args),
        },
        Command::Stats(args) => stats(Env::load(config, cli.seed, cancel)?, args),
        Command::Export(args) => export(Env::load(config, cli.seed, cancel)?, args),
    }
}

fn repo(cmd: RepoCommand) -> Result<()> {
    match cmd {
        RepoCommand::Validate { path } => {
            let repo = load_repo(Some(&path))?;
            let c = repo.counts();
            eprintln!("{}: ok ({} concepts)", path.display(), c.concepts);
        }
        RepoCommand::Stats { path } => {
            let c = load_repo(path.as_deref())?.counts();
            println!("{} domains, {} topics, {} concepts", c.domains, c.topics, c.concepts);
        }
    }
    Ok(())
}

fn synth(env: Env, args: SynthArgs) -> Result<()> {
    let synth = Synthesizer::new(&env.gateway, &env.lean, env.synthesis_config());
    let inputs: Vec<NlStatement> = match &args.input {
        Some(path) => jsonl::read(path)?,
        None => {
            let repo = load_repo(args.repo.as_deref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
            let (stmts, report) = synth.generate_nl_batch(&repo, args.quota, args.round, &mut rng);
            eprintln!("generated {} of {} NL statements", report.produced, report.requested);
            stmts
        }
    };
    let outcome = synth.run_round(&inputs, args.round);
    jsonl::write(&args.out.join("accepted.jsonl"), &outcome.accepted)?;
    jsonl::write(&args.out.join("carryover.jsonl"), &outcome.carryover)?;
    jsonl::write(&args.out.join("notes.jsonl"), &outcome.notes)?;
    jsonl::write_atomic(&args.out.join("audit.jsonl"), env.audit.to_jsonl().as_bytes())?;
    let c = &outcome.stage_counts;
    eprintln!(
        "round {}: {} inputs, {} compiled first try, {} revised, {} accepted ({} by student), {} carried over, {} rejected",
        args.round,
        inputs.len(),
        c.compiled_first,
        c.revised,
        outcome.accepted.len(),
        outcome.student_accepted(),
        outcome.carryover.len(),
        outcome.rejected_count
    );
    Ok(())
}

fn augment(env: Env, args: AugmentArgs) -> Result<()> {
    let pairs: Vec<ParallelStatement> = jsonl::read(&args.input)?;
    let cfg = AugmentConfig {
        proof: !args.no_proof,
        contraposition: !args.no_contraposition,
        ..env.augment_config()
    };
    let outcome = Augmenter::new(&env.gateway, &env.lean, cfg).run(&pairs, args.round);
    jsonl::write(&args.out, &outcome.pairs)?;
    jsonl::write(&args.out.with_extension("records.jsonl"), &outcome.records)?;
    eprintln!(
        "{} sources: {} proof-augmented, {} contraposition-augmented, {} duplicates dropped, {} backfills failed",
        pairs.len(),
        outcome.count(forge_core::Origin::ProofAug),
        outcome.count(forge_core::Origin::ContraAug),
        outcome.duplicates_dropped,
        outcome.backfill_dropped
    );
    Ok(())
}

fn iterate(mut env: Env, args: IterateArgs) -> Result<()> {
    let repo = load_repo(args.repo.as_deref())?;
    let run_dir = env.run_dir(&args.run);
    let (first, mut carry) = IterationRunner::new(&env.gateway, &env.lean, &repo, &run_dir).resume_point()?;
    if first > 1 {
        eprintln!("resuming run {} at round {first}", args.run);
    }
    for round in first..first + args.rounds {
        let manifest = {
            let mut runner = IterationRunner::new(&env.gateway, &env.lean, &repo, &run_dir)
                .with_toolchain_version(env.config.toolchain.version());
            runner.synthesis = env.synthesis_config();
            runner.augment = env.augment_config();
            let cfg = RoundConfig::new(round, env.seed).with_quota(args.quota);
            runner.run_iteration(&cfg, &carry)?
        };
        carry = iteration::load_carryover(&run_dir, round)?;
        eprintln!(
            "round {round}: {} new + {} carried in -> {} synthetic ({:.1}% student), {} proof-aug, {} contra-aug, {} carried out, {} rejected",
            manifest.inputs.new,
            manifest.inputs.carryover,
            manifest.accepted_synthetic,
            manifest.student_ratio * 100.0,
            manifest.proof_aug,
            manifest.contra_aug,
            manifest.carryover_out,
            manifest.rejected
        );
        let last = round + 1 == first + args.rounds;
        if env.cancel.is_cancelled() {
            eprintln!("stopped after round {round}; rerun to resume");
            break;
        }
        if !last && args.checkpoint {
            eprintln!(
                "checkpoint: export with `forge export --run {} --to {round} --out <file>`, fine-tune the student, \
                 rebind `translator` in the config, then press Enter",
                args.run
            );
            let mut line = String::new();
            std::io::stdin().lock().read_line(&mut line)?;
            env.reload()?;
        }
    }
    Ok(())
}

fn evaluate(env: Env, args: EvalArgs) -> Result<()> {
    let Some(path) = args.benchmark else {
        Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "eval needs --benchmark <FILE> (or the `compare` subcommand)",
            )
            .exit();
    };
    let translator = match Role::parse(&args.translator) {
        Some(r @ (Role::Translator | Role::TeacherTranslate)) => r,
        _ => Cli::command()
            .error(
                clap::error::ErrorKind::InvalidValue,
                format!(
                    "--translator must be translator or teacher_translate, got {}",
                    args.translator
                ),
            )
            .exit(),
    };
    let items = if args.proofnet {
        let raw: Vec<serde_json::Value> = jsonl::read(&path)?;
        let items: Vec<_> = raw.iter().filter_map(eval::from_proofnet_record).collect();
        if items.len() != raw.len() {
            bail!(
                "{}: {} records lack name/informal_prefix",
                path.display(),
                raw.len() - items.len()
            );
        }
        eval::check_benchmark(&items)?;
        items
    } else {
        eval::load_benchmark(&path)?
    };
    let cfg = EvalConfig {
        translator,
        k_values: args.k,
        seeds: args.seeds,
        mode: if args.first_k {
            PassMode::FirstK
        } else {
            PassMode::Unbiased
        },
        workers: env.config.pools.llm_workers,
    };
    let result = Evaluator::new(&env.gateway, &env.lean).evaluate(&items, &cfg)?;
    print!("{}", result.table_csv());
    if let Some(out) = &args.out {
        let body = serde_json::to_string_pretty(&result)?;
        jsonl::write_atomic(out, format!("{body}\n").as_bytes())?;
    }
    let means: Vec<String> = result
        .mean
        .iter()
        .map(|(k, v)| format!("pass@{k}={:.2}%", v * 100.0))
        .collect();
    eprintln!(
        "{} items, {} seeds: {}",
        result.items,
        result.seeds.len(),
        means.join(" ")
    );
    Ok(())
}

fn read_report(path: &Path) -> Result<EvalResult> {
    let text = std::fs::read_to_string(path).with_context(|| format!("report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("report {}", path.display()))
}

fn compare(a: &Path, b: &Path) -> Result<()> {
    let rows = eval::compare(&read_report(a)?, &read_report(b)?)?;
    println!("k,mean_a,mean_b,p_value,significant");
    for r in rows {
        println!(
            "{},{:.6},{:.6},{:.6e},{}",
            r.k, r.mean_a, r.mean_b, r.p_value, r.significant
        );
    }
    Ok(())
}

fn stats(env: Env, args: StatsArgs) -> Result<()> {
    let run_dir = env.run_dir(&args.run);
    let manifests = iteration::load_manifests(&run_dir)?;
    if manifests.is_empty() {
        bail!("run {} has no completed rounds under {}", args.run, run_dir.display());
    }
    print!("{}", iteration::stats_csv(&manifests));
    let series = iteration::stats_series(&manifests);
    let path = run_dir.join("stats.json");
    let body = serde_json::to_string_pretty(&series)?;
    jsonl::write_atomic(&path, format!("{body}\n").as_bytes())?;
    let totals = iteration::aggregate_stats(&manifests)?;
    eprintln!(
        "{} rounds: {} synthetic + {} proof-aug + {} contra-aug = {} (series in {})",
        totals.rounds,
        totals.synthetic,
        totals.proof_aug,
        totals.contra_aug,
        totals.total,
        path.display()
    );
    let dups = iteration::duplicate_report(&run_dir, &manifests)?;
    let dup_path = run_dir.join("duplicates.json");
    let body = serde_json::to_string_pretty(&dups)?;
    jsonl::write_atomic(&dup_path, format!("{body}\n").as_bytes())?;
    eprintln!(
        "{} accepted pairs, {} distinct NL texts, {} repeated (report in {})",
        dups.pairs,
        dups.distinct_texts,
        dups.redundant(),
        dup_path.display()
    );
    Ok(())
}

fn export(env: Env, args: ExportArgs) -> Result<()> {
    let run_dir = env.run_dir(&args.run);
    let to = match args.to {
        Some(t) => t,
        None => iteration::load_manifests(&run_dir)?
            .last()
            .map(|m| m.round)
            .context("run has no completed rounds")?,
    };
    let n = iteration::export_training_data(&run_dir, args.from..=to, &args.out, ExportFormat::SftPairs)?;
    eprintln!(
        "exported {n} records from rounds {}..={to} to {}",
        args.from,
        args.out.display()
    );
    Ok(())
}
