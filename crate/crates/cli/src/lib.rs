//! The `proofspace` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 numeric
//! failure.

pub mod analyze;
pub mod error;
pub mod output;
pub mod plot;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use proofspace::ablation::{self, AblationConfig, AblationError, ProjectCorpus, SliceSelector};
use proofspace::axiom_audit;
use proofspace::clustering::GmmModel;
use proofspace::corpus::{layer_kurtoses, load_corpus, load_layer_stack, select_layer};
use proofspace::orchestrator::{self, Budget, CommandProvider, Goal, RetryPolicy, RunOptions, Script};
use proofspace::taxonomy::{taxonomy_stats, tier_counts, AbstractionLevel, AxiomTier, TacticDb};
use serde_json::json;

use crate::analyze::{analyze_corpus, write_analysis, AnalyzeOptions};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};
use crate::output::{read_json, read_text, write_atomic};
use crate::plot::{render_svg, LabeledSolution, PlotSpec};

#[derive(Debug, Parser)]
#[command(name = "proofspace", version, about = "Tactic taxonomy, ablation configs and proof-space geometry for Lean proof corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed each theorem's proofs with MDS, fit a GMM and write the report.
    Analyze(AnalyzeArgs),
    /// Render a 2-d solution (and optional GMM) as SVG.
    Plot(PlotArgs),
    /// Write a bundle of axiom probes for the given tactics.
    Probes(ProbesArgs),
    /// Reconcile a tactic database against captured probe outputs.
    Audit(AuditArgs),
    /// Build an ablation config from a taxonomy slice.
    Ablate(AblateArgs),
    /// Print the lemma whitelist available at a position in a project.
    Whitelist(WhitelistArgs),
    /// Run the proving loop with scripted or external providers.
    Orchestrate(OrchestrateArgs),
    /// Print tier counts and fractions of a tactic database.
    Stats(DbArg),
    /// Score the layers of an embedding stack by kurtosis.
    Layers(LayersArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for GMM initialization.
    #[arg(long, env = "PROOFSPACE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Proof corpus, one JSON record per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Refine each classical MDS solution with SMACOF.
    #[arg(long)]
    pub smacof: bool,
    /// Largest GMM component count tried during BIC selection.
    #[arg(long, default_value_t = proofspace::clustering::DEFAULT_K_MAX, value_parser = clap::value_parser!(usize))]
    pub kmax: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Leave per-point responsibilities out of gmm.json.
    #[arg(long)]
    pub no_responsibilities: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A 2-d solution written by `analyze` (mds_k2.json).
    #[arg(long)]
    pub solution: PathBuf,
    /// GMM written by `analyze`; its components are drawn as 2σ ellipses.
    #[arg(long)]
    pub gmm: Option<PathBuf>,
    /// SVG output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DbArg {
    /// Tactic database JSON; the bundled database when omitted.
    #[arg(long)]
    pub db: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbesArgs {
    /// Tactic to probe; repeat for several.
    #[arg(long = "tactic", required = true)]
    pub tactics: Vec<String>,
    /// Bundle directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Probe bundle with a captured `.txt` output next to every `.lean` file.
    #[arg(long)]
    pub probes: PathBuf,
    #[command(flatten)]
    pub db: DbArg,
    /// Updated database JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub db: DbArg,
    /// Axiom tier to ablate (strongly-constructive, weakly-constructive, classical); repeatable.
    #[arg(long = "tier")]
    pub tiers: Vec<AxiomTier>,
    /// Comma-separated abstraction levels (0-4).
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<u8>,
    /// Comma-separated functional category names.
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<String>,
    /// Tactic to ablate by name; repeatable.
    #[arg(long = "tactic")]
    pub tactics: Vec<String>,
    /// Config label; the file is written as `<label>.ablation.json`.
    #[arg(long)]
    pub label: String,
    #[command(flatten)]
    pub whitelist: WhitelistSource,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WhitelistSource {
    /// Project corpus (JSON lines of theorem_id, lean_text) to take the whitelist from.
    #[arg(long = "whitelist-corpus")]
    pub corpus: Option<PathBuf>,
    /// Number of leading proofs to harvest.
    #[arg(long, conflicts_with = "before")]
    pub position: Option<usize>,
    /// Harvest the proofs preceding this theorem.
    #[arg(long)]
    pub before: Option<String>,
    /// Newline-separated known lemmas; when given, the whitelist is
    /// restricted to them.
    #[arg(long = "whitelist-known")]
    pub known: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WhitelistArgs {
    /// Project corpus (JSON lines of theorem_id, lean_text).
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, conflicts_with = "before")]
    pub position: Option<usize>,
    #[arg(long)]
    pub before: Option<String>,
    #[arg(long = "whitelist-known")]
    pub known: Option<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OrchestrateArgs {
    /// Goal JSON (theorem_statement, informal_proof, ablation).
    #[arg(long, conflicts_with = "statement")]
    pub goal: Option<PathBuf>,
    /// Lean theorem statement.
    #[arg(long)]
    pub statement: Option<String>,
    /// Informal proof to skip the Strategize phase.
    #[arg(long)]
    pub informal: Option<String>,
    /// Ablation config handed to the checker.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
    /// Mock provider script.
    #[arg(long, conflicts_with_all = ["agent_cmd", "checker_cmd"])]
    pub script: Option<PathBuf>,
    /// External agent program speaking the JSON line protocol.
    #[arg(long, requires = "checker_cmd")]
    pub agent_cmd: Option<PathBuf>,
    /// External checker program speaking the JSON line protocol.
    #[arg(long, requires = "agent_cmd")]
    pub checker_cmd: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub max_agent_calls: u32,
    #[arg(long, default_value_t = 64)]
    pub max_checker_calls: u32,
    #[arg(long, default_value_t = 16)]
    pub max_iterations: u32,
    /// Same-phase retries before falling back one phase.
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    /// Per-call provider deadline in seconds.
    #[arg(long, default_value_t = 600)]
    pub deadline_secs: u64,
    /// Trace output (JSON lines).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LayersArgs {
    /// Directory with manifest.json and one distance matrix per layer.
    #[arg(long)]
    pub dir: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Plot(a) => cmd_plot(&a),
        Command::Probes(a) => cmd_probes(&a),
        Command::Audit(a) => cmd_audit(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Whitelist(a) => cmd_whitelist(&a),
        Command::Orchestrate(a) => cmd_orchestrate(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Layers(a) => cmd_layers(&a),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = proofspace::json::to_canonical_string(value).map_err(CliError::json("<stdout>"))?;
    std::io::stdout().write_all(text.as_bytes()).map_err(CliError::io("<stdout>"))
}

fn load_db(arg: &DbArg) -> Result<TacticDb, CliError> {
    match &arg.db {
        Some(p) => Ok(TacticDb::from_json(&read_text(p)?)?),
        None => Ok(TacticDb::bundled()),
    }
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    if a.kmax == 0 {
        return Err(CliError::Usage("--kmax must be at least 1".into()));
    }
    let corpus = load_corpus(&a.corpus)?;
    let opts = AnalyzeOptions { smacof: a.smacof, k_max: a.kmax, seed: a.seed.seed, responsibilities: !a.no_responsibilities };
    let analyses = analyze_corpus(&corpus, &opts)?;
    let report = write_analysis(&a.out, &analyses, &opts)?;
    print!("{}", report.to_tsv());
    Ok(())
}

pub fn cmd_plot(a: &PlotArgs) -> Result<(), CliError> {
    let labeled: LabeledSolution = read_json(&a.solution)?;
    let gmm: Option<GmmModel> = a.gmm.as_deref().map(read_json).transpose()?;
    let spec = PlotSpec::from_solution(&labeled, gmm.as_ref())?;
    write_atomic(&a.out, render_svg(&spec).as_bytes())
}

pub fn cmd_probes(a: &ProbesArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out).map_err(CliError::io(&a.out))?;
    let manifest = axiom_audit::write_probe_bundle(&a.out, &a.tactics)?;
    log::info!("wrote {} probes to {}", manifest.probes.len(), a.out.display());
    Ok(())
}

pub fn cmd_audit(a: &AuditArgs) -> Result<(), CliError> {
    let db = load_db(&a.db)?;
    let results = axiom_audit::read_probe_bundle(&a.probes)?;
    let (updated, changes) = axiom_audit::audit(&db, &results)?;
    for c in &changes {
        log::info!("{}: {} -> {}", c.tactic, c.from, c.to);
    }
    write_atomic(&a.out, updated.to_json()?.as_bytes())?;
    print_json(&changes)
}

fn resolve_position(corpus: &ProjectCorpus, position: Option<usize>, before: Option<&str>) -> Result<usize, CliError> {
    match (position, before) {
        (Some(p), _) => Ok(p),
        (None, Some(id)) => corpus.position_of(id).ok_or_else(|| CliError::Usage(format!("theorem {id:?} is not in the project corpus"))),
        (None, None) => Ok(corpus.len()),
    }
}

fn whitelist_from(corpus_path: &Path, position: Option<usize>, before: Option<&str>, known: Option<&Path>) -> Result<Vec<String>, CliError> {
    let corpus = ProjectCorpus::load(corpus_path)?;
    let position = resolve_position(&corpus, position, before)?;
    let known = known.map(ablation::load_known_lemmas).transpose()?;
    Ok(ablation::build_whitelist(&corpus, position, known.as_ref())?)
}

fn non_empty<T: Ord>(set: BTreeSet<T>) -> Option<BTreeSet<T>> {
    (!set.is_empty()).then_some(set)
}

pub fn selector_from(a: &AblateArgs) -> Result<SliceSelector, CliError> {
    let levels = a.levels.iter().map(|&l| AbstractionLevel::new(l)).collect::<Result<BTreeSet<_>, _>>()?;
    Ok(SliceSelector {
        levels: non_empty(levels),
        categories: non_empty(a.categories.iter().cloned().collect()),
        tiers: non_empty(a.tiers.iter().copied().collect()),
        named_tactics: non_empty(a.tactics.iter().cloned().collect()),
    })
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<(), CliError> {
    let db = load_db(&a.db)?;
    let selector = selector_from(a)?;
    let forbidden = if selector.is_unconstrained() {
        BTreeSet::new()
    } else {
        match ablation::build_ablation_set(&db, &selector) {
            Ok(s) => s,
            Err(AblationError::EmptySelection) => {
                log::warn!("selection is empty; writing a config that forbids nothing");
                BTreeSet::new()
            }
            Err(e) => return Err(e.into()),
        }
    };
    let w = &a.whitelist;
    let whitelist = match &w.corpus {
        Some(p) => Some(whitelist_from(p, w.position, w.before.as_deref(), w.known.as_deref())?),
        None if w.position.is_some() || w.before.is_some() || w.known.is_some() => {
            return Err(CliError::Usage("whitelist options need --whitelist-corpus".into()))
        }
        None => None,
    };
    let (config, text) = ablation::emit_config(&forbidden, whitelist.as_deref(), &a.label, &db)?;
    write_atomic(&a.out.join(config.file_name()), text.as_bytes())
}

pub fn cmd_whitelist(a: &WhitelistArgs) -> Result<(), CliError> {
    let list = whitelist_from(&a.corpus, a.position, a.before.as_deref(), a.known.as_deref())?;
    let mut text = String::new();
    for l in &list {
        text.push_str(l);
        text.push('\n');
    }
    match &a.out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(CliError::io("<stdout>")),
    }
}

fn goal_from(a: &OrchestrateArgs) -> Result<Goal, CliError> {
    let mut goal = match (&a.goal, &a.statement) {
        (Some(p), _) => read_json::<Goal>(p)?,
        (None, Some(s)) => Goal::new(s.clone())?,
        (None, None) => return Err(CliError::Usage("one of --goal or --statement is required".into())),
    };
    if let Some(i) = &a.informal {
        goal.informal_proof = Some(i.clone());
    }
    if let Some(p) = &a.ablation {
        goal.ablation = Some(AblationConfig::load(p)?);
    }
    Ok(goal)
}

pub fn cmd_orchestrate(a: &OrchestrateArgs) -> Result<(), CliError> {
    let goal = goal_from(a)?;
    let budget = Budget::new(a.max_agent_calls, a.max_checker_calls, a.max_iterations);
    let options = RunOptions { policy: RetryPolicy { same_phase_retries: a.retries }, call_deadline: Duration::from_secs(a.deadline_secs) };
    let report = match (&a.script, &a.agent_cmd, &a.checker_cmd) {
        (Some(p), _, _) => {
            let (mut agent, mut checker) = orchestrator::mock_providers(Script::load(p)?);
            orchestrator::run(&goal, &mut agent, &mut checker, budget, options)?
        }
        (None, Some(agent), Some(checker)) => {
            let mut agent = CommandProvider::new(agent, Vec::new());
            let mut checker = CommandProvider::new(checker, Vec::new());
            orchestrator::run(&goal, &mut agent, &mut checker, budget, options)?
        }
        _ => return Err(CliError::Usage("one of --script or --agent-cmd with --checker-cmd is required".into())),
    };
    if let Some(p) = &a.trace {
        write_atomic(p, report.trace.to_jsonl().as_bytes())?;
    }
    print_json(&json!({
        "outcome": report.outcome,
        "phases": report.trace.phase_sequence(),
        "budget": report.budget,
    }))
}

pub fn cmd_stats(a: &DbArg) -> Result<(), CliError> {
    let db = load_db(a)?;
    let dist = taxonomy_stats(&db)?;
    print_json(&json!({
        "registry_version": db.registry_version(),
        "total": db.len(),
        "counts": tier_counts(&db),
        "fractions": dist,
    }))
}

pub fn cmd_layers(a: &LayersArgs) -> Result<(), CliError> {
    let stack = load_layer_stack(&a.dir)?;
    let scores = layer_kurtoses(&stack)?;
    let selected = select_layer(&stack)?;
    let scores: Vec<_> = scores.iter().map(|s| json!({"layer_index": s.index, "kurtosis": s.kurtosis})).collect();
    print_json(&json!({ "layers": scores, "selected": selected }))
}
