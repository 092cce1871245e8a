//! `augsearch`: augment corpora with a policy, search for policies, score
//! responses, and inspect policy files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};

use augsearch_core::controller::ControllerMode;
use augsearch_core::corpus::{read_corpus, render_corpus};
use augsearch_core::harness::{load_lexicons, resolve_lexicon_dir, run_pipeline, SearchConfig, SearchSetup};
use augsearch_core::policy::{augment_corpus, parse_policy_file, render_table, Policy, PolicyDocument};
use augsearch_core::reward::evaluate_files;
use augsearch_core::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "augsearch", version, about = "Augmentation policy search for dialogue text")]
struct Cli {
    /// Directory with pos.tsv, stopwords.tsv, paraphrase.tsv, morphology.tsv
    /// (and optionally activities.txt, entities.txt). Falls back to
    /// $AUGSEARCH_LEXICON_DIR, then to the bundled lexicons.
    #[arg(long, global = true, value_name = "DIR")]
    lexicon_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Perturb the source side of a corpus with a policy.
    Augment(AugmentArgs),
    /// Search for a policy on a configured corpus and target.
    Search(SearchArgs),
    /// Score responses against gold responses (activity/entity F1).
    Eval(EvalArgs),
    /// Print a policy in compact, table and JSON form.
    PolicyShow(PolicyArgs),
    /// Check that a policy file parses.
    PolicyValidate(PolicyArgs),
}

#[derive(Debug, Args)]
struct PolicySource {
    /// Policy file: JSON document, or compact text with 1 or 4 sub-policies.
    #[arg(long, value_name = "FILE", required_unless_present = "inline", conflicts_with = "inline")]
    policy: Option<PathBuf>,
    /// Policy given directly, e.g. "(D_v,3,0.2)(R,1,0.5)".
    #[arg(long, value_name = "POLICY")]
    inline: Option<String>,
}

impl PolicySource {
    fn load(&self) -> Result<Policy> {
        let (text, origin) = match (&self.policy, &self.inline) {
            (Some(path), _) => (read(path)?, path.display().to_string()),
            (None, Some(text)) => (text.clone(), "--inline".to_string()),
            (None, None) => bail!("no policy given"),
        };
        parse_policy_file(&text).with_context(|| format!("invalid policy in {origin}"))
    }
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Corpus file: one `source<TAB>response` example per line.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[command(flatten)]
    source: PolicySource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Augmented corpus, written atomically.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Search config (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Overrides the controller mode from the config.
    #[arg(long)]
    mode: Option<ControllerMode>,
    /// Overrides the episode budget from the config.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: Option<u64>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model responses, one per line.
    #[arg(long, value_name = "FILE")]
    responses: PathBuf,
    /// Gold responses, aligned with --responses.
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    #[command(flatten)]
    source: PolicySource,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn augment(args: &AugmentArgs, lexicon_dir: Option<&Path>) -> Result<()> {
    require_file(&args.input)?;
    let policy = args.source.load()?;
    let (lexicons, _) = load_lexicons(lexicon_dir)?;
    let corpus = read_corpus(&args.input, &lexicons)?;
    let augmented = augment_corpus(&corpus, &policy, &lexicons, args.seed);
    write_atomic(&args.out, render_corpus(&augmented.examples).as_bytes())?;
    print!("{}", augmented.stats.render());
    println!("wrote {} examples to {}", augmented.examples.len(), args.out.display());
    Ok(())
}

fn search(args: &SearchArgs, lexicon_dir: Option<&Path>) -> Result<()> {
    require_file(&args.config)?;
    let mut config = SearchConfig::load(&args.config)?;
    if let Some(mode) = args.mode {
        config.controller.mode = mode;
    }
    if let Some(episodes) = args.episodes {
        config.episodes = usize::try_from(episodes).context("episode budget too large")?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    for path in [&config.train, &config.valid, &config.test] {
        require_file(path)?;
    }
    let lexicon_dir = resolve_lexicon_dir(lexicon_dir, config.lexicon_dir.as_deref());
    let setup = SearchSetup::from_config(&config, lexicon_dir.as_deref())?;

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let out = |name: &str| args.out.join(name);
    let output = run_pipeline(&setup, Some(out("controller.ckpt")))?;
    let log = &output.outcome.log;
    let top: Vec<Policy> = log
        .top_policies(setup.top_k)
        .iter()
        .map(|r| r.policy())
        .collect::<augsearch_core::Result<_>>()?;

    write_atomic(&out("search_log.jsonl"), log.to_jsonl().as_bytes())?;
    write_atomic(&out("timings.tsv"), log.timings().as_bytes())?;
    write_atomic(&out("best_policy.json"), PolicyDocument::from_policy(&output.outcome.best).to_json().as_bytes())?;
    write_atomic(&out("top_policies.txt"), render_table(&top).as_bytes())?;
    write_atomic(&out("report.json"), output.report.to_json().as_bytes())?;
    output.checkpoint.save(&out("target.ckpt"))?;

    let report = &output.report;
    println!("episodes          {}", log.records.len());
    println!("best policy       {} (episode {})", report.best_policy, report.best_episode);
    println!("validation reward {:.4}", report.best_validation_reward);
    println!(
        "test reward       activity {:.4}  entity {:.4}  weighted {:.4} ({:?} protocol)",
        report.augmented.activity_f1, report.augmented.entity_f1, report.augmented.weighted, report.protocol
    );
    println!("no augmentation   weighted {:.4}", report.unaugmented.weighted);
    println!("all operations    weighted {:.4}", report.all_operations.weighted);
    println!();
    print!("{}", render_table(&top));
    println!("wrote results to {}", args.out.display());
    Ok(())
}

fn eval(args: &EvalArgs, lexicon_dir: Option<&Path>) -> Result<()> {
    require_file(&args.responses)?;
    require_file(&args.gold)?;
    let (_, terms) = load_lexicons(lexicon_dir)?;
    let report = evaluate_files(&args.responses, &args.gold, &terms)?;
    println!("examples     {}", report.examples);
    println!("activity F1  {:.6}", report.activity_f1);
    println!("entity F1    {:.6}", report.entity_f1);
    println!("weighted     {:.6}", report.weighted);
    if let Some(out) = &args.out {
        write_atomic(out, report.to_json().as_bytes())?;
    }
    Ok(())
}

fn policy_show(args: &PolicyArgs) -> Result<()> {
    let policy = args.source.load()?;
    println!("{}", policy.to_compact());
    println!();
    print!("{}", render_table(std::slice::from_ref(&policy)));
    println!();
    println!("{}", PolicyDocument::from_policy(&policy).to_json());
    Ok(())
}

fn policy_validate(args: &PolicyArgs) -> Result<()> {
    let policy = args.source.load()?;
    println!("ok: {}", policy.to_compact());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let lexicon_dir = resolve_lexicon_dir(cli.lexicon_dir.as_deref(), None);
    let lexicon_dir = lexicon_dir.as_deref();
    match &cli.command {
        Command::Augment(args) => augment(args, lexicon_dir),
        Command::Search(args) => search(args, cli.lexicon_dir.as_deref()),
        Command::Eval(args) => eval(args, lexicon_dir),
        Command::PolicyShow(args) => policy_show(args),
        Command::PolicyValidate(args) => policy_validate(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
