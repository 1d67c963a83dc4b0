//! The `bonsai` command line.

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::experiment::{run_rep, summarize, CompareConfig, RepResult};
use crate::fuzzer::{cbgf_run, random_seed, Corpus, FuzzerConfig, ValidityMode, DEFAULT_FANOUT};
use crate::grammar::{parse_grammar, Grammar, GrammarError};
use crate::lattice::{bonsai_run, splitmix64, LatticeSpec, NodeTemplate};
use crate::metrics::{rows_csv, stats, stats_with_rows};
use crate::reducer::{reduce_corpus, Criterion, ReduceMode};
use crate::sampler::{prng, sample, ChoiceSource, SizeBounds};
use crate::targets::{self, Target, TargetError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("grammar: {0}")]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Grammar(_) => EXIT_CONFIG,
            CliError::Target(TargetError::Io(_)) => EXIT_RUNTIME,
            CliError::Target(_) => EXIT_CONFIG,
            CliError::Runtime(_) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Parser)]
#[command(name = "bonsai", version, about = "Grow concise test corpora by lattice-scheduled bounded grammar fuzzing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Draw size-bounded samples from a grammar.
    Sample(SampleArgs),
    /// Run one coverage-guided bounded grammar fuzzer.
    Fuzz(FuzzArgs),
    /// Run the whole lattice of fuzzers.
    Bonsai(BonsaiArgs),
    /// Minimize every member of a saved corpus.
    Reduce(ReduceArgs),
    /// Measure a saved corpus.
    Stats(StatsArgs),
    /// Bonsai against fuzz-then-reduce at an equal execution budget.
    Compare(CompareArgs),
    /// Repeat the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TargetArgs {
    /// `minilang`, `arith` or `ext:<command line>`.
    #[arg(long, default_value = "minilang")]
    pub target: String,
    /// Grammar file or bundled grammar name; defaults to the target's own.
    #[arg(long)]
    pub grammar: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Grammar file or bundled grammar name.
    #[arg(long)]
    pub grammar: String,
    #[arg(long)]
    pub bounds: SizeBounds,
    #[arg(long, default_value_t = 10)]
    pub count: u32,
    #[arg(long, env = "BONSAI_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FuzzArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub bounds: SizeBounds,
    /// `r` saves valid inputs only, `u` also saves invalid ones.
    #[arg(long, default_value = "u")]
    pub mode: ValidityMode,
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
    #[arg(long, env = "BONSAI_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Corpus directory to seed from; without one a single random input is used.
    #[arg(long)]
    pub seeds_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FANOUT)]
    pub fanout: u32,
    #[arg(long)]
    pub stop_on_stagnation: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BonsaiArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value = "3,3,3")]
    pub top: SizeBounds,
    /// Add the restricted/unrestricted dimension.
    #[arg(long)]
    pub extended: bool,
    /// Mode of every node of the plain lattice.
    #[arg(long, default_value = "r")]
    pub mode: ValidityMode,
    #[arg(long, default_value_t = 10_000)]
    pub node_budget: u64,
    #[arg(long, env = "BONSAI_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = DEFAULT_FANOUT)]
    pub fanout: u32,
    #[arg(long)]
    pub stop_on_stagnation: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Char,
    Hier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    Novel,
    Full,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Novel => Criterion::Novel,
            CriterionArg::Full => Criterion::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReduceArgs {
    /// Directory of `input_<k>.txt` / `input_<k>.meta.json` pairs.
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_enum, default_value = "hier")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "novel")]
    pub criterion: CriterionArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Also write `stats.json` and `members.csv` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value = "3,3,3")]
    pub top: SizeBounds,
    /// Executions for the whole lattice; the baseline gets what the lattice used.
    #[arg(long, default_value_t = 270_000)]
    pub budget_total: u64,
    #[arg(long, default_value_t = 5)]
    pub reps: u32,
    #[arg(long, env = "BONSAI_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Use the plain lattice instead of the extended one.
    #[arg(long)]
    pub plain: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = DEFAULT_FANOUT)]
    pub fanout: u32,
    #[arg(long, value_enum, default_value = "novel")]
    pub criterion: CriterionArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// A `manifest.json` written by an earlier run.
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Command,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Fuzz(_) => "fuzz",
            Command::Bonsai(_) => "bonsai",
            Command::Reduce(_) => "reduce",
            Command::Stats(_) => "stats",
            Command::Compare(_) => "compare",
            Command::Rerun(_) => "rerun",
        }
    }

    fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::Sample(a) => a.out = out,
            Command::Fuzz(a) => a.out = out,
            Command::Bonsai(a) => a.out = out,
            Command::Reduce(a) => a.out = out,
            Command::Stats(a) => a.out = Some(out),
            Command::Compare(a) => a.out = out,
            Command::Rerun(a) => a.out = Some(out),
        }
    }
}

fn write_manifest(out: &Path, command: &Command) -> Result<(), CliError> {
    let m = RunManifest {
        command: command.name().to_owned(),
        config: command.clone(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        timestamp: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    write_json(&out.join("manifest.json"), &m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(path, &json)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    fs::write(path, contents).map_err(io_at(path))
}

/// A bundled grammar name or a path to a grammar file.
pub fn load_grammar(spec: &str) -> Result<Grammar, CliError> {
    let source = match crate::grammars::builtin(spec) {
        Some(src) => src.to_owned(),
        None => fs::read_to_string(spec).map_err(|e| CliError::Config(format!("grammar `{spec}`: {e}")))?,
    };
    Ok(parse_grammar(&source)?)
}

fn load_target(args: &TargetArgs) -> Result<Arc<dyn Target>, CliError> {
    let grammar = args.grammar.as_deref().map(load_grammar).transpose()?;
    Ok(targets::resolve(&args.target, grammar)?)
}

fn load_corpus(dir: &Path) -> Result<Corpus, CliError> {
    Corpus::load(dir).map_err(io_at(dir))
}

fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<(), CliError> {
    corpus.save(dir).map_err(io_at(dir))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("bonsai: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match &command {
        Command::Sample(a) => cmd_sample(a, &command),
        Command::Fuzz(a) => cmd_fuzz(a, &command),
        Command::Bonsai(a) => cmd_bonsai(a, &command),
        Command::Reduce(a) => cmd_reduce(a, &command),
        Command::Stats(a) => cmd_stats(a, &command),
        Command::Compare(a) => cmd_compare(a, &command),
        Command::Rerun(a) => cmd_rerun(a),
    }
}

fn cmd_sample(a: &SampleArgs, command: &Command) -> Result<(), CliError> {
    let grammar = load_grammar(&a.grammar)?;
    fs::create_dir_all(&a.out).map_err(io_at(&a.out))?;
    let mut rng = prng(a.seed);
    for k in 0..a.count {
        let s = sample(&grammar, a.bounds, &mut ChoiceSource::fresh(&mut rng))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let size = s.tree.measure();
        write_file(&a.out.join(format!("sample_{k}.txt")), &s.text)?;
        write_file(&a.out.join(format!("sample_{k}.choices.json")), &s.choices.to_json())?;
        println!("sample_{k} idents={} items={} depth={} {}", size.idents, size.items, size.depth, s.text);
    }
    write_manifest(&a.out, command)
}

fn cmd_fuzz(a: &FuzzArgs, command: &Command) -> Result<(), CliError> {
    let target = load_target(&a.target)?;
    let grammar = target.grammar();
    let mut cfg = FuzzerConfig::new(a.bounds, a.mode, a.budget, a.seed);
    cfg.fanout = a.fanout;
    cfg.stop_on_stagnation = a.stop_on_stagnation;
    let mut seeds = match &a.seeds_dir {
        Some(dir) => load_corpus(dir)?.into_inputs(),
        None => Vec::new(),
    };
    if seeds.is_empty() {
        let seed = random_seed(target.as_ref(), grammar, &cfg, splitmix64(cfg.seed))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        seeds.push(seed);
    }
    let corpus = cbgf_run(target.as_ref(), grammar, &cfg, &seeds);
    save_corpus(&corpus, &a.out.join("corpus").join(cfg.provenance().config_id()))?;
    let s = stats(&corpus, target.as_ref());
    write_json(&a.out.join("stats.json"), &s)?;
    write_manifest(&a.out, command)?;
    println!(
        "{} inputs, {} executions, coverage {}/{}, validity {:.3}",
        corpus.len(),
        corpus.executions,
        s.coverage.covered,
        s.coverage.total,
        s.validity
    );
    match &corpus.failure {
        Some(f) => Err(CliError::Runtime(format!("fuzzer stopped: {f}"))),
        None => Ok(()),
    }
}

fn cmd_bonsai(a: &BonsaiArgs, command: &Command) -> Result<(), CliError> {
    let target = load_target(&a.target)?;
    let spec = LatticeSpec::new(a.top, a.extended);
    let mut template = NodeTemplate::new(a.node_budget, a.seed);
    template.mode = a.mode;
    template.fanout = a.fanout;
    template.stop_on_stagnation = a.stop_on_stagnation;
    let run = bonsai_run(target.as_ref(), target.grammar(), spec, template, a.jobs);
    run.save(&a.out).map_err(io_at(&a.out))?;
    let s = stats(run.final_corpus(), target.as_ref());
    write_json(&a.out.join("stats.json"), &s)?;
    write_manifest(&a.out, command)?;
    println!(
        "{} nodes, {} executions; final corpus {} inputs, mean size {:.2}, validity {:.3}, coverage {}/{}",
        run.reports.len(),
        run.total_executions(),
        s.files,
        s.sizes.mean,
        s.validity,
        s.coverage.covered,
        s.coverage.total
    );
    let failures = run.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = failures.iter().map(|(n, f)| format!("{n}: {f}")).collect();
        Err(CliError::Runtime(format!("node failures: {}", list.join("; "))))
    }
}

fn cmd_reduce(a: &ReduceArgs, command: &Command) -> Result<(), CliError> {
    let target = load_target(&a.target)?;
    let corpus = load_corpus(&a.corpus)?;
    let mode = match a.mode {
        ModeArg::Char => ReduceMode::Char,
        ModeArg::Hier => ReduceMode::Hier,
    };
    let (reduced, report) = reduce_corpus(&corpus, target.as_ref(), mode, a.criterion.into());
    save_corpus(&reduced, &a.out.join("corpus"))?;
    write_json(&a.out.join("report.json"), &report)?;
    write_manifest(&a.out, command)?;
    for m in &report.members {
        if let Some(e) = &m.error {
            eprintln!("input_{} kept unreduced: {e}", m.index);
        }
    }
    println!(
        "{} inputs, total size {} -> {}, {} predicate evaluations",
        reduced.len(),
        report.original_size,
        report.reduced_size,
        report.evaluations
    );
    Ok(())
}

fn cmd_stats(a: &StatsArgs, command: &Command) -> Result<(), CliError> {
    let target = load_target(&a.target)?;
    let corpus = load_corpus(&a.corpus)?;
    let (s, rows) = stats_with_rows(&corpus, target.as_ref());
    let json = serde_json::to_string_pretty(&s).map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv = rows_csv(&rows);
    match a.format {
        Format::Json => println!("{json}"),
        Format::Csv => print!("{csv}"),
        Format::Text => {
            println!("files      {}", s.files);
            println!(
                "size       min {} median {:.1} mean {:.2} max {}",
                s.sizes.min, s.sizes.median, s.sizes.mean, s.sizes.max
            );
            println!("validity   {:.3}", s.validity);
            println!("coverage   {}/{}", s.coverage.covered, s.coverage.total);
            if let Some((c, t)) = s.coverage.semantic {
                println!("semantic   {c}/{t}");
            }
        }
    }
    if let Some(out) = &a.out {
        write_file(&out.join("stats.json"), &json)?;
        write_file(&out.join("members.csv"), &csv)?;
        write_manifest(out, command)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    config: &'a CompareConfig,
    node_budget: u64,
    reps: &'a [RepResult],
    summary: crate::experiment::CompareSummary,
}

fn cmd_compare(a: &CompareArgs, command: &Command) -> Result<(), CliError> {
    let target = load_target(&a.target)?;
    let mut cfg = CompareConfig::new(a.top, a.budget_total, a.reps, a.seed);
    cfg.extended = !a.plain;
    cfg.jobs = a.jobs;
    cfg.fanout = a.fanout;
    cfg.criterion = a.criterion.into();
    let mut reps = Vec::new();
    for rep in 0..a.reps {
        let (r, corpora) = run_rep(target.as_ref(), &cfg, rep);
        let dir = a.out.join(format!("rep_{rep}"));
        save_corpus(&corpora.bonsai, &dir.join("bonsai"))?;
        save_corpus(&corpora.baseline, &dir.join("baseline"))?;
        save_corpus(&corpora.baseline_reduced, &dir.join("baseline_reduced"))?;
        write_file(&dir.join("bonsai.csv"), &rows_csv(&stats_with_rows(&corpora.bonsai, target.as_ref()).1))?;
        write_file(
            &dir.join("baseline.csv"),
            &rows_csv(&stats_with_rows(&corpora.baseline_reduced, target.as_ref()).1),
        )?;
        write_json(&dir.join("result.json"), &r)?;
        println!(
            "rep {rep}: bonsai {} files, mean size {:.2}, validity {:.3}; baseline {} files, mean size {:.2}, validity {:.3}",
            r.bonsai.files,
            r.bonsai.sizes.mean,
            r.bonsai.validity,
            r.baseline.files,
            r.baseline.sizes.mean,
            r.baseline.validity
        );
        if r.baseline_executions != r.bonsai_executions {
            return Err(CliError::Runtime(format!(
                "rep {rep}: baseline used {} executions but bonsai used {}",
                r.baseline_executions, r.bonsai_executions
            )));
        }
        reps.push(r);
    }
    let summary = summarize(&reps);
    let table = summary.table();
    print!("{table}");
    write_file(&a.out.join("summary.txt"), &table)?;
    write_json(
        &a.out.join("summary.json"),
        &CompareOutput { config: &cfg, node_budget: cfg.node_budget(), reps: &reps, summary },
    )?;
    write_manifest(&a.out, command)?;
    let failures: Vec<String> =
        reps.iter().flat_map(|r| r.failures.iter().map(move |f| format!("rep {}: {f}", r.rep))).collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failures.join("; ")))
    }
}

fn cmd_rerun(a: &RerunArgs) -> Result<(), CliError> {
    let text =
        fs::read_to_string(&a.manifest).map_err(|e| CliError::Config(format!("{}: {e}", a.manifest.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", a.manifest.display())))?;
    let mut command = manifest.config;
    if matches!(command, Command::Rerun(_)) {
        return Err(CliError::Config("a manifest cannot record a rerun".into()));
    }
    if let Some(out) = &a.out {
        command.set_out(out.clone());
    }
    run(command)
}
