// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, analytics), 2 usage,
//! 3 invalid configuration, 4 unusable input data, 5 environment setup
//! (toolchains, credentials).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{
    dataset_frontier, frontier_csv, iteration_progression, pareto_frontier, progression_csv, FrontierGranularity,
    PassGrid, RankKey,
};
use crate::curation::{filter_problems, purify_pools, CurationReport};
use crate::io::config::{BackendConfig, Config, ProviderConfig};
use crate::io::dataset::{self, DatasetRecord, Format, RecordStatus};
use crate::judge::{aggregate_dataset, aggregate_micro, evaluate, format_percent, Averaging, Comparison, EvaluationExport};
use crate::llm::{Gateway, HttpProvider, Provider, RecordingProvider, ReplayProvider};
use crate::model::Problem;
use crate::refine::{LoopMode, LoopTrace, Refiner};
use crate::sandbox::{parallel_map, LocalBackend, RemoteBackend, Sandbox, ToolchainTable};

#[derive(Debug, Parser)]
#[command(name = "tcforge", version, about = "Synthesize and refine test suites for programming problems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Problems processed concurrently.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Minimum TPR for early termination.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Minimum TNR for early termination.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Refinement iterations after the initial one.
    #[arg(long = "n-max", global = true)]
    pub n_max: Option<u32>,
    /// Skip problems that already have a trace in the output directory.
    #[arg(long, global = true)]
    pub resume: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Auto,
    String,
    Checker,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Auto,
    Codecontests,
    Native,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Auto => Format::Auto,
            FormatArg::Codecontests => Format::Codecontests,
            FormatArg::Native => Format::Native,
        }
    }
}

#[derive(Debug, Args)]
pub struct DatasetIn {
    /// Input JSONL dataset.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[command(flatten)]
    pub dataset: DatasetIn,
    /// Output directory for traces, dataset.jsonl and summary.json.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply the exclusion rules and purify solution pools.
    Curate {
        #[command(flatten)]
        dataset: DatasetIn,
        /// Curated native dataset.
        #[arg(long, short)]
        output: PathBuf,
        /// JSON curation report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Initial generation and evaluation only.
    Generate(LoopArgs),
    /// Evaluate the suites of a native dataset against its pools.
    Evaluate {
        #[command(flatten)]
        dataset: DatasetIn,
        /// Per-problem evaluation exports (JSON array); stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Trace directory; a recorded checker is used unless --mode string.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Extend every existing trace in the output directory by one step.
    Refine(LoopArgs),
    /// Full loop over a dataset.
    Run(LoopArgs),
    /// Pareto frontier CSV from evaluation exports or traces.
    Pareto {
        /// An export, an array of exports, a trace, or a trace directory.
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long = "rank-key", value_enum)]
        rank_key: Option<RankArg>,
        #[arg(long, value_enum)]
        granularity: Option<GranularityArg>,
    },
    /// Per-iteration progression CSV and final aggregates from traces.
    Report {
        /// Trace directory.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the loop while recording model replies, or replay recordings.
    RecordReplay {
        #[command(flatten)]
        run: LoopArgs,
        /// Directory of recorded replies.
        #[arg(long)]
        recordings: PathBuf,
        /// Serve replies from the recordings instead of the live provider.
        #[arg(long)]
        replay: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RankArg {
    TnrThenTpr,
    TprThenTnr,
    Sum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GranularityArg {
    PerProblem,
    Pooled,
}

/// Categorized failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn runtime(m: impl ToString) -> Self {
        Failure { code: 1, message: m.to_string() }
    }
    fn config(m: impl ToString) -> Self {
        Failure { code: 3, message: m.to_string() }
    }
    fn input(m: impl ToString) -> Self {
        Failure { code: 4, message: m.to_string() }
    }
    fn setup(m: impl ToString) -> Self {
        Failure { code: 5, message: m.to_string() }
    }
}

type Outcome = Result<(), Failure>;

/// Parses `argv` (program name first) and runs the command.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<Config, Failure> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p).map_err(Failure::config)?,
        None => Config::default(),
    };
    if let Some(w) = g.workers {
        cfg.run.problem_workers = w;
    }
    if let Some(m) = g.mode {
        cfg.loop_.mode = match m {
            ModeArg::Auto => LoopMode::Auto,
            ModeArg::String => LoopMode::String,
            ModeArg::Checker => LoopMode::Checker,
        };
    }
    if let Some(a) = g.alpha {
        cfg.loop_.alpha = a;
    }
    if let Some(b) = g.beta {
        cfg.loop_.beta = b;
    }
    if let Some(n) = g.n_max {
        cfg.loop_.n_max = n;
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Outcome {
    let cfg = load_config(&cli.global)?;
    let resume = cli.global.resume;
    match cli.command {
        Command::Curate { dataset, output, report } => curate(&cfg, &dataset, &output, report.as_deref()),
        Command::Generate(args) => {
            let mut cfg = cfg;
            cfg.loop_.n_max = 0;
            run_dataset(&cfg, &args, resume, None)
        }
        Command::Run(args) => run_dataset(&cfg, &args, resume, None),
        Command::RecordReplay { run, recordings, replay } => {
            let provider: Box<dyn Provider> = if replay {
                Box::new(ReplayProvider::new(recordings))
            } else {
                let http = match &cfg.provider {
                    ProviderConfig::Http(h) | ProviderConfig::Record { http: h, .. } => h.clone(),
                    ProviderConfig::Replay { .. } => Default::default(),
                };
                let live = HttpProvider::new(http).map_err(Failure::setup)?;
                Box::new(RecordingProvider::new(live, recordings).map_err(Failure::setup)?)
            };
            run_dataset(&cfg, &run, resume, Some(provider))
        }
        Command::Refine(args) => refine(&cfg, &args),
        Command::Evaluate { dataset, output, traces } => {
            evaluate_dataset(&cfg, &dataset, output.as_deref(), traces.as_deref())
        }
        Command::Pareto {
            input,
            output,
            rank_key,
            granularity,
        } => {
            let key = match rank_key {
                Some(RankArg::TnrThenTpr) => RankKey::TnrThenTpr,
                Some(RankArg::TprThenTnr) => RankKey::TprThenTnr,
                Some(RankArg::Sum) => RankKey::Sum,
                None => cfg.analytics.rank_key,
            };
            let gran = match granularity {
                Some(GranularityArg::PerProblem) => FrontierGranularity::PerProblem,
                Some(GranularityArg::Pooled) => FrontierGranularity::Pooled,
                None => cfg.analytics.granularity,
            };
            pareto(&input, output.as_deref(), key, gran)
        }
        Command::Report { traces, output } => report(&traces, output.as_deref()),
    }
}

fn build_sandbox(cfg: &Config) -> Result<Sandbox, Failure> {
    let backend: Box<dyn crate::sandbox::Backend> = match &cfg.sandbox.backend {
        BackendConfig::Local { toolchains } => Box::new(
            LocalBackend::new(toolchains.clone().unwrap_or_else(ToolchainTable::default)).map_err(Failure::setup)?,
        ),
        BackendConfig::Remote(r) => Box::new(RemoteBackend::new(r.clone())),
    };
    Ok(Sandbox::new(backend, cfg.sandbox.workers))
}

fn build_provider(cfg: &Config) -> Result<Box<dyn Provider>, Failure> {
    Ok(match &cfg.provider {
        ProviderConfig::Http(h) => Box::new(HttpProvider::new(h.clone()).map_err(Failure::setup)?),
        ProviderConfig::Replay { dir } => Box::new(ReplayProvider::new(dir.clone())),
        ProviderConfig::Record { dir, http } => {
            let live = HttpProvider::new(http.clone()).map_err(Failure::setup)?;
            Box::new(RecordingProvider::new(live, dir.clone()).map_err(Failure::setup)?)
        }
    })
}

fn read_records(cfg: &Config, d: &DatasetIn) -> Result<Vec<DatasetRecord>, Failure> {
    let ingest = dataset::read_all(&d.input, d.format.into(), &cfg.ingest).map_err(Failure::input)?;
    if ingest.malformed > 0 {
        eprintln!("warning: skipped {} malformed lines in {}", ingest.malformed, d.input.display());
    }
    Ok(ingest.records.into_iter().map(|i| i.record).collect())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(Failure::runtime)? + "\n";
    write_text(path, &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(Failure::runtime)?;
            }
            std::fs::write(p, text).map_err(|e| Failure::runtime(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn curate(cfg: &Config, d: &DatasetIn, output: &Path, report_path: Option<&Path>) -> Outcome {
    let records = read_records(cfg, d)?;
    let mut out: Vec<DatasetRecord> = Vec::new();
    let mut candidates = Vec::new();
    for r in records {
        if r.status == RecordStatus::Ok {
            candidates.push(r.problem);
        } else {
            out.push(r);
        }
    }
    let mut by_id: std::collections::HashMap<String, Problem> =
        candidates.iter().map(|p| (p.id.clone(), p.clone())).collect();
    let (kept, rejected) = filter_problems(candidates, &cfg.curation);
    let mut report = CurationReport {
        kept: kept.len(),
        ..Default::default()
    };
    report.record_rejections(&rejected);
    for r in &rejected {
        if let Some(p) = by_id.remove(&r.id) {
            out.push(DatasetRecord::rejected(p, r.rule.name()));
        }
    }
    let sandbox = build_sandbox(cfg)?;
    let purified = parallel_map(&kept, cfg.run.problem_workers, |p| purify_pools(&sandbox, p));
    for (p, res) in kept.iter().zip(purified) {
        match res {
            Ok((clean, _log)) => {
                report.record_pools(&clean);
                out.push(DatasetRecord::ok(clean));
            }
            Err(e) => {
                report.kept -= 1;
                report.unusable.push(p.id.clone());
                out.push(DatasetRecord::rejected(p.clone(), e.to_string()));
            }
        }
    }
    dataset::export(output, &out).map_err(Failure::runtime)?;
    eprintln!(
        "kept {} of {} problems ({} rejected, {} unusable)",
        report.kept,
        out.len(),
        rejected.len(),
        report.unusable.len()
    );
    if let Some(p) = report_path {
        write_json(Some(p), &report)?;
    }
    Ok(())
}

/// File-name-safe form of a problem id.
pub fn trace_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

pub fn trace_path(out: &Path, id: &str) -> PathBuf {
    out.join("traces").join(trace_file_name(id))
}

fn seed_for(cfg: &Config, id: &str) -> Option<String> {
    let dir = cfg.run.seed_generators.as_ref()?;
    let stem = trace_file_name(id);
    let stem = stem.trim_end_matches(".json");
    let entries = std::fs::read_dir(dir).ok()?;
    for e in entries.flatten() {
        let path = e.path();
        if path.file_stem().and_then(|s| s.to_str()) == Some(stem) {
            return std::fs::read_to_string(path).ok();
        }
    }
    None
}

/// Counters written to `summary.json` after a loop command.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub problems: usize,
    pub resumed: usize,
    pub llm_calls: u64,
    pub sandbox_runs: usize,
    pub sandbox_compiles: usize,
    pub thresholds_met: usize,
    pub iteration_cap: usize,
    pub unrecoverable_error: usize,
    pub mean_tpr: Option<f64>,
    pub mean_tnr: Option<f64>,
    pub dataset: dataset::ExportSummary,
}

fn run_dataset(cfg: &Config, args: &LoopArgs, resume: bool, provider: Option<Box<dyn Provider>>) -> Outcome {
    let records = read_records(cfg, &args.dataset)?;
    let (todo, passthrough): (Vec<DatasetRecord>, Vec<DatasetRecord>) =
        records.into_iter().partition(|r| r.status == RecordStatus::Ok);

    let mut done: Vec<Option<LoopTrace>> = todo
        .iter()
        .map(|r| {
            if resume {
                LoopTrace::load(&trace_path(&args.out, &r.problem.id))
            } else {
                None
            }
        })
        .collect();
    let pending: Vec<usize> = (0..todo.len()).filter(|&i| done[i].is_none()).collect();
    let resumed = todo.len() - pending.len();

    let mut llm_calls = 0;
    let mut stats = Default::default();
    if !pending.is_empty() {
        let sandbox = build_sandbox(cfg)?;
        let provider = match provider {
            Some(p) => p,
            None => build_provider(cfg)?,
        };
        let gateway = Gateway::new(provider, cfg.gateway.clone());
        let traces = parallel_map(&pending, cfg.run.problem_workers, |&i| {
            let p = &todo[i].problem;
            let gw = gateway.fork();
            let refiner = Refiner {
                sandbox: &sandbox,
                gateway: &gw,
                cfg: &cfg.loop_,
            };
            let seed = seed_for(cfg, &p.id);
            let trace = refiner.run_loop(p, seed.as_deref());
            if let Err(e) = trace.save(&trace_path(&args.out, &p.id)) {
                tracing::error!(problem = %p.id, error = %e, "cannot save trace");
            }
            trace
        });
        for (i, t) in pending.into_iter().zip(traces) {
            done[i] = Some(t);
        }
        llm_calls = gateway.total_calls();
        stats = sandbox.stats();
    }

    finish(
        &args.out,
        todo,
        done.into_iter().map(|t| t.expect("every problem has a trace")).collect(),
        passthrough,
        resumed,
        llm_calls,
        stats,
    )
}

fn finish(
    out: &Path,
    todo: Vec<DatasetRecord>,
    traces: Vec<LoopTrace>,
    passthrough: Vec<DatasetRecord>,
    resumed: usize,
    llm_calls: u64,
    stats: crate::sandbox::SandboxStats,
) -> Outcome {
    let mut summary = RunSummary {
        problems: todo.len(),
        resumed,
        llm_calls,
        sandbox_runs: stats.runs,
        sandbox_compiles: stats.compiles,
        thresholds_met: 0,
        iteration_cap: 0,
        unrecoverable_error: 0,
        mean_tpr: None,
        mean_tnr: None,
        dataset: Default::default(),
    };
    let mut finals = Vec::new();
    let mut records = Vec::new();
    for (rec, trace) in todo.into_iter().zip(&traces) {
        match trace.termination {
            crate::refine::TerminationReason::ThresholdsMet => summary.thresholds_met += 1,
            crate::refine::TerminationReason::IterationCap => summary.iteration_cap += 1,
            crate::refine::TerminationReason::UnrecoverableError => summary.unrecoverable_error += 1,
        }
        if let Some(m) = trace.final_metrics() {
            finals.push(m.clone());
        }
        records.push(DatasetRecord::from_trace(rec.problem, trace));
    }
    if let Ok((t, r)) = aggregate_dataset(&finals) {
        summary.mean_tpr = Some(t);
        summary.mean_tnr = Some(r);
    }
    records.extend(passthrough);
    summary.dataset = dataset::export(&out.join("dataset.jsonl"), &records).map_err(Failure::runtime)?;
    write_json(Some(&out.join("summary.json")), &summary)?;
    eprintln!("problems / cases / correct / incorrect: {}", summary.dataset);
    if let (Some(t), Some(r)) = (summary.mean_tpr, summary.mean_tnr) {
        eprintln!("TPR {} TNR {}", format_percent(t), format_percent(r));
    }
    eprintln!("llm calls: {}, sandbox runs: {}", summary.llm_calls, summary.sandbox_runs);
    Ok(())
}

fn refine(cfg: &Config, args: &LoopArgs) -> Outcome {
    let records = read_records(cfg, &args.dataset)?;
    let (todo, passthrough): (Vec<DatasetRecord>, Vec<DatasetRecord>) =
        records.into_iter().partition(|r| r.status == RecordStatus::Ok);
    let existing: Vec<Option<LoopTrace>> = todo
        .iter()
        .map(|r| LoopTrace::load(&trace_path(&args.out, &r.problem.id)))
        .collect();
    let (todo, existing): (Vec<_>, Vec<_>) = todo
        .into_iter()
        .zip(existing)
        .filter_map(|(r, t)| match t {
            Some(t) => Some((r, t)),
            None => {
                eprintln!("warning: no trace for `{}`; run `generate` or `run` first", r.problem.id);
                None
            }
        })
        .unzip();
    if todo.is_empty() {
        return Err(Failure::input(format!(
            "no traces found under {}",
            args.out.join("traces").display()
        )));
    }
    let sandbox = build_sandbox(cfg)?;
    let gateway = Gateway::new(build_provider(cfg)?, cfg.gateway.clone());
    let idx: Vec<usize> = (0..todo.len()).collect();
    let traces = parallel_map(&idx, cfg.run.problem_workers, |&i| {
        let p = &todo[i].problem;
        let gw = gateway.fork();
        let refiner = Refiner {
            sandbox: &sandbox,
            gateway: &gw,
            cfg: &cfg.loop_,
        };
        let trace = refiner.refine_once(p, &existing[i]);
        if let Err(e) = trace.save(&trace_path(&args.out, &p.id)) {
            tracing::error!(problem = %p.id, error = %e, "cannot save trace");
        }
        trace
    });
    let calls = gateway.total_calls();
    let stats = sandbox.stats();
    finish(&args.out, todo, traces, passthrough, 0, calls, stats)
}

fn evaluate_dataset(cfg: &Config, d: &DatasetIn, output: Option<&Path>, traces: Option<&Path>) -> Outcome {
    let records: Vec<DatasetRecord> = read_records(cfg, d)?
        .into_iter()
        .filter(|r| r.status == RecordStatus::Ok && !r.suite.is_empty())
        .collect();
    if records.is_empty() {
        return Err(Failure::input("no problems with a synthesized suite"));
    }
    let sandbox = build_sandbox(cfg)?;
    let results = parallel_map(&records, cfg.run.problem_workers, |r| {
        let checker_src = match (traces, cfg.loop_.mode) {
            (Some(dir), LoopMode::Auto | LoopMode::Checker) => LoopTrace::load(&dir.join(trace_file_name(&r.problem.id)))
                .and_then(|t| t.last().and_then(|s| s.state.checker_source.clone())),
            _ => None,
        };
        let checker = match checker_src {
            Some(src) => sandbox
                .compile(&src, &cfg.loop_.generator_language)?
                .artifact()
                .cloned(),
            None => None,
        };
        let comparison = match &checker {
            Some(c) => Comparison::Checker {
                checker: c,
                limits: cfg.loop_.checker_limits,
            },
            None => Comparison::String,
        };
        let eval = evaluate(&sandbox, &r.problem, &r.suite, comparison)?;
        Ok::<_, Box<dyn std::error::Error + Send + Sync>>(eval)
    });
    let mut exports = Vec::new();
    let mut evals = Vec::new();
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(eval) => {
                exports.push(EvaluationExport::new(&r.problem.id, r.suite.len(), &eval));
                evals.push(eval);
            }
            Err(e) => eprintln!("warning: `{}` not evaluated: {e}", r.problem.id),
        }
    }
    if evals.is_empty() {
        return Err(Failure::input("no problem could be evaluated"));
    }
    let (t, r) = match cfg.analytics.averaging {
        Averaging::Macro => aggregate_dataset(&evals.iter().map(|e| e.metrics.clone()).collect::<Vec<_>>()),
        Averaging::Micro => aggregate_micro(&evals),
    }
    .map_err(Failure::runtime)?;
    eprintln!("{} problems: TPR {} TNR {}", evals.len(), format_percent(t), format_percent(r));
    write_json(output, &exports)
}

/// Loads exports from a file (export, array, or trace) or a directory of
/// traces. Traces contribute their final iteration.
pub fn load_exports(input: &Path) -> Result<Vec<EvaluationExport>, String> {
    let from_value = |v: serde_json::Value| -> Result<Vec<EvaluationExport>, String> {
        if v.is_array() {
            return serde_json::from_value(v).map_err(|e| e.to_string());
        }
        if v.get("snapshots").is_some() {
            let t: LoopTrace = serde_json::from_value(v).map_err(|e| e.to_string())?;
            return Ok(t.last().map(|s| s.export(&t.problem_id)).into_iter().collect());
        }
        serde_json::from_value(v).map(|e| vec![e]).map_err(|e| e.to_string())
    };
    let read = |p: &Path| -> Result<Vec<EvaluationExport>, String> {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        let v = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
        from_value(v).map_err(|e| format!("{}: {e}", p.display()))
    };
    if input.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| format!("{}: {e}", input.display()))?
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for p in paths {
            out.extend(read(&p)?);
        }
        Ok(out)
    } else {
        read(input)
    }
}

fn pareto(input: &Path, output: Option<&Path>, key: RankKey, gran: FrontierGranularity) -> Outcome {
    let exports = load_exports(input).map_err(Failure::input)?;
    let mut rows = Vec::new();
    let mut grids = Vec::new();
    for e in &exports {
        let grid = PassGrid::from_export(e).map_err(Failure::input)?;
        match pareto_frontier(&grid, key) {
            Ok(points) => {
                rows.push((e.problem_id.clone(), points));
                grids.push(grid);
            }
            Err(err) => eprintln!("warning: `{}` skipped: {err}", e.problem_id),
        }
    }
    if grids.is_empty() {
        return Err(Failure::input("no evaluation with cases and non-empty pools"));
    }
    if grids.len() > 1 {
        rows.push(("dataset".into(), dataset_frontier(&grids, key, gran).map_err(Failure::runtime)?));
    }
    write_text(output, &frontier_csv(&rows))
}

fn report(dir: &Path, output: Option<&Path>) -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let traces: Vec<LoopTrace> = paths.iter().filter_map(|p| LoopTrace::load(p)).collect();
    let rows = iteration_progression(&traces).map_err(Failure::input)?;
    let finals: Vec<_> = traces.iter().filter_map(|t| t.final_metrics().cloned()).collect();
    if let Ok((t, r)) = aggregate_dataset(&finals) {
        eprintln!("{} traces, final TPR {} TNR {}", traces.len(), format_percent(t), format_percent(r));
    }
    write_text(output, &progression_csv(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with(["tcforge", "evaluate"]), 2);
        assert_eq!(main_with(["tcforge", "frobnicate"]), 2);
        assert_eq!(main_with(["tcforge", "run", "--bogus"]), 2);
    }

    #[test]
    fn global_flags_override_config() {
        let cli = Cli::try_parse_from(["tcforge", "run", "-i", "x", "-o", "y", "--n-max", "0", "--alpha", "0.5"]).unwrap();
        let cfg = load_config(&cli.global).unwrap();
        assert_eq!(cfg.loop_.n_max, 0);
        assert_eq!(cfg.loop_.alpha, 0.5);
    }

    #[test]
    fn bad_threshold_is_a_config_error() {
        let cli = Cli::try_parse_from(["tcforge", "run", "-i", "x", "-o", "y", "--beta", "2"]).unwrap();
        assert_eq!(load_config(&cli.global).unwrap_err().code, 3);
    }

    #[test]
    fn trace_names_are_file_safe() {
        assert_eq!(trace_file_name("1000/A b"), "1000_A_b.json");
    }
}
