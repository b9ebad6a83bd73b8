//! Command-line front end. Parsed arguments resolve into an [`Invocation`]
//! plus a [`CaseConfig`]; both go into the run manifest so `replay` can run
//! the exact same command again.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tslg_core::config::{CaseConfig, CaseId};
use tslg_core::estimate::{EvaluationReport, StoppingRule};
use tslg_core::library::Library;
use tslg_core::ndd::EventRecord;

use crate::campaign::RunOptions;
use crate::cases::{GridCase, TreeCase};
use crate::io::{read_config, read_events, read_json, write_events, write_json, write_trace};
use crate::manifest::{manifest_path, FileDigest, RunManifest};
use crate::synth::synth_events;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_ORACLE_REFUSED: i32 = 4;

/// Bad arguments or inputs that do not fit together.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// The exhaustive oracle declined to enumerate.
#[derive(Debug)]
pub struct OracleRefusal(pub String);

impl fmt::Display for OracleRefusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for OracleRefusal {}

macro_rules! usage {
    ($($arg:tt)*) => { anyhow::Error::new(UsageError(format!($($arg)*))) };
}

#[derive(Debug, Parser)]
#[command(name = "tslg", version, about = "Scenario library generation and accelerated evaluation")]
pub struct Cli {
    /// Case configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for campaigns; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = "TSLG_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Args)]
pub struct CaseArg {
    /// cutin, highway_exit or car_following.
    #[arg(long)]
    pub case: Option<CaseId>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub case: CaseArg,
    /// Event CSV the exposure model is built from.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Enumerate every cell instead of searching (grid cases only).
    #[arg(long)]
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Ndd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    Exhaustive,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate synthetic naturalistic events.
    GenNdd {
        #[command(flatten)]
        case: CaseArg,
        /// Record count (car-following cases: points, each with one
        /// free-driving record).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a scenario library (grid search, or Q-table training for the
    /// car-following case).
    BuildLib(BuildArgs),
    /// Train the car-following Q-table library.
    TrainRl(BuildArgs),
    /// Run a library campaign, the naive baseline, or the exhaustive oracle.
    Evaluate {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
        /// Sample scenarios from the naturalistic exposure instead.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Compute the exact failure rate by enumeration.
        #[arg(long, value_enum, conflicts_with = "baseline")]
        oracle: Option<Oracle>,
        /// Report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Keep every k-th trace row (0 keeps none).
        #[arg(long, default_value_t = 1)]
        trace_every: u64,
        /// Cap on the number of tests.
        #[arg(long)]
        max_tests: Option<u64>,
    },
    /// Run the library campaign and the baseline; print the acceleration.
    Compare {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        lib: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_tests: Option<u64>,
    },
    /// Print library statistics.
    Inspect {
        #[arg(long)]
        lib: PathBuf,
    },
    /// Re-run a command from its manifest and check the outputs match.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Write the regenerated outputs here instead of their recorded
        /// paths.
        #[arg(long)]
        into: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Library,
    Naive,
    Exhaustive,
}

/// A fully resolved command; together with the config it determines every
/// output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    GenNdd {
        n: usize,
        out: PathBuf,
    },
    BuildLib {
        events: PathBuf,
        exhaustive: bool,
        out: PathBuf,
    },
    Evaluate {
        events: PathBuf,
        lib: Option<PathBuf>,
        mode: EvalMode,
        trace_every: u64,
        max_tests: Option<u64>,
        out: PathBuf,
        trace: Option<PathBuf>,
    },
    Compare {
        events: PathBuf,
        lib: PathBuf,
        max_tests: Option<u64>,
        out: PathBuf,
    },
}

impl Invocation {
    fn inputs(&self) -> Vec<&Path> {
        match self {
            Invocation::GenNdd { .. } => vec![],
            Invocation::BuildLib { events, .. } => vec![events],
            Invocation::Evaluate { events, lib, .. } => {
                let mut v: Vec<&Path> = vec![events];
                v.extend(lib.as_deref());
                v
            }
            Invocation::Compare { events, lib, .. } => vec![events, lib],
        }
    }

    /// Output paths; the first one names the manifest.
    fn outputs(&self) -> Vec<&Path> {
        match self {
            Invocation::GenNdd { out, .. } | Invocation::BuildLib { out, .. } | Invocation::Compare { out, .. } => {
                vec![out]
            }
            Invocation::Evaluate { out, trace, .. } => {
                let mut v: Vec<&Path> = vec![out];
                v.extend(trace.as_deref());
                v
            }
        }
    }

    /// The same command writing its outputs into `dir`.
    fn redirected(&self, dir: &Path) -> Invocation {
        let move_to = |p: &Path| dir.join(p.file_name().unwrap_or(p.as_os_str()));
        let mut inv = self.clone();
        match &mut inv {
            Invocation::GenNdd { out, .. } | Invocation::BuildLib { out, .. } | Invocation::Compare { out, .. } => {
                *out = move_to(out)
            }
            Invocation::Evaluate { out, trace, .. } => {
                *out = move_to(out);
                if let Some(t) = trace {
                    *t = move_to(t);
                }
            }
        }
        inv
    }
}

/// Stdout lines, exit code, and phase timings of one command.
pub struct Outcome {
    pub lines: Vec<String>,
    pub code: i32,
    pub timings: Vec<(String, f64)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            lines: Vec::new(),
            code: EXIT_OK,
            timings: Vec::new(),
        }
    }

    fn say(&mut self, line: String) {
        self.lines.push(line);
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((phase.into(), t.elapsed().as_secs_f64() * 1e3));
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CampaignFile {
    pub case: CaseId,
    pub method: EvalMode,
    pub report: EvaluationReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OracleFile {
    pub case: CaseId,
    pub cells: usize,
    pub truth: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareFile {
    pub case: CaseId,
    pub library: EvaluationReport,
    pub baseline: EvaluationReport,
    /// Baseline tests over library tests.
    pub acceleration: f64,
}

fn resolve_config(cli: &Cli, case: Option<CaseId>) -> Result<CaseConfig> {
    let mut cfg = match (&cli.config, case) {
        (Some(path), case) => {
            let cfg = read_config(path).map_err(|e| usage!("{:#}", e))?;
            if let Some(c) = case {
                if c != cfg.case {
                    return Err(usage!("--case {} disagrees with {} ({})", c, path.display(), cfg.case));
                }
            }
            cfg
        }
        (None, Some(case)) => CaseConfig::new(case),
        (None, None) => return Err(usage!("either --case or --config is required")),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn default_out(cli: &Cli, out: &Option<PathBuf>, name: String) -> PathBuf {
    out.clone().unwrap_or_else(|| cli.out_dir.join(name))
}

fn load_events(path: &Path, case: CaseId) -> Result<Vec<EventRecord>> {
    if !path.exists() {
        return Err(usage!("event file {} does not exist", path.display()));
    }
    read_events(path, case).map_err(|e| usage!("{:#}", e))
}

fn load_library(path: &Path, case: CaseId) -> Result<Library> {
    if !path.exists() {
        return Err(usage!("library file {} does not exist", path.display()));
    }
    let lib: Library = read_json(path)?;
    if lib.case() != case {
        return Err(usage!("{} holds a {} library, not {}", path.display(), lib.case(), case));
    }
    Ok(lib)
}

fn rule_for(cfg: &CaseConfig, max_tests: Option<u64>) -> StoppingRule {
    let mut rule = StoppingRule::for_case(cfg);
    if let Some(m) = max_tests {
        rule.max_tests = m;
    }
    rule
}

fn run_options(cfg: &CaseConfig, workers: usize, trace_every: u64) -> RunOptions {
    RunOptions {
        seed: cfg.seed,
        workers,
        trace_every,
        ..RunOptions::default()
    }
}

fn is_core_error(e: &anyhow::Error, pred: impl Fn(&tslg_core::Error) -> bool) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<tslg_core::Error>().is_some_and(&pred))
}

fn report_line(label: &str, r: &EvaluationReport) -> String {
    format!(
        "{}: n = {}, mu = {:.6e}, half-width = {:.4}, failures = {}, converged = {}",
        label, r.n, r.mu_hat, r.half_width, r.accidents, r.converged
    )
}

enum Case {
    Grid(GridCase),
    Tree(TreeCase),
}

fn open_case(cfg: &CaseConfig, events: &[EventRecord]) -> Result<Case> {
    Ok(match cfg.case {
        CaseId::CarFollowing => Case::Tree(TreeCase::from_events(cfg, events)?),
        _ => Case::Grid(GridCase::from_events(cfg, events)?),
    })
}

fn library_campaign(case: &Case, lib: &Library, rule: StoppingRule, opts: &RunOptions) -> Result<EvaluationReport> {
    let mismatch = |e: anyhow::Error| usage!("{:#}", e);
    match case {
        Case::Grid(g) => g
            .library_campaign(lib.as_grid().map_err(|e| usage!("{}", e))?, rule, opts)
            .map_err(mismatch),
        Case::Tree(t) => t
            .library_campaign(lib.as_tree().map_err(|e| usage!("{}", e))?, rule, opts)
            .map_err(mismatch),
    }
}

fn naive_campaign(case: &Case, rule: StoppingRule, opts: &RunOptions) -> EvaluationReport {
    match case {
        Case::Grid(g) => g.naive_campaign(rule, opts),
        Case::Tree(t) => t.naive_campaign(rule, opts),
    }
}

/// Runs a resolved command. Files are written; stdout lines are returned.
pub fn execute(inv: &Invocation, cfg: &CaseConfig, workers: usize) -> Result<Outcome> {
    let mut o = Outcome::new();
    for path in inv.outputs() {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    match inv {
        Invocation::GenNdd { n, out } => {
            let events = o.time("generate", || synth_events(cfg, *n, cfg.seed))?;
            o.time("write", || write_events(out, cfg.case, &events))?;
            o.say(format!("wrote {} {} records to {}", events.len(), cfg.case, out.display()));
        }
        Invocation::BuildLib { events, exhaustive, out } => {
            let ev = o.time("read", || load_events(events, cfg.case))?;
            let case = o.time("exposure", || open_case(cfg, &ev))?;
            let lib = match case {
                Case::Grid(g) => {
                    let lib = if *exhaustive {
                        o.time("enumerate", || g.exhaustive_library())?
                    } else {
                        let (lib, stats) = o.time("search", || g.build_library())?;
                        o.say(format!(
                            "search: {} descents, {} cells evaluated",
                            stats.descents, stats.evaluated
                        ));
                        lib
                    };
                    o.say(format!("library size = {}", lib.len()));
                    o.say(format!("gamma = {:.6e}", lib.gamma));
                    o.say(format!("W = {:.6e}", lib.w));
                    o.say(format!("coverage = {:.6e}", lib.coverage()));
                    Library::Grid(lib)
                }
                Case::Tree(t) => {
                    if *exhaustive {
                        return Err(usage!("--exhaustive applies to grid cases only"));
                    }
                    let [c, d, s] = t.zone_counts();
                    o.say(format!("zones: {} collision, {} dangerous, {} safe", c, d, s));
                    let lib = o.time("train", || t.train())?;
                    o.say(format!(
                        "td updates = {}, final max |delta| = {:.3e}",
                        lib.q_table.updates, lib.q_table.final_max_delta
                    ));
                    o.say(format!("P(S) estimate = {:.6e}", lib.p_s));
                    Library::Tree(lib)
                }
            };
            o.time("write", || write_json(out, &lib))?;
        }
        Invocation::Evaluate {
            events,
            lib,
            mode,
            trace_every,
            max_tests,
            out,
            trace,
        } => {
            let ev = o.time("read", || load_events(events, cfg.case))?;
            let case = o.time("exposure", || open_case(cfg, &ev))?;
            let rule = rule_for(cfg, *max_tests);
            let opts = run_options(cfg, workers, *trace_every);
            let report = match mode {
                EvalMode::Exhaustive => {
                    let Case::Grid(g) = &case else {
                        return Err(anyhow::Error::new(OracleRefusal(
                            "the car-following case has no enumerable scenario grid".into(),
                        )));
                    };
                    let truth = o.time("enumerate", || g.exhaustive_truth())?;
                    o.say(format!("exact failure rate = {:.12e}", truth));
                    write_json(
                        out,
                        &OracleFile {
                            case: cfg.case,
                            cells: g.space.total_count(),
                            truth,
                        },
                    )?;
                    return Ok(o);
                }
                EvalMode::Library => {
                    let path = lib.as_ref().ok_or_else(|| usage!("--lib is required for a library campaign"))?;
                    let library = load_library(path, cfg.case)?;
                    o.time("campaign", || library_campaign(&case, &library, rule, &opts))?
                }
                EvalMode::Naive => o.time("campaign", || naive_campaign(&case, rule, &opts)),
            };
            o.say(report_line(
                if *mode == EvalMode::Library { "library" } else { "baseline" },
                &report,
            ));
            if let Some(t) = trace {
                write_trace(t, &report.trace)?;
            }
            if !report.converged {
                o.code = EXIT_NOT_CONVERGED;
            }
            write_json(
                out,
                &CampaignFile {
                    case: cfg.case,
                    method: *mode,
                    report,
                },
            )?;
        }
        Invocation::Compare {
            events,
            lib,
            max_tests,
            out,
        } => {
            let ev = o.time("read", || load_events(events, cfg.case))?;
            let case = o.time("exposure", || open_case(cfg, &ev))?;
            let library = load_library(lib, cfg.case)?;
            let rule = rule_for(cfg, *max_tests);
            let opts = run_options(cfg, workers, 0);
            let l = o.time("library", || library_campaign(&case, &library, rule, &opts))?;
            let b = o.time("baseline", || naive_campaign(&case, rule, &opts));
            let acceleration = b.n as f64 / l.n as f64;
            o.say(report_line("library", &l));
            o.say(report_line("baseline", &b));
            o.say(format!("acceleration = {:.1}", acceleration));
            if !(l.converged && b.converged) {
                o.code = EXIT_NOT_CONVERGED;
            }
            write_json(
                out,
                &CompareFile {
                    case: cfg.case,
                    library: l,
                    baseline: b,
                    acceleration,
                },
            )?;
        }
    }
    Ok(o)
}

/// Executes and writes the manifest next to the first output.
fn execute_recorded(inv: Invocation, cfg: CaseConfig, workers: usize) -> Result<Outcome> {
    let mut m = RunManifest::new(inv.clone(), cfg.clone(), workers);
    for p in inv.inputs() {
        m.inputs.push(FileDigest::of(p).map_err(|e| usage!("{:#}", e))?);
    }
    let o = execute(&inv, &cfg, workers)?;
    for p in inv.outputs() {
        if p.exists() {
            m.outputs.push(FileDigest::of(p)?);
        }
    }
    m.timings_ms = o.timings.iter().cloned().collect();
    write_json(&manifest_path(inv.outputs()[0]), &m)?;
    Ok(o)
}

fn inspect(path: &Path) -> Result<Outcome> {
    if !path.exists() {
        return Err(usage!("library file {} does not exist", path.display()));
    }
    let lib: Library = read_json(path)?;
    let mut o = Outcome::new();
    o.say(format!("case = {}", lib.case()));
    match &lib {
        Library::Grid(g) => {
            o.say(format!("cells = {} of {}", g.len(), g.space.total_count()));
            o.say(format!("gamma = {:.6e}", g.gamma));
            o.say(format!("W = {:.6e}", g.w));
            o.say(format!("coverage = {:.6e}", g.coverage()));
            let mut top = g.entries.clone();
            top.sort_by(|a, b| b.v.total_cmp(&a.v).then(a.cell.cmp(&b.cell)));
            for e in top.iter().take(5) {
                let x = g.space.point(e.cell)?;
                o.say(format!("  cell {} at {:?}: V = {:.6e}", e.cell, x, e.v));
            }
        }
        Library::Tree(t) => {
            let zones = t.zone_list()?;
            let count = |c| zones.iter().filter(|&&z| z == c).count();
            use tslg_core::mdp::Zone;
            o.say(format!(
                "states = {} ({} collision, {} dangerous, {} safe)",
                zones.len(),
                count(Zone::Collision),
                count(Zone::Dangerous),
                count(Zone::Safe)
            ));
            o.say(format!("actions = {}", t.actions.total_count()));
            o.say(format!("horizon = {}", t.horizon));
            o.say(format!(
                "td updates = {}, final max |delta| = {:.3e}",
                t.q_table.updates, t.q_table.final_max_delta
            ));
            o.say(format!("P(S) estimate = {:.6e}", t.p_s));
        }
    }
    Ok(o)
}

fn replay(path: &Path, into: Option<&Path>, workers: Option<usize>) -> Result<Outcome> {
    if !path.exists() {
        return Err(usage!("manifest {} does not exist", path.display()));
    }
    let m: RunManifest = read_json(path)?;
    for d in &m.inputs {
        let now = FileDigest::of(&d.path).map_err(|e| usage!("{:#}", e))?;
        if now.sha256 != d.sha256 {
            return Err(usage!("input {} changed since the recorded run", d.path.display()));
        }
    }
    let inv = match into {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            m.invocation.redirected(dir)
        }
        None => m.invocation.clone(),
    };
    let mut o = execute(&inv, &m.config, workers.unwrap_or(m.workers))?;
    let mut all_same = true;
    for (new, old) in inv.outputs().into_iter().zip(&m.outputs) {
        let same = FileDigest::of(new)?.sha256 == old.sha256;
        all_same &= same;
        o.say(format!(
            "{} {}",
            if same { "identical" } else { "DIFFERS" },
            new.display()
        ));
    }
    if !all_same {
        o.code = EXIT_FAILURE;
    }
    Ok(o)
}

/// Parses `cli` into a command and runs it.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let case_of = |c: &CaseArg| resolve_config(cli, c.case);
    match &cli.cmd {
        Cmd::GenNdd { case, n, out } => {
            let cfg = case_of(case)?;
            let n = n.unwrap_or(cfg.ndd.default_events(cfg.case));
            if n == 0 {
                return Err(usage!("--n must be positive"));
            }
            let out = default_out(cli, out, format!("events-{}.csv", cfg.case));
            execute_recorded(Invocation::GenNdd { n, out }, cfg, cli.workers)
        }
        Cmd::BuildLib(a) | Cmd::TrainRl(a) => {
            let train = matches!(cli.cmd, Cmd::TrainRl(_));
            let cfg = resolve_config(cli, a.case.case.or(train.then_some(CaseId::CarFollowing)))?;
            if train && cfg.case != CaseId::CarFollowing {
                return Err(usage!("train-rl builds the car-following library; use build-lib for {}", cfg.case));
            }
            let out = default_out(cli, &a.out, format!("lib-{}.json", cfg.case));
            let inv = Invocation::BuildLib {
                events: a.events.clone(),
                exhaustive: a.exhaustive,
                out,
            };
            execute_recorded(inv, cfg, cli.workers)
        }
        Cmd::Evaluate {
            case,
            events,
            lib,
            baseline,
            oracle,
            out,
            trace,
            trace_every,
            max_tests,
        } => {
            let cfg = case_of(case)?;
            let mode = match (baseline, oracle) {
                (_, Some(Oracle::Exhaustive)) => EvalMode::Exhaustive,
                (Some(Baseline::Ndd), _) => EvalMode::Naive,
                _ => EvalMode::Library,
            };
            let stem = match mode {
                EvalMode::Library => "library",
                EvalMode::Naive => "baseline",
                EvalMode::Exhaustive => "oracle",
            };
            let out = default_out(cli, out, format!("{}-{}.json", stem, cfg.case));
            let trace = match mode {
                EvalMode::Exhaustive => None,
                _ => Some(default_out(cli, trace, format!("{}-{}-trace.csv", stem, cfg.case))),
            };
            let inv = Invocation::Evaluate {
                events: events.clone(),
                lib: if mode == EvalMode::Library { lib.clone() } else { None },
                mode,
                trace_every: *trace_every,
                max_tests: *max_tests,
                out,
                trace,
            };
            execute_recorded(inv, cfg, cli.workers)
        }
        Cmd::Compare {
            case,
            events,
            lib,
            out,
            max_tests,
        } => {
            let cfg = case_of(case)?;
            let out = default_out(cli, out, format!("compare-{}.json", cfg.case));
            let inv = Invocation::Compare {
                events: events.clone(),
                lib: lib.clone(),
                max_tests: *max_tests,
                out,
            };
            execute_recorded(inv, cfg, cli.workers)
        }
        Cmd::Inspect { lib } => inspect(lib),
        Cmd::Replay { manifest, into } => {
            let workers = (cli.workers > 0).then_some(cli.workers);
            replay(manifest, into.as_deref(), workers)
        }
    }
}

/// Exit code for an error that stopped a command.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.chain().any(|c| c.is::<UsageError>()) {
        EXIT_USAGE
    } else if e.chain().any(|c| c.is::<OracleRefusal>())
        || is_core_error(e, |c| matches!(c, tslg_core::Error::TooLarge { .. }))
    {
        EXIT_ORACLE_REFUSED
    } else if is_core_error(e, |c| matches!(c, tslg_core::Error::NotConverged { .. })) {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_FAILURE
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            for l in &o.lines {
                println!("{}", l);
            }
            o.code
        }
        Err(e) => {
            eprintln!("tslg: {:#}", e);
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redirect_keeps_file_names() {
        let inv = Invocation::Evaluate {
            events: "in/e.csv".into(),
            lib: Some("in/lib.json".into()),
            mode: EvalMode::Library,
            trace_every: 1,
            max_tests: None,
            out: "a/report.json".into(),
            trace: Some("b/trace.csv".into()),
        };
        let r = inv.redirected(Path::new("z"));
        assert_eq!(r.outputs(), vec![Path::new("z/report.json"), Path::new("z/trace.csv")]);
        assert_eq!(r.inputs(), inv.inputs());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&usage!("x")), EXIT_USAGE);
        let e = anyhow::Error::new(tslg_core::Error::TooLarge { cells: 2, cap: 1 });
        assert_eq!(exit_code(&e), EXIT_ORACLE_REFUSED);
        assert_eq!(exit_code(&e.context("while enumerating")), EXIT_ORACLE_REFUSED);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), EXIT_FAILURE);
    }

    #[test]
    fn case_flag_must_match_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, crate::io::config_to_toml(&CaseConfig::new(CaseId::Cutin)).unwrap()).unwrap();
        let cli = Cli::parse_from(["tslg", "--config", p.to_str().unwrap(), "gen-ndd", "--case", "highway_exit"]);
        let Cmd::GenNdd { case, .. } = &cli.cmd else { unreachable!() };
        assert_eq!(exit_code(&resolve_config(&cli, case.case).unwrap_err()), EXIT_USAGE);
    }
}
