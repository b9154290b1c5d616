//! Command-line driver: `check`, `corpus` and `rules`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use regex::Regex;
use thiserror::Error;
use walkdir::WalkDir;

use crate::analyses::{RuleId, UnknownRule, Warning};
use crate::frontend::DEFAULT_MAX_ITERATIONS;
use crate::pipeline::analyze;
use crate::qir::GateTable;
use crate::report::{self, FileReport, Report, SkippedFile, Style};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_WARNINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qlint", version, about = "Static bug finder for Qiskit programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze files or directories and print warnings.
    Check(CheckArgs),
    /// Analyze every .py file under a directory and write per-rule statistics.
    Corpus(CorpusArgs),
    /// List the rule catalog.
    Rules,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Default,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Sarif,
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// Rule profile to start from.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Rules to enable on top of the profile (comma separated).
    #[arg(long, value_delimiter = ',')]
    select: Vec<String>,
    /// Rules to turn off (comma separated).
    #[arg(long, value_delimiter = ',')]
    disable: Vec<String>,
    /// Loop iterations to unroll before a loop is treated as opaque.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_unroll: usize,
    /// Replacement gate table (tab or space separated, five columns).
    #[arg(long, value_name = "FILE")]
    gate_spec: Option<PathBuf>,
    /// Worker threads; 1 analyzes files sequentially.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also print the per-qubit operator timelines of each file.
    #[arg(long)]
    dump_flow: bool,
    #[command(flatten)]
    rules: RuleArgs,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    dir: PathBuf,
    #[arg(long, value_name = "OUT.csv")]
    stats: PathBuf,
    #[command(flatten)]
    rules: RuleArgs,
}

/// Resolved options shared by `check` and `corpus`.
#[derive(Clone, Debug)]
pub struct Config {
    pub paths: Vec<PathBuf>,
    pub profile: Profile,
    pub selected: BTreeSet<RuleId>,
    pub disabled: BTreeSet<RuleId>,
    pub format: Format,
    pub max_unroll: usize,
    pub gate_spec: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub dump_flow: bool,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    UnknownRule(#[from] UnknownRule),
    #[error("rule `{0}` is both selected and disabled")]
    Conflict(RuleId),
}

impl Config {
    pub fn new(profile: Profile, selected: &[String], disabled: &[String]) -> Result<Self, ConfigError> {
        let parse = |ids: &[String]| -> Result<BTreeSet<RuleId>, UnknownRule> {
            ids.iter()
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect()
        };
        let selected = parse(selected)?;
        let disabled = parse(disabled)?;
        if let Some(r) = selected.intersection(&disabled).next() {
            return Err(ConfigError::Conflict(*r));
        }
        Ok(Config {
            paths: Vec::new(),
            profile,
            selected,
            disabled,
            format: Format::Text,
            max_unroll: DEFAULT_MAX_ITERATIONS,
            gate_spec: None,
            stats: None,
            jobs: None,
            dump_flow: false,
        })
    }

    /// (profile ∪ selected) \ disabled
    pub fn effective_rules(&self) -> BTreeSet<RuleId> {
        let base: &[RuleId] = match self.profile {
            Profile::Default => &RuleId::DEFAULT,
            Profile::All => &RuleId::ALL,
        };
        base.iter()
            .chain(&self.selected)
            .filter(|r| !self.disabled.contains(r))
            .copied()
            .collect()
    }

    fn from_rule_args(args: &RuleArgs, default_profile: Profile) -> Result<Self, ConfigError> {
        let mut c = Config::new(args.profile.unwrap_or(default_profile), &args.select, &args.disable)?;
        c.max_unroll = args.max_unroll;
        c.gate_spec = args.gate_spec.clone();
        c.jobs = args.jobs;
        Ok(c)
    }
}

fn ignore_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^#\s*qlint:\s*ignore(?:\[([^\]]*)\])?").unwrap())
}

/// The trailing comment of a source line, skipping `#` inside string literals.
fn comment_of(line: &str) -> Option<&str> {
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, ch) in line.char_indices() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if ch == '\\' {
                    escaped = true;
                } else if ch == q {
                    quote = None;
                }
            }
            None => match ch {
                '\'' | '"' => quote = Some(ch),
                '#' => return Some(&line[i..]),
                _ => {}
            },
        }
    }
    None
}

/// Rules silenced on a line: `None` when nothing is, `Some(None)` for a bare
/// `# qlint: ignore`.
fn ignored_on(line: &str) -> Option<Option<Vec<&str>>> {
    let comment = comment_of(line)?;
    let caps = ignore_regex().captures(comment)?;
    Some(caps.get(1).map(|m| m.as_str().split(',').map(str::trim).collect()))
}

/// Drops warnings whose line carries a matching `# qlint: ignore` comment.
pub fn suppress(warnings: Vec<Warning>, source: &str) -> Vec<Warning> {
    let lines: Vec<&str> = source.lines().collect();
    warnings
        .into_iter()
        .filter(|w| {
            let Some(line) = lines.get(w.span.line.saturating_sub(1) as usize) else {
                return true;
            };
            match ignored_on(line) {
                None => true,
                Some(None) => false,
                Some(Some(ids)) => !ids.contains(&w.rule.as_str()),
            }
        })
        .collect()
}

/// Expands directories into their `.py` files, sorted. Missing paths are
/// errors.
pub fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut out = BTreeSet::new();
    for p in paths {
        if p.is_dir() {
            for entry in WalkDir::new(p).sort_by_file_name() {
                let entry = entry.map_err(|e| format!("{}: {e}", p.display()))?;
                if entry.file_type().is_file()
                    && entry.path().extension().is_some_and(|x| x == "py")
                {
                    out.insert(entry.into_path());
                }
            }
        } else if p.is_file() {
            out.insert(p.clone());
        } else {
            return Err(format!("{}: no such file or directory", p.display()));
        }
    }
    Ok(out.into_iter().collect())
}

enum Outcome {
    Analyzed(FileReport, Option<String>),
    Skipped(SkippedFile),
}

fn display_path(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn analyze_file(
    path: &Path,
    config: &Config,
    rules: &BTreeSet<RuleId>,
    gates: &GateTable,
) -> Result<Outcome, String> {
    let name = display_path(path);
    let bytes = std::fs::read(path).map_err(|e| format!("{name}: {e}"))?;
    let source = String::from_utf8_lossy(&bytes);
    match analyze(&source, &name, config.max_unroll, gates) {
        Ok(a) => {
            let warnings = suppress(a.warnings(rules), &source);
            let dump = config.dump_flow.then(|| a.flow.dump(&a.ir));
            Ok(Outcome::Analyzed(
                FileReport {
                    file: name,
                    warnings,
                },
                dump,
            ))
        }
        Err(e) => Ok(Outcome::Skipped(SkippedFile {
            file: name,
            line: e.line,
            message: e.message,
        })),
    }
}

/// Analyzes files independently, in parallel unless `jobs` is 1, and merges
/// the results in a fixed order. Returns the report and any flow dumps.
pub fn analyze_files(
    files: &[PathBuf],
    config: &Config,
    gates: &GateTable,
) -> Result<(Report, Vec<String>), String> {
    let rules = config.effective_rules();
    let run = || -> Result<Vec<Outcome>, String> {
        if config.jobs == Some(1) {
            files.iter().map(|f| analyze_file(f, config, &rules, gates)).collect()
        } else {
            files.par_iter().map(|f| analyze_file(f, config, &rules, gates)).collect()
        }
    };
    let outcomes = match config.jobs {
        Some(n) if n > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| e.to_string())?
            .install(run)?,
        _ => run()?,
    };
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let mut dumps = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Analyzed(r, dump) => {
                dumps.extend(dump);
                reports.push(r);
            }
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    Ok((Report::new(reports, skipped), dumps))
}

fn load_gates(config: &Config) -> Result<GateTable, String> {
    match &config.gate_spec {
        None => Ok(GateTable::bundled_ref().clone()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            GateTable::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn report_skipped(report: &Report, err: &mut dyn Write) {
    for s in &report.files_skipped {
        let _ = writeln!(err, "qlint: skipped {}:{}: {}", s.file, s.line, s.message);
    }
}

fn check(args: CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let mut config = Config::from_rule_args(&args.rules, Profile::Default).map_err(|e| e.to_string())?;
    config.paths = args.paths;
    config.format = args.format;
    config.dump_flow = args.dump_flow;
    let gates = load_gates(&config)?;
    let files = collect_files(&config.paths)?;
    let (report, dumps) = analyze_files(&files, &config, &gates)?;
    report_skipped(&report, err);
    for d in dumps {
        let _ = out.write_all(d.as_bytes());
    }
    let style = match config.format {
        Format::Text => Style::Text,
        Format::Json => Style::Json,
        Format::Sarif => Style::Sarif,
    };
    out.write_all(report::format(&report, style).as_bytes())
        .map_err(|e| e.to_string())?;
    Ok(if report.warning_count() > 0 {
        EXIT_WARNINGS
    } else {
        EXIT_CLEAN
    })
}

fn corpus(args: CorpusArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let mut config = Config::from_rule_args(&args.rules, Profile::All).map_err(|e| e.to_string())?;
    if !args.dir.is_dir() {
        return Err(format!("{}: not a directory", args.dir.display()));
    }
    config.paths = vec![args.dir];
    config.stats = Some(args.stats.clone());
    let gates = load_gates(&config)?;
    let files = collect_files(&config.paths)?;
    let (report, _) = analyze_files(&files, &config, &gates)?;
    report_skipped(&report, err);
    let rows = report::corpus_stats(std::slice::from_ref(&report)).map_err(|e| e.to_string())?;
    let csv = report::stats_csv(&rows);
    std::fs::write(&args.stats, &csv).map_err(|e| format!("{}: {e}", args.stats.display()))?;
    let _ = writeln!(
        out,
        "{} files analyzed, {} skipped, {} warnings; statistics written to {}",
        report.files_analyzed,
        report.files_skipped.len(),
        report.warning_count(),
        args.stats.display()
    );
    Ok(EXIT_CLEAN)
}

fn rules(out: &mut dyn Write) {
    for r in RuleId::ALL {
        let state = if r.is_default() { "default" } else { "opt-in" };
        let _ = writeln!(out, "{:<18} {:<8} {}", r.as_str(), state, r.description());
    }
}

/// Runs the tool with `argv` (including the program name) and returns the
/// exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_ERROR
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_CLEAN
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check(a) => check(a, out, err),
        Command::Corpus(a) => corpus(a, out, err),
        Command::Rules => {
            rules(out);
            Ok(EXIT_CLEAN)
        }
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "qlint: error: {msg}");
            if msg.contains("unknown rule id") || msg.contains("both selected and disabled") {
                let _ = writeln!(err, "usage: qlint check <PATHS>... [--select IDS] [--disable IDS]; see `qlint rules`");
            }
            EXIT_ERROR
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_with(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}
