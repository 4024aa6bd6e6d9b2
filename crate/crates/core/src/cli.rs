//! Command-line front end. Exit codes: 0 ok, 1 analysis negative,
//! 2 usage, I/O or parse error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bisim::{log_time, Analysis, WeightScheme};
use crate::costlab::{self, MatrixKind, NumberStyle, PairAverage, SweepConfig, SweepError};
use crate::lang::{parse_program, render_program, Program, Prob};
use crate::padding::{pad_program, PadOptions};
use crate::rational::{self, exact, Rational};
use crate::sectype::{check_program, CheckOptions};
use crate::semantics::{collapse, program_tree, CostModel, Env, DEFAULT_DEPTH_BOUND};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "timeleak", version, about = "Timing-leak analysis for a small probabilistic language")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Type-check a program; exit 1 if it is not typeable.
    Check(CheckArgs),
    /// Print the (collapsed) execution tree for one initial state.
    Tree(TreeArgs),
    /// Leakage estimate between two high states.
    Delta(DeltaArgs),
    /// Insert probabilistic padding at high-guarded conditionals.
    Pad(PadArgs),
    /// Sweep the padding probability and report runtimes, leakage and cost.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Uniform,
    Classmatch,
    Logtime,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Named cost profile.
    #[arg(long, default_value = "paper-trees", value_parser = ["paper-trees", "paper-stated", "unit"])]
    pub profile: String,
    #[arg(long, value_name = "R", value_parser = parse_rational)]
    pub t_e: Option<Rational>,
    #[arg(long, value_name = "R", value_parser = parse_rational)]
    pub t_x: Option<Rational>,
    #[arg(long, value_name = "R", value_parser = parse_rational)]
    pub t_asn: Option<Rational>,
    #[arg(long, value_name = "R", value_parser = parse_rational)]
    pub t_br: Option<Rational>,
    #[arg(long, value_name = "R", value_parser = parse_rational)]
    pub t_ch: Option<Rational>,
    #[arg(long, value_name = "R", value_parser = parse_rational)]
    pub t_skip: Option<Rational>,
    /// Maximum number of small steps along any run.
    #[arg(long, default_value_t = DEFAULT_DEPTH_BOUND)]
    pub depth_bound: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub path: PathBuf,
    /// Low initial state, e.g. `i=1`.
    #[arg(long, default_value = "")]
    pub low: String,
    /// High domain used to probe the semantic side condition, e.g. `k=all3`.
    #[arg(long)]
    pub high: Vec<String>,
    /// Value for the probability parameter of a parametric program.
    #[arg(long, value_parser = parse_rational)]
    pub p: Option<Rational>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    pub path: PathBuf,
    #[arg(long, default_value = "")]
    pub low: String,
    /// High state: `k=011` or a bare value for the only high array.
    #[arg(long, default_value = "")]
    pub high: String,
    #[arg(long, value_parser = parse_rational)]
    pub p: Option<Rational>,
    /// Print the uncollapsed small-step tree.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Output file, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DeltaArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub k1: String,
    #[arg(long)]
    pub k2: String,
    #[arg(long, default_value = "")]
    pub low: String,
    #[arg(long, value_parser = parse_rational)]
    pub p: Option<Rational>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub weights: Weights,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PadArgs {
    pub path: PathBuf,
    /// Padding probability; left symbolic (`p`) when omitted.
    #[arg(long, value_parser = parse_rational)]
    pub p: Option<Rational>,
    /// Let `p` select the original code instead of the padded one.
    #[arg(long)]
    pub original_on_p: bool,
    /// Where the padded program goes, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Where the JSON report of padded sites goes; standard error if omitted.
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub path: PathBuf,
    /// High domain, e.g. `k=all3`; repeat for a product domain.
    #[arg(long, required = true)]
    pub high: Vec<String>,
    #[arg(long, default_value = "")]
    pub low: String,
    /// `start:stop:step` or a comma list.
    #[arg(long, default_value = "0:1:1/10")]
    pub grid: String,
    #[arg(long, default_value = "6", value_parser = parse_rational)]
    pub alpha: Rational,
    /// Average δ′ over all ordered pairs including the zero diagonal.
    #[arg(long)]
    pub with_diagonal: bool,
    /// Let `p` select the original code when padding on the fly.
    #[arg(long)]
    pub original_on_p: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output directory for the CSV files, `-` for the summary on standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Parse(String),
    Negative(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Negative(_) => EXIT_NEGATIVE,
            _ => EXIT_ERROR,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Parse(m) | CliError::Negative(m) => m,
        }
    }
}

type Res<T> = Result<T, CliError>;

fn usage(m: impl ToString) -> CliError {
    CliError::Usage(m.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn cost_model(m: &ModelArgs) -> Res<CostModel> {
    let mut cm = CostModel::profile(&m.profile).ok_or_else(|| usage(format!("unknown profile {}", m.profile)))?;
    let overrides = [
        (&m.t_e, &mut cm.t_e),
        (&m.t_x, &mut cm.t_x),
        (&m.t_asn, &mut cm.t_asn),
        (&m.t_br, &mut cm.t_br),
        (&m.t_ch, &mut cm.t_ch),
        (&m.t_skip, &mut cm.t_skip),
    ];
    for (given, slot) in overrides {
        if let Some(v) = given {
            *slot = v.clone();
        }
    }
    if !cm.is_valid() {
        return Err(usage("durations must be non-negative"));
    }
    Ok(cm)
}

fn load(path: &Path) -> Res<Program> {
    let src = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_program(&src).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Binds `p` if given; any parameter left unbound is a usage error.
fn bind(prog: Program, p: &Option<Rational>) -> Res<Program> {
    let prog = match p {
        Some(v) => {
            if !rational::is_probability(v) {
                return Err(usage(format!("--p {} is not in [0,1]", exact(v))));
            }
            prog.params().iter().fold(prog.clone(), |acc, name| acc.bind(name, v))
        }
        None => prog,
    };
    match prog.params().into_iter().next() {
        Some(name) => Err(usage(format!("probability parameter `{name}` is unbound; pass --p"))),
        None => Ok(prog),
    }
}

fn low_env(prog: &Program, text: &str) -> Res<Env> {
    costlab::parse_env(prog, text).map_err(usage)
}

fn high_env(prog: &Program, text: &str) -> Res<Env> {
    if text.trim().is_empty() {
        return Ok(Env::new());
    }
    costlab::parse_high_env(prog, text).map_err(usage)
}

fn only(format: Format, allowed: &[Format]) -> Res<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(usage(format!("format {format:?} not supported here").to_lowercase()))
    }
}

fn emit(target: &str, text: &str, stdout: &mut dyn Write) -> Res<()> {
    if target == "-" {
        stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
    } else {
        fs::write(target, text).map_err(|e| io_err(Path::new(target), e))
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Res<()> {
    only(a.format, &[Format::Json, Format::Text])?;
    let prog = bind(load(&a.path)?, &a.p)?;
    let low = low_env(&prog, &a.low)?;
    let probes = if a.high.is_empty() {
        vec![low]
    } else {
        let dom = costlab::parse_high_domain(&prog, &a.high).map_err(usage)?;
        dom.envs.iter().map(|h| low.merged(h)).collect()
    };
    let opts = CheckOptions {
        cm: cost_model(&a.model)?,
        depth_bound: a.model.depth_bound,
        probes,
    };
    let report = check_program(&prog, &opts);
    let text = match a.format {
        Format::Json => pretty(&report),
        _ => {
            let mut s = String::new();
            if report.ok {
                s.push_str("typeable\n");
                if let Some(slice) = &report.low_slice {
                    s.push_str(&format!("low slice: {}\n", crate::lang::render_command(slice)));
                }
            }
            for f in &report.failures {
                s.push_str(&format!("{} {} [{:?}]: {}", f.location, f.rule, f.kind, f.reason));
                if let Some(d) = &f.delta {
                    s.push_str(&format!(" (delta {})", exact(d)));
                }
                s.push('\n');
            }
            s
        }
    };
    emit("-", &text, out)?;
    if report.ok {
        Ok(())
    } else {
        Err(CliError::Negative(format!("{} typing failure(s)", report.failures.len())))
    }
}

fn cmd_tree(a: &TreeArgs, out: &mut dyn Write) -> Res<()> {
    only(a.format, &[Format::Json, Format::Dot, Format::Text])?;
    let prog = bind(load(&a.path)?, &a.p)?;
    let cm = cost_model(&a.model)?;
    let env = Env::zeroed(&prog)
        .merged(&low_env(&prog, &a.low)?)
        .merged(&high_env(&prog, &a.high)?);
    let raw = program_tree(&prog, &env, &cm, a.model.depth_bound).map_err(|e| CliError::Negative(e.to_string()))?;
    let t = if a.raw { raw } else { collapse(&raw, &prog.low_vars()) };
    let text = match a.format {
        Format::Json => pretty(&t.to_json()),
        Format::Dot => t.to_dot(),
        _ => t.to_text(),
    };
    emit(&a.out, &text, out)
}

fn cmd_delta(a: &DeltaArgs, out: &mut dyn Write) -> Res<()> {
    only(a.format, &[Format::Json, Format::Text])?;
    let prog = bind(load(&a.path)?, &a.p)?;
    let cm = cost_model(&a.model)?;
    let base = Env::zeroed(&prog).merged(&low_env(&prog, &a.low)?);
    let mut an = Analysis::new();
    let mut ids = Vec::new();
    for h in [&a.k1, &a.k2] {
        let env = base.merged(&high_env(&prog, h)?);
        let t = crate::semantics::collapsed_tree(&prog, &env, &cm, a.model.depth_bound)
            .map_err(|e| CliError::Negative(e.to_string()))?;
        ids.push(an.add_tree(&t));
    }
    let scheme = match a.weights {
        Weights::Uniform => WeightScheme::Uniform,
        Weights::Classmatch => WeightScheme::ClassMatch,
        Weights::Logtime => WeightScheme::TimeRescale(log_time),
    };
    let r = an.delta(ids[0], ids[1], scheme);
    let text = match a.format {
        Format::Json => pretty(&json!({
            "weights": scheme.name(),
            "value": exact(&r.value),
            "decimal": rational::to_decimal(&r.value, costlab::DECIMAL_PLACES),
            "result": r,
        })),
        _ => {
            let mut s = format!("{}\n", exact(&r.value));
            if let Some(w) = &r.witness {
                s.push_str(&format!("witness: {}\n", serde_json::to_string(w).expect("serializable")));
            }
            s
        }
    };
    emit("-", &text, out)
}

fn cmd_pad(a: &PadArgs, out: &mut dyn Write, err: &mut dyn Write) -> Res<()> {
    let prog = load(&a.path)?;
    let p = match &a.p {
        Some(v) if !rational::is_probability(v) => return Err(usage(format!("--p {} is not in [0,1]", exact(v)))),
        Some(v) => Prob::Lit(v.clone()),
        None => Prob::Param("p".into()),
    };
    if let Prob::Param(name) = &p {
        if prog.params().contains(name) {
            return Err(usage("program already uses parameter `p`; pass --p"));
        }
    }
    let opts = PadOptions {
        p,
        p_is_pad_prob: !a.original_on_p,
    };
    let (padded, report) = pad_program(&prog, &opts).map_err(|e| CliError::Negative(e.to_string()))?;
    emit(&a.out, &render_program(&padded), out)?;
    let report = pretty(&report);
    match &a.report {
        Some(target) => emit(target, &report, out),
        None => err.write_all(report.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn file_tag(p: &Rational) -> String {
    exact(p).replace('/', "-")
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Res<()> {
    only(a.format, &[Format::Csv, Format::Json])?;
    let prog = load(&a.path)?;
    let grid = costlab::parse_grid(&a.grid).map_err(usage)?;
    let high = costlab::parse_high_domain(&prog, &a.high).map_err(usage)?;
    let mut cfg = SweepConfig::new(prog.clone(), high);
    cfg.low_env = low_env(&prog, &a.low)?;
    cfg.grid = grid;
    cfg.alpha = a.alpha.clone();
    cfg.cm = cost_model(&a.model)?;
    cfg.depth_bound = a.model.depth_bound;
    cfg.p_is_pad_prob = !a.original_on_p;
    cfg.average = if a.with_diagonal {
        PairAverage::WithDiagonal
    } else {
        PairAverage::Distinct
    };
    let records = costlab::sweep(&cfg).map_err(|e| match e {
        SweepError::Spec(_) | SweepError::UnboundParam(_) | SweepError::EmptyDomain => usage(e),
        other => CliError::Negative(other.to_string()),
    })?;
    let curve = costlab::cost_curve(&records).ok_or_else(|| usage("empty grid"))?;
    let argmin_line = format!(
        "argmin p = {} ({}), cost = {} ({})\n",
        exact(&curve.argmin),
        rational::to_decimal(&curve.argmin, costlab::DECIMAL_PLACES),
        exact(&curve.min_cost),
        rational::to_decimal(&curve.min_cost, costlab::DECIMAL_PLACES)
    );
    let labels = &cfg.high.labels;
    if a.format == Format::Json {
        let doc = json!({"keys": labels, "alpha": exact(&a.alpha), "records": records, "curve": curve});
        emit(&a.out, &pretty(&doc), out)?;
        return err.write_all(argmin_line.as_bytes()).map_err(|e| CliError::Io(e.to_string()));
    }
    if a.out == "-" {
        emit("-", &costlab::summary_csv(&records), out)?;
        return err.write_all(argmin_line.as_bytes()).map_err(|e| CliError::Io(e.to_string()));
    }
    let dir = PathBuf::from(&a.out);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let write = |name: String, text: String| fs::write(dir.join(&name), text).map_err(|e| io_err(&dir.join(name), e));
    write("summary.csv".into(), costlab::summary_csv(&records))?;
    write("runtimes.csv".into(), costlab::runtimes_csv(&records, labels))?;
    for r in &records {
        for (kind, name) in [(MatrixKind::Delta, "delta"), (MatrixKind::DeltaPrime, "dprime")] {
            for (style, suffix) in [(NumberStyle::Exact, ""), (NumberStyle::Decimal, "_dec")] {
                let doc = costlab::delta_matrix_report(&records, labels, &r.p, kind, style).expect("p is on the grid");
                write(format!("{name}_p{}{suffix}.csv", file_tag(&r.p)), doc)?;
            }
        }
    }
    emit("-", &argmin_line, out)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let result = match &cli.command {
        Cmd::Check(a) => cmd_check(a, out),
        Cmd::Tree(a) => cmd_tree(a, out),
        Cmd::Delta(a) => cmd_delta(a, out),
        Cmd::Pad(a) => cmd_pad(a, out, err),
        Cmd::Sweep(a) => cmd_sweep(a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
