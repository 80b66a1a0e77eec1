//! The `marginbn` command-line tool.
//!
//! Exit codes: 0 on success (a timed-out solve with an incumbent included),
//! 2 when the solver stopped without any incumbent, 1 on usage, input or
//! output errors. Log verbosity follows `MARGINBN_LOG` (env_logger syntax).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::classifier::{cross_validate, evaluate, BnClassifier, CvConfig, EvalReport};
use crate::coefficients::{gamma_from_p, ScoreKind, DEFAULT_P_GRID};
use crate::data::{load_csv, make_folds, Dataset, HeaderMode, LoadOptions, LoadReport};
use crate::error::{Error, Result};
use crate::pipeline::{self, LearnConfig};
use crate::solver::{BranchRule, NodeOrder, SolveConfig, SolveResult, SolveStatus};

pub const LOG_ENV: &str = "MARGINBN_LOG";

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_NO_INCUMBENT: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "marginbn",
    version,
    about = "Exact margin-based structure learning for Bayesian network classifiers"
)]
struct Cli {
    /// Raise the default log level to info (MARGINBN_LOG takes precedence).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a structure, fit its parameters and write the model bundle.
    Learn(LearnArgs),
    /// Score a saved model bundle on a dataset.
    Evaluate(EvaluateArgs),
    /// k-fold cross-validation with inner selection of gamma and max-parents.
    CrossValidate(CvArgs),
    /// Write the mixed-integer program in MPS format without solving it.
    ExportMilp(ExportArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// CSV input, one sample per row.
    data: PathBuf,
    /// Class column, by header name or 1-based position.
    #[arg(long, default_value = "1")]
    class_column: String,
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    header: HeaderArg,
    /// Quantile bins for continuous columns.
    #[arg(long, default_value_t = 3)]
    bins: usize,
    /// Comma-separated cardinalities in file column order.
    #[arg(long, value_delimiter = ',')]
    schema: Option<Vec<usize>>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HeaderArg {
    Auto,
    Present,
    Absent,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ScoreArg {
    Sm,
    Sbm,
    Mdl,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Sm => ScoreKind::Sm,
            ScoreArg::Sbm => ScoreKind::Sbm,
            ScoreArg::Mdl => ScoreKind::Mdl,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum NodeOrderArg {
    BestBound,
    DepthFirst,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BranchRuleArg {
    MostFractional,
    FirstFractional,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ScoreArg::Sm)]
    score: ScoreArg,
    /// Margin cap as a probability: gamma = ln(p / (1 - p)).
    #[arg(long, conflicts_with = "gamma")]
    gamma_p: Option<f64>,
    /// Raw log-margin cap.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    max_parents: usize,
    /// Range of the order variables.
    #[arg(long, default_value_t = crate::milp::DEFAULT_DELTA)]
    delta: f64,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    /// Seconds.
    #[arg(long, default_value_t = 7200.0)]
    time_limit: f64,
    /// Relative gap in percent at which the search stops.
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = NodeOrderArg::BestBound)]
    node_order: NodeOrderArg,
    #[arg(long, value_enum, default_value_t = BranchRuleArg::MostFractional)]
    branch_rule: BranchRuleArg,
    /// Seconds between progress lines.
    #[arg(long, default_value_t = 5.0)]
    log_interval: f64,
}

impl SolveArgs {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            time_limit: self.time_limit,
            gap_tol: self.gap_tol,
            node_order: match self.node_order {
                NodeOrderArg::BestBound => NodeOrder::BestBound,
                NodeOrderArg::DepthFirst => NodeOrder::DepthFirst,
            },
            branch_rule: match self.branch_rule {
                BranchRuleArg::MostFractional => BranchRule::MostFractional,
                BranchRuleArg::FirstFractional => BranchRule::FirstFractional,
            },
            threads: self.threads,
            log_interval: self.log_interval,
            ..SolveConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Output directory.
    #[arg(long, short, default_value = "marginbn-out")]
    out: PathBuf,
    /// Recorded for provenance; learning itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model bundle written by `learn`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, short, default_value = "marginbn-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Candidate p values for inner selection.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    /// Candidate max-parents values for inner selection.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    k_grid: Vec<usize>,
    /// Skip inner selection and use --gamma-p/--gamma and --max-parents as given.
    #[arg(long)]
    no_select: bool,
    #[arg(long, default_value_t = 5)]
    inner_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short, default_value = "marginbn-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Destination MPS file.
    #[arg(long, short)]
    output: PathBuf,
}

/// Fully resolved settings, written next to every result.
#[derive(Debug, Serialize)]
struct RunConfig<'a> {
    tool_version: &'static str,
    command: &'static str,
    data: &'a Path,
    class_column: usize,
    header: HeaderArg,
    bins: usize,
    schema: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learn: Option<&'a LearnConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_validation: Option<&'a CvConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let outcome = match &cli.command {
        Command::Learn(a) => run_learn(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::CrossValidate(a) => run_cv(a),
        Command::ExportMilp(a) => run_export(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn init_logging(verbose: bool) {
    let default = if verbose { "info" } else { "warn" };
    let env = env_logger::Env::new().filter_or(LOG_ENV, default);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Header name or 1-based position to a 0-based file column.
fn resolve_class_column(args: &DataArgs) -> Result<usize> {
    if let Ok(pos) = args.class_column.parse::<usize>() {
        if pos == 0 {
            return Err(Error::InvalidArgument("--class-column positions are 1-based".into()));
        }
        return Ok(pos - 1);
    }
    if args.header == HeaderArg::Absent {
        return Err(Error::InvalidArgument(format!(
            "class column '{}' given by name but --header absent",
            args.class_column
        )));
    }
    let file = std::fs::File::open(&args.data).map_err(|e| Error::io(&args.data, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let first = rdr
        .records()
        .next()
        .transpose()
        .map_err(|e| Error::Parse {
            row: 1,
            column: 0,
            message: e.to_string(),
        })?
        .ok_or_else(|| Error::Validation("input file is empty".into()))?;
    first
        .iter()
        .position(|name| name == args.class_column)
        .ok_or_else(|| Error::InvalidArgument(format!("no column named '{}'", args.class_column)))
}

fn load(args: &DataArgs) -> Result<(Dataset, LoadReport, usize)> {
    if args.bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "--bins must be at least 2, got {}",
            args.bins
        )));
    }
    let class_column = resolve_class_column(args)?;
    let options = LoadOptions {
        schema: args.schema.clone(),
        class_column,
        header: match args.header {
            HeaderArg::Auto => HeaderMode::Auto,
            HeaderArg::Present => HeaderMode::Present,
            HeaderArg::Absent => HeaderMode::Absent,
        },
        bins: Some(args.bins),
    };
    let (ds, report) = load_csv(&args.data, &options)?;
    info!(
        "loaded {} samples, {} variables, cardinalities {:?}",
        ds.num_samples(),
        ds.num_vars(),
        ds.cardinalities()
    );
    Ok((ds, report, class_column))
}

/// Resolves gamma from the two flags. Returns `(gamma, p)`.
fn resolve_gamma(model: &ModelArgs) -> Result<(f64, Option<f64>)> {
    let score = ScoreKind::from(model.score);
    if !score.is_margin() {
        if model.gamma.is_some() || model.gamma_p.is_some() {
            warn!("--gamma/--gamma-p are ignored for the mdl score");
        }
        return Ok((f64::NAN, None));
    }
    match (model.gamma, model.gamma_p) {
        (Some(g), _) => Ok((g, None)),
        (None, Some(p)) => Ok((gamma_from_p(p)?, Some(p))),
        (None, None) => Ok((gamma_from_p(0.9)?, Some(0.9))),
    }
}

fn learn_config(model: &ModelArgs, solve: &SolveArgs) -> Result<(LearnConfig, Option<f64>)> {
    let (gamma, p) = resolve_gamma(model)?;
    let config = LearnConfig {
        score: model.score.into(),
        gamma,
        max_parents: model.max_parents,
        delta: model.delta,
        solve: solve.config(),
    };
    config.validate()?;
    Ok((config, p))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn fmt_gap(gap: f64) -> String {
    if gap.is_finite() {
        format!("{gap:.2}%")
    } else {
        "inf%".into()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |v| format!("{v:.6}"))
}

fn solve_summary(out: &mut String, result: &SolveResult) {
    let _ = writeln!(out, "status={}", result.status);
    let _ = writeln!(out, "objective={}", fmt_opt(result.objective));
    let _ = writeln!(out, "upper_bound={:.6}", result.upper_bound);
    let _ = writeln!(out, "gap={}", fmt_gap(result.gap_percent));
    let _ = writeln!(out, "nodes={}", result.nodes_explored);
}

fn learn_summary(config: &LearnConfig, p: Option<f64>) -> String {
    let mut out = format!("score={} max_parents={}", config.score, config.max_parents);
    if config.score.is_margin() {
        let _ = write!(out, " gamma={:.6}", config.gamma);
        if let Some(p) = p {
            let _ = write!(out, " p={p}");
        }
    }
    out
}

fn run_learn(args: &LearnArgs) -> Result<i32> {
    let (config, p) = learn_config(&args.model, &args.solve)?;
    let (ds, load_report, class_column) = load(&args.data)?;
    ensure_dir(&args.out)?;
    let run_config = RunConfig {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "learn",
        data: &args.data.data,
        class_column,
        header: args.data.header,
        bins: args.data.bins,
        schema: args.data.schema.as_deref(),
        learn: Some(&config),
        gamma_p: p,
        cross_validation: None,
        folds: None,
        model: None,
        seed: Some(args.seed),
    };
    write_json(&args.out.join("run_config.json"), &run_config)?;
    write_json(&args.out.join("columns.json"), &load_report)?;

    let start = Instant::now();
    let learned = pipeline::learn(&ds, &config)?;
    info!("solve finished in {:.2} s", start.elapsed().as_secs_f64());
    write_file(&args.out.join("solve.json"), &(learned.result.to_json()? + "\n"))?;

    let mut summary = format!("command=learn\n{}\n", learn_summary(&config, p));
    solve_summary(&mut summary, &learned.result);
    let code = match &learned.classifier {
        Some(clf) => {
            clf.save(args.out.join("model.json"))?;
            write_file(&args.out.join("structure.dot"), &clf.to_dot())?;
            let report = evaluate(clf, &ds)?;
            write_file(&args.out.join("eval.json"), &(report.to_json()? + "\n"))?;
            let _ = writeln!(summary, "structure={}", clf.structure());
            let _ = write!(summary, "train_{}", report.summary());
            EXIT_OK
        }
        None => {
            warn!("no incumbent found within the time limit");
            EXIT_NO_INCUMBENT
        }
    };
    if learned.result.status == SolveStatus::Infeasible {
        return Err(Error::Validation("the program is infeasible".into()));
    }
    write_file(&args.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(code)
}

fn run_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let clf = BnClassifier::load(&args.model)?;
    let (ds, _, class_column) = load(&args.data)?;
    ensure_dir(&args.out)?;
    let run_config = RunConfig {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "evaluate",
        data: &args.data.data,
        class_column,
        header: args.data.header,
        bins: args.data.bins,
        schema: args.data.schema.as_deref(),
        learn: None,
        gamma_p: None,
        cross_validation: None,
        folds: None,
        model: Some(&args.model),
        seed: None,
    };
    write_json(&args.out.join("run_config.json"), &run_config)?;
    let report = evaluate(&clf, &ds)?;
    write_file(&args.out.join("eval.json"), &(report.to_json()? + "\n"))?;
    let summary = format!("command=evaluate\n{}", report.summary());
    write_file(&args.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(EXIT_OK)
}

fn cv_summary(config: &CvConfig, report: &EvalReport) -> String {
    let mut out = format!("command=cross-validate\nscore={}\n", config.learn.score);
    out.push_str(&report.summary());
    out
}

fn run_cv(args: &CvArgs) -> Result<i32> {
    let (learn, p) = learn_config(&args.model, &args.solve)?;
    let (p_grid, k_grid) = if args.no_select {
        (
            match p {
                Some(p) => vec![p],
                None => Vec::new(),
            },
            vec![learn.max_parents],
        )
    } else {
        if args.model.gamma.is_some() || args.model.gamma_p.is_some() {
            warn!("--gamma/--gamma-p only take effect with --no-select");
        }
        (
            args.p_grid.clone().unwrap_or_else(|| DEFAULT_P_GRID.to_vec()),
            args.k_grid.clone(),
        )
    };
    for &p in &p_grid {
        gamma_from_p(p)?;
    }
    let config = CvConfig {
        learn,
        p_grid,
        k_grid,
        inner_folds: args.inner_folds,
        seed: args.seed,
        ..CvConfig::default()
    };
    if config.inner_folds < 2 {
        return Err(Error::InvalidArgument("--inner-folds must be at least 2".into()));
    }
    let (ds, load_report, class_column) = load(&args.data)?;
    ensure_dir(&args.out)?;
    let run_config = RunConfig {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "cross-validate",
        data: &args.data.data,
        class_column,
        header: args.data.header,
        bins: args.data.bins,
        schema: args.data.schema.as_deref(),
        learn: None,
        gamma_p: None,
        cross_validation: Some(&config),
        folds: Some(args.folds),
        model: None,
        seed: Some(args.seed),
    };
    write_json(&args.out.join("run_config.json"), &run_config)?;
    write_json(&args.out.join("columns.json"), &load_report)?;
    let plan = make_folds(&ds, args.folds, args.seed)?;
    write_file(&args.out.join("folds.json"), &(plan.to_json()? + "\n"))?;

    let start = Instant::now();
    let report = cross_validate(&ds, &plan, &config)?;
    info!("cross-validation finished in {:.2} s", start.elapsed().as_secs_f64());
    write_file(&args.out.join("eval.json"), &(report.to_json()? + "\n"))?;
    let summary = cv_summary(&config, &report);
    write_file(&args.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(EXIT_OK)
}

fn run_export(args: &ExportArgs) -> Result<i32> {
    let defaults = SolveArgs {
        time_limit: 1.0,
        gap_tol: 0.0,
        threads: 1,
        node_order: NodeOrderArg::BestBound,
        branch_rule: BranchRuleArg::MostFractional,
        log_interval: 1.0,
    };
    let (config, _) = learn_config(&args.model, &defaults)?;
    let (ds, _, _) = load(&args.data)?;
    let model = pipeline::build_model(&ds, &config)?;
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_file(&args.output, &model.to_mps_string())?;
    println!(
        "wrote {} ({} columns, {} rows)",
        args.output.display(),
        model.num_columns(),
        model.num_rows()
    );
    Ok(EXIT_OK)
}
