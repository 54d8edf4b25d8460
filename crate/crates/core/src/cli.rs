//! Command-line front end. Results go to stdout or `--out` as CSV or JSON,
//! diagnostics to stderr. Exit status is 0 on success, 1 when an analysis
//! fails and 2 for usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::abstraction::{build_abstraction, build_guarded_abstraction, estimate_beta, ConfusionMatrix};
use crate::casestudy::{self, CaseData, ModelKind, SweepSpec};
use crate::confidence::{self, CiCell, SweepOptions};
use crate::guard::{weave_guard, GuardConfig};
use crate::lang::ast::{ModelAst, PropertyAst};
use crate::lang::{
    emit_abstraction_text, expand, parse_bindings, parse_model, parse_property, parse_property_file, render_model,
    render_property, EmitOptions, Value, WeightStyle,
};
use crate::modelcheck::{check, resolve_bound, SolverMode};
use crate::parametric::{
    detect_rows, param_reach, parameterize, rows_from_observations, ElimOptions, EliminationOrder, EstimatedRow,
};
use crate::ratio::{self, Rational};
use crate::sim::{enumerate_paths, monte_carlo};

#[derive(Debug, Parser, Serialize)]
#[command(name = "percept-mc", version, about = "Probabilistic analysis of closed loops with learned perception")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Normalize a confusion matrix into a perception abstraction (JSON).
    Abstract(AbstractArgs),
    /// Print model commands for an abstraction, or weave the run-time guard into a model.
    Emit(EmitArgs),
    /// Reachability probabilities of each property.
    Check(CheckArgs),
    /// Reachability as a rational function of the estimated probabilities.
    Param(ParamArgs),
    /// Confidence intervals for reachability probabilities.
    Ci(CiArgs),
    /// Estimate probabilities by simulation or exact path enumeration.
    Simulate(SimulateArgs),
    /// Run the center-line tracking experiments.
    Casestudy(CaseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum Order {
    Asc,
    Desc,
    MinDegree,
}

impl From<Order> for EliminationOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Asc => EliminationOrder::Ascending,
            Order::Desc => EliminationOrder::Descending,
            Order::MinDegree => EliminationOrder::MinDegree,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AbstractArgs {
    /// Confusion matrix: header of labels, then one row of counts per label.
    pub matrix: PathBuf,
    /// Mark the counts as taken over inputs that passed the run-time check.
    #[arg(long)]
    pub guarded: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["matrix", "weave"])))]
pub struct EmitArgs {
    pub matrix: Option<PathBuf>,
    /// True-state variable of the emitted commands.
    #[arg(long, default_value = "s")]
    pub var: String,
    /// Estimate variable; defaults to `<var>_est`.
    #[arg(long)]
    pub est: Option<String>,
    /// Extra guard conjunct, e.g. `pc=1`.
    #[arg(long, value_name = "EXPR")]
    pub guard_extra: Option<String>,
    /// Print weights as decimals with this many digits instead of fractions.
    #[arg(long, value_name = "D")]
    pub decimals: Option<usize>,
    /// Model to extend with the retry/abort guard protocol.
    #[arg(long, value_name = "MODEL")]
    pub weave: Option<PathBuf>,
    /// Pass rate of the check.
    #[arg(long, conflicts_with = "beta_counts")]
    pub beta: Option<String>,
    /// Pass rate as observed counts.
    #[arg(long, value_name = "PASSED/TOTAL")]
    pub beta_counts: Option<String>,
    #[arg(long, default_value = "pc")]
    pub phase_var: String,
    #[arg(long, default_value_t = 0)]
    pub sense_phase: i64,
    #[arg(long, value_delimiter = ',', default_value = "cte_est,he_est")]
    pub estimate_vars: Vec<String>,
    /// Constants, e.g. `M=3` for the abort threshold.
    #[arg(short = 'c', long = "const", value_name = "NAME=VALUE")]
    pub consts: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    pub model: PathBuf,
    /// Property file, or a single property in quotes.
    pub props: String,
    #[arg(short = 'c', long = "const", value_name = "NAME=VALUE")]
    pub consts: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Exact rational arithmetic.
    #[arg(long, conflicts_with = "float")]
    pub exact: bool,
    /// Floating-point value iteration.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ParamOpts {
    /// Drop transitions with no observations before introducing parameters.
    #[arg(long, overrides_with = "no_prune")]
    pub prune: bool,
    #[arg(long)]
    pub no_prune: bool,
    #[arg(long, value_enum, default_value = "asc")]
    pub order: Order,
    /// Observation counts for an estimate: `VAR:EST_VAR=FILE.csv`.
    #[arg(long, value_name = "VAR:EST=FILE")]
    pub obs: Vec<String>,
    /// Time budget per property in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
}

impl ParamOpts {
    fn prune_zero(&self) -> bool {
        !self.no_prune
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ParamArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub param: ParamOpts,
    /// Name parameters x1, x2, y1, ... instead of `row_column`.
    #[arg(long)]
    pub aliases: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub param: ParamOpts,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Confidence levels; overrides `--delta`.
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Enumerate paths of at most this many steps instead of sampling.
    #[arg(long)]
    pub depth: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CaseArgs {
    #[arg(long, default_value_t = 30)]
    pub n_max: u32,
    /// Consecutive rejected inputs before aborting.
    #[arg(long, default_value_t = 3)]
    pub m: u32,
    /// Directory with cte.csv, he.csv, cte_guarded.csv and he_guarded.csv;
    /// the bundled tables are used otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also build and check the guarded model.
    #[arg(long)]
    pub with_guard: bool,
    #[arg(long, conflicts_with = "beta_counts")]
    pub beta: Option<String>,
    #[arg(long, value_name = "PASSED/TOTAL")]
    pub beta_counts: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write a gnuplot script for the sweep to this file.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
    /// Write the models (with `N` left open) to this directory.
    #[arg(long)]
    pub emit_models: Option<PathBuf>,
    #[arg(long, conflicts_with = "float")]
    pub exact: bool,
    #[arg(long)]
    pub float: bool,
    /// Confidence sweep output; the guarded model goes to a `_m2` sibling.
    #[arg(long)]
    pub ci_out: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub ci_n_max: u32,
    #[arg(long, value_delimiter = ',', default_value = "0.95,0.96,0.97,0.98,0.99")]
    pub levels: Vec<f64>,
    /// Time budget per confidence cell in seconds.
    #[arg(long, default_value_t = 120.0)]
    pub timeout: f64,
}

/// Reproducibility record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub name: String,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.message)
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: 1,
            name: crate::error_name(&e),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        name: "Usage".into(),
        message: message.into(),
    }
}

struct Context {
    inputs: BTreeMap<String, String>,
}

impl Context {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure {
            code: 1,
            name: "Io".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        self.inputs
            .insert(path.display().to_string(), format!("{:x}", Sha256::digest(&bytes)));
        String::from_utf8(bytes).map_err(|_| Failure {
            code: 1,
            name: "Io".into(),
            message: format!("{}: not UTF-8", path.display()),
        })
    }

    fn model(&mut self, path: &Path) -> Result<ModelAst, Failure> {
        Ok(parse_model(&self.read(path)?)?)
    }

    fn properties(&mut self, spec: &str) -> Result<Vec<(String, PropertyAst)>, Failure> {
        let path = Path::new(spec);
        if path.is_file() || !spec.contains("=?") {
            Ok(parse_property_file(&self.read(path)?)?)
        } else {
            Ok(vec![(spec.to_string(), parse_property(spec)?)])
        }
    }
}

fn bindings(consts: &[String]) -> Result<BTreeMap<String, Value>, Failure> {
    parse_bindings(consts).map_err(usage)
}

fn parse_probability(text: &str) -> Result<Rational, Failure> {
    let r = if let Some((a, b)) = text.split_once('/') {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| usage(format!("bad fraction `{text}`")))?,
            b.trim().parse().map_err(|_| usage(format!("bad fraction `{text}`")))?,
        );
        if b == 0 {
            return Err(usage(format!("bad fraction `{text}`")));
        }
        ratio::frac(a, b)
    } else {
        ratio::parse_decimal(text).ok_or_else(|| usage(format!("bad probability `{text}`")))?
    };
    Ok(r)
}

/// `--beta` or `--beta-counts`, defaulting to the bundled pass counts.
fn resolve_beta(beta: &Option<String>, counts: &Option<String>) -> Result<Rational, Failure> {
    if let Some(b) = beta {
        return parse_probability(b);
    }
    if let Some(c) = counts {
        let (p, t) = c
            .split_once('/')
            .ok_or_else(|| usage(format!("--beta-counts expects PASSED/TOTAL, got `{c}`")))?;
        let p: u64 = p.trim().parse().map_err(|_| usage(format!("bad count `{p}`")))?;
        let t: u64 = t.trim().parse().map_err(|_| usage(format!("bad count `{t}`")))?;
        return Ok(estimate_beta(t, p)?.beta());
    }
    Ok(casestudy::default_guard_statistics().beta())
}

fn mode(exact: bool, float: bool) -> SolverMode {
    if exact {
        SolverMode::Exact
    } else if float {
        SolverMode::Float
    } else {
        SolverMode::Auto
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: 1,
            name: "Io".into(),
            message: format!("{}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| usage(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn estimated_rows(ctx: &mut Context, ast: &ModelAst, obs: &[String]) -> Result<Vec<EstimatedRow>, Failure> {
    let mut rows = detect_rows(ast);
    for spec in obs {
        let bad = || usage(format!("--obs expects VAR:EST_VAR=FILE, got `{spec}`"));
        let (vars, file) = spec.split_once('=').ok_or_else(bad)?;
        let (var, est) = vars.split_once(':').ok_or_else(bad)?;
        let matrix = ConfusionMatrix::from_csv(&ctx.read(Path::new(file))?)?;
        let given = rows_from_observations(ast, &build_abstraction(&matrix)?, var.trim(), est.trim())?;
        rows.retain(|r| r.est_var != est.trim());
        rows.extend(given);
    }
    Ok(rows)
}

fn deadline(timeout: Option<f64>) -> Option<Instant> {
    timeout.map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0)))
}

fn run_abstract(ctx: &mut Context, a: &AbstractArgs) -> Result<(), Failure> {
    let matrix = ConfusionMatrix::from_csv(&ctx.read(&a.matrix)?)?;
    let abs = if a.guarded {
        build_guarded_abstraction(&matrix)?
    } else {
        build_abstraction(&matrix)?
    };
    let mut text = serde_json::to_string_pretty(&abs.to_json()).unwrap();
    text.push('\n');
    emit(&a.out, &text)
}

fn run_emit(ctx: &mut Context, a: &EmitArgs) -> Result<(), Failure> {
    let text = if let Some(path) = &a.weave {
        let base = ctx.model(path)?;
        let consts = bindings(&a.consts)?;
        let m = match consts.get("M") {
            Some(Value::Int(m)) if *m >= 0 => *m as u32,
            Some(other) => return Err(usage(format!("M must be a nonnegative integer, got {other}"))),
            None => 3,
        };
        let mut g = GuardConfig::new(resolve_beta(&a.beta, &a.beta_counts)?, m);
        g.phase_var = a.phase_var.clone();
        g.sense_phase = a.sense_phase;
        g.estimate_vars = a.estimate_vars.clone();
        render_model(&weave_guard(&base, &g)?)
    } else {
        let path = a.matrix.as_ref().expect("clap requires a source");
        let abs = build_abstraction(&ConfusionMatrix::from_csv(&ctx.read(path)?)?)?;
        let est = a.est.clone().unwrap_or_else(|| format!("{}_est", a.var));
        let opts = EmitOptions {
            guard_extra: a.guard_extra.as_deref().map(crate::lang::parse_expr).transpose()?,
            extra_assignments: Vec::new(),
            style: a.decimals.map(WeightStyle::Decimal).unwrap_or(WeightStyle::Fraction),
        };
        emit_abstraction_text(&abs, &a.var, &est, &opts)
    };
    emit(&a.out, &text)
}

fn run_check(ctx: &mut Context, a: &CheckArgs) -> Result<(), Failure> {
    let ast = ctx.model(&a.model.model)?;
    let props = ctx.properties(&a.model.props)?;
    let m = expand(&ast, &bindings(&a.model.consts)?)?;
    log::info!("{} states, {} transitions", m.num_states(), m.num_transitions());
    let mut rows = Vec::new();
    for (i, (text, p)) in props.iter().enumerate() {
        let r = check(&m, p, mode(a.exact, a.float))?;
        log::debug!("property {}: {}", i + 1, r.method.name());
        rows.push(vec![(i + 1).to_string(), text.clone(), r.display_initial()]);
    }
    emit(&a.model.out, &csv_text(&["index", "property", "probability"], &rows))
}

fn run_param(ctx: &mut Context, a: &ParamArgs) -> Result<(), Failure> {
    let ast = ctx.model(&a.model.model)?;
    let props = ctx.properties(&a.model.props)?;
    let m = expand(&ast, &bindings(&a.model.consts)?)?;
    let rows = estimated_rows(ctx, &ast, &a.param.obs)?;
    let pm = parameterize(&m, &rows, a.param.prune_zero())?;
    let names = if a.aliases { pm.aliases() } else { pm.ids() };
    let params: Vec<String> = pm
        .params()
        .iter()
        .map(|p| if a.aliases { format!("{}={}", p.alias, p.id) } else { p.id.clone() })
        .collect();
    let mut out = Vec::new();
    for (i, (text, p)) in props.iter().enumerate() {
        if p.bound.is_some() {
            return Err(usage("parametric analysis supports unbounded properties only"));
        }
        let rf = param_reach(
            &pm,
            &p.target,
            ElimOptions {
                order: a.param.order.into(),
                deadline: deadline(a.param.timeout),
            },
        )?;
        let point = rf.eval(&pm.point_estimate()).map(|r| ratio::to_f64(&r).to_string()).unwrap_or_default();
        out.push(vec![(i + 1).to_string(), text.clone(), params.join(";"), rf.to_text(&names), point]);
    }
    emit(&a.model.out, &csv_text(&["index", "property", "parameters", "function", "point"], &out))
}

fn run_ci(ctx: &mut Context, a: &CiArgs) -> Result<(), Failure> {
    let ast = ctx.model(&a.model.model)?;
    let props = ctx.properties(&a.model.props)?;
    let consts = bindings(&a.model.consts)?;
    let rows = estimated_rows(ctx, &ast, &a.param.obs)?;
    let levels = if a.levels.is_empty() { vec![1.0 - a.delta] } else { a.levels.clone() };
    if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(usage("confidence levels must lie strictly between 0 and 1"));
    }
    let n = match consts.get("N") {
        Some(Value::Int(n)) => u32::try_from(*n).ok(),
        _ => None,
    };
    let mut cells = Vec::new();
    for (i, (_, p)) in props.iter().enumerate() {
        if p.bound.is_some() {
            return Err(usage("confidence intervals support unbounded properties only"));
        }
        cells.push(CiCell {
            property_index: i + 1,
            n,
            ast: ast.clone(),
            bindings: consts.clone(),
            rows: rows.clone(),
            target: p.target.clone(),
        });
    }
    let opts = SweepOptions {
        levels,
        prune_zero: a.param.prune_zero(),
        order: a.param.order.into(),
        timeout: Duration::from_secs_f64(a.param.timeout.unwrap_or(120.0).max(0.0)),
    };
    let rows = with_jobs(a.jobs, || confidence::confidence_sweep(&cells, &opts))?;
    emit(&a.model.out, &confidence::sweep_csv(&rows))
}

fn run_simulate(ctx: &mut Context, a: &SimulateArgs) -> Result<(), Failure> {
    let ast = ctx.model(&a.model.model)?;
    let props = ctx.properties(&a.model.props)?;
    let m = expand(&ast, &bindings(&a.model.consts)?)?;
    let mut out = Vec::new();
    for (i, (text, p)) in props.iter().enumerate() {
        if let Some(depth) = a.depth {
            let depth = match &p.bound {
                Some(b) => resolve_bound(&m, b)?.min(depth),
                None => depth,
            };
            let r = enumerate_paths(&m, &p.target, depth)?;
            out.push(vec![(i + 1).to_string(), text.clone(), ratio::to_f64(&r).to_string(), depth.to_string()]);
        } else {
            if p.bound.is_some() {
                return Err(usage("simulation supports unbounded properties; use --depth for bounded ones"));
            }
            let e = with_jobs(a.jobs, || monte_carlo(&m, &p.target, a.trials, a.seed))??;
            out.push(vec![
                (i + 1).to_string(),
                text.clone(),
                e.mean.to_string(),
                e.stderr.to_string(),
                e.trials.to_string(),
                e.seed.to_string(),
            ]);
        }
    }
    let header: &[&str] = if a.depth.is_some() {
        &["index", "property", "probability", "depth"]
    } else {
        &["index", "property", "mean", "stderr", "trials", "seed"]
    };
    emit(&a.model.out, &csv_text(header, &out))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn run_casestudy(ctx: &mut Context, a: &CaseArgs) -> Result<(), Failure> {
    let data = match &a.data {
        Some(dir) => {
            for f in casestudy::DATA_FILES {
                ctx.read(&dir.join(f))?;
            }
            CaseData::load(dir)?
        }
        None => CaseData::bundled(),
    };
    let mut spec = SweepSpec::new(a.n_max, a.m, a.with_guard);
    spec.data = data;
    spec.guard = GuardConfig::new(resolve_beta(&a.beta, &a.beta_counts)?, a.m);
    spec.mode = mode(a.exact, a.float);
    if let Some(dir) = &a.emit_models {
        std::fs::create_dir_all(dir).map_err(|e| Failure {
            code: 1,
            name: "Io".into(),
            message: format!("{}: {e}", dir.display()),
        })?;
        let cfg = casestudy::ScenarioConfig { n: None, style: spec.style };
        let (c, h) = spec.data.unguarded()?;
        emit(&Some(dir.join("m1.pm")), &render_model(&casestudy::build_m1(&cfg, &c, &h)?))?;
        let (c, h) = spec.data.guarded()?;
        emit(&Some(dir.join("m2.pm")), &render_model(&casestudy::build_m2(&cfg, &c, &h, &spec.guard)?))?;
        let props = [
            casestudy::property_1(),
            casestudy::property_2(),
            casestudy::property_3(&spec.guard),
        ];
        let text: String = props.iter().map(|p| render_property(p) + "\n").collect();
        emit(&Some(dir.join("m1.props")), &text.lines().take(2).map(|l| format!("{l}\n")).collect::<String>())?;
        emit(&Some(dir.join("m2.props")), &text)?;
    }
    let rows = with_jobs(a.jobs, || casestudy::run_sweep(&spec))??;
    emit(&a.out, &casestudy::sweep_csv(&rows))?;
    if let Some(path) = &a.gnuplot {
        let csv = a.out.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "results.csv".into());
        emit(&Some(path.clone()), &casestudy::gnuplot_script(&csv, &rows))?;
    }
    if let Some(path) = &a.ci_out {
        let opts = SweepOptions {
            levels: a.levels.clone(),
            prune_zero: true,
            order: EliminationOrder::default(),
            timeout: Duration::from_secs_f64(a.timeout.max(0.0)),
        };
        let ns: Vec<u32> = (1..=a.ci_n_max.min(a.n_max)).collect();
        let mut kinds = vec![(ModelKind::M1, path.clone())];
        if a.with_guard {
            kinds.push((ModelKind::M2, sibling(path, "_m2")));
        }
        for (kind, target) in kinds {
            let cells = casestudy::confidence_cells(&spec, kind, &ns)?;
            let rows = with_jobs(a.jobs, || confidence::confidence_sweep(&cells, &opts))?;
            emit(&Some(target), &confidence::sweep_csv(&rows))?;
        }
    }
    Ok(())
}

fn out_path(c: &Command) -> Option<&PathBuf> {
    match c {
        Command::Abstract(a) => a.out.as_ref(),
        Command::Emit(a) => a.out.as_ref(),
        Command::Check(a) => a.model.out.as_ref(),
        Command::Param(a) => a.model.out.as_ref(),
        Command::Ci(a) => a.model.out.as_ref(),
        Command::Simulate(a) => a.model.out.as_ref(),
        Command::Casestudy(a) => a.out.as_ref(),
    }
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Abstract(_) => "abstract",
        Command::Emit(_) => "emit",
        Command::Check(_) => "check",
        Command::Param(_) => "param",
        Command::Ci(_) => "ci",
        Command::Simulate(_) => "simulate",
        Command::Casestudy(_) => "casestudy",
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let mut ctx = Context { inputs: BTreeMap::new() };
    match &cli.command {
        Command::Abstract(a) => run_abstract(&mut ctx, a)?,
        Command::Emit(a) => run_emit(&mut ctx, a)?,
        Command::Check(a) => run_check(&mut ctx, a)?,
        Command::Param(a) => run_param(&mut ctx, a)?,
        Command::Ci(a) => run_ci(&mut ctx, a)?,
        Command::Simulate(a) => run_simulate(&mut ctx, a)?,
        Command::Casestudy(a) => run_casestudy(&mut ctx, a)?,
    }
    let manifest = RunManifest {
        subcommand: name(&cli.command).into(),
        flags: serde_json::to_value(&cli.command).unwrap_or_default(),
        inputs: ctx.inputs,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let json = serde_json::to_string(&manifest).unwrap();
    match out_path(&cli.command) {
        Some(p) => emit(&Some(sibling(p, ".manifest").with_extension("json")), &(json + "\n"))?,
        None => eprintln!("manifest: {json}"),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("PERCEPT_MC_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
