//! Center-line tracking scenario: a taxiing aircraft whose lateral offset
//! (cte) and heading (he) are estimated by a perception component and fed to
//! a small controller.
//!
//! Model layout, one time step per cycle through the phase counter `pc`:
//! `pc=0` sense, `pc=1` estimate cte, `pc=2` estimate he, `pc=3` act and
//! advance `t`. The error sentinel `-1` for cte or he and `t=N` absorb.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::abstraction::{
    build_abstraction, build_guarded_abstraction, AbstractionError, ConfusionMatrix,
    GuardStatistics, PerceptionAbstraction, StateSpace,
};
use crate::confidence::CiCell;
use crate::guard::{abort_property, weave_guard, GuardConfig, GuardError};
use crate::lang::ast::*;
use crate::lang::{emit_abstraction_commands, parse_model, EmitOptions, ExpandError, ParseError, Value, WeightStyle};
use crate::modelcheck::{check, CheckError, SolverMode};
use crate::parametric::{rows_from_abstraction, EstimatedRow};
use crate::ratio::{self, Rational};

pub const CTE_LABELS: [i64; 5] = [0, 1, 2, 3, 4];
pub const HE_LABELS: [i64; 3] = [0, 1, 2];
pub const ERROR: i64 = -1;

/// Default pass counts of the run-time check.
pub const GUARD_TOTAL: u64 = 11108;
pub const GUARD_PASSED: u64 = 9125;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("label space mismatch: {0}")]
    LabelSpaceMismatch(String),
    #[error("{0}")]
    Abstraction(#[from] AbstractionError),
    #[error("{0}")]
    Guard(#[from] GuardError),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Expand(#[from] ExpandError),
    #[error("{0}")]
    Check(#[from] CheckError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("horizon must be at least 1")]
    BadHorizon,
}

/// Signed lateral position of a cte label, `None` for the error sentinel.
pub fn position(cte: i64) -> Option<i64> {
    match cte {
        0 => Some(0),
        1 => Some(-1),
        2 => Some(1),
        3 => Some(-2),
        4 => Some(2),
        _ => None,
    }
}

pub fn angle(he: i64) -> Option<i64> {
    match he {
        0 => Some(0),
        1 => Some(-1),
        2 => Some(1),
        _ => None,
    }
}

fn cte_label(pos: i64) -> i64 {
    match pos {
        0 => 0,
        -1 => 1,
        1 => 2,
        -2 => 3,
        2 => 4,
        _ => ERROR,
    }
}

fn he_label(a: i64) -> i64 {
    match a {
        0 => 0,
        -1 => 1,
        1 => 2,
        _ => ERROR,
    }
}

/// Steering action in angle units: head back toward the center line, one
/// unit at most per step.
pub fn controller(est_cte: i64, est_he: i64) -> i64 {
    let desired = -position(est_cte).expect("cte estimate").signum();
    (desired - angle(est_he).expect("he estimate")).clamp(-1, 1)
}

/// Next true state. Turning past one unit is a heading error; drifting past
/// two positions leaves the taxiway. Error states absorb.
pub fn dynamics(cte: i64, he: i64, action: i64) -> (i64, i64) {
    let (Some(pos), Some(ang)) = (position(cte), angle(he)) else {
        return (cte, he);
    };
    let he_raw = ang + action;
    if he_raw.abs() >= 2 {
        return (cte, ERROR);
    }
    let pos_raw = pos + he_raw;
    if pos_raw.abs() >= 3 {
        return (ERROR, he_label(he_raw));
    }
    (cte_label(pos_raw), he_label(he_raw))
}

/// The four confusion matrices of the scenario.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub cte: ConfusionMatrix,
    pub he: ConfusionMatrix,
    pub cte_guarded: ConfusionMatrix,
    pub he_guarded: ConfusionMatrix,
}

pub const DATA_FILES: [&str; 4] = ["cte.csv", "he.csv", "cte_guarded.csv", "he_guarded.csv"];

impl CaseData {
    /// Tables shipped with the crate.
    pub fn bundled() -> Self {
        let parse = |s: &str| ConfusionMatrix::from_csv(s).expect("bundled table");
        CaseData {
            cte: parse(include_str!("../data/cte.csv")),
            he: parse(include_str!("../data/he.csv")),
            cte_guarded: parse(include_str!("../data/cte_guarded.csv")),
            he_guarded: parse(include_str!("../data/he_guarded.csv")),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, CaseError> {
        let mut m = Vec::new();
        for name in DATA_FILES {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|source| CaseError::Io {
                path: path.display().to_string(),
                source,
            })?;
            m.push(ConfusionMatrix::from_csv(&text)?);
        }
        let mut it = m.into_iter();
        Ok(CaseData {
            cte: it.next().unwrap(),
            he: it.next().unwrap(),
            cte_guarded: it.next().unwrap(),
            he_guarded: it.next().unwrap(),
        })
    }

    pub fn unguarded(&self) -> Result<(PerceptionAbstraction, PerceptionAbstraction), CaseError> {
        Ok((build_abstraction(&self.cte)?, build_abstraction(&self.he)?))
    }

    pub fn guarded(&self) -> Result<(PerceptionAbstraction, PerceptionAbstraction), CaseError> {
        Ok((
            build_guarded_abstraction(&self.cte_guarded)?,
            build_guarded_abstraction(&self.he_guarded)?,
        ))
    }
}

/// Perfect perception over the given labels.
pub fn identity_abstraction(labels: &[i64]) -> PerceptionAbstraction {
    let names: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    let space = StateSpace::new(&names).unwrap();
    let counts = (0..labels.len())
        .map(|i| (0..labels.len()).map(|j| u64::from(i == j)).collect())
        .collect();
    build_abstraction(&ConfusionMatrix::new(space, counts).unwrap()).unwrap()
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Horizon. `None` leaves `N` as an undefined constant to be bound at
    /// expansion time.
    pub n: Option<u32>,
    pub style: WeightStyle,
}

impl ScenarioConfig {
    pub fn new(n: u32) -> Self {
        ScenarioConfig {
            n: Some(n),
            style: WeightStyle::Fraction,
        }
    }
}

fn check_space(a: &PerceptionAbstraction, expected: &[i64], what: &str) -> Result<(), CaseError> {
    let space = a.space();
    let got: BTreeSet<i64> = (0..space.len()).map(|k| space.value_of(k)).collect();
    let want: BTreeSet<i64> = expected.iter().copied().collect();
    if got != want || space.len() != expected.len() {
        return Err(CaseError::LabelSpaceMismatch(format!(
            "{what} abstraction has labels {:?}, expected {:?}",
            space.labels(),
            expected
        )));
    }
    Ok(())
}

fn act_commands() -> String {
    let mut out = String::new();
    for &c in &CTE_LABELS {
        for &h in &HE_LABELS {
            let mut by_outcome: BTreeMap<(i64, i64), Vec<(i64, i64)>> = BTreeMap::new();
            for &x in &CTE_LABELS {
                for &y in &HE_LABELS {
                    by_outcome.entry(dynamics(c, h, controller(x, y))).or_default().push((x, y));
                }
            }
            let single = by_outcome.len() == 1;
            for ((nc, nh), pairs) in by_outcome {
                let mut guard = format!("pc=3 & cte={c} & he={h}");
                if !single {
                    let alts: Vec<String> = pairs.iter().map(|(x, y)| format!("cte_est={x} & he_est={y}")).collect();
                    let _ = write!(guard, " & ({})", alts.join(" | "));
                }
                let _ = writeln!(
                    out,
                    "  [] {guard} -> (cte'={nc}) & (he'={nh}) & (t'=t+1) & (pc'=0) & (cte_est'=0) & (he_est'=0);"
                );
            }
        }
    }
    out
}

/// Closed loop without a run-time guard.
pub fn build_m1(
    cfg: &ScenarioConfig,
    a_cte: &PerceptionAbstraction,
    a_he: &PerceptionAbstraction,
) -> Result<ModelAst, CaseError> {
    check_space(a_cte, &CTE_LABELS, "cte")?;
    check_space(a_he, &HE_LABELS, "he")?;
    let n = match cfg.n {
        Some(0) => return Err(CaseError::BadHorizon),
        Some(n) => format!("const int N = {n};"),
        None => "const int N;".to_string(),
    };
    let text = format!(
        "dtmc
{n}
module taxi
  t : [0..N] init 0;
  pc : [0..3] init 0;
  cte : [-1..4] init 0;
  he : [-1..2] init 0;
  cte_est : [0..4] init 0;
  he_est : [0..2] init 0;
  [] cte=-1 | he=-1 | t=N -> true;
  [] pc=0 & t<N & cte!=-1 & he!=-1 -> (pc'=1);
{}endmodule
",
        act_commands()
    );
    let mut ast = parse_model(&text)?;
    let perception = |a: &PerceptionAbstraction, var: &str, est: &str, phase: i64| {
        emit_abstraction_commands(
            a,
            var,
            est,
            &EmitOptions {
                guard_extra: Some(Expr::eq("pc", phase)),
                extra_assignments: vec![Assignment {
                    var: "pc".into(),
                    value: Expr::Int(phase + 1),
                }],
                style: cfg.style,
            },
        )
    };
    let mut commands = ast.commands[..2].to_vec();
    commands.extend(perception(a_cte, "cte", "cte_est", 1));
    commands.extend(perception(a_he, "he", "he_est", 2));
    commands.extend(ast.commands[2..].iter().cloned());
    ast.commands = commands;
    Ok(ast)
}

/// Closed loop with the run-time guard: `build_m1` over the abstractions
/// conditioned on passing the check, then the retry/abort protocol.
pub fn build_m2(
    cfg: &ScenarioConfig,
    a_cte_true: &PerceptionAbstraction,
    a_he_true: &PerceptionAbstraction,
    guard: &GuardConfig,
) -> Result<ModelAst, CaseError> {
    let base = build_m1(cfg, a_cte_true, a_he_true)?;
    Ok(weave_guard(&base, guard)?)
}

pub fn default_guard(m: u32) -> GuardConfig {
    GuardConfig::new(ratio::frac(GUARD_PASSED, GUARD_TOTAL), m)
}

pub fn default_guard_statistics() -> GuardStatistics {
    crate::abstraction::estimate_beta(GUARD_TOTAL, GUARD_PASSED).unwrap()
}

/// Off the taxiway.
pub fn property_1() -> PropertyAst {
    PropertyAst::unbounded(Expr::eq("cte", ERROR))
}

/// Heading error.
pub fn property_2() -> PropertyAst {
    PropertyAst::unbounded(Expr::eq("he", ERROR))
}

/// Abort after M consecutive rejected inputs.
pub fn property_3(g: &GuardConfig) -> PropertyAst {
    abort_property(g)
}

/// Estimated rows of the perception phases, for the parametric analysis.
pub fn estimated_rows(a_cte: &PerceptionAbstraction, a_he: &PerceptionAbstraction) -> Vec<EstimatedRow> {
    let mut rows = rows_from_abstraction(a_cte, "cte", "cte_est", Some(&Expr::eq("pc", 1)));
    rows.extend(rows_from_abstraction(a_he, "he", "he_est", Some(&Expr::eq("pc", 2))));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ModelKind {
    #[serde(rename = "m1")]
    M1,
    #[serde(rename = "m2")]
    M2,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::M1 => "m1",
            ModelKind::M2 => "m2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub n_values: Vec<u32>,
    pub m: u32,
    pub with_guard: bool,
    pub guard: GuardConfig,
    pub data: CaseData,
    pub style: WeightStyle,
    pub mode: SolverMode,
}

impl SweepSpec {
    pub fn new(n_max: u32, m: u32, with_guard: bool) -> Self {
        SweepSpec {
            n_values: (1..=n_max).collect(),
            m,
            with_guard,
            guard: default_guard(m),
            data: CaseData::bundled(),
            style: WeightStyle::Fraction,
            mode: SolverMode::Auto,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub property: usize,
    #[serde(rename = "N")]
    pub n: u32,
    pub probability: f64,
    #[serde(skip)]
    pub exact: Option<Rational>,
    #[serde(skip)]
    pub states: usize,
    pub wall_ms: f64,
}

/// Builds the models for one horizon and checks their properties.
pub fn sweep_cell(spec: &SweepSpec, n: u32) -> Result<Vec<SweepRow>, CaseError> {
    let cfg = ScenarioConfig {
        n: Some(n),
        style: spec.style,
    };
    let mut jobs: Vec<(ModelKind, ModelAst, Vec<PropertyAst>)> = Vec::new();
    let (c, h) = spec.data.unguarded()?;
    jobs.push((ModelKind::M1, build_m1(&cfg, &c, &h)?, vec![property_1(), property_2()]));
    if spec.with_guard {
        let mut guard = spec.guard.clone();
        guard.m = spec.m;
        let (c, h) = spec.data.guarded()?;
        jobs.push((
            ModelKind::M2,
            build_m2(&cfg, &c, &h, &guard)?,
            vec![property_1(), property_2(), property_3(&guard)],
        ));
    }
    let mut out = Vec::new();
    for (kind, ast, props) in jobs {
        let start = Instant::now();
        let m = crate::lang::expand(&ast, &BTreeMap::new())?;
        let build_ms = start.elapsed().as_secs_f64() * 1e3;
        for (i, p) in props.iter().enumerate() {
            let t = Instant::now();
            let r = check(&m, p, spec.mode)?;
            out.push(SweepRow {
                model: kind,
                property: i + 1,
                n,
                probability: r.at_initial(),
                exact: r.exact_at_initial().cloned(),
                states: m.num_states(),
                wall_ms: build_ms / props.len() as f64 + t.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    Ok(out)
}

/// Every (model, property, N) cell, sorted by model, property and N.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, CaseError> {
    let cells: Vec<Result<Vec<SweepRow>, CaseError>> = spec.n_values.par_iter().map(|&n| sweep_cell(spec, n)).collect();
    let mut rows = Vec::new();
    for c in cells {
        rows.extend(c?);
    }
    rows.sort_by(|a, b| (a.model, a.property, a.n).cmp(&(b.model, b.property, b.n)));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "property", "N", "probability", "wall_ms"]).unwrap();
    for r in rows {
        w.write_record([
            r.model.name().to_string(),
            r.property.to_string(),
            r.n.to_string(),
            format!("{:e}", r.probability),
            format!("{:.3}", r.wall_ms),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Gnuplot script plotting each (model, property) series of a sweep CSV
/// against N.
pub fn gnuplot_script(csv_path: &str, rows: &[SweepRow]) -> String {
    let series: BTreeSet<(ModelKind, usize)> = rows.iter().map(|r| (r.model, r.property)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel 'N'");
    let _ = writeln!(s, "set ylabel 'probability'");
    let _ = writeln!(s, "set logscale y");
    let plots: Vec<String> = series
        .iter()
        .map(|(m, p)| {
            format!(
                "'{csv_path}' using (strcol(1) eq '{}' && $2 == {p} ? $3 : 1/0):4 with linespoints title '{} property {p}'",
                m.name(),
                m.name()
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Confidence-sweep cells of one model over the given horizons: Properties
/// 1 and 2, plus 3 for the guarded model.
pub fn confidence_cells(spec: &SweepSpec, kind: ModelKind, n_values: &[u32]) -> Result<Vec<CiCell>, CaseError> {
    let mut guard = spec.guard.clone();
    guard.m = spec.m;
    let (c, h) = match kind {
        ModelKind::M1 => spec.data.unguarded()?,
        ModelKind::M2 => spec.data.guarded()?,
    };
    let mut props = vec![property_1(), property_2()];
    if kind == ModelKind::M2 {
        props.push(property_3(&guard));
    }
    let mut cells = Vec::new();
    for &n in n_values {
        let cfg = ScenarioConfig { n: Some(n), style: spec.style };
        let ast = match kind {
            ModelKind::M1 => build_m1(&cfg, &c, &h)?,
            ModelKind::M2 => build_m2(&cfg, &c, &h, &guard)?,
        };
        for (i, p) in props.iter().enumerate() {
            cells.push(CiCell {
                property_index: i + 1,
                n: Some(n),
                ast: ast.clone(),
                bindings: BTreeMap::new(),
                rows: estimated_rows(&c, &h),
                target: p.target.clone(),
            });
        }
    }
    Ok(cells)
}

/// Constant bindings for a horizon, for models built with a symbolic `N`.
pub fn horizon_binding(n: u32) -> BTreeMap<String, Value> {
    BTreeMap::from([("N".to_string(), Value::Int(n as i64))])
}
