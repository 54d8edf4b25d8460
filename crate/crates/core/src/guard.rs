//! Run-time guard protocol: sense, check, retry on failure, abort after M
//! consecutive failures.

use num::{One, Zero};
use thiserror::Error;

use crate::lang::ast::*;
use crate::ratio::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuardError {
    #[error("name `{0}` is already declared in the base model")]
    VariableNameCollision(String),
    #[error("the base model has no variable `{0}`")]
    MissingPhaseVariable(String),
    #[error("no command of the base model starts a sensing round (`{0}`)")]
    NoSenseCommand(String),
    #[error("beta {0} is not a probability")]
    BadBeta(String),
    #[error("M must be at least 1")]
    BadThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardConfig {
    /// Probability that a sensed input passes the check.
    pub beta: Rational,
    /// Consecutive failures before aborting.
    pub m: u32,
    /// Optional per-state rates: the first predicate that holds picks the rate,
    /// `beta` applies elsewhere.
    pub beta_by_state: Vec<(Expr, Rational)>,
    pub phase_var: String,
    pub sense_phase: i64,
    pub estimate_vars: Vec<String>,
}

impl GuardConfig {
    pub fn new(beta: Rational, m: u32) -> Self {
        GuardConfig {
            beta,
            m,
            beta_by_state: Vec::new(),
            phase_var: "pc".into(),
            sense_phase: 0,
            estimate_vars: vec!["cte_est".into(), "he_est".into()],
        }
    }
}

pub const PASS_VAR: &str = "v";
pub const RETRY_VAR: &str = "i";
pub const THRESHOLD_CONST: &str = "M";

fn assign(var: &str, value: Expr) -> Assignment {
    Assignment {
        var: var.to_string(),
        value,
    }
}

fn ratio_expr(r: &Rational) -> Expr {
    if r.is_integer() {
        Expr::Real(r.clone())
    } else {
        Expr::bin(
            BinOp::Div,
            Expr::Int(num::ToPrimitive::to_i64(r.numer()).unwrap_or(i64::MAX)),
            Expr::Int(num::ToPrimitive::to_i64(r.denom()).unwrap_or(i64::MAX)),
        )
    }
}

fn is_sense(cmd: &Command, g: &GuardConfig) -> bool {
    cmd.guard
        .conjuncts()
        .iter()
        .any(|c| c.as_var_eq() == Some((g.phase_var.as_str(), g.sense_phase)))
}

fn retry_command(guard: Expr, original: &Command, beta: &Rational) -> Command {
    let below = Expr::bin(BinOp::Lt, Expr::ident(RETRY_VAR), Expr::ident(THRESHOLD_CONST));
    let mut updates = Vec::new();
    if !beta.is_zero() {
        for u in &original.updates {
            let prob = if beta.is_one() {
                u.prob.clone()
            } else if matches!(u.prob, Expr::Int(1)) || matches!(u.prob, Expr::Real(ref r) if r.is_one()) {
                ratio_expr(beta)
            } else {
                Expr::bin(BinOp::Mul, ratio_expr(beta), u.prob.clone())
            };
            let mut assignments = vec![assign(PASS_VAR, Expr::Int(1))];
            assignments.extend(u.assignments.iter().cloned());
            assignments.push(assign(RETRY_VAR, Expr::Int(0)));
            updates.push(Update { prob, assignments });
        }
    }
    if !beta.is_one() {
        updates.push(Update {
            prob: ratio_expr(&(Rational::one() - beta)),
            assignments: vec![
                assign(PASS_VAR, Expr::Int(0)),
                assign(RETRY_VAR, Expr::bin(BinOp::Add, Expr::ident(RETRY_VAR), Expr::Int(1))),
            ],
        });
    }
    Command {
        guard: Expr::and(guard, below),
        updates,
        span: Span::default(),
    }
}

/// Adds the pass flag `v`, the failure counter `i` and the threshold `M`,
/// replaces each sensing command by its retry form and adds the abort command.
pub fn weave_guard(base: &ModelAst, g: &GuardConfig) -> Result<ModelAst, GuardError> {
    if g.m == 0 {
        return Err(GuardError::BadThreshold);
    }
    let in_range = |r: &Rational| !(r < &Rational::zero() || r > &Rational::one());
    for r in std::iter::once(&g.beta).chain(g.beta_by_state.iter().map(|(_, r)| r)) {
        if !in_range(r) {
            return Err(GuardError::BadBeta(r.to_string()));
        }
    }
    for name in [PASS_VAR, RETRY_VAR, THRESHOLD_CONST] {
        if base.is_declared(name) {
            return Err(GuardError::VariableNameCollision(name.to_string()));
        }
    }
    if base.variable(&g.phase_var).is_none() {
        return Err(GuardError::MissingPhaseVariable(g.phase_var.clone()));
    }
    let mut out = base.clone();
    out.constants.push(ConstDecl {
        name: THRESHOLD_CONST.into(),
        ty: ConstType::Int,
        value: Some(Expr::Int(g.m as i64)),
        span: Span::default(),
    });
    out.variables.push(VarDecl {
        name: PASS_VAR.into(),
        lo: Expr::Int(0),
        hi: Expr::Int(1),
        init: Some(Expr::Int(0)),
        span: Span::default(),
    });
    out.variables.push(VarDecl {
        name: RETRY_VAR.into(),
        lo: Expr::Int(0),
        hi: Expr::ident(THRESHOLD_CONST),
        init: Some(Expr::Int(0)),
        span: Span::default(),
    });
    let mut commands = Vec::new();
    let mut found = false;
    for cmd in &base.commands {
        if is_sense(cmd, g) {
            found = true;
            // per-state rates first, then the default for the remaining states
            let mut excluded: Option<Expr> = None;
            for (pred, beta) in &g.beta_by_state {
                let guard = match &excluded {
                    Some(ex) => Expr::and(Expr::and(cmd.guard.clone(), pred.clone()), Expr::not(ex.clone())),
                    None => Expr::and(cmd.guard.clone(), pred.clone()),
                };
                commands.push(retry_command(guard, cmd, beta));
                excluded = Some(match excluded {
                    Some(ex) => Expr::bin(BinOp::Or, ex, pred.clone()),
                    None => pred.clone(),
                });
            }
            let guard = match excluded {
                Some(ex) => Expr::and(cmd.guard.clone(), Expr::not(ex)),
                None => cmd.guard.clone(),
            };
            commands.push(retry_command(guard, cmd, &g.beta));
            commands.push(Command {
                guard: Expr::and(
                    Expr::and(cmd.guard.clone(), Expr::eq(PASS_VAR, 0)),
                    Expr::bin(BinOp::Eq, Expr::ident(RETRY_VAR), Expr::ident(THRESHOLD_CONST)),
                ),
                updates: vec![Update {
                    prob: Expr::Int(1),
                    assignments: Vec::new(),
                }],
                span: Span::default(),
            });
            continue;
        }
        let estimates = cmd
            .updates
            .iter()
            .any(|u| u.assignments.iter().any(|a| g.estimate_vars.contains(&a.var)));
        let mut cmd = cmd.clone();
        if estimates {
            cmd.guard = Expr::and(cmd.guard, Expr::eq(PASS_VAR, 1));
        }
        commands.push(cmd);
    }
    if !found {
        return Err(GuardError::NoSenseCommand(format!("{}={}", g.phase_var, g.sense_phase)));
    }
    out.commands = commands;
    Ok(out)
}

/// `P=? [ F (v=0 & i=M) ]` with the configured M.
pub fn abort_property(g: &GuardConfig) -> PropertyAst {
    PropertyAst::unbounded(Expr::and(Expr::eq(PASS_VAR, 0), Expr::eq(RETRY_VAR, g.m as i64)))
}
