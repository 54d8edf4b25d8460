//! Explicit-state semantics: reachable states of a model under a constant binding.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use log::warn;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::ast::*;
use super::eval::{compile, eval_const, is_probability, CExpr, EvalError, Value};
use crate::dtmc::{describe, Dtmc, VarInfo};
use crate::ratio::{self, Rational};

const MAX_STATES: usize = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpandError {
    #[error("constant `{0}` has no value; bind it with -c {0}=VALUE")]
    UnboundConstant(String),
    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),
    #[error("commands at lines {first} and {second} are both enabled in state {state} (nondeterminism is not supported)")]
    OverlappingGuards {
        state: String,
        first: usize,
        second: usize,
    },
    #[error("weights of the command at line {line} sum to {sum}, not 1")]
    ProbabilitySumError { line: usize, sum: String },
    #[error("weight {value} of the command at line {line} is not a probability")]
    ProbabilityOutOfRange { line: usize, value: String },
    #[error("update of command at line {line} sets {var}={value} outside [{lo}..{hi}] in state {state}")]
    RangeViolation {
        line: usize,
        var: String,
        value: i64,
        lo: i64,
        hi: i64,
        state: String,
    },
    #[error("variable `{var}` has an empty range [{lo}..{hi}] or an initial value outside it")]
    BadRange { var: String, lo: i64, hi: i64 },
    #[error("more than {0} states")]
    TooManyStates(usize),
    #[error("the chain was not produced from a model, so it cannot be extended")]
    NoSourceModel,
}

#[derive(Debug, Clone)]
pub(crate) struct CUpdate {
    pub prob: Rational,
    pub assigns: Vec<(usize, CExpr)>,
}

#[derive(Debug, Clone)]
pub(crate) struct CCommand {
    pub guard: CExpr,
    pub updates: Vec<CUpdate>,
    pub line: usize,
}

/// A model with its constants bound, ready to expand.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) consts: BTreeMap<String, Value>,
    pub(crate) commands: Vec<CCommand>,
    pub(crate) init: Vec<i64>,
}

pub fn resolve_constants(
    ast: &ModelAst,
    bindings: &BTreeMap<String, Value>,
) -> Result<BTreeMap<String, Value>, ExpandError> {
    let mut consts = BTreeMap::new();
    for c in &ast.constants {
        let value = match (bindings.get(&c.name), &c.value) {
            (Some(v), _) => v.clone(),
            (None, Some(e)) => eval_const(e, &consts)?,
            (None, None) => return Err(ExpandError::UnboundConstant(c.name.clone())),
        };
        let value = match (c.ty, value) {
            (ConstType::Int, v) => Value::Int(v.as_int().ok_or_else(|| {
                EvalError::Type(format!("constant `{}` must be an integer", c.name))
            })?),
            (ConstType::Double, v) => Value::Rat(v.as_rational().ok_or_else(|| {
                EvalError::Type(format!("constant `{}` must be numeric", c.name))
            })?),
        };
        consts.insert(c.name.clone(), value);
    }
    Ok(consts)
}

fn const_int(e: &Expr, consts: &BTreeMap<String, Value>) -> Result<i64, ExpandError> {
    let v = eval_const(e, consts)?;
    v.as_int()
        .ok_or_else(|| ExpandError::Eval(EvalError::Type(format!("expected an integer, got {v}"))))
}

/// Tolerance under which a weight sum is treated as a rounding artifact of
/// printed tables and repaired.
fn repair_tolerance() -> Rational {
    Rational::new(1.into(), 1_000_000_000.into())
}

impl CompiledModel {
    pub fn new(ast: &ModelAst, bindings: &BTreeMap<String, Value>) -> Result<Self, ExpandError> {
        let consts = resolve_constants(ast, bindings)?;
        let mut vars = Vec::new();
        let mut init = Vec::new();
        for v in &ast.variables {
            let lo = const_int(&v.lo, &consts)?;
            let hi = const_int(&v.hi, &consts)?;
            let start = match &v.init {
                Some(e) => const_int(e, &consts)?,
                None => lo,
            };
            if lo > hi || start < lo || start > hi {
                return Err(ExpandError::BadRange {
                    var: v.name.clone(),
                    lo,
                    hi,
                });
            }
            vars.push(VarInfo {
                name: v.name.clone(),
                lo,
                hi,
            });
            init.push(start);
        }
        let names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();
        let mut commands = Vec::new();
        for cmd in &ast.commands {
            let guard = compile(&cmd.guard, &names, &consts)?;
            let line = cmd.span.line;
            let mut weights = Vec::new();
            for u in &cmd.updates {
                let w = eval_const(&u.prob, &consts)?;
                let w = w.as_rational().ok_or_else(|| {
                    EvalError::Type(format!("weight at line {line} is not numeric"))
                })?;
                if !is_probability(&w) {
                    return Err(ExpandError::ProbabilityOutOfRange {
                        line,
                        value: w.to_string(),
                    });
                }
                weights.push(w);
            }
            let sum: Rational = weights.iter().sum();
            if !sum.is_one() {
                let gap = Rational::one() - &sum;
                if weights.is_empty() || gap.abs() > repair_tolerance() {
                    return Err(ExpandError::ProbabilitySumError {
                        line,
                        sum: ratio::render_exact(&sum),
                    });
                }
                let largest = (0..weights.len())
                    .max_by(|&a, &b| weights[a].cmp(&weights[b]).then(b.cmp(&a)))
                    .unwrap();
                warn!(
                    "weights of the command at line {line} sum to {}; adjusting the largest weight by {}",
                    ratio::render_exact(&sum),
                    ratio::render_exact(&gap)
                );
                weights[largest] += gap;
            }
            let mut updates = Vec::new();
            for (u, w) in cmd.updates.iter().zip(weights) {
                if w.is_zero() {
                    continue;
                }
                let assigns = u
                    .assignments
                    .iter()
                    .map(|a| {
                        let slot = names.iter().position(|n| *n == a.var).ok_or_else(|| {
                            ExpandError::Eval(EvalError::Unknown(a.var.clone()))
                        })?;
                        Ok((slot, compile(&a.value, &names, &consts)?))
                    })
                    .collect::<Result<Vec<_>, ExpandError>>()?;
                updates.push(CUpdate { prob: w, assigns });
            }
            commands.push(CCommand {
                guard,
                updates,
                line,
            });
        }
        Ok(CompiledModel {
            vars,
            consts,
            commands,
            init,
        })
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn constants(&self) -> &BTreeMap<String, Value> {
        &self.consts
    }

    /// The unique enabled command in `state`, if any.
    pub(crate) fn enabled(&self, state: &[i64]) -> Result<Option<usize>, ExpandError> {
        let mut found: Option<usize> = None;
        for (i, cmd) in self.commands.iter().enumerate() {
            if cmd.guard.eval_bool(state)? {
                if let Some(first) = found {
                    return Err(ExpandError::OverlappingGuards {
                        state: describe(&self.vars, state),
                        first: self.commands[first].line,
                        second: cmd.line,
                    });
                }
                found = Some(i);
            }
        }
        Ok(found)
    }

    pub(crate) fn apply(
        &self,
        cmd: &CCommand,
        update: &CUpdate,
        state: &[i64],
    ) -> Result<Vec<i64>, ExpandError> {
        let mut next = state.to_vec();
        for (slot, value) in &update.assigns {
            let v = value.eval_int(state)?;
            let info = &self.vars[*slot];
            if v < info.lo || v > info.hi {
                return Err(ExpandError::RangeViolation {
                    line: cmd.line,
                    var: info.name.clone(),
                    value: v,
                    lo: info.lo,
                    hi: info.hi,
                    state: describe(&self.vars, state),
                });
            }
            next[*slot] = v;
        }
        Ok(next)
    }

    /// Successor distribution of `state`; `None` when no command is enabled.
    pub(crate) fn successors(
        &self,
        state: &[i64],
    ) -> Result<Option<Vec<(Vec<i64>, Rational)>>, ExpandError> {
        let Some(ci) = self.enabled(state)? else {
            return Ok(None);
        };
        let cmd = &self.commands[ci];
        let mut out: Vec<(Vec<i64>, Rational)> = Vec::with_capacity(cmd.updates.len());
        for u in &cmd.updates {
            let next = self.apply(cmd, u, state)?;
            match out.iter_mut().find(|(s, _)| *s == next) {
                Some((_, p)) => *p += &u.prob,
                None => out.push((next, u.prob.clone())),
            }
        }
        Ok(Some(out))
    }

    /// Breadth-first exploration from `start`, appending new states to `m`.
    pub(crate) fn explore_from(&self, m: &mut Dtmc, start: Vec<i64>) -> Result<usize, ExpandError> {
        let start_index = intern(m, start);
        let mut queue = VecDeque::from([start_index]);
        let mut deadlocks = 0usize;
        while let Some(s) = queue.pop_front() {
            if s < m.rows.len() && !m.rows[s].is_empty() {
                continue;
            }
            let state = m.states[s].clone();
            let row = match self.successors(&state)? {
                Some(succ) => succ
                    .into_iter()
                    .map(|(next, p)| {
                        let before = m.states.len();
                        let t = intern(m, next);
                        if t == before {
                            queue.push_back(t);
                        }
                        (t, p)
                    })
                    .collect(),
                None => {
                    deadlocks += 1;
                    vec![(s, Rational::one())]
                }
            };
            if m.rows.len() <= s {
                m.rows.resize(s + 1, Vec::new());
            }
            m.rows[s] = row;
            if m.states.len() > MAX_STATES {
                return Err(ExpandError::TooManyStates(MAX_STATES));
            }
        }
        m.rows.resize(m.states.len(), Vec::new());
        if deadlocks > 0 {
            warn!("{deadlocks} state(s) have no enabled command; added self-loops");
        }
        Ok(start_index)
    }
}

fn intern(m: &mut Dtmc, valuation: Vec<i64>) -> usize {
    if let Some(&i) = m.index.get(&valuation) {
        return i;
    }
    let i = m.states.len();
    m.index.insert(valuation.clone(), i);
    m.states.push(valuation);
    i
}

/// Expands `ast` into its reachable explicit DTMC.
pub fn expand(ast: &ModelAst, bindings: &BTreeMap<String, Value>) -> Result<Dtmc, ExpandError> {
    let model = Arc::new(CompiledModel::new(ast, bindings)?);
    let mut m = Dtmc {
        vars: model.vars.clone(),
        consts: model.consts.clone(),
        states: Vec::new(),
        index: HashMap::new(),
        initial: 0,
        rows: Vec::new(),
        source: Some(model.clone()),
    };
    m.initial = model.explore_from(&mut m, model.init.clone())?;
    Ok(m)
}

/// Integer bindings from `NAME=VALUE` pairs; values with a `.` or `/` are
/// taken as exact rationals.
pub fn parse_bindings<S: AsRef<str>>(pairs: &[S]) -> Result<BTreeMap<String, Value>, String> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        for item in pair.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| format!("binding `{item}` is not NAME=VALUE"))?;
            let value = value.trim();
            let parsed = if let Ok(i) = value.parse::<i64>() {
                Value::Int(i)
            } else if let Some((n, d)) = value.split_once('/') {
                let n: i64 = n.trim().parse().map_err(|_| format!("bad value `{value}`"))?;
                let d: i64 = d.trim().parse().map_err(|_| format!("bad value `{value}`"))?;
                if d == 0 {
                    return Err(format!("bad value `{value}`"));
                }
                Value::Rat(Rational::new(n.into(), d.into()))
            } else {
                Value::Rat(ratio::parse_decimal(value).ok_or_else(|| format!("bad value `{value}`"))?)
            };
            out.insert(name.trim().to_string(), parsed);
        }
    }
    Ok(out)
}

/// Number of valuations in the declared variable ranges (an upper bound on
/// the reachable state count).
pub fn declared_state_bound(model: &CompiledModel) -> f64 {
    model
        .vars
        .iter()
        .map(|v| (v.hi - v.lo + 1).to_f64().unwrap_or(f64::INFINITY))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_model;

    fn bind(pairs: &[&str]) -> BTreeMap<String, Value> {
        parse_bindings(pairs).unwrap()
    }

    const HE_MODEL: &str = "dtmc
module perception
  he : [0..2] init 0;
  he_est : [0..2] init 0;
  phase : [0..1] init 0;
  [] phase=0 & he=0 -> 0.675: (he_est'=0)&(phase'=1) + 0.304: (he_est'=1)&(phase'=1) + 0.021: (he_est'=2)&(phase'=1);
  [] phase=0 & he=1 -> 0.043: (he_est'=0)&(phase'=1) + 0.957: (he_est'=1)&(phase'=1) + 0.0: (he_est'=2)&(phase'=1);
  [] phase=0 & he=2 -> 0.377: (he_est'=0)&(phase'=1) + 0.107: (he_est'=1)&(phase'=1) + 0.516: (he_est'=2)&(phase'=1);
  [] phase=1 -> (he'=he_est)&(phase'=0);
endmodule
";

    #[test]
    fn he_chain() {
        let ast = parse_model(HE_MODEL).unwrap();
        let m = expand(&ast, &BTreeMap::new()).unwrap();
        // he=0 initially; he=1 and he=2 in phase 0 once estimated; then the
        // 3 + 2 + 3 nonzero estimates of each true value in phase 1
        assert_eq!(m.num_states(), 11);
        m.validate().unwrap();
        m.check_reachable().unwrap();
        let init_row = m.row(m.initial());
        assert_eq!(init_row.len(), 3);
        assert!(init_row.iter().any(|(_, p)| *p == ratio::frac(675, 1000)));
    }

    #[test]
    fn deadlock_gets_self_loop() {
        let ast = parse_model("dtmc module m x:[0..0] init 0; endmodule").unwrap();
        let m = expand(&ast, &BTreeMap::new()).unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.row(0), &[(0, Rational::one())]);
    }

    #[test]
    fn weight_sum_errors() {
        let ast = parse_model("dtmc module m x:[0..1] init 0; [] x=0 -> 0.5:(x'=1) + 0.4:(x'=0); endmodule")
            .unwrap();
        assert!(matches!(
            expand(&ast, &BTreeMap::new()),
            Err(ExpandError::ProbabilitySumError { line: 1, .. })
        ));
    }

    #[test]
    fn rounding_artifacts_are_repaired() {
        let ast = parse_model(
            "dtmc module m x:[0..2] init 0; [] x=0 -> 0.3333333333:(x'=1) + 0.6666666666:(x'=2); endmodule",
        )
        .unwrap();
        let m = expand(&ast, &BTreeMap::new()).unwrap();
        m.validate().unwrap();
        let largest = m.row(0).iter().map(|(_, p)| p.clone()).max().unwrap();
        assert_eq!(largest, ratio::parse_decimal("0.6666666667").unwrap());
    }

    #[test]
    fn overlapping_guards_are_rejected() {
        let ast = parse_model("dtmc module m x:[0..1] init 0; [] x=0 -> (x'=1); [] x<=1 -> (x'=0); endmodule")
            .unwrap();
        assert!(matches!(
            expand(&ast, &BTreeMap::new()),
            Err(ExpandError::OverlappingGuards { .. })
        ));
    }

    #[test]
    fn range_violation() {
        let ast = parse_model("dtmc module m x:[0..1] init 0; [] true -> (x'=x+1); endmodule").unwrap();
        assert!(matches!(
            expand(&ast, &BTreeMap::new()),
            Err(ExpandError::RangeViolation { value: 2, .. })
        ));
    }

    #[test]
    fn symbolic_constants_need_bindings() {
        let ast = parse_model(
            "dtmc const int N; module m x:[0..N] init 0; [] x<N -> (x'=x+1); [] x=N -> true; endmodule",
        )
        .unwrap();
        assert_eq!(
            expand(&ast, &BTreeMap::new()).unwrap_err(),
            ExpandError::UnboundConstant("N".into())
        );
        let m = expand(&ast, &bind(&["N=4"])).unwrap();
        assert_eq!(m.num_states(), 5);
    }

    #[test]
    fn duplicate_targets_merge() {
        let ast = parse_model("dtmc module m x:[0..1] init 0; [] x=0 -> 0.5:(x'=1) + 0.5:(x'=1); [] x=1 -> true; endmodule")
            .unwrap();
        let m = expand(&ast, &BTreeMap::new()).unwrap();
        assert_eq!(m.row(0), &[(1, Rational::one())]);
    }

    #[test]
    fn bindings_parse() {
        let b = bind(&["N=3,M=2", "p=0.25", "q=1/3"]);
        assert_eq!(b["N"], Value::Int(3));
        assert_eq!(b["p"], Value::Rat(ratio::frac(1, 4)));
        assert_eq!(b["q"], Value::Rat(ratio::frac(1, 3)));
        assert!(parse_bindings(&["N"]).is_err());
    }
}
