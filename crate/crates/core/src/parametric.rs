//! Parametric chains: estimated transition probabilities become symbolic
//! parameters, and reachability is computed as a rational function of them
//! by state elimination.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::time::Instant;

use num::{One, Zero};
use thiserror::Error;

use crate::abstraction::PerceptionAbstraction;
use crate::dtmc::{Dtmc, DtmcError};
use crate::lang::ast::{BinOp, Command, Expr, ModelAst};
use crate::lang::expand::ExpandError;
use crate::modelcheck;
use crate::poly::{RationalFunction, RfError};
use crate::ratio::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("row `{0}` has no observations")]
    RowAllZeroObservations(String),
    #[error("state {state} matches both row `{first}` and row `{second}`")]
    OverlappingRows {
        state: String,
        first: String,
        second: String,
    },
    #[error("row `{row}`: a transition of state {state} sets {var}={value}, which is not a column of the row")]
    RowMismatch {
        row: String,
        state: String,
        var: String,
        value: i64,
    },
    #[error("row `{row}`: column {column} has no observations but the chain has a transition for it")]
    UnobservedTransition { row: String, column: String },
    #[error("unknown estimate variable `{0}`")]
    UnknownVariable(String),
    #[error("state {0} has a self-loop that is identically 1")]
    StructuralZeroDenominator(String),
    #[error("no value for parameter `{0}`")]
    UnboundParameter(String),
    #[error("division by zero while evaluating")]
    DivideByZero,
    #[error("valuation does not give a probability distribution: {0}")]
    InvalidValuation(String),
    #[error("no command of the model estimates `{0}`")]
    NoEstimatedRows(String),
    #[error("parametric elimination exceeded its time budget")]
    Timeout,
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

impl From<RfError> for ParamError {
    fn from(e: RfError) -> Self {
        match e {
            RfError::DivideByZero | RfError::ZeroDenominator => ParamError::DivideByZero,
        }
    }
}

/// A row of estimated probabilities: in every state satisfying `predicate`,
/// the enabled command sets `est_var` to one of `values` with probability
/// proportional to `counts`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedRow {
    pub name: String,
    pub predicate: Expr,
    pub est_var: String,
    pub labels: Vec<String>,
    pub values: Vec<i64>,
    pub counts: Vec<u64>,
}

/// Rows for every true state of an abstraction: `true_var=k & extra`.
pub fn rows_from_abstraction(
    a: &PerceptionAbstraction,
    true_var: &str,
    est_var: &str,
    extra: Option<&Expr>,
) -> Vec<EstimatedRow> {
    let space = a.space();
    (0..space.len())
        .map(|k| {
            let mut predicate = Expr::eq(true_var, space.value_of(k));
            if let Some(e) = extra {
                predicate = Expr::and(predicate, e.clone());
            }
            EstimatedRow {
                name: format!("{true_var}{}", label_token(space.label(k))),
                predicate,
                est_var: est_var.to_string(),
                labels: space.labels().to_vec(),
                values: (0..space.len()).map(|c| space.value_of(c)).collect(),
                counts: (0..space.len()).map(|c| a.count(k, c)).collect(),
            }
        })
        .collect()
}

fn label_token(label: &str) -> String {
    label.replace('-', "m")
}

fn fraction_weight(e: &Expr) -> Option<(u64, u64)> {
    match e {
        Expr::Binary(BinOp::Div, a, b) => match (a.as_ref(), b.as_ref()) {
            (Expr::Int(a), Expr::Int(b)) if *a >= 0 && *b > 0 => Some((*a as u64, *b as u64)),
            _ => None,
        },
        _ => None,
    }
}

/// The one variable assigned a different literal in every update, with
/// everything else assigned identically.
fn estimated_column(cmd: &Command) -> Option<(String, Vec<i64>)> {
    let first = &cmd.updates[0].assignments;
    'candidates: for a in first {
        let mut values = Vec::new();
        for u in &cmd.updates {
            let Some(b) = u.assignments.iter().find(|b| b.var == a.var) else {
                continue 'candidates;
            };
            let Some(v) = b.value.as_int_literal() else {
                continue 'candidates;
            };
            values.push(v);
            let rest = |xs: &[crate::lang::ast::Assignment]| {
                xs.iter().filter(|x| x.var != a.var).cloned().collect::<Vec<_>>()
            };
            if rest(&u.assignments) != rest(first) {
                continue 'candidates;
            }
        }
        let distinct: BTreeSet<i64> = values.iter().copied().collect();
        if distinct.len() == values.len() {
            return Some((a.var.clone(), values));
        }
    }
    None
}

fn row_name(guard: &Expr, taken: &BTreeSet<String>, fallback: usize) -> String {
    let base = guard
        .conjuncts()
        .iter()
        .find_map(|c| c.as_var_eq().map(|(v, k)| format!("{v}{}", label_token(&k.to_string()))))
        .unwrap_or_else(|| format!("r{fallback}"));
    let mut name = base.clone();
    let mut k = 2;
    while taken.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    name
}

/// Estimated rows read off the model text: commands whose weights are all
/// `count/total` fractions over one denominator and whose updates differ
/// only in the literal assigned to a single variable. Zero-count columns are
/// not visible this way.
pub fn detect_rows(ast: &ModelAst) -> Vec<EstimatedRow> {
    let mut rows = Vec::new();
    let mut taken = BTreeSet::new();
    for (i, cmd) in ast.commands.iter().enumerate() {
        if cmd.updates.len() < 2 {
            continue;
        }
        let Some(weights) = cmd.updates.iter().map(|u| fraction_weight(&u.prob)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        let den = weights[0].1;
        if weights.iter().any(|w| w.1 != den) || weights.iter().map(|w| w.0).sum::<u64>() != den {
            continue;
        }
        let Some((est_var, values)) = estimated_column(cmd) else {
            continue;
        };
        let name = row_name(&cmd.guard, &taken, i);
        taken.insert(name.clone());
        rows.push(EstimatedRow {
            name,
            predicate: cmd.guard.clone(),
            est_var,
            labels: values.iter().map(|v| v.to_string()).collect(),
            values,
            counts: weights.iter().map(|w| w.0).collect(),
        });
    }
    rows
}

/// Rows of `a` placed on the commands that assign `est_var` under a guard
/// conjunct `true_var=k`, so that the predicates carry the rest of each guard.
pub fn rows_from_observations(
    ast: &ModelAst,
    a: &PerceptionAbstraction,
    true_var: &str,
    est_var: &str,
) -> Result<Vec<EstimatedRow>, ParamError> {
    let mut rows = rows_from_abstraction(a, true_var, est_var, None);
    for (k, row) in rows.iter_mut().enumerate() {
        let value = a.space().value_of(k);
        let guards: Vec<Expr> = ast
            .commands
            .iter()
            .filter(|c| {
                c.guard.conjuncts().iter().any(|g| g.as_var_eq() == Some((true_var, value)))
                    && c.updates.iter().any(|u| u.assignments.iter().any(|x| x.var == est_var))
            })
            .map(|c| c.guard.clone())
            .collect();
        let Some(first) = guards.first() else {
            return Err(ParamError::NoEstimatedRows(format!("{est_var} from {true_var}={value}")));
        };
        row.predicate = guards[1..]
            .iter()
            .fold(first.clone(), |acc, g| Expr::bin(BinOp::Or, acc, g.clone()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    /// `{row}_{column}`.
    pub id: String,
    /// Listing-style short name such as `x1`.
    pub alias: String,
    pub row: usize,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRow {
    pub name: String,
    /// Columns kept after pruning, in order; the last is `1 - sum(others)`.
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    /// Parameter indices of all but the last kept column.
    pub params: Vec<u32>,
    /// Number of chain states governed by this row.
    pub members: usize,
}

impl ParamRow {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct ParamDtmc {
    base: Dtmc,
    rows: Vec<Vec<(usize, RationalFunction)>>,
    params: Vec<Parameter>,
    prows: Vec<ParamRow>,
}

struct RowGroup {
    name: String,
    labels: Vec<String>,
    counts: Vec<u64>,
    /// Kept column indices.
    kept: Vec<usize>,
    /// Per member state, the target of each column.
    members: Vec<(usize, Vec<Option<usize>>)>,
}

fn alias_prefix(row: usize) -> String {
    const LETTERS: [&str; 12] = ["x", "y", "z", "u", "w", "a", "b", "c", "d", "e", "f", "g"];
    match LETTERS.get(row) {
        Some(l) => (*l).to_string(),
        None => format!("p{row}_"),
    }
}

fn build(base: Dtmc, groups: Vec<RowGroup>) -> ParamDtmc {
    let n = base.num_states();
    let mut params = Vec::new();
    let mut prows = Vec::new();
    let mut owner: Vec<Option<(usize, usize)>> = vec![None; n];
    for (gi, g) in groups.iter().enumerate() {
        let mut ids = Vec::new();
        for (k, &c) in g.kept.iter().enumerate() {
            if k + 1 == g.kept.len() {
                break;
            }
            ids.push(params.len() as u32);
            params.push(Parameter {
                id: format!("{}_{}", g.name, label_token(&g.labels[c])),
                alias: format!("{}{}", alias_prefix(gi), k + 1),
                row: gi,
                column: g.labels[c].clone(),
            });
        }
        for (mi, (s, _)) in g.members.iter().enumerate() {
            owner[*s] = Some((gi, mi));
        }
        prows.push(ParamRow {
            name: g.name.clone(),
            labels: g.kept.iter().map(|&c| g.labels[c].clone()).collect(),
            counts: g.kept.iter().map(|&c| g.counts[c]).collect(),
            params: ids,
            members: g.members.len(),
        });
    }
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let Some((gi, mi)) = owner[s] else {
            rows.push(
                base.row(s)
                    .iter()
                    .map(|(t, p)| (*t, RationalFunction::constant(p)))
                    .collect(),
            );
            continue;
        };
        let g = &groups[gi];
        let targets = &g.members[mi].1;
        let ids = &prows[gi].params;
        let mut sum_explicit = RationalFunction::zero();
        let mut row: Vec<(usize, RationalFunction)> = Vec::new();
        for (k, &c) in g.kept.iter().enumerate() {
            let f = if k < ids.len() {
                let v = RationalFunction::var(ids[k]);
                sum_explicit = &sum_explicit + &v;
                v
            } else {
                sum_explicit.one_minus()
            };
            let t = targets[c].expect("kept column has a target");
            match row.iter_mut().find(|(u, _)| *u == t) {
                Some((_, acc)) => *acc = &*acc + &f,
                None => row.push((t, f)),
            }
        }
        rows.push(row);
    }
    ParamDtmc {
        base,
        rows,
        params,
        prows,
    }
}

fn classify(m: &Dtmc, row: &EstimatedRow, est: usize) -> Result<Vec<(usize, Vec<Option<usize>>)>, ParamError> {
    let sat = m.satisfying(&row.predicate)?;
    let mut members = Vec::new();
    for s in (0..m.num_states()).filter(|&s| sat[s]) {
        let mut targets = vec![None; row.values.len()];
        for (t, _) in m.row(s) {
            let value = m.state(*t)[est];
            let Some(c) = row.values.iter().position(|v| *v == value) else {
                return Err(ParamError::RowMismatch {
                    row: row.name.clone(),
                    state: m.describe_state(s),
                    var: row.est_var.clone(),
                    value,
                });
            };
            targets[c] = Some(*t);
        }
        members.push((s, targets));
    }
    Ok(members)
}

/// Replaces the estimated rows of `m` by parameters. With `prune_zero`,
/// unobserved columns are dropped; otherwise they are re-introduced as
/// parameters (adding the states they lead to).
pub fn parameterize(m: &Dtmc, rows: &[EstimatedRow], prune_zero: bool) -> Result<ParamDtmc, ParamError> {
    for r in rows {
        if r.counts.iter().all(|c| *c == 0) {
            return Err(ParamError::RowAllZeroObservations(r.name.clone()));
        }
    }
    let mut work = m.clone();
    let est_index = |m: &Dtmc, r: &EstimatedRow| {
        m.var_index(&r.est_var)
            .ok_or_else(|| ParamError::UnknownVariable(r.est_var.clone()))
    };
    if !prune_zero {
        loop {
            let mut added = false;
            for r in rows {
                let est = est_index(&work, r)?;
                for (_, targets) in classify(&work, r, est)? {
                    let Some(template) = targets.iter().flatten().next().copied() else {
                        continue;
                    };
                    for (c, t) in targets.iter().enumerate() {
                        if t.is_none() {
                            let mut valuation = work.state(template).to_vec();
                            valuation[est] = r.values[c];
                            if work.state_index(&valuation).is_none() {
                                work.ensure_state(&valuation)?;
                                added = true;
                            }
                        }
                    }
                }
            }
            if !added {
                break;
            }
        }
    }
    let mut groups = Vec::new();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (ri, r) in rows.iter().enumerate() {
        let est = est_index(&work, r)?;
        let mut members = classify(&work, r, est)?;
        let kept: Vec<usize> = (0..r.values.len())
            .filter(|&c| !prune_zero || r.counts[c] > 0)
            .collect();
        for (s, targets) in &mut members {
            if let Some(prev) = owner.insert(*s, ri) {
                return Err(ParamError::OverlappingRows {
                    state: work.describe_state(*s),
                    first: rows[prev].name.clone(),
                    second: r.name.clone(),
                });
            }
            if let Some(c) = (0..targets.len()).find(|c| targets[*c].is_some() && !kept.contains(c)) {
                return Err(ParamError::UnobservedTransition {
                    row: r.name.clone(),
                    column: r.labels[c].clone(),
                });
            }
            let template = targets.iter().flatten().next().copied();
            for &c in &kept {
                if targets[c].is_none() {
                    // present in the row but absent from this state's command
                    let mut valuation = work.state(template.unwrap_or(*s)).to_vec();
                    valuation[est] = r.values[c];
                    targets[c] = work.state_index(&valuation);
                    if targets[c].is_none() {
                        return Err(ParamError::RowMismatch {
                            row: r.name.clone(),
                            state: work.describe_state(*s),
                            var: r.est_var.clone(),
                            value: r.values[c],
                        });
                    }
                }
            }
        }
        groups.push(RowGroup {
            name: r.name.clone(),
            labels: r.labels.clone(),
            counts: r.counts.clone(),
            kept,
            members,
        });
    }
    Ok(build(work, groups))
}

/// Makes every branching state of `m` its own parameter row; counts are the
/// numerators of the row over a common denominator.
pub fn parameterize_branching(m: &Dtmc) -> ParamDtmc {
    let mut groups = Vec::new();
    for s in 0..m.num_states() {
        let row = m.row(s);
        if row.iter().filter(|(_, p)| !p.is_zero()).count() < 2 {
            continue;
        }
        let den = row
            .iter()
            .fold(num::BigInt::one(), |acc, (_, p)| num::Integer::lcm(&acc, p.denom()));
        let entries: Vec<(usize, Rational)> = row.iter().filter(|(_, p)| !p.is_zero()).cloned().collect();
        let counts = entries
            .iter()
            .map(|(_, p)| {
                let c = p * Rational::from_integer(den.clone());
                num::ToPrimitive::to_u64(&c.to_integer()).unwrap_or(u64::MAX)
            })
            .collect();
        groups.push(RowGroup {
            name: format!("s{s}"),
            labels: entries.iter().map(|(t, _)| t.to_string()).collect(),
            counts,
            kept: (0..entries.len()).collect(),
            members: vec![(s, entries.iter().map(|(t, _)| Some(*t)).collect())],
        });
    }
    build(m.clone(), groups)
}

impl ParamDtmc {
    pub fn base(&self) -> &Dtmc {
        &self.base
    }

    pub fn num_states(&self) -> usize {
        self.base.num_states()
    }

    pub fn row(&self, s: usize) -> &[(usize, RationalFunction)] {
        &self.rows[s]
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn param_rows(&self) -> &[ParamRow] {
        &self.prows
    }

    pub fn ids(&self) -> Vec<String> {
        self.params.iter().map(|p| p.id.clone()).collect()
    }

    pub fn aliases(&self) -> Vec<String> {
        self.params.iter().map(|p| p.alias.clone()).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.id == name || p.alias == name)
    }

    /// Empirical frequencies of the kept columns.
    pub fn point_estimate(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.params.len()];
        for r in &self.prows {
            let total = r.total();
            for (k, &p) in r.params.iter().enumerate() {
                out[p as usize] = crate::ratio::frac(r.counts[k], total);
            }
        }
        out
    }

    /// Checks that every parametric row is a distribution at `point`.
    pub fn check_valuation(&self, point: &[Rational]) -> Result<(), ParamError> {
        for r in &self.prows {
            let mut sum = Rational::zero();
            for &p in &r.params {
                let v = &point[p as usize];
                if v < &Rational::zero() || v > &Rational::one() {
                    return Err(ParamError::InvalidValuation(format!(
                        "{} = {v}",
                        self.params[p as usize].id
                    )));
                }
                sum += v;
            }
            if sum > Rational::one() {
                return Err(ParamError::InvalidValuation(format!("row {} sums to {sum}", r.name)));
            }
        }
        Ok(())
    }

    /// The concrete chain at a rational parameter point.
    pub fn instantiate(&self, point: &[Rational]) -> Result<Dtmc, ParamError> {
        self.check_valuation(point)?;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(t, f)| Ok((*t, f.eval(point)?)))
                    .collect::<Result<Vec<_>, ParamError>>()
            })
            .collect::<Result<Vec<_>, ParamError>>()?;
        let m = self.base.with_rows(rows);
        m.validate().map_err(|e: DtmcError| ParamError::InvalidValuation(e.to_string()))?;
        Ok(m)
    }

    /// Canonical text of `f` in terms of parameter ids.
    pub fn rf_text(&self, f: &RationalFunction) -> String {
        f.to_text(&self.ids())
    }

    /// The same in terms of listing-style aliases.
    pub fn rf_text_aliases(&self, f: &RationalFunction) -> String {
        f.to_text(&self.aliases())
    }
}

/// Evaluates `f` at a named valuation (ids or aliases of `m`'s parameters).
pub fn evaluate(
    m: &ParamDtmc,
    f: &RationalFunction,
    valuation: &BTreeMap<String, Rational>,
) -> Result<Rational, ParamError> {
    let mut point = vec![Rational::zero(); m.params.len()];
    let mut bound = vec![false; m.params.len()];
    for (name, v) in valuation {
        if let Some(i) = m.param_index(name) {
            point[i] = v.clone();
            bound[i] = true;
        }
    }
    for v in f.variables() {
        if !bound[v as usize] {
            return Err(ParamError::UnboundParameter(m.params[v as usize].id.clone()));
        }
    }
    Ok(f.eval(&point)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    #[default]
    Ascending,
    Descending,
    /// Fewest symbolic neighbours first, recomputed as the graph changes.
    MinDegree,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ElimOptions {
    pub order: EliminationOrder,
    pub deadline: Option<Instant>,
}

/// Reachability probability of `target` from the initial state as a rational
/// function of the parameters.
pub fn param_reach(m: &ParamDtmc, target: &Expr, opts: ElimOptions) -> Result<RationalFunction, ParamError> {
    let sat = m.base.satisfying(target)?;
    param_reach_set(m, &sat, opts)
}

pub fn param_reach_set(m: &ParamDtmc, target: &[bool], opts: ElimOptions) -> Result<RationalFunction, ParamError> {
    let n = m.num_states();
    // the structural graph: a transition exists when its function is not identically zero
    let skeleton = m.base.with_rows(
        m.rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|(_, f)| !f.is_zero())
                    .map(|(t, _)| (*t, Rational::one()))
                    .collect()
            })
            .collect(),
    );
    let (yes, maybe) = modelcheck::precompute(&skeleton, target);
    let init = m.base.initial();
    if yes[init] {
        return Ok(RationalFunction::one());
    }
    if !maybe[init] {
        return Ok(RationalFunction::zero());
    }
    let sink = n;
    let mut out: Vec<BTreeMap<usize, RationalFunction>> = vec![BTreeMap::new(); n + 1];
    let mut inc: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
    for s in (0..n).filter(|&s| maybe[s]) {
        for (t, f) in &m.rows[s] {
            if f.is_zero() {
                continue;
            }
            let dest = if yes[*t] {
                sink
            } else if maybe[*t] {
                *t
            } else {
                continue;
            };
            let entry = out[s].entry(dest).or_insert_with(RationalFunction::zero);
            *entry = &*entry + f;
            inc[dest].insert(s);
        }
    }
    let candidates: Vec<usize> = (0..n).filter(|&s| maybe[s] && s != init).collect();
    let degree = |out: &Vec<BTreeMap<usize, RationalFunction>>, inc: &Vec<BTreeSet<usize>>, v: usize| {
        out[v].len() * inc[v].len()
    };
    let eliminate = |v: usize,
                         out: &mut Vec<BTreeMap<usize, RationalFunction>>,
                         inc: &mut Vec<BTreeSet<usize>>|
     -> Result<Vec<usize>, ParamError> {
        if let Some(deadline) = opts.deadline {
            if Instant::now() > deadline {
                return Err(ParamError::Timeout);
            }
        }
        let mut succ = std::mem::take(&mut out[v]);
        let factor = match succ.remove(&v) {
            Some(stay) => {
                inc[v].remove(&v);
                let free = stay.one_minus();
                if free.is_zero() {
                    return Err(ParamError::StructuralZeroDenominator(m.base.describe_state(v)));
                }
                Some(free.recip()?)
            }
            None => None,
        };
        let preds: Vec<usize> = std::mem::take(&mut inc[v]).into_iter().collect();
        for &w in succ.keys() {
            inc[w].remove(&v);
        }
        let mut touched = Vec::new();
        for &u in &preds {
            let p_uv = out[u].remove(&v).expect("edge recorded in both directions");
            let scaled = match &factor {
                Some(f) => &p_uv * f,
                None => p_uv,
            };
            for (&w, p_vw) in &succ {
                let add = &scaled * p_vw;
                let entry = out[u].entry(w).or_insert_with(RationalFunction::zero);
                *entry = &*entry + &add;
                inc[w].insert(u);
            }
            touched.push(u);
        }
        touched.extend(succ.keys().copied());
        Ok(touched)
    };
    match opts.order {
        EliminationOrder::Ascending => {
            for &v in &candidates {
                eliminate(v, &mut out, &mut inc)?;
            }
        }
        EliminationOrder::Descending => {
            for &v in candidates.iter().rev() {
                eliminate(v, &mut out, &mut inc)?;
            }
        }
        EliminationOrder::MinDegree => {
            let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
                candidates.iter().map(|&v| Reverse((degree(&out, &inc, v), v))).collect();
            let mut alive: Vec<bool> = vec![false; n + 1];
            for &v in &candidates {
                alive[v] = true;
            }
            while let Some(Reverse((d, v))) = heap.pop() {
                if !alive[v] || d != degree(&out, &inc, v) {
                    continue;
                }
                alive[v] = false;
                for u in eliminate(v, &mut out, &mut inc)? {
                    if alive[u] {
                        heap.push(Reverse((degree(&out, &inc, u), u)));
                    }
                }
            }
        }
    }
    let reach = out[init].get(&sink).cloned().unwrap_or_else(RationalFunction::zero);
    match out[init].get(&init) {
        Some(stay) => {
            let free = stay.one_minus();
            if free.is_zero() {
                return Err(ParamError::StructuralZeroDenominator(m.base.describe_state(init)));
            }
            Ok(reach.div(&free)?)
        }
        None => Ok(reach),
    }
}
