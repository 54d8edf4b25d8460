//! Reachability probabilities `P=? [ F φ ]` and `P=? [ F<=k φ ]` on explicit chains.

use num::{One, Zero};
use thiserror::Error;

use crate::dtmc::Dtmc;
use crate::lang::ast::{BoundExpr, Expr, PropertyAst};
use crate::lang::expand::ExpandError;
use crate::ratio::{self, Rational};

/// Chains up to this size are solved exactly by default.
pub const EXACT_STATE_LIMIT: usize = 50_000;
const FLOAT_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("target cannot be evaluated: {0}")]
    TargetUnparsable(#[from] ExpandError),
    #[error("step bound `{0}` is not an integer constant of the model")]
    UnboundStepBound(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("iterative solver did not converge after {0} sweeps")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    /// Exact up to [`EXACT_STATE_LIMIT`] states, floating point beyond.
    #[default]
    Auto,
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LinearSolve,
    ValueIteration,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LinearSolve => "linear-solve",
            Method::ValueIteration => "value-iteration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Exact(Vec<Rational>),
    Float(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub per_state: Values,
    pub initial: usize,
    pub method: Method,
}

impl ReachResult {
    pub fn at_initial(&self) -> f64 {
        self.at(self.initial)
    }

    pub fn at(&self, s: usize) -> f64 {
        match &self.per_state {
            Values::Exact(v) => ratio::to_f64(&v[s]),
            Values::Float(v) => v[s],
        }
    }

    pub fn exact_at_initial(&self) -> Option<&Rational> {
        match &self.per_state {
            Values::Exact(v) => Some(&v[self.initial]),
            Values::Float(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.per_state, Values::Exact(_))
    }

    /// The value at the initial state: exact when available, else the double.
    pub fn display_initial(&self) -> String {
        match self.exact_at_initial() {
            Some(r) => format!("{}", ratio::to_f64(r)),
            None => format!("{}", self.at_initial()),
        }
    }
}

fn positive_successors(m: &Dtmc) -> Vec<Vec<usize>> {
    m.rows()
        .iter()
        .map(|row| row.iter().filter(|(_, p)| !p.is_zero()).map(|(t, _)| *t).collect())
        .collect()
}

pub fn forward_reachable(m: &Dtmc, start: usize) -> Vec<bool> {
    let succ = positive_successors(m);
    let mut seen = vec![false; m.num_states()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        for &t in &succ[s] {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// States from which some `target` state is reachable with positive probability.
pub fn backward_reachable(m: &Dtmc, target: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, succ) in positive_successors(m).into_iter().enumerate() {
        for t in succ {
            pred[t].push(s);
        }
    }
    let mut seen = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// Partition into (yes, maybe) given the target set; states in neither are S_no.
pub fn precompute(m: &Dtmc, target: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let can_reach = backward_reachable(m, target);
    let maybe = (0..m.num_states()).map(|s| can_reach[s] && !target[s]).collect();
    (target.to_vec(), maybe)
}

fn use_exact(m: &Dtmc, mode: SolverMode) -> bool {
    match mode {
        SolverMode::Exact => true,
        SolverMode::Float => false,
        SolverMode::Auto => m.num_states() <= EXACT_STATE_LIMIT,
    }
}

/// Strongly connected components of the subgraph induced by `within`, sinks
/// first: each component is listed after every component it can reach.
pub(crate) fn sccs(succ: &[Vec<usize>], within: &[bool]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0usize;
    for root in 0..n {
        if !within[root] || index[root] != usize::MAX {
            continue;
        }
        // iterative Tarjan: (node, next edge position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if !within[w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn solve_exact(m: &Dtmc, yes: &[bool], maybe: &[bool]) -> Result<Vec<Rational>, CheckError> {
    let n = m.num_states();
    let mut x: Vec<Rational> = (0..n)
        .map(|s| if yes[s] { Rational::one() } else { Rational::zero() })
        .collect();
    let succ = positive_successors(m);
    for comp in sccs(&succ, maybe) {
        if comp.len() == 1 {
            let s = comp[0];
            let mut stay = Rational::zero();
            let mut b = Rational::zero();
            for (t, p) in m.row(s) {
                if *t == s {
                    stay += p;
                } else {
                    b += p * &x[*t];
                }
            }
            let free = Rational::one() - stay;
            if free.is_zero() {
                return Err(CheckError::SingularSystem);
            }
            x[s] = b / free;
            continue;
        }
        let k = comp.len();
        let pos: std::collections::HashMap<usize, usize> =
            comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        // (I - P_cc) x_c = P_c,out x_out
        let mut a = vec![vec![Rational::zero(); k + 1]; k];
        for (i, &s) in comp.iter().enumerate() {
            a[i][i] = Rational::one();
            for (t, p) in m.row(s) {
                match pos.get(t) {
                    Some(&j) => a[i][j] -= p,
                    None => {
                        let contrib = p * &x[*t];
                        a[i][k] += contrib;
                    }
                }
            }
        }
        let sol = gauss_solve(a)?;
        for (i, &s) in comp.iter().enumerate() {
            x[s] = sol[i].clone();
        }
    }
    Ok(x)
}

/// Gaussian elimination on an augmented matrix with exact arithmetic.
pub(crate) fn gauss_solve(mut a: Vec<Vec<Rational>>) -> Result<Vec<Rational>, CheckError> {
    let k = a.len();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !a[r][col].is_zero())
            .ok_or(CheckError::SingularSystem)?;
        a.swap(col, pivot);
        let inv = Rational::one() / &a[col][col];
        for j in col..=k {
            let v = &a[col][j] * &inv;
            a[col][j] = v;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for j in col..=k {
                if !pivot_row[j].is_zero() {
                    let d = &factor * &pivot_row[j];
                    row[j] -= d;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[k].clone()).collect())
}

fn solve_float(m: &Dtmc, yes: &[bool], maybe: &[bool]) -> Result<Vec<f64>, CheckError> {
    let n = m.num_states();
    let rows = m.float_rows();
    let mut x: Vec<f64> = (0..n).map(|s| if yes[s] { 1.0 } else { 0.0 }).collect();
    let order: Vec<usize> = (0..n).filter(|&s| maybe[s]).collect();
    for _ in 0..MAX_SWEEPS {
        let mut residual: f64 = 0.0;
        for &s in &order {
            let mut stay = 0.0;
            let mut b = 0.0;
            for &(t, p) in &rows[s] {
                if t == s {
                    stay += p;
                } else {
                    b += p * x[t];
                }
            }
            let v = (b / (1.0 - stay)).clamp(0.0, 1.0);
            residual = residual.max((v - x[s]).abs());
            x[s] = v;
        }
        if residual < FLOAT_TOLERANCE {
            return Ok(x);
        }
    }
    Err(CheckError::NoConvergence(MAX_SWEEPS))
}

/// Unbounded reachability given the target as a state set.
pub fn prob_reach_set(m: &Dtmc, target: &[bool], mode: SolverMode) -> Result<ReachResult, CheckError> {
    let (yes, maybe) = precompute(m, target);
    let per_state = if use_exact(m, mode) {
        Values::Exact(solve_exact(m, &yes, &maybe)?)
    } else {
        Values::Float(solve_float(m, &yes, &maybe)?)
    };
    Ok(ReachResult {
        per_state,
        initial: m.initial(),
        method: Method::LinearSolve,
    })
}

pub fn prob_reach(m: &Dtmc, target: &Expr, mode: SolverMode) -> Result<ReachResult, CheckError> {
    let sat = m.satisfying(target)?;
    prob_reach_set(m, &sat, mode)
}

pub fn prob_reach_bounded_set(
    m: &Dtmc,
    target: &[bool],
    k: u64,
    mode: SolverMode,
) -> ReachResult {
    let n = m.num_states();
    let (yes, maybe) = precompute(m, target);
    let per_state = if use_exact(m, mode) {
        let mut x: Vec<Rational> = (0..n)
            .map(|s| if yes[s] { Rational::one() } else { Rational::zero() })
            .collect();
        for _ in 0..k {
            let next: Vec<Rational> = (0..n)
                .map(|s| {
                    if !maybe[s] {
                        return x[s].clone();
                    }
                    m.row(s).iter().map(|(t, p)| p * &x[*t]).sum()
                })
                .collect();
            if next == x {
                break;
            }
            x = next;
        }
        Values::Exact(x)
    } else {
        let rows = m.float_rows();
        let mut x: Vec<f64> = (0..n).map(|s| if yes[s] { 1.0 } else { 0.0 }).collect();
        for _ in 0..k {
            let next: Vec<f64> = (0..n)
                .map(|s| {
                    if !maybe[s] {
                        return x[s];
                    }
                    rows[s].iter().map(|(t, p)| p * x[*t]).sum()
                })
                .collect();
            if next == x {
                break;
            }
            x = next;
        }
        Values::Float(x)
    };
    ReachResult {
        per_state,
        initial: m.initial(),
        method: Method::ValueIteration,
    }
}

pub fn prob_reach_bounded(
    m: &Dtmc,
    target: &Expr,
    k: u64,
    mode: SolverMode,
) -> Result<ReachResult, CheckError> {
    let sat = m.satisfying(target)?;
    Ok(prob_reach_bounded_set(m, &sat, k, mode))
}

/// Resolves a step bound against the model's constants.
pub fn resolve_bound(m: &Dtmc, bound: &BoundExpr) -> Result<u64, CheckError> {
    match bound {
        BoundExpr::Literal(k) => Ok(*k),
        BoundExpr::Const(name) => m
            .constants()
            .get(name)
            .and_then(|v| v.as_int())
            .and_then(|v| u64::try_from(v).ok())
            .ok_or_else(|| CheckError::UnboundStepBound(name.clone())),
    }
}

pub fn check(m: &Dtmc, prop: &PropertyAst, mode: SolverMode) -> Result<ReachResult, CheckError> {
    match &prop.bound {
        None => prob_reach(m, &prop.target, mode),
        Some(b) => {
            let k = resolve_bound(m, b)?;
            prob_reach_bounded(m, &prop.target, k, mode)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_expr;
    use crate::ratio::frac;

    fn target(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn one() -> Rational {
        Rational::one()
    }

    #[test]
    fn single_branch() {
        let m = Dtmc::from_rows(
            vec![
                vec![(1, frac(1, 5)), (2, frac(4, 5))],
                vec![(1, one())],
                vec![(2, one())],
            ],
            0,
        )
        .unwrap();
        for mode in [SolverMode::Exact, SolverMode::Float] {
            let r = prob_reach(&m, &target("s=1"), mode).unwrap();
            assert!((r.at_initial() - 0.2).abs() < 1e-12);
        }
        let r = prob_reach(&m, &target("s=1"), SolverMode::Exact).unwrap();
        assert_eq!(r.exact_at_initial(), Some(&frac(1, 5)));
    }

    #[test]
    fn almost_sure_absorption() {
        let m = Dtmc::from_rows(vec![vec![(0, frac(4, 5)), (1, frac(1, 5))], vec![(1, one())]], 0).unwrap();
        let r = prob_reach(&m, &target("s=1"), SolverMode::Exact).unwrap();
        assert_eq!(r.exact_at_initial(), Some(&one()));
        let f = prob_reach(&m, &target("s=1"), SolverMode::Float).unwrap();
        assert!((f.at_initial() - 1.0).abs() < 1e-10);
        let b = prob_reach_bounded(&m, &target("s=1"), 3, SolverMode::Exact).unwrap();
        assert_eq!(b.exact_at_initial(), Some(&frac(488, 1000)));
        let b0 = prob_reach_bounded(&m, &target("s=1"), 0, SolverMode::Exact).unwrap();
        assert_eq!(b0.exact_at_initial(), Some(&Rational::zero()));
    }

    #[test]
    fn two_step_chain() {
        // s0 -> err 0.3, s1 0.7; s1 -> err 0.5, safe 0.5
        let m = Dtmc::from_rows(
            vec![
                vec![(1, frac(3, 10)), (2, frac(7, 10))],
                vec![(1, one())],
                vec![(1, frac(1, 2)), (3, frac(1, 2))],
                vec![(3, one())],
            ],
            0,
        )
        .unwrap();
        let r = prob_reach(&m, &target("s=1"), SolverMode::Exact).unwrap();
        assert_eq!(r.exact_at_initial(), Some(&frac(65, 100)));
    }

    #[test]
    fn cyclic_component_solved_exactly() {
        // 0 <-> 1 cycle leaking to 2 (target) and 3 (sink)
        let m = Dtmc::from_rows(
            vec![
                vec![(1, frac(1, 2)), (2, frac(1, 4)), (3, frac(1, 4))],
                vec![(0, frac(2, 3)), (2, frac(1, 3))],
                vec![(2, one())],
                vec![(3, one())],
            ],
            0,
        )
        .unwrap();
        let r = prob_reach(&m, &target("s=2"), SolverMode::Exact).unwrap();
        // x0 = 1/2 x1 + 1/4, x1 = 2/3 x0 + 1/3  =>  x0 = 5/8
        assert_eq!(r.exact_at_initial(), Some(&frac(5, 8)));
        let f = prob_reach(&m, &target("s=2"), SolverMode::Float).unwrap();
        assert!((f.at_initial() - 0.625).abs() < 1e-10);
    }

    #[test]
    fn initial_in_target() {
        let m = Dtmc::from_rows(vec![vec![(0, one())]], 0).unwrap();
        let r = check(&m, &crate::lang::parse_property("P=? [ F s=0 ]").unwrap(), SolverMode::Auto).unwrap();
        assert_eq!(r.at_initial(), 1.0);
    }

    #[test]
    fn unknown_target_identifier() {
        let m = Dtmc::from_rows(vec![vec![(0, one())]], 0).unwrap();
        assert!(matches!(
            prob_reach(&m, &target("q=1"), SolverMode::Auto),
            Err(CheckError::TargetUnparsable(_))
        ));
    }

    #[test]
    fn tarjan_orders_sinks_first() {
        let succ = vec![vec![1], vec![2], vec![1]];
        let comps = sccs(&succ, &[true, true, true]);
        assert_eq!(comps, vec![vec![1, 2], vec![0]]);
    }
}
