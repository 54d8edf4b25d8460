//! Explicit discrete-time Markov chains with exact rational transitions.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num::{One, Zero};

use crate::lang::ast::Expr;
use crate::lang::eval::{compile, CExpr, Value};
use crate::lang::expand::{CompiledModel, ExpandError};
use crate::ratio::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone)]
pub struct Dtmc {
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) consts: BTreeMap<String, Value>,
    pub(crate) states: Vec<Vec<i64>>,
    pub(crate) index: HashMap<Vec<i64>, usize>,
    pub(crate) initial: usize,
    pub(crate) rows: Vec<Vec<(usize, Rational)>>,
    pub(crate) source: Option<Arc<CompiledModel>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DtmcError {
    #[error("row {state} sums to {sum}, not 1")]
    RowSum { state: usize, sum: String },
    #[error("transition {from}->{to} has probability {prob} outside [0,1]")]
    OutOfRange { from: usize, to: usize, prob: String },
    #[error("transition {from}->{to} points outside the state space")]
    BadTarget { from: usize, to: usize },
    #[error("state {0} is not reachable from the initial state")]
    Unreachable(usize),
}

impl Dtmc {
    /// Builds a chain directly from sparse rows. The single variable `s`
    /// holds the state index, so predicates such as `s=3` address states.
    pub fn from_rows(rows: Vec<Vec<(usize, Rational)>>, initial: usize) -> Result<Self, DtmcError> {
        let n = rows.len();
        let states: Vec<Vec<i64>> = (0..n).map(|i| vec![i as i64]).collect();
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let m = Dtmc {
            vars: vec![VarInfo {
                name: "s".into(),
                lo: 0,
                hi: n.saturating_sub(1) as i64,
            }],
            consts: BTreeMap::new(),
            states,
            index,
            initial,
            rows,
            source: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks stochasticity and probability ranges exactly.
    pub fn validate(&self) -> Result<(), DtmcError> {
        let n = self.states.len();
        for (s, row) in self.rows.iter().enumerate() {
            let mut sum = Rational::zero();
            for (t, p) in row {
                if *t >= n {
                    return Err(DtmcError::BadTarget { from: s, to: *t });
                }
                if p < &Rational::zero() || p > &Rational::one() {
                    return Err(DtmcError::OutOfRange {
                        from: s,
                        to: *t,
                        prob: p.to_string(),
                    });
                }
                sum += p;
            }
            if !sum.is_one() {
                return Err(DtmcError::RowSum {
                    state: s,
                    sum: sum.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Fails if some state cannot be reached from the initial state.
    pub fn check_reachable(&self) -> Result<(), DtmcError> {
        let reach = crate::modelcheck::forward_reachable(self, self.initial);
        match reach.iter().position(|r| !r) {
            Some(s) => Err(DtmcError::Unreachable(s)),
            None => Ok(()),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn row(&self, s: usize) -> &[(usize, Rational)] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<(usize, Rational)>] {
        &self.rows
    }

    pub fn state(&self, s: usize) -> &[i64] {
        &self.states[s]
    }

    pub fn state_index(&self, valuation: &[i64]) -> Option<usize> {
        self.index.get(valuation).copied()
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn constants(&self) -> &BTreeMap<String, Value> {
        &self.consts
    }

    pub fn source(&self) -> Option<&Arc<CompiledModel>> {
        self.source.as_ref()
    }

    pub fn describe_state(&self, s: usize) -> String {
        describe(&self.vars, &self.states[s])
    }

    pub fn compile_predicate(&self, e: &Expr) -> Result<CExpr, ExpandError> {
        let names: Vec<String> = self.vars.iter().map(|v| v.name.clone()).collect();
        compile(e, &names, &self.consts).map_err(ExpandError::Eval)
    }

    /// Evaluates a boolean expression in every state.
    pub fn satisfying(&self, e: &Expr) -> Result<Vec<bool>, ExpandError> {
        let c = self.compile_predicate(e)?;
        self.states
            .iter()
            .map(|s| c.eval_bool(s).map_err(ExpandError::Eval))
            .collect()
    }

    /// Adds a state reached outside the stored transition relation (used
    /// when a zero-observation transition is re-introduced as a parameter),
    /// exploring its successors through the source model.
    pub fn ensure_state(&mut self, valuation: &[i64]) -> Result<usize, ExpandError> {
        if let Some(i) = self.state_index(valuation) {
            return Ok(i);
        }
        let source = self.source.clone().ok_or(ExpandError::NoSourceModel)?;
        source.explore_from(self, valuation.to_vec())
    }

    /// Transition matrix as doubles, for simulation and iterative solving.
    pub fn float_rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(t, p)| (*t, crate::ratio::to_f64(p))).collect())
            .collect()
    }

    /// Replaces the transition rows (same state space).
    pub fn with_rows(&self, rows: Vec<Vec<(usize, Rational)>>) -> Dtmc {
        Dtmc {
            rows,
            ..self.clone()
        }
    }
}

pub(crate) fn describe(vars: &[VarInfo], valuation: &[i64]) -> String {
    let parts: Vec<String> = vars
        .iter()
        .zip(valuation)
        .map(|(v, x)| format!("{}={}", v.name, x))
        .collect();
    format!("({})", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    #[test]
    fn from_rows_validates() {
        let ok = Dtmc::from_rows(
            vec![vec![(0, frac(1, 2)), (1, frac(1, 2))], vec![(1, frac(1, 1))]],
            0,
        );
        assert!(ok.is_ok());
        let bad = Dtmc::from_rows(vec![vec![(0, frac(1, 2))]], 0);
        assert!(matches!(bad, Err(DtmcError::RowSum { .. })));
        let bad = Dtmc::from_rows(vec![vec![(3, frac(1, 1))]], 0);
        assert!(matches!(bad, Err(DtmcError::BadTarget { .. })));
    }

    #[test]
    fn predicates_address_states() {
        let m = Dtmc::from_rows(
            vec![vec![(1, frac(1, 1))], vec![(1, frac(1, 1))], vec![(2, frac(1, 1))]],
            0,
        )
        .unwrap();
        let sat = m.satisfying(&crate::lang::parse_expr("s>=1").unwrap()).unwrap();
        assert_eq!(sat, vec![false, true, true]);
        assert_eq!(m.check_reachable(), Err(DtmcError::Unreachable(2)));
    }
}
