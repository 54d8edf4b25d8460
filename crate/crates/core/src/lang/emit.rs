//! Renders a perception abstraction as model commands.

use num::{One, Zero};

use super::ast::*;
use super::render::render_command;
use crate::abstraction::PerceptionAbstraction;
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightStyle {
    /// `count/row_total`, exact and self-describing.
    Fraction,
    /// Decimals rounded half-to-even; the largest entry absorbs the rounding
    /// so that each row still sums to exactly 1.
    Decimal(usize),
}

#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub guard_extra: Option<Expr>,
    /// Assignments appended to every update, e.g. a phase counter.
    pub extra_assignments: Vec<Assignment>,
    pub style: WeightStyle,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            guard_extra: None,
            extra_assignments: Vec::new(),
            style: WeightStyle::Fraction,
        }
    }
}

fn decimal_row(a: &PerceptionAbstraction, row: usize, digits: usize) -> Vec<Rational> {
    let mut values: Vec<Rational> = a
        .row_rounded(row, digits)
        .iter()
        .map(|s| ratio::parse_decimal(s).expect("rounded decimal"))
        .collect();
    let sum: Rational = values.iter().sum();
    if !sum.is_one() {
        let largest = (0..values.len())
            .max_by(|&x, &y| a.count(row, x).cmp(&a.count(row, y)).then(y.cmp(&x)))
            .unwrap();
        values[largest] += Rational::one() - sum;
    }
    values
}

/// One command per true state `true_var=k`, choosing `est_var'` according to
/// the abstraction row. Zero-probability outcomes are omitted.
pub fn emit_abstraction_commands(
    a: &PerceptionAbstraction,
    true_var: &str,
    est_var: &str,
    opts: &EmitOptions,
) -> Vec<Command> {
    let space = a.space();
    let mut commands = Vec::new();
    for row in 0..space.len() {
        let decimals = match opts.style {
            WeightStyle::Decimal(d) => Some(decimal_row(a, row, d)),
            WeightStyle::Fraction => None,
        };
        let nonzero = (0..space.len()).filter(|&c| a.count(row, c) > 0).count();
        let mut updates = Vec::new();
        for col in 0..space.len() {
            let prob = match &decimals {
                Some(values) if values[col].is_zero() => continue,
                Some(values) => Expr::Real(values[col].clone()),
                None if a.count(row, col) == 0 => continue,
                None if nonzero == 1 => Expr::Real(Rational::one()),
                None => Expr::bin(
                    BinOp::Div,
                    Expr::Int(a.count(row, col) as i64),
                    Expr::Int(a.row_obs()[row] as i64),
                ),
            };
            let mut assignments = vec![Assignment {
                var: est_var.to_string(),
                value: Expr::int(space.value_of(col)),
            }];
            assignments.extend(opts.extra_assignments.iter().cloned());
            updates.push(Update { prob, assignments });
        }
        let mut guard = Expr::eq(true_var, space.value_of(row));
        if let Some(extra) = &opts.guard_extra {
            guard = Expr::and(guard, extra.clone());
        }
        commands.push(Command {
            guard,
            updates,
            span: Span::default(),
        });
    }
    commands
}

pub fn emit_abstraction_text(
    a: &PerceptionAbstraction,
    true_var: &str,
    est_var: &str,
    opts: &EmitOptions,
) -> String {
    emit_abstraction_commands(a, true_var, est_var, opts)
        .iter()
        .map(|c| format!("{}\n", render_command(c)))
        .collect()
}
