//! Expression compilation against a fixed variable layout and evaluation
//! over integer valuations.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, ToPrimitive, Zero};

use super::ast::*;
use crate::ratio::Rational;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Rat(Rational),
    Bool(bool),
}

impl Value {
    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Value::Int(v) => Some(Rational::from_integer((*v).into())),
            Value::Rat(r) => Some(r.clone()),
            Value::Bool(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Rat(r) if r.is_integer() => r.to_integer().to_i64(),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Rat(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown identifier `{0}`")]
    Unknown(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
}

/// Expression with identifiers resolved to variable slots or constant values.
#[derive(Debug, Clone)]
pub enum CExpr {
    Const(Value),
    Var(usize),
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Call(Builtin, Vec<CExpr>),
}

pub fn compile(
    e: &Expr,
    vars: &[String],
    consts: &BTreeMap<String, Value>,
) -> Result<CExpr, EvalError> {
    Ok(match e {
        Expr::Int(v) => CExpr::Const(Value::Int(*v)),
        Expr::Real(r) => CExpr::Const(Value::Rat(r.clone())),
        Expr::Bool(b) => CExpr::Const(Value::Bool(*b)),
        Expr::Ident(name, _) => {
            if let Some(i) = vars.iter().position(|v| v == name) {
                CExpr::Var(i)
            } else if let Some(v) = consts.get(name) {
                CExpr::Const(v.clone())
            } else {
                return Err(EvalError::Unknown(name.clone()));
            }
        }
        Expr::Unary(op, inner) => {
            let inner = compile(inner, vars, consts)?;
            match inner {
                CExpr::Const(v) => CExpr::Const(apply_unary(*op, v)?),
                other => CExpr::Unary(*op, Box::new(other)),
            }
        }
        Expr::Binary(op, l, r) => {
            let l = compile(l, vars, consts)?;
            let r = compile(r, vars, consts)?;
            match (l, r) {
                (CExpr::Const(a), CExpr::Const(b)) => CExpr::Const(apply_binary(*op, a, b)?),
                (l, r) => CExpr::Binary(*op, Box::new(l), Box::new(r)),
            }
        }
        Expr::Call(f, args) => {
            let args = args
                .iter()
                .map(|a| compile(a, vars, consts))
                .collect::<Result<Vec<_>, _>>()?;
            if args.iter().all(|a| matches!(a, CExpr::Const(_))) {
                let values = args
                    .into_iter()
                    .map(|a| match a {
                        CExpr::Const(v) => v,
                        _ => unreachable!(),
                    })
                    .collect();
                CExpr::Const(apply_call(*f, values)?)
            } else {
                CExpr::Call(*f, args)
            }
        }
    })
}

impl CExpr {
    pub fn eval(&self, state: &[i64]) -> Result<Value, EvalError> {
        match self {
            CExpr::Const(v) => Ok(v.clone()),
            CExpr::Var(i) => Ok(Value::Int(state[*i])),
            CExpr::Unary(op, inner) => apply_unary(*op, inner.eval(state)?),
            CExpr::Binary(op, l, r) => {
                // short-circuit keeps guards cheap
                match op {
                    BinOp::And => {
                        if !bool_of(l.eval(state)?)? {
                            return Ok(Value::Bool(false));
                        }
                        Ok(Value::Bool(bool_of(r.eval(state)?)?))
                    }
                    BinOp::Or => {
                        if bool_of(l.eval(state)?)? {
                            return Ok(Value::Bool(true));
                        }
                        Ok(Value::Bool(bool_of(r.eval(state)?)?))
                    }
                    _ => apply_binary(*op, l.eval(state)?, r.eval(state)?),
                }
            }
            CExpr::Call(f, args) => {
                let values = args
                    .iter()
                    .map(|a| a.eval(state))
                    .collect::<Result<Vec<_>, _>>()?;
                apply_call(*f, values)
            }
        }
    }

    pub fn eval_bool(&self, state: &[i64]) -> Result<bool, EvalError> {
        bool_of(self.eval(state)?)
    }

    pub fn eval_int(&self, state: &[i64]) -> Result<i64, EvalError> {
        let v = self.eval(state)?;
        v.as_int()
            .ok_or_else(|| EvalError::Type(format!("expected an integer, got {v}")))
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            CExpr::Const(v) => Some(v),
            _ => None,
        }
    }
}

fn bool_of(v: Value) -> Result<bool, EvalError> {
    v.as_bool()
        .ok_or_else(|| EvalError::Type(format!("expected a boolean, got {v}")))
}

fn num_of(v: &Value) -> Result<Rational, EvalError> {
    v.as_rational()
        .ok_or_else(|| EvalError::Type(format!("expected a number, got {v}")))
}

fn apply_unary(op: UnOp, v: Value) -> Result<Value, EvalError> {
    match (op, v) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
        (UnOp::Neg, Value::Rat(r)) => Ok(Value::Rat(-r)),
        (op, v) => Err(EvalError::Type(format!("cannot apply {op:?} to {v}"))),
    }
}

fn apply_binary(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use BinOp::*;
    match op {
        And | Or => {
            let (x, y) = (bool_of(a)?, bool_of(b)?);
            Ok(Value::Bool(if op == And { x && y } else { x || y }))
        }
        Eq | Ne => {
            let equal = match (&a, &b) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Int(x), Value::Int(y)) => x == y,
                _ => num_of(&a)? == num_of(&b)?,
            };
            Ok(Value::Bool(if op == Eq { equal } else { !equal }))
        }
        Lt | Le | Gt | Ge => {
            let ord = match (&a, &b) {
                (Value::Int(x), Value::Int(y)) => x.cmp(y),
                _ => num_of(&a)?.cmp(&num_of(&b)?),
            };
            Ok(Value::Bool(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        Add | Sub | Mul => {
            if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
                let r = match op {
                    Add => x.checked_add(*y),
                    Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                return r.map(Value::Int).ok_or(EvalError::Overflow);
            }
            let (x, y) = (num_of(&a)?, num_of(&b)?);
            Ok(Value::Rat(match op {
                Add => x + y,
                Sub => x - y,
                _ => x * y,
            }))
        }
        Div => {
            let (x, y) = (num_of(&a)?, num_of(&b)?);
            if y.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Rat(x / y))
        }
    }
}

fn apply_call(f: Builtin, args: Vec<Value>) -> Result<Value, EvalError> {
    if args.is_empty() {
        return Err(EvalError::Type("min/max need arguments".into()));
    }
    if args.iter().all(|a| matches!(a, Value::Int(_))) {
        let ints = args.iter().map(|a| a.as_int().unwrap());
        let v = match f {
            Builtin::Min => ints.min(),
            Builtin::Max => ints.max(),
        };
        return Ok(Value::Int(v.unwrap()));
    }
    let nums = args.iter().map(num_of).collect::<Result<Vec<_>, _>>()?;
    let v = match f {
        Builtin::Min => nums.into_iter().min(),
        Builtin::Max => nums.into_iter().max(),
    };
    Ok(Value::Rat(v.unwrap()))
}

/// Evaluates a closed expression (constants only).
pub fn eval_const(e: &Expr, consts: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
    let c = compile(e, &[], consts)?;
    c.eval(&[])
}

pub(crate) fn is_probability(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::from_integer(1.into())
}
