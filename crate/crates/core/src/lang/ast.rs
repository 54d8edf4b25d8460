use std::fmt;

use crate::ratio::Rational;

/// Source position (1-based). Positions never take part in equality so that
/// a rendered and re-parsed AST compares equal to the original.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "|",
            BinOp::And => "&",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    /// Decimal literal, kept exact.
    Real(Rational),
    Bool(bool),
    Ident(String, Span),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string(), Span::default())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn eq(name: &str, value: i64) -> Expr {
        Expr::bin(BinOp::Eq, Expr::ident(name), Expr::int(value))
    }

    pub fn int(value: i64) -> Expr {
        if value < 0 {
            Expr::Unary(UnOp::Neg, Box::new(Expr::Int(-value)))
        } else {
            Expr::Int(value)
        }
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::And, l, r)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// Top-level conjuncts of a guard.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary(BinOp::And, l, r) => {
                let mut out = l.conjuncts();
                out.extend(r.conjuncts());
                out
            }
            other => vec![other],
        }
    }

    /// `Some((var, value))` when the expression is `var = literal`.
    pub fn as_var_eq(&self) -> Option<(&str, i64)> {
        if let Expr::Binary(BinOp::Eq, l, r) = self {
            if let (Expr::Ident(name, _), Some(v)) = (l.as_ref(), r.as_int_literal()) {
                return Some((name, v));
            }
        }
        None
    }

    pub fn as_int_literal(&self) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            Expr::Unary(UnOp::Neg, inner) => match inner.as_ref() {
                Expr::Int(v) => Some(-v),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn visit_idents<'a>(&'a self, f: &mut impl FnMut(&'a str, Span)) {
        match self {
            Expr::Ident(name, span) => f(name, *span),
            Expr::Unary(_, e) => e.visit_idents(f),
            Expr::Binary(_, l, r) => {
                l.visit_idents(f);
                r.visit_idents(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_idents(f)),
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: ConstType,
    /// `None` for a symbolic constant bound at expansion time.
    pub value: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub lo: Expr,
    pub hi: Expr,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub var: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub prob: Expr,
    /// Empty means `true` (no change).
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub constants: Vec<ConstDecl>,
    pub module_name: String,
    pub variables: Vec<VarDecl>,
    pub commands: Vec<Command>,
}

impl ModelAst {
    pub fn variable(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.variable(name).is_some() || self.constant(name).is_some()
    }
}

/// Step bound of `F<=k`: a literal or a constant resolved at check time.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundExpr {
    Literal(u64),
    Const(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyAst {
    pub bound: Option<BoundExpr>,
    pub target: Expr,
}

impl PropertyAst {
    pub fn unbounded(target: Expr) -> Self {
        PropertyAst { bound: None, target }
    }
}
