//! Hand-written lexer and recursive-descent parser for the model and
//! property languages.
//!
//! Model grammar (single module, unlabeled commands):
//!
//! ```text
//! model    := "dtmc" const* "module" NAME var* command* "endmodule" const*
//! const    := "const" ("int" | "double")? NAME ("=" expr)? ";"
//! var      := NAME ":" "[" expr ".." expr "]" ("init" expr)? ";"
//! command  := "[" "]" expr "->" updates ";"
//! updates  := assigns | expr ":" assigns ("+" expr ":" assigns)*
//! assigns  := "true" | "(" NAME "'" "=" expr ")" ("&" "(" NAME "'" "=" expr ")")*
//! ```
//!
//! Properties: `P=? [ F expr ]` or `P=? [ F<=K expr ]`.

use std::collections::HashSet;

use thiserror::Error;

use super::ast::*;
use crate::ratio;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: expected {expected}, found {found}")]
    SyntaxError {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("undeclared variable `{name}` at {span}")]
    UndeclaredVariable { name: String, span: Span },
    #[error("duplicate declaration of `{name}` at {span}")]
    DuplicateDeclaration { name: String, span: Span },
    #[error("probability of command at {span} refers to variable `{name}`; only constants are allowed")]
    NonConstantProbability { name: String, span: Span },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Real(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "->", "..", "<=", ">=", "!=", "=", "<", ">", "&", "|", "!", "+", "-", "*", "/", "(", ")", "[",
    "]", ":", ";", ",", "'", "?",
];

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            out.push((Tok::Ident(word), span));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // `0..2` is a range, not the literal `0.`
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1) != Some(&'.') {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if real {
                Tok::Real(word)
            } else {
                match word.parse() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => {
                        return Err(ParseError::SyntaxError {
                            line: span.line,
                            col: span.col,
                            expected: "integer literal in range".into(),
                            found: word,
                        })
                    }
                }
            };
            out.push((tok, span));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                out.push((Tok::Sym(sym), span));
            }
            None => {
                return Err(ParseError::SyntaxError {
                    line,
                    col,
                    expected: "a token".into(),
                    found: format!("`{c}`"),
                })
            }
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "dtmc", "const", "int", "double", "module", "endmodule", "init", "true", "false", "min", "max",
];

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        let span = self.span();
        Err(ParseError::SyntaxError {
            line: span.line,
            col: span.col,
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn expect_name(&mut self) -> Result<(String, Span), ParseError> {
        let span = self.span();
        match self.peek() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                let name = name.clone();
                self.bump();
                Ok((name, span))
            }
            _ => self.error("an identifier"),
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    // expressions: precedence climbing over BinOp::precedence

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Sym("|") => BinOp::Or,
            Tok::Sym("&") => BinOp::And,
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym("+") => BinOp::Add,
            Tok::Sym("-") => BinOp::Sub,
            Tok::Sym("*") => BinOp::Mul,
            Tok::Sym("/") => BinOp::Div,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_sym("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Real(text) => {
                self.bump();
                match ratio::parse_decimal(&text) {
                    Some(r) => Ok(Expr::Real(r)),
                    None => Err(ParseError::SyntaxError {
                        line: span.line,
                        col: span.col,
                        expected: "a decimal literal".into(),
                        found: text,
                    }),
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                "min" | "max" => {
                    self.bump();
                    let f = if word == "min" { Builtin::Min } else { Builtin::Max };
                    self.expect_sym("(")?;
                    let mut args = vec![self.expr()?];
                    while self.eat_sym(",") {
                        args.push(self.expr()?);
                    }
                    self.expect_sym(")")?;
                    Ok(Expr::Call(f, args))
                }
                _ => {
                    let (name, span) = self.expect_name()?;
                    Ok(Expr::Ident(name, span))
                }
            },
            _ => self.error("an expression"),
        }
    }

    // model structure

    fn constant(&mut self) -> Result<ConstDecl, ParseError> {
        self.expect_kw("const")?;
        let ty = if self.is_kw("double") {
            self.bump();
            ConstType::Double
        } else {
            if self.is_kw("int") {
                self.bump();
            }
            ConstType::Int
        };
        let (name, span) = self.expect_name()?;
        let value = if self.eat_sym("=") { Some(self.expr()?) } else { None };
        self.expect_sym(";")?;
        Ok(ConstDecl { name, ty, value, span })
    }

    fn variable(&mut self) -> Result<VarDecl, ParseError> {
        let (name, span) = self.expect_name()?;
        self.expect_sym(":")?;
        self.expect_sym("[")?;
        let lo = self.expr()?;
        self.expect_sym("..")?;
        let hi = self.expr()?;
        self.expect_sym("]")?;
        let init = if self.is_kw("init") {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_sym(";")?;
        Ok(VarDecl { name, lo, hi, init, span })
    }

    fn assignments(&mut self) -> Result<Vec<Assignment>, ParseError> {
        if self.is_kw("true") {
            self.bump();
            return Ok(Vec::new());
        }
        let mut out = vec![self.assignment()?];
        while self.eat_sym("&") {
            out.push(self.assignment()?);
        }
        Ok(out)
    }

    fn assignment(&mut self) -> Result<Assignment, ParseError> {
        self.expect_sym("(")?;
        let (var, _) = self.expect_name()?;
        self.expect_sym("'")?;
        self.expect_sym("=")?;
        let value = self.expr()?;
        self.expect_sym(")")?;
        Ok(Assignment { var, value })
    }

    fn starts_assignment(&self) -> bool {
        (self.is_sym("(")
            && matches!(self.peek_at(1), Tok::Ident(_))
            && matches!(self.peek_at(2), Tok::Sym("'")))
            || (self.is_kw("true") && matches!(self.peek_at(1), Tok::Sym(";")))
    }

    fn command(&mut self) -> Result<Command, ParseError> {
        let span = self.span();
        self.expect_sym("[")?;
        self.expect_sym("]")?;
        let guard = self.expr()?;
        self.expect_sym("->")?;
        let mut updates = Vec::new();
        if self.starts_assignment() {
            updates.push(Update {
                prob: Expr::Int(1),
                assignments: self.assignments()?,
            });
        } else {
            loop {
                // `+` separates updates, so the weight is parsed above additive level
                let prob = self.binary(BinOp::Mul.precedence())?;
                let prob = self.continue_weight(prob)?;
                self.expect_sym(":")?;
                let assignments = self.assignments()?;
                updates.push(Update { prob, assignments });
                if !self.eat_sym("+") {
                    break;
                }
            }
        }
        self.expect_sym(";")?;
        Ok(Command { guard, updates, span })
    }

    /// A top-level `+` always separates updates, so an unparenthesized
    /// weight may only continue with `-` (as in `1-x1-x2`).
    fn continue_weight(&mut self, mut lhs: Expr) -> Result<Expr, ParseError> {
        while self.is_sym("-") {
            self.bump();
            let rhs = self.binary(BinOp::Mul.precedence())?;
            lhs = Expr::bin(BinOp::Sub, lhs, rhs);
        }
        Ok(lhs)
    }

    fn model(&mut self) -> Result<ModelAst, ParseError> {
        self.expect_kw("dtmc")?;
        let mut constants = Vec::new();
        while self.is_kw("const") {
            constants.push(self.constant()?);
        }
        self.expect_kw("module")?;
        let (module_name, _) = self.expect_name()?;
        let mut variables = Vec::new();
        while matches!(self.peek(), Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()))
            && matches!(self.peek_at(1), Tok::Sym(":"))
        {
            variables.push(self.variable()?);
        }
        let mut commands = Vec::new();
        while self.is_sym("[") {
            commands.push(self.command()?);
        }
        self.expect_kw("endmodule")?;
        while self.is_kw("const") {
            constants.push(self.constant()?);
        }
        self.expect_eof()?;
        Ok(ModelAst {
            constants,
            module_name,
            variables,
            commands,
        })
    }
}

fn check_declarations(ast: &ModelAst) -> Result<(), ParseError> {
    let mut seen = HashSet::new();
    let decls = ast
        .constants
        .iter()
        .map(|c| (&c.name, c.span))
        .chain(ast.variables.iter().map(|v| (&v.name, v.span)));
    for (name, span) in decls {
        if !seen.insert(name.as_str()) {
            return Err(ParseError::DuplicateDeclaration {
                name: name.clone(),
                span,
            });
        }
    }
    let constants: HashSet<&str> = ast.constants.iter().map(|c| c.name.as_str()).collect();
    let mut undeclared = None;
    let mut check = |e: &Expr| {
        e.visit_idents(&mut |name, span| {
            if undeclared.is_none() && !seen.contains(name) {
                undeclared = Some(ParseError::UndeclaredVariable {
                    name: name.to_string(),
                    span,
                });
            }
        })
    };
    for c in &ast.constants {
        if let Some(v) = &c.value {
            check(v);
        }
    }
    for v in &ast.variables {
        check(&v.lo);
        check(&v.hi);
        if let Some(init) = &v.init {
            check(init);
        }
    }
    for cmd in &ast.commands {
        check(&cmd.guard);
        for u in &cmd.updates {
            check(&u.prob);
            for a in &u.assignments {
                check(&a.value);
            }
        }
    }
    if let Some(err) = undeclared {
        return Err(err);
    }
    for cmd in &ast.commands {
        for u in &cmd.updates {
            for a in &u.assignments {
                if ast.variable(&a.var).is_none() {
                    return Err(ParseError::UndeclaredVariable {
                        name: a.var.clone(),
                        span: cmd.span,
                    });
                }
            }
            let mut bad = None;
            u.prob.visit_idents(&mut |name, _| {
                if bad.is_none() && !constants.contains(name) {
                    bad = Some(name.to_string());
                }
            });
            if let Some(name) = bad {
                return Err(ParseError::NonConstantProbability {
                    name,
                    span: cmd.span,
                });
            }
        }
    }
    Ok(())
}

pub fn parse_model(text: &str) -> Result<ModelAst, ParseError> {
    let ast = Parser::new(text)?.model()?;
    check_declarations(&ast)?;
    Ok(ast)
}

/// Parses a standalone boolean/arithmetic expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_property(text: &str) -> Result<PropertyAst, ParseError> {
    let mut p = Parser::new(text)?;
    p.expect_kw("P")?;
    p.expect_sym("=")?;
    p.expect_sym("?")?;
    p.expect_sym("[")?;
    p.expect_kw("F")?;
    let bound = if p.eat_sym("<=") {
        match p.bump() {
            Tok::Int(k) if k >= 0 => Some(BoundExpr::Literal(k as u64)),
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => Some(BoundExpr::Const(name)),
            _ => {
                p.pos -= 1;
                return p.error("a step bound");
            }
        }
    } else {
        None
    };
    let target = p.expr()?;
    p.expect_sym("]")?;
    p.expect_eof()?;
    Ok(PropertyAst { bound, target })
}

/// Reads a property file: one property per line, `//` comments and blank
/// lines ignored. Returns the source text alongside each parsed property.
pub fn parse_property_file(text: &str) -> Result<Vec<(String, PropertyAst)>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = match line.find("//") {
            Some(pos) => &line[..pos],
            None => line,
        }
        .trim();
        if body.is_empty() {
            continue;
        }
        let prop = parse_property(body).map_err(|e| match e {
            ParseError::SyntaxError {
                col,
                expected,
                found,
                ..
            } => ParseError::SyntaxError {
                line: i + 1,
                col,
                expected,
                found,
            },
            other => other,
        })?;
        out.push((body.to_string(), prop));
    }
    Ok(out)
}
