//! Pretty-printer producing text that parses back to an equal AST.

use std::fmt::Write;

use super::ast::*;
use crate::ratio;

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_expr(out: &mut String, e: &Expr, parent_prec: u8) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Real(r) => {
            let text = ratio::render_exact(r);
            if r.is_integer() {
                let _ = write!(out, "{text}.0");
            } else {
                out.push_str(&text);
            }
        }
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Ident(name, _) => out.push_str(name),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            let needs = matches!(inner.as_ref(), Expr::Binary(..) | Expr::Unary(..));
            if needs {
                out.push('(');
                write_expr(out, inner, 0);
                out.push(')');
            } else {
                write_expr(out, inner, 0);
            }
        }
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let wrap = prec < parent_prec;
            if wrap {
                out.push('(');
            }
            write_expr(out, l, prec);
            let spaced = matches!(op, BinOp::And | BinOp::Or);
            if spaced {
                let _ = write!(out, " {} ", op.symbol());
            } else {
                out.push_str(op.symbol());
            }
            write_expr(out, r, prec + 1);
            if wrap {
                out.push(')');
            }
        }
        Expr::Call(f, args) => {
            out.push_str(match f {
                Builtin::Min => "min(",
                Builtin::Max => "max(",
            });
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
}

/// Update weights sit next to the `+` that separates updates, so anything
/// looser than `*` is parenthesized.
pub fn render_weight(e: &Expr) -> String {
    match e {
        Expr::Binary(op, ..) if op.precedence() < BinOp::Mul.precedence() => {
            format!("({})", render_expr(e))
        }
        _ => render_expr(e),
    }
}

pub fn render_assignments(assignments: &[Assignment]) -> String {
    if assignments.is_empty() {
        return "true".into();
    }
    assignments
        .iter()
        .map(|a| format!("({}'={})", a.var, render_expr(&a.value)))
        .collect::<Vec<_>>()
        .join(" & ")
}

pub fn render_command(cmd: &Command) -> String {
    if let [only] = cmd.updates.as_slice() {
        if only.prob == Expr::Int(1) {
            return format!("[] {} -> {};", render_expr(&cmd.guard), render_assignments(&only.assignments));
        }
    }
    let updates: Vec<String> = cmd
        .updates
        .iter()
        .map(|u| format!("{}: {}", render_weight(&u.prob), render_assignments(&u.assignments)))
        .collect();
    format!("[] {} -> {};", render_expr(&cmd.guard), updates.join(" + "))
}

pub fn render_model(ast: &ModelAst) -> String {
    let mut out = String::from("dtmc\n\n");
    for c in &ast.constants {
        let ty = match c.ty {
            ConstType::Int => "int",
            ConstType::Double => "double",
        };
        match &c.value {
            Some(v) => {
                let _ = writeln!(out, "const {ty} {} = {};", c.name, render_expr(v));
            }
            None => {
                let _ = writeln!(out, "const {ty} {};", c.name);
            }
        }
    }
    if !ast.constants.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "module {}", ast.module_name);
    for v in &ast.variables {
        let _ = write!(out, "  {} : [{}..{}]", v.name, render_expr(&v.lo), render_expr(&v.hi));
        if let Some(init) = &v.init {
            let _ = write!(out, " init {}", render_expr(init));
        }
        out.push_str(";\n");
    }
    if !ast.commands.is_empty() {
        out.push('\n');
    }
    for cmd in &ast.commands {
        let _ = writeln!(out, "  {}", render_command(cmd));
    }
    out.push_str("endmodule\n");
    out
}

pub fn render_property(p: &PropertyAst) -> String {
    let bound = match &p.bound {
        None => String::new(),
        Some(BoundExpr::Literal(k)) => format!("<={k}"),
        Some(BoundExpr::Const(name)) => format!("<={name}"),
    };
    format!("P=? [ F{bound} ({}) ]", render_expr(&p.target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::{parse_expr, parse_model, parse_property};

    #[test]
    fn expressions_round_trip() {
        for text in [
            "a=1 & b!=2 | !(c<3)",
            "(a+b)*c-d/e",
            "a-(b-c)",
            "-(x+1)",
            "min(a, b+1)>=max(1, 2)",
            "x=-1",
            "1-x1-x2",
            "0.675",
        ] {
            let e = parse_expr(text).unwrap();
            let again = parse_expr(&render_expr(&e)).unwrap();
            assert_eq!(e, again, "{text} -> {}", render_expr(&e));
        }
    }

    #[test]
    fn model_round_trip() {
        let text = "dtmc
const int N = 3;
const int M;
module m
  x : [0..N] init 0;
  y : [-1..2];
  [] x<N & y=0 -> 0.5: (x'=x+1) + (1-0.25-0.25): (y'=-1) & (x'=0);
  [] x=N -> true;
endmodule";
        let ast = parse_model(text).unwrap();
        let rendered = render_model(&ast);
        assert_eq!(parse_model(&rendered).unwrap(), ast, "{rendered}");
    }

    #[test]
    fn property_round_trip() {
        for text in ["P=? [ F (cte=-1)]", "P=? [ F<=5 x=1 & y=2 ]"] {
            let p = parse_property(text).unwrap();
            assert_eq!(parse_property(&render_property(&p)).unwrap(), p);
        }
    }
}
