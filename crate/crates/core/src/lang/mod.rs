//! The model and property languages: a single-module DTMC subset of PRISM
//! and `P=? [ F ... ]` reachability queries.

pub mod ast;
pub mod emit;
pub mod eval;
pub mod expand;
pub mod parser;
pub mod render;

pub use ast::{Expr, ModelAst, PropertyAst};
pub use emit::{emit_abstraction_commands, emit_abstraction_text, EmitOptions, WeightStyle};
pub use eval::Value;
pub use expand::{expand, parse_bindings, CompiledModel, ExpandError};
pub use parser::{parse_expr, parse_model, parse_property, parse_property_file, ParseError};
pub use render::{render_expr, render_model, render_property};
