//! Closed-loop safety analysis of systems with learned perception: perception
//! abstractions from confusion matrices, DTMC model checking, parametric
//! reachability and confidence intervals.

pub mod abstraction;
pub mod casestudy;
pub mod cli;
pub mod confidence;
pub mod dtmc;
pub mod guard;
pub mod lang;
pub mod modelcheck;
pub mod parametric;
pub mod poly;
pub mod ratio;
pub mod sim;

/// Variant name of an error enum, as printed by `Debug`.
pub fn error_name<E: std::fmt::Debug>(e: &E) -> String {
    let text = format!("{e:?}");
    let end = text.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(text.len());
    text[..end].to_string()
}
