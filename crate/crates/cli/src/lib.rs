//! Scenario parsing, expression grammar, and task dispatch for the `lndev`
//! command-line tool.

pub mod expr;
pub mod run;
pub mod scenario;
