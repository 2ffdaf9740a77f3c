// SPDX-License-Identifier: Apache-2.0

//! Lexer, parser and metrics for the synthesizable Verilog subset.

pub mod ast;
pub mod consteval;
pub mod lexer;
pub mod metrics;
pub mod parser;

pub use ast::*;
pub use consteval::{clog2, eval_const};
pub use metrics::{
    complexity_score, count_assertions, default_complexity, loc_count, AssertionCount, DEFAULT_COMPLEXITY_KEYWORDS,
};
pub use parser::{parse, parse_expr_str, ParseError};
