//! SQL parsing and the metrics built on it: exact set match, categories,
//! hardness levels, tree edit distance and filter phrasing.

mod ast;
mod category;
mod clauses;
mod hardness;
mod lexer;
mod parser;
mod phrase;
mod ted;

pub use ast::*;
pub use category::{categorize, QueryCategory};
pub use clauses::{clause_sets, clause_sets_with, exact_set_match, exact_set_match_with, ClauseSets, MatchOptions};
pub use hardness::{component_counts, hardness, ComponentCounts, Hardness};
pub use lexer::{join_tokens, lex, Tok, TokKind};
pub use parser::parse_sql;
pub use phrase::nested_to_phrase;
pub use ted::{sql_tree, tree_distance, tree_edit_distance, LabeledTree};
