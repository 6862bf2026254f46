//! Prompt text in the API-docs layout: schema blocks, chain-of-thought demonstrations,
//! and the assembled few-shot prompt.

use serde::{Deserialize, Serialize};

use crate::catalog::{DatabaseSchema, Sample, ValueMatches};
use crate::error::{Error, Result};
use crate::sqlkit::{categorize, nested_to_phrase, parse_sql, Query, QueryCategory, SqlAst};

pub const INSTRUCTION: &str = "### Answer the question by SQLite SQL query only and with no explanation.";
const SCHEMA_HEADER: &str = "### SQLite SQL tables, with their properties:";
const STEP: &str = "Let's think step by step.";

/// Header, one line per table with matched values in brackets, the foreign keys, and
/// closing `#` separators. Lines are joined by `\n` without a trailing newline.
pub fn render_schema_block(schema: &DatabaseSchema, matches: &ValueMatches) -> String {
    let mut lines = vec![SCHEMA_HEADER.to_string(), "#".to_string()];
    for t in &schema.tables {
        let cols: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let key = crate::catalog::ColumnId::new(t.name.clone(), c.name.clone());
                match matches.get(&key) {
                    Some(vs) if !vs.is_empty() => format!("{} [{}]", c.name, vs.join(", ")),
                    _ => c.name.clone(),
                }
            })
            .collect();
        lines.push(format!("# {} ({})", t.name, cols.join(", ")));
    }
    let fks: Vec<String> = schema.foreign_keys.iter().map(|fk| fk.to_string()).collect();
    lines.push(format!("# Foreign Keys = [{}]", fks.join(", ")));
    lines.push("#".to_string());
    lines.join("\n")
}

fn quoted_list(items: &[&str]) -> String {
    let q: Vec<String> = items.iter().map(|s| format!("'{s}'")).collect();
    match q.split_last() {
        None => String::new(),
        Some((last, [])) => last.clone(),
        Some((last, rest)) => format!("{} and {last}", rest.join(", ")),
    }
}

fn join_steps(ast: &SqlAst) -> Result<Vec<String>> {
    let from = ast
        .root
        .from
        .as_ref()
        .filter(|f| !f.joins.is_empty())
        .ok_or_else(|| Error::invalid("JOIN demonstration without a join in its FROM clause"))?;
    let tables: Vec<&str> = from
        .table_refs()
        .map(|t| match t {
            crate::sqlkit::TableRef::Table { name, .. } => name.as_str(),
            crate::sqlkit::TableRef::Derived { alias, .. } => alias.as_deref().unwrap_or("subquery"),
        })
        .collect();
    Ok(vec![
        format!("{STEP} we need to join the tables {}.", quoted_list(&tables)),
        "Create an intermediate representation, then use it to construct the query.".to_string(),
        format!("Intermediate representation: \"{}\".", ast.fragment(from.span)),
    ])
}

fn first_subquery(q: &Query) -> Option<&Query> {
    q.all_queries().into_iter().nth(1)
}

fn nested_steps(ast: &SqlAst) -> Result<Vec<String>> {
    let sub = first_subquery(&ast.root).ok_or_else(|| Error::invalid("NESTED demonstration without a subquery"))?;
    Ok(vec![
        format!("{STEP} we need a nested subquery for '{}'.", nested_to_phrase(ast, sub)),
        format!("Nested subquery: \"( {} )\".", ast.fragment(sub.span)),
        "With the nested subquery, we can get the final SQL query.".to_string(),
    ])
}

/// The set operator and its two operands: a compound's left core and right side, or the
/// outer query and the `NOT IN` subquery.
fn iuen_parts(ast: &SqlAst) -> Result<(&'static str, &Query, &Query)> {
    for q in ast.root.all_queries() {
        if let Some(c) = &q.compound {
            return Ok((c.op.keyword(), q, &c.right));
        }
    }
    for q in ast.root.all_queries() {
        for e in q.clause_exprs() {
            let mut found = None;
            e.walk(&mut |x| {
                if let crate::sqlkit::Expr::InQuery {
                    negated: true, query, ..
                } = x
                {
                    found.get_or_insert(&**query);
                }
            });
            if let Some(inner) = found {
                return Ok(("NOT IN", q, inner));
            }
        }
    }
    Err(Error::invalid("IUEN demonstration without a set operator or NOT IN"))
}

fn iuen_steps(ast: &SqlAst) -> Result<Vec<String>> {
    let (op, left, right) = iuen_parts(ast)?;
    Ok(vec![
        format!(
            "{STEP} The question can be solved using the '{op}' set operator and two subqueries: one for '{}' and the other for '{}'.",
            nested_to_phrase(ast, left),
            nested_to_phrase(ast, right)
        ),
        format!("First subquery: {}", ast.fragment(left.core_span)),
        format!("Second subquery: {}", ast.fragment(right.core_span)),
        "With the nested subquery, we can get the final SQL query.".to_string(),
    ])
}

/// A demonstration block: instruction, schema block, question, reasoning lines for
/// every category but SIMPLE, and the gold SQL terminated by ` ;`.
pub fn render_cot_demo(demo: &Sample, category: QueryCategory, schema_block: &str) -> Result<String> {
    let gold = demo.gold()?;
    let ast = parse_sql(gold, None)?;
    let steps = match category {
        QueryCategory::Simple => Vec::new(),
        QueryCategory::Join => join_steps(&ast)?,
        QueryCategory::Nested => nested_steps(&ast)?,
        QueryCategory::Iuen => iuen_steps(&ast)?,
    };
    let mut lines = vec![
        INSTRUCTION.to_string(),
        schema_block.to_string(),
        format!("### Question: {}", demo.question.trim()),
    ];
    lines.extend(steps);
    lines.push(format!("### SQL: {} ;", gold.trim().trim_end_matches(';').trim_end()));
    Ok(lines.join("\n"))
}

/// Instruction, schema block and question, with no answer.
pub fn render_test_block(question: &str, schema: &DatabaseSchema, matches: &ValueMatches) -> String {
    [
        INSTRUCTION.to_string(),
        render_schema_block(schema, matches),
        format!("### Question: {}", question.trim()),
    ]
    .join("\n")
}

/// A retrieved demonstration with the schema view its block should show.
#[derive(Clone, Debug)]
pub struct DemoInput {
    pub sample: Sample,
    pub schema: DatabaseSchema,
    pub matches: ValueMatches,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoOrder {
    /// The most similar demonstration sits right before the test block.
    #[default]
    MostSimilarLast,
    MostSimilarFirst,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub demonstrations: Vec<String>,
    pub test_block: String,
    pub full_text: String,
    pub token_estimate: usize,
}

/// `demos` arrive in descending similarity. Blocks are separated by one blank line and
/// the text ends with a newline.
pub fn assemble_prompt(
    demos: &[DemoInput],
    test: &Sample,
    schema: &DatabaseSchema,
    matches: &ValueMatches,
    order: DemoOrder,
) -> Result<PromptBundle> {
    let mut demonstrations = Vec::with_capacity(demos.len());
    for d in demos {
        let category = categorize(&parse_sql(d.sample.gold()?, None)?.root);
        let block = render_cot_demo(&d.sample, category, &render_schema_block(&d.schema, &d.matches))
            .map_err(|e| Error::invalid(format!("demonstration `{}`: {e}", d.sample.id)))?;
        demonstrations.push(block);
    }
    if order == DemoOrder::MostSimilarLast {
        demonstrations.reverse();
    }
    let test_block = render_test_block(&test.question, schema, matches);
    let mut full_text = String::new();
    for block in demonstrations.iter().chain(std::iter::once(&test_block)) {
        if !full_text.is_empty() {
            full_text.push_str("\n\n");
        }
        full_text.push_str(block);
    }
    full_text.push('\n');
    let token_estimate = full_text.chars().count().div_ceil(4);
    Ok(PromptBundle {
        demonstrations,
        test_block,
        full_text,
        token_estimate,
    })
}
