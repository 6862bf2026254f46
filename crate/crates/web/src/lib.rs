//! Browser demo over `dcg-core`: SQL analysis, schema link graphs with adjustable
//! thresholds, and prompt rendering. Each operation takes and returns JSON text so the
//! page needs no bindings beyond strings; the same functions run natively in tests.

use std::collections::BTreeSet;

use serde::Deserialize;
use serde_json::{json, Value};

use dcg_core::catalog::{
    lemmatize, name_words, tokenize_question, value_match, CellValue, ColumnId, DatabaseSchema, InMemoryValueStore,
    Sample, SchemaCatalog, ValueMatches,
};
use dcg_core::linker::{build_graph, EdgeType, GraphNode, LinkConfig};
use dcg_core::promptkit::{assemble_prompt, DemoInput, DemoOrder};
use dcg_core::pruner::{prune, ItemScore, RelevanceScores};
use dcg_core::sqlkit::{
    categorize, clause_sets, component_counts, exact_set_match, hardness, parse_sql, sql_tree, tree_edit_distance,
    ClauseSets, LabeledTree,
};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn bracket(t: &LabeledTree<String>) -> String {
    if t.children.is_empty() {
        t.label.clone()
    } else {
        let kids: Vec<String> = t.children.iter().map(bracket).collect();
        format!("{}({})", t.label, kids.join(", "))
    }
}

fn clauses_json(c: &ClauseSets) -> Value {
    let set = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>();
    json!({
        "distinct": c.distinct,
        "select": set(&c.select),
        "from": set(&c.from),
        "join_on": set(&c.join_conditions),
        "where": set(&c.where_conditions),
        "group_by": set(&c.group_by),
        "having": set(&c.having_conditions),
        "order_by": set(&c.order_by),
        "limit": c.limit.is_some(),
        "compound": c.compound.as_ref().map(|(op, rest)| json!({"op": op.keyword(), "right": clauses_json(rest)})),
    })
}

/// Category, hardness, clause sets and parse tree of `sql`; with a non-empty `other`,
/// also exact-set-match and tree edit distance between the two.
pub fn analyze_sql(sql: &str, other: &str) -> Result<String, String> {
    let ast = parse_sql(sql, None).map_err(err)?;
    let counts = component_counts(&ast.root);
    let mut out = json!({
        "category": categorize(&ast.root).to_string(),
        "hardness": hardness(&ast.root).as_str(),
        "components": {"component1": counts.component1, "component2": counts.component2, "others": counts.others},
        "clauses": clauses_json(&clause_sets(&ast.root)),
        "tree": bracket(&sql_tree(&ast.root)),
    });
    if !other.trim().is_empty() {
        let b = parse_sql(other, None).map_err(|e| format!("second query: {e}"))?;
        out["comparison"] = json!({
            "exact_set_match": exact_set_match(&ast.root, &b.root),
            "tree_edit_distance": tree_edit_distance(&ast, &b),
            "other_category": categorize(&b.root).to_string(),
        });
    }
    Ok(out.to_string())
}

fn first_database(catalog: &str) -> Result<DatabaseSchema, String> {
    let cat = SchemaCatalog::from_json(catalog).map_err(err)?;
    let db = cat.databases().next().cloned();
    db.ok_or_else(|| "catalog has no database".into())
}

/// `{"table.column": ["v1", ...]}`; an empty string means no values.
fn value_store(values: &str) -> Result<InMemoryValueStore, String> {
    let mut store = InMemoryValueStore::default();
    if values.trim().is_empty() {
        return Ok(store);
    }
    let raw: std::collections::BTreeMap<String, Vec<Value>> =
        serde_json::from_str(values).map_err(|e| format!("values: {e}"))?;
    for (key, vs) in raw {
        let col = ColumnId::parse(&key).ok_or_else(|| format!("values: `{key}` is not table.column"))?;
        let cells = vs
            .into_iter()
            .map(|v| match v {
                Value::Number(n) => Ok(CellValue::Number(n.as_f64().unwrap_or(0.0))),
                Value::String(s) => Ok(CellValue::Text(s)),
                other => Err(format!("values: unsupported cell {other}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        store.insert(col, cells);
    }
    Ok(store)
}

fn char_bigrams(w: &str) -> BTreeSet<(char, char)> {
    let cs: Vec<char> = format!("^{w}$").chars().collect();
    cs.windows(2).map(|p| (p[0], p[1])).collect()
}

/// Stand-in for learned attention: 1 for an equal lemma, otherwise the Dice
/// overlap of character bigrams with the closest name word.
fn lexical_attention(token: &str, item_name: &str) -> f64 {
    let t = lemmatize(token);
    let tb = char_bigrams(&t);
    name_words(item_name)
        .iter()
        .map(|w| {
            let w = lemmatize(w);
            if w == t {
                return 1.0;
            }
            let wb = char_bigrams(&w);
            2.0 * tb.intersection(&wb).count() as f64 / (tb.len() + wb.len()) as f64
        })
        .fold(0.0, f64::max)
}

fn lexical_scores(db: &DatabaseSchema, tokens: &[&str]) -> RelevanceScores {
    let item = |name: &str| {
        let attention: Vec<f64> = tokens.iter().map(|t| lexical_attention(t, name)).collect();
        ItemScore {
            prob: attention.iter().copied().fold(0.0, f64::max),
            attention,
        }
    };
    let mut s = RelevanceScores {
        sample_id: "demo".into(),
        tables: Default::default(),
        columns: Default::default(),
    };
    // a table is at least as relevant as its best column
    for t in &db.tables {
        let mut table = item(&t.name);
        for c in &t.columns {
            let col = item(&c.name);
            table.prob = table.prob.max(col.prob);
            s.columns.insert(ColumnId::new(&t.name, &c.name), col);
        }
        s.tables.insert(t.name.clone(), table);
    }
    s
}

/// Link graph of `question` over the first database of `catalog`, pruned at
/// `threshold` with lexical relevance scores. Inverse edges, self loops and token
/// distance edges are left out of the output.
pub fn link_graph(
    catalog: &str,
    values: &str,
    question: &str,
    tau_table: f64,
    tau_column: f64,
    threshold: f64,
) -> Result<String, String> {
    let db = first_database(catalog)?;
    let store = value_store(values)?;
    let tokens = tokenize_question(question).map_err(err)?;
    let scores = lexical_scores(&db, &tokens.surfaces());
    let pruned = prune(&scores, &db, threshold);
    let matches = value_match(&tokens, &pruned, &store).map_err(err)?;
    let cfg = LinkConfig {
        tau_table,
        tau_column,
        value_edges: true,
    };
    let g = build_graph("demo", &tokens, &pruned, &scores, &matches, &cfg).map_err(err)?;
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .map(|n| match n {
            GraphNode::Token { surface, .. } => json!({"kind": "token", "label": surface}),
            GraphNode::Table { name } => json!({"kind": "table", "label": name}),
            GraphNode::Column { table, name } => json!({"kind": "column", "label": format!("{table}.{name}")}),
        })
        .collect();
    let edges: Vec<Value> = g
        .edges
        .iter()
        .filter(|(_, _, t)| {
            !t.is_inverse() && !matches!(t, EdgeType::SelfLoop | EdgeType::NoRelation | EdgeType::QuestionDist(_))
        })
        .map(|(s, d, t)| json!({"src": s, "dst": d, "type": t.to_string()}))
        .collect();
    let matches: Vec<Value> = g
        .value_matches
        .iter()
        .map(|(c, v)| json!({"column": c.to_string(), "values": v}))
        .collect();
    Ok(json!({
        "nodes": nodes,
        "edges": edges,
        "value_matches": matches,
        "kept_tables": pruned.tables.len(),
        "kept_columns": pruned.column_count(),
    })
    .to_string())
}

#[derive(Deserialize)]
struct DemoSpec {
    question: String,
    sql: String,
}

/// Few-shot prompt for `question` over the first database of `catalog`. `demos` is a
/// JSON list of `{"question", "sql"}` in descending similarity; every block shows the
/// full schema with its own value matches.
pub fn render_prompt(catalog: &str, values: &str, question: &str, demos: &str) -> Result<String, String> {
    let db = first_database(catalog)?;
    let store = value_store(values)?;
    let specs: Vec<DemoSpec> = if demos.trim().is_empty() {
        Vec::new()
    } else {
        serde_json::from_str(demos).map_err(|e| format!("demos: {e}"))?
    };
    let matches_for = |q: &str| -> Result<ValueMatches, String> {
        let tokens = tokenize_question(q).map_err(err)?;
        value_match(&tokens, &db, &store).map_err(err)
    };
    let mut inputs = Vec::with_capacity(specs.len());
    let mut categories = Vec::with_capacity(specs.len());
    for (i, d) in specs.iter().enumerate() {
        let ast = parse_sql(&d.sql, None).map_err(|e| format!("demo {}: {e}", i + 1))?;
        categories.push(categorize(&ast.root).to_string());
        inputs.push(DemoInput {
            sample: Sample {
                id: format!("demo-{}", i + 1),
                db_id: db.db_id.clone(),
                question: d.question.clone(),
                gold_sql: Some(d.sql.clone()),
            },
            schema: db.clone(),
            matches: matches_for(&d.question)?,
        });
    }
    let test = Sample {
        id: "test".into(),
        db_id: db.db_id.clone(),
        question: question.into(),
        gold_sql: None,
    };
    let bundle = assemble_prompt(&inputs, &test, &db, &matches_for(question)?, DemoOrder::default()).map_err(err)?;
    Ok(json!({
        "prompt": bundle.full_text,
        "token_estimate": bundle.token_estimate,
        "categories": categories,
    })
    .to_string())
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen(js_name = analyzeSql)]
    pub fn analyze_sql(sql: &str, other: &str) -> Result<String, JsError> {
        super::analyze_sql(sql, other).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = linkGraph)]
    pub fn link_graph(
        catalog: &str,
        values: &str,
        question: &str,
        tau_table: f64,
        tau_column: f64,
        threshold: f64,
    ) -> Result<String, JsError> {
        super::link_graph(catalog, values, question, tau_table, tau_column, threshold).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = renderPrompt)]
    pub fn render_prompt(catalog: &str, values: &str, question: &str, demos: &str) -> Result<String, JsError> {
        super::render_prompt(catalog, values, question, demos).map_err(|e| JsError::new(&e))
    }
}
