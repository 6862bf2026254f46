//! Schema link graphs: question tokens and pruned schema items joined by typed edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{
    name_words, token_matches_value, tokenize_question, value_match, ColumnId, DatabaseSchema, PrunedSchema, Sample,
    TokenSeq, ValueMatches, ValueStore,
};
use crate::error::{Error, Result};
use crate::pruner::{prune, RelevanceScores};

/// Default attention-match thresholds for tables and columns.
pub const DEFAULT_TAU_TABLE: f64 = 0.66;
pub const DEFAULT_TAU_COLUMN: f64 = 0.43;

/// Edge labels. Directed kinds come in forward/inverse pairs; `SameTable`,
/// `SelfLoop` and `NoRelation` are symmetric and `QuestionDist(d)` inverts to `-d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeType {
    /// Table to question token.
    AttentionMatchTable,
    AttentionMatchTableInv,
    /// Column to question token.
    AttentionMatchColumn,
    AttentionMatchColumnInv,
    /// Question token to schema item.
    ExactNameMatch,
    ExactNameMatchInv,
    PartialNameMatch,
    PartialNameMatchInv,
    /// Question token to column.
    ValueMatch,
    ValueMatchInv,
    /// Column to its table.
    ColumnOfTable,
    ColumnOfTableInv,
    /// Referencing column to referenced column.
    ForeignKey,
    ForeignKeyInv,
    /// Key column to its table.
    PrimaryKey,
    PrimaryKeyInv,
    SameTable,
    /// Token `i` to token `i + d`, `d ∈ {-2, -1, 1, 2}`.
    QuestionDist(i8),
    SelfLoop,
    NoRelation,
}

const DIRECTED: [(EdgeType, EdgeType, &str); 8] = [
    (
        EdgeType::AttentionMatchTable,
        EdgeType::AttentionMatchTableInv,
        "AttentionMatchTable",
    ),
    (
        EdgeType::AttentionMatchColumn,
        EdgeType::AttentionMatchColumnInv,
        "AttentionMatchColumn",
    ),
    (EdgeType::ExactNameMatch, EdgeType::ExactNameMatchInv, "ExactNameMatch"),
    (
        EdgeType::PartialNameMatch,
        EdgeType::PartialNameMatchInv,
        "PartialNameMatch",
    ),
    (EdgeType::ValueMatch, EdgeType::ValueMatchInv, "ValueMatch"),
    (EdgeType::ColumnOfTable, EdgeType::ColumnOfTableInv, "ColumnOfTable"),
    (EdgeType::ForeignKey, EdgeType::ForeignKeyInv, "ForeignKey"),
    (EdgeType::PrimaryKey, EdgeType::PrimaryKeyInv, "PrimaryKey"),
];

impl EdgeType {
    /// Every edge type, inverses included, in a fixed order.
    pub fn all() -> Vec<EdgeType> {
        let mut out = Vec::new();
        for (fwd, inv, _) in DIRECTED {
            out.push(fwd);
            out.push(inv);
        }
        out.push(EdgeType::SameTable);
        out.extend([-2, -1, 1, 2].map(EdgeType::QuestionDist));
        out.push(EdgeType::SelfLoop);
        out.push(EdgeType::NoRelation);
        out
    }

    pub fn inverse(self) -> EdgeType {
        if let EdgeType::QuestionDist(d) = self {
            return EdgeType::QuestionDist(-d);
        }
        for (fwd, inv, _) in DIRECTED {
            if self == fwd {
                return inv;
            }
            if self == inv {
                return fwd;
            }
        }
        self
    }

    pub fn is_inverse(self) -> bool {
        DIRECTED.iter().any(|(_, inv, _)| *inv == self)
    }

    /// Rank used when several edges join the same ordered pair; higher wins.
    pub fn priority(self) -> u8 {
        let base = if self.is_inverse() { self.inverse() } else { self };
        match base {
            EdgeType::AttentionMatchTable | EdgeType::AttentionMatchColumn => 10,
            EdgeType::ExactNameMatch => 9,
            EdgeType::ValueMatch => 8,
            EdgeType::PartialNameMatch => 7,
            EdgeType::ForeignKey => 6,
            EdgeType::PrimaryKey => 5,
            EdgeType::ColumnOfTable => 4,
            EdgeType::SameTable => 3,
            EdgeType::QuestionDist(_) => 2,
            EdgeType::SelfLoop => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeType::QuestionDist(d) => write!(f, "QuestionDist({d:+})"),
            EdgeType::SameTable => f.write_str("SameTable"),
            EdgeType::SelfLoop => f.write_str("SelfLoop"),
            EdgeType::NoRelation => f.write_str("NoRelation"),
            other => {
                let (fwd, _, name) = DIRECTED
                    .iter()
                    .find(|(a, b, _)| a == other || b == other)
                    .expect("directed edge type");
                if fwd == other {
                    f.write_str(name)
                } else {
                    write!(f, "{name}Inv")
                }
            }
        }
    }
}

impl FromStr for EdgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeType::all()
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown edge type `{s}`")))
    }
}

impl Serialize for EdgeType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EdgeType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphNode {
    Token { index: usize, surface: String },
    Table { name: String },
    Column { table: String, name: String },
}

impl GraphNode {
    /// Text whose words give the node its lexical embedding.
    pub fn text(&self) -> &str {
        match self {
            GraphNode::Token { surface, .. } => surface,
            GraphNode::Table { name } | GraphNode::Column { name, .. } => name,
        }
    }
}

/// Symbolic edge endpoint, resolved to a node index when the graph is assembled.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Token(usize),
    Table(String),
    Column(ColumnId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkEdge {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub ty: EdgeType,
}

fn both(out: &mut Vec<LinkEdge>, src: NodeRef, dst: NodeRef, ty: EdgeType) {
    out.push(LinkEdge {
        src: dst.clone(),
        dst: src.clone(),
        ty: ty.inverse(),
    });
    out.push(LinkEdge { src, dst, ty });
}

/// Item-to-token edges wherever the item's attention on a token strictly exceeds
/// its kind's threshold. Only items of the pruned schema are considered.
pub fn attention_match_edges(
    scores: &RelevanceScores,
    pruned: &PrunedSchema,
    tau_tab: f64,
    tau_col: f64,
) -> Result<Vec<LinkEdge>> {
    let missing = |item: String| {
        Error::invalid(format!(
            "scores for sample `{}` do not cover `{item}`",
            scores.sample_id
        ))
    };
    let mut out = Vec::new();
    for t in &pruned.tables {
        let s = scores.tables.get(&t.name).ok_or_else(|| missing(t.name.clone()))?;
        for (i, &a) in s.attention.iter().enumerate() {
            if a > tau_tab {
                both(
                    &mut out,
                    NodeRef::Table(t.name.clone()),
                    NodeRef::Token(i),
                    EdgeType::AttentionMatchTable,
                );
            }
        }
    }
    for c in pruned.column_ids() {
        let s = scores.columns.get(&c).ok_or_else(|| missing(c.to_string()))?;
        for (i, &a) in s.attention.iter().enumerate() {
            if a > tau_col {
                both(
                    &mut out,
                    NodeRef::Column(c.clone()),
                    NodeRef::Token(i),
                    EdgeType::AttentionMatchColumn,
                );
            }
        }
    }
    Ok(out)
}

fn schema_items(pruned: &PrunedSchema) -> Vec<(NodeRef, String)> {
    let mut items: Vec<(NodeRef, String)> = pruned
        .tables
        .iter()
        .map(|t| (NodeRef::Table(t.name.clone()), t.name.clone()))
        .collect();
    items.extend(pruned.column_ids().map(|c| {
        let name = c.column.clone();
        (NodeRef::Column(c), name)
    }));
    items
}

/// Exact matches of a token span against an item's name words, and partial
/// substring matches (at least three characters) between a token lemma and the name.
pub fn name_match_edges(tokens: &TokenSeq, pruned: &PrunedSchema) -> Vec<LinkEdge> {
    let surfaces = tokens.surfaces();
    let mut out = Vec::new();
    for (node, name) in schema_items(pruned) {
        let words = name_words(&name);
        if words.is_empty() {
            continue;
        }
        let mut exact = BTreeSet::new();
        if words.len() <= surfaces.len() {
            for start in 0..=surfaces.len() - words.len() {
                if surfaces[start..start + words.len()]
                    .iter()
                    .zip(&words)
                    .all(|(s, w)| s == w)
                {
                    exact.extend(start..start + words.len());
                }
            }
        }
        let phrase = words.join(" ");
        for tok in &tokens.tokens {
            let ty = if exact.contains(&tok.index) {
                EdgeType::ExactNameMatch
            } else {
                let lemma = &tok.lemma;
                let partial = (lemma.chars().count() >= 3 && phrase.contains(lemma.as_str()))
                    || (phrase.chars().count() >= 3 && lemma.contains(phrase.as_str()));
                if !partial {
                    continue;
                }
                EdgeType::PartialNameMatch
            };
            both(&mut out, NodeRef::Token(tok.index), node.clone(), ty);
        }
    }
    out
}

/// Token-to-column edges for every matched value, restricted to pruned columns.
pub fn value_match_edges(tokens: &TokenSeq, matches: &ValueMatches, pruned: &PrunedSchema) -> Vec<LinkEdge> {
    let mut out = Vec::new();
    for (col, values) in matches {
        let Some(ty) = pruned.column_type(col) else {
            continue;
        };
        let mut hit = BTreeSet::new();
        for v in values {
            hit.extend(token_matches_value(tokens, v, ty));
        }
        for i in hit {
            both(
                &mut out,
                NodeRef::Token(i),
                NodeRef::Column(col.clone()),
                EdgeType::ValueMatch,
            );
        }
    }
    out
}

pub fn schema_structure_edges(pruned: &PrunedSchema) -> Vec<LinkEdge> {
    let mut out = Vec::new();
    for t in &pruned.tables {
        let table = NodeRef::Table(t.name.clone());
        let cols: Vec<ColumnId> = t
            .columns
            .iter()
            .map(|c| ColumnId::new(t.name.clone(), c.name.clone()))
            .collect();
        for (i, c) in cols.iter().enumerate() {
            both(
                &mut out,
                NodeRef::Column(c.clone()),
                table.clone(),
                EdgeType::ColumnOfTable,
            );
            for other in &cols[i + 1..] {
                both(
                    &mut out,
                    NodeRef::Column(c.clone()),
                    NodeRef::Column(other.clone()),
                    EdgeType::SameTable,
                );
            }
        }
    }
    for pk in &pruned.primary_keys {
        if pruned.has_column(pk) {
            both(
                &mut out,
                NodeRef::Column(pk.clone()),
                NodeRef::Table(pk.table.clone()),
                EdgeType::PrimaryKey,
            );
        }
    }
    for fk in &pruned.foreign_keys {
        if pruned.has_column(&fk.from) && pruned.has_column(&fk.to) {
            both(
                &mut out,
                NodeRef::Column(fk.from.clone()),
                NodeRef::Column(fk.to.clone()),
                EdgeType::ForeignKey,
            );
        }
    }
    out
}

/// Relative-position edges between question tokens at most two apart.
pub fn question_distance_edges(tokens: &TokenSeq) -> Vec<LinkEdge> {
    let n = tokens.len();
    let mut out = Vec::new();
    for i in 0..n {
        for d in 1..=2 {
            if i + d < n {
                both(
                    &mut out,
                    NodeRef::Token(i),
                    NodeRef::Token(i + d),
                    EdgeType::QuestionDist(d as i8),
                );
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub tau_table: f64,
    pub tau_column: f64,
    pub value_edges: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            tau_table: DEFAULT_TAU_TABLE,
            tau_column: DEFAULT_TAU_COLUMN,
            value_edges: true,
        }
    }
}

/// Edge list entry: `(src, dst, type)` over node indices.
pub type Edge = (usize, usize, EdgeType);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaLinkGraph {
    pub sample_id: String,
    pub nodes: Vec<GraphNode>,
    /// Sorted by `(src, dst, type)`, without duplicates, closed under inversion.
    pub edges: Vec<Edge>,
    pub pruned_schema: PrunedSchema,
    #[serde(with = "value_match_map")]
    pub value_matches: ValueMatches,
}

mod value_match_map {
    use super::*;

    pub fn serialize<S: serde::Serializer>(m: &ValueMatches, s: S) -> std::result::Result<S::Ok, S::Error> {
        let flat: BTreeMap<String, &Vec<String>> = m.iter().map(|(k, v)| (k.to_string(), v)).collect();
        flat.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ValueMatches, D::Error> {
        let flat = BTreeMap::<String, Vec<String>>::deserialize(d)?;
        flat.into_iter()
            .map(|(k, v)| {
                ColumnId::parse(&k)
                    .map(|c| (c, v))
                    .ok_or_else(|| serde::de::Error::custom(format!("bad column key `{k}`")))
            })
            .collect()
    }
}

impl SchemaLinkGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Checks endpoint ranges, node order, containment in the pruned schema and inverse closure.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("graph `{}`: {m}", self.sample_id)));
        let rank = |n: &GraphNode| match n {
            GraphNode::Token { .. } => 0,
            GraphNode::Table { .. } => 1,
            GraphNode::Column { .. } => 2,
        };
        if self.nodes.windows(2).any(|w| rank(&w[0]) > rank(&w[1])) {
            return bad("nodes out of order".into());
        }
        for n in &self.nodes {
            let ok = match n {
                GraphNode::Token { .. } => true,
                GraphNode::Table { name } => self.pruned_schema.has_table(name),
                GraphNode::Column { table, name } => self
                    .pruned_schema
                    .has_column(&ColumnId::new(table.clone(), name.clone())),
            };
            if !ok {
                return bad(format!("node {n:?} is not in the pruned schema"));
            }
        }
        let set: BTreeSet<Edge> = self.edges.iter().copied().collect();
        for &(s, d, t) in &self.edges {
            if s >= self.nodes.len() || d >= self.nodes.len() {
                return bad(format!("edge ({s}, {d}, {t}) references a missing node"));
            }
            if !set.contains(&(d, s, t.inverse())) {
                return bad(format!("edge ({s}, {d}, {t}) has no inverse"));
            }
        }
        Ok(())
    }
}

/// Assembles the graph: tokens, then pruned tables and columns in catalog order; edges
/// from every producer plus a self loop per node, closed under inversion.
pub fn build_graph(
    sample_id: &str,
    tokens: &TokenSeq,
    pruned: &PrunedSchema,
    scores: &RelevanceScores,
    value_matches: &ValueMatches,
    cfg: &LinkConfig,
) -> Result<SchemaLinkGraph> {
    for s in scores.tables.values().chain(scores.columns.values()) {
        if s.attention.len() != tokens.len() {
            return Err(Error::invalid(format!(
                "scores for sample `{sample_id}` have {} attention entries for {} tokens",
                s.attention.len(),
                tokens.len()
            )));
        }
    }
    let mut nodes: Vec<GraphNode> = tokens
        .tokens
        .iter()
        .map(|t| GraphNode::Token {
            index: t.index,
            surface: t.surface.clone(),
        })
        .collect();
    let mut index: HashMap<NodeRef, usize> = (0..tokens.len()).map(|i| (NodeRef::Token(i), i)).collect();
    for t in &pruned.tables {
        index.insert(NodeRef::Table(t.name.clone()), nodes.len());
        nodes.push(GraphNode::Table { name: t.name.clone() });
    }
    for c in pruned.column_ids() {
        index.insert(NodeRef::Column(c.clone()), nodes.len());
        nodes.push(GraphNode::Column {
            table: c.table,
            name: c.column,
        });
    }

    let kept_matches: ValueMatches = value_matches
        .iter()
        .filter(|(c, _)| pruned.has_column(c))
        .map(|(c, v)| (c.clone(), v.clone()))
        .collect();
    let mut links = attention_match_edges(scores, pruned, cfg.tau_table, cfg.tau_column)?;
    links.extend(name_match_edges(tokens, pruned));
    if cfg.value_edges {
        links.extend(value_match_edges(tokens, &kept_matches, pruned));
    }
    links.extend(schema_structure_edges(pruned));
    links.extend(question_distance_edges(tokens));

    let mut edges = BTreeSet::new();
    for e in links {
        let (Some(&s), Some(&d)) = (index.get(&e.src), index.get(&e.dst)) else {
            return Err(Error::invalid(format!(
                "sample `{sample_id}`: edge endpoint outside the graph ({:?} -> {:?})",
                e.src, e.dst
            )));
        };
        edges.insert((s, d, e.ty));
        edges.insert((d, s, e.ty.inverse()));
    }
    for i in 0..nodes.len() {
        edges.insert((i, i, EdgeType::SelfLoop));
    }
    Ok(SchemaLinkGraph {
        sample_id: sample_id.to_string(),
        nodes,
        edges: edges.into_iter().collect(),
        pruned_schema: pruned.clone(),
        value_matches: kept_matches,
    })
}

/// Tokenizes, prunes at `threshold`, matches cell values when a store is given, and
/// builds the graph of one sample.
pub fn link_sample(
    sample: &Sample,
    db: &DatabaseSchema,
    scores: &RelevanceScores,
    store: Option<&dyn ValueStore>,
    threshold: f64,
    cfg: &LinkConfig,
) -> Result<SchemaLinkGraph> {
    let tokens = tokenize_question(&sample.question)?;
    scores.validate(db, tokens.len())?;
    let pruned = prune(scores, db, threshold);
    let matches = match store {
        Some(store) => value_match(&tokens, &pruned, store)?,
        None => ValueMatches::new(),
    };
    build_graph(&sample.id, &tokens, &pruned, scores, &matches, cfg)
}

/// Canonical JSON: node order as built, edges sorted and deduplicated.
pub fn serialize_graph(g: &SchemaLinkGraph) -> Vec<u8> {
    let mut canon = g.clone();
    canon.edges.sort();
    canon.edges.dedup();
    serde_json::to_vec(&canon).expect("graph serializes")
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<SchemaLinkGraph> {
    let mut g: SchemaLinkGraph = serde_json::from_slice(bytes).map_err(|e| Error::json("graph", e))?;
    g.edges.sort();
    g.edges.dedup();
    g.validate()?;
    Ok(g)
}

/// One graph per line.
pub fn write_graphs(graphs: &[SchemaLinkGraph]) -> String {
    let mut out = String::new();
    for g in graphs {
        out.push_str(std::str::from_utf8(&serialize_graph(g)).expect("JSON is UTF-8"));
        out.push('\n');
    }
    out
}

pub fn parse_graphs(text: &str) -> Result<Vec<SchemaLinkGraph>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            deserialize_graph(l.as_bytes()).map_err(|e| match e {
                Error::Json { source, .. } => Error::json(format!("graph line {}", i + 1), source),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::fixtures::world;
    use crate::catalog::{tokenize_question, DatabaseSchema, SchemaCatalog};
    use crate::pruner::ItemScore;

    fn scores_for(db: &DatabaseSchema, n: usize, att: f64) -> RelevanceScores {
        let item = || ItemScore {
            prob: 0.9,
            attention: vec![att; n],
        };
        RelevanceScores {
            sample_id: "s".into(),
            tables: db.tables.iter().map(|t| (t.name.clone(), item())).collect(),
            columns: db.column_ids().map(|c| (c, item())).collect(),
        }
    }

    fn forward(edges: &[LinkEdge], ty: EdgeType) -> Vec<&LinkEdge> {
        edges.iter().filter(|e| e.ty == ty).collect()
    }

    #[test]
    fn inverses_and_names() {
        for t in EdgeType::all() {
            assert_eq!(t.inverse().inverse(), t);
            assert_eq!(t.to_string().parse::<EdgeType>().unwrap(), t);
            assert_eq!(t.priority(), t.inverse().priority());
        }
        assert_eq!(EdgeType::SelfLoop.inverse(), EdgeType::SelfLoop);
        assert_eq!(EdgeType::QuestionDist(2).to_string(), "QuestionDist(+2)");
        assert!("foo".parse::<EdgeType>().is_err());
    }

    #[test]
    fn attention_threshold_is_strict() {
        let db = world();
        let mut s = scores_for(&db, 2, 0.0);
        s.tables["city"].attention = vec![0.67, 0.66];
        let edges = attention_match_edges(&s, &db, 0.66, 0.43).unwrap();
        let fwd = forward(&edges, EdgeType::AttentionMatchTable);
        assert_eq!(fwd.len(), 1);
        assert_eq!(fwd[0].dst, NodeRef::Token(0));
    }

    #[test]
    fn name_matches() {
        let db = SchemaCatalog::from_json(
            r#"{"databases":[{"db_id":"d","tables":[{"name":"head","columns":[{"name":"head_id","type":"number"},{"name":"name","type":"text"}]}]}]}"#,
        )
        .unwrap()
        .get("d")
        .unwrap()
        .clone();
        let tokens = tokenize_question("name of head id").unwrap();
        let edges = name_match_edges(&tokens, &db);
        let exact = forward(&edges, EdgeType::ExactNameMatch);
        let col = |c: &str| NodeRef::Column(ColumnId::new("head", c));
        assert!(exact
            .iter()
            .any(|e| e.src == NodeRef::Token(2) && e.dst == col("head_id")));
        assert!(exact
            .iter()
            .any(|e| e.src == NodeRef::Token(3) && e.dst == col("head_id")));
        assert!(exact.iter().any(|e| e.src == NodeRef::Token(0) && e.dst == col("name")));
        assert!(exact
            .iter()
            .any(|e| e.src == NodeRef::Token(2) && e.dst == NodeRef::Table("head".into())));

        let tokens = tokenize_question("country").unwrap();
        let edges = name_match_edges(&tokens, &world());
        assert!(forward(&edges, EdgeType::PartialNameMatch)
            .iter()
            .any(|e| e.dst == NodeRef::Table("countrylanguage".into())));
        assert!(!forward(&edges, EdgeType::PartialNameMatch)
            .iter()
            .any(|e| e.dst == NodeRef::Table("country".into())));
    }

    #[test]
    fn value_matches_only_kept_columns() {
        let tokens = tokenize_question("Which regions speak Dutch or English?").unwrap();
        let col = ColumnId::new("countrylanguage", "language");
        let matches = ValueMatches::from([(col.clone(), vec!["Dutch".to_string(), "English".to_string()])]);
        let edges = value_match_edges(&tokens, &matches, &world());
        assert_eq!(forward(&edges, EdgeType::ValueMatch).len(), 2);
        let mut pruned = world();
        pruned.tables.retain(|t| t.name == "city");
        pruned.foreign_keys.clear();
        assert!(value_match_edges(&tokens, &matches, &pruned).is_empty());
        assert!(value_match_edges(&tokens, &ValueMatches::new(), &world()).is_empty());
    }

    #[test]
    fn structure_edges() {
        let mut db = world();
        for t in &mut db.tables {
            t.columns.retain(|c| c.name == "countrycode" || c.name == "code");
        }
        db.tables.retain(|t| t.name == "city" || t.name == "country");
        db.foreign_keys.retain(|fk| fk.from.table == "city");
        db.primary_keys.retain(|pk| pk.table == "country");
        let edges = schema_structure_edges(&db);
        assert_eq!(forward(&edges, EdgeType::ForeignKey).len(), 1);
        assert_eq!(forward(&edges, EdgeType::ForeignKeyInv).len(), 1);
        assert_eq!(forward(&edges, EdgeType::ColumnOfTable).len(), 2);
        assert_eq!(forward(&edges, EdgeType::SameTable).len(), 0);
        assert_eq!(forward(&edges, EdgeType::PrimaryKey).len(), 1);
    }

    #[test]
    fn distance_edges() {
        let three = question_distance_edges(&tokenize_question("a b c").unwrap());
        assert_eq!(three.len(), 6);
        assert!(three.contains(&LinkEdge {
            src: NodeRef::Token(0),
            dst: NodeRef::Token(2),
            ty: EdgeType::QuestionDist(2)
        }));
        assert!(question_distance_edges(&tokenize_question("a").unwrap()).is_empty());
        assert_eq!(question_distance_edges(&tokenize_question("a b").unwrap()).len(), 2);
    }

    #[test]
    fn graph_counts_closure_and_round_trip() {
        let db = world();
        let tokens = tokenize_question("Which regions speak Dutch or English?").unwrap();
        let mut pruned = db.clone();
        pruned
            .tables
            .retain(|t| t.name == "country" || t.name == "countrylanguage");
        for t in &mut pruned.tables {
            t.columns
                .retain(|c| ["region", "countrycode", "language"].contains(&c.name.as_str()));
        }
        pruned.foreign_keys.clear();
        pruned.primary_keys.clear();
        let s = scores_for(&db, tokens.len(), 0.5);
        let matches = ValueMatches::from([(
            ColumnId::new("countrylanguage", "language"),
            vec!["Dutch".to_string(), "English".to_string()],
        )]);
        let g = build_graph("q1", &tokens, &pruned, &s, &matches, &LinkConfig::default()).unwrap();
        assert_eq!(g.node_count(), 6 + 2 + 3);
        g.validate().unwrap();
        let bytes = serialize_graph(&g);
        let back = deserialize_graph(&bytes).unwrap();
        assert_eq!(back, g);
        assert_eq!(serialize_graph(&back), bytes);

        let text = String::from_utf8(bytes).unwrap().replace("\"SelfLoop\"", "\"foo\"");
        assert!(deserialize_graph(text.as_bytes()).is_err());
    }
}
