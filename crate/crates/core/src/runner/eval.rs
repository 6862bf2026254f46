use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::exec::{Executor, Verdict, DEFAULT_TIMEOUT};
use crate::catalog::{sqlite_path, Sample, SchemaCatalog};
use crate::error::{Error, Result};
use crate::sqlkit::{exact_set_match_with, hardness, parse_sql, tree_edit_distance, Hardness, MatchOptions};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub sql: String,
}

pub fn parse_predictions(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: Prediction =
            serde_json::from_str(line).map_err(|e| Error::json(format!("predictions line {}", i + 1), e))?;
        if out.insert(p.id.clone(), p.sql).is_some() {
            return Err(Error::invalid(format!("duplicate prediction for `{}`", p.id)));
        }
    }
    Ok(out)
}

pub fn write_predictions(preds: &[Prediction]) -> String {
    preds
        .iter()
        .map(|p| serde_json::to_string(p).expect("prediction serializes") + "\n")
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub n: usize,
    pub ex_correct: usize,
    pub em_correct: usize,
    /// Percentages with one decimal.
    pub ex: f64,
    pub em: f64,
}

impl LevelStats {
    fn add(&mut self, ex: bool, em: bool) {
        self.n += 1;
        self.ex_correct += usize::from(ex);
        self.em_correct += usize::from(em);
    }

    fn finish(&mut self) {
        let pct = |c: usize| {
            if self.n == 0 {
                0.0
            } else {
                (1000.0 * c as f64 / self.n as f64).round() / 10.0
            }
        };
        self.ex = pct(self.ex_correct);
        self.em = pct(self.em_correct);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: LevelStats,
    /// easy, medium, hard, extra.
    pub levels: BTreeMap<Hardness, LevelStats>,
    pub avg_ted: Option<f64>,
    /// Samples dropped because their gold query is unusable.
    pub excluded: usize,
    pub failures: Vec<Failure>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("{:<8}{:>6}{:>8}{:>8}\n", "level", "n", "EX", "EM");
        let rows = self
            .levels
            .iter()
            .map(|(h, s)| (h.as_str(), s))
            .chain(std::iter::once(("all", &self.overall)));
        for (name, s) in rows {
            out.push_str(&format!("{name:<8}{:>6}{:>8.1}{:>8.1}\n", s.n, s.ex, s.em));
        }
        if let Some(t) = self.avg_ted {
            out.push_str(&format!("avg TED of retrieved demonstrations: {t:.2}\n"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub timeout: Duration,
    pub matching: MatchOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            timeout: DEFAULT_TIMEOUT,
            matching: MatchOptions::default(),
        }
    }
}

/// Gold SQL of the demonstrations retrieved for each sample id.
pub type DemoGolds = BTreeMap<String, Vec<String>>;

/// EX, EM and hardness per sample. Gold queries that fail to parse or execute are
/// excluded with a failure record; bad predictions count as wrong.
pub fn evaluate(
    dataset: &[Sample],
    predictions: &BTreeMap<String, String>,
    catalog: &SchemaCatalog,
    db_root: &Path,
    demos: Option<&DemoGolds>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut overall = LevelStats::default();
    let mut levels: BTreeMap<Hardness, LevelStats> =
        Hardness::ALL.iter().map(|h| (*h, LevelStats::default())).collect();
    let mut failures = Vec::new();
    let mut excluded = 0;
    let mut executors: HashMap<&str, Executor> = HashMap::new();
    let mut teds = Vec::new();

    for s in dataset {
        let fail = |reason: String| Failure {
            id: s.id.clone(),
            reason,
        };
        let db = catalog.require(&s.db_id)?;
        let gold_text = s.gold()?;
        let gold = match parse_sql(gold_text, Some(db)) {
            Ok(a) => a,
            Err(e) => {
                excluded += 1;
                failures.push(fail(format!("gold excluded: {e}")));
                continue;
            }
        };
        if !executors.contains_key(s.db_id.as_str()) {
            executors.insert(&s.db_id, Executor::open(&sqlite_path(db_root, &s.db_id), opts.timeout)?);
        }
        let exec = &executors[s.db_id.as_str()];
        let level = hardness(&gold.root);

        let (ex, em) = match predictions.get(&s.id) {
            None => {
                failures.push(fail("missing prediction".into()));
                (false, false)
            }
            Some(pred) => {
                let ex = match exec.compare(pred, gold_text) {
                    Err(e) => {
                        excluded += 1;
                        failures.push(fail(format!("gold excluded: {e}")));
                        continue;
                    }
                    Ok(Verdict::PredFailed(f)) => {
                        failures.push(fail(format!("prediction failed to execute: {f}")));
                        false
                    }
                    Ok(v) => v.is_match(),
                };
                let em = match parse_sql(pred, Some(db)) {
                    Ok(p) => exact_set_match_with(&p.root, &gold.root, opts.matching),
                    Err(e) => {
                        failures.push(fail(format!("prediction unparsable: {e}")));
                        false
                    }
                };
                (ex, em)
            }
        };
        overall.add(ex, em);
        levels.get_mut(&level).expect("all levels present").add(ex, em);

        if let Some(golds) = demos.and_then(|d| d.get(&s.id)).filter(|g| !g.is_empty()) {
            let plain = parse_sql(gold_text, None)?;
            let mut sum = 0.0;
            for g in golds {
                let demo = parse_sql(g, None)?;
                sum += tree_edit_distance(&demo, &plain) as f64;
            }
            teds.push(sum / golds.len() as f64);
        }
    }

    overall.finish();
    levels.values_mut().for_each(LevelStats::finish);
    let avg_ted = (demos.is_some() && !teds.is_empty()).then(|| teds.iter().sum::<f64>() / teds.len() as f64);
    Ok(EvalReport {
        overall,
        levels,
        avg_ted,
        excluded,
        failures,
    })
}
