//! Set-based retrieval evaluation: precision, recall and F-measure per
//! department and overall, with both micro and macro averaging.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kb::KnowledgeBase;
use crate::orchestrator::{handle_request, MonotonicClock};
use crate::query::RawQuery;
use crate::reasoner::ScoringParams;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus is invalid: {}", .0.join("; "))]
    Corpus(Vec<String>),
    #[error("query `{id}` failed: {message}")]
    Query { id: String, message: String },
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// One labelled query of the evaluation corpus (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    /// Department the request is categorized under.
    pub department: String,
    pub relevant: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

pub fn parse_corpus(source: impl Read) -> Result<Vec<QueryRecord>, EvalError> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Every problem that would stop the corpus from running, in corpus order.
pub fn validate_corpus(kb: &KnowledgeBase, corpus: &[QueryRecord]) -> Vec<String> {
    let mut issues = Vec::new();
    if corpus.is_empty() {
        issues.push("corpus is empty".to_owned());
    }
    let mut seen = BTreeSet::new();
    for q in corpus {
        if !seen.insert(q.id.as_str()) {
            issues.push(format!("query `{}`: duplicate id", q.id));
        }
        if q.text.trim().is_empty() {
            issues.push(format!("query `{}`: text is blank", q.id));
        }
        if kb.department(&q.department).is_none() {
            issues.push(format!("query `{}`: unknown department `{}`", q.id, q.department));
        }
        if q.relevant.is_empty() {
            issues.push(format!("query `{}`: relevant set is empty", q.id));
        }
        for emp in &q.relevant {
            if kb.employee(emp).is_none() {
                issues.push(format!("query `{}`: unknown employee `{emp}`", q.id));
            }
        }
        if q.k == Some(0) {
            issues.push(format!("query `{}`: k must be at least 1", q.id));
        }
    }
    issues
}

/// |retrieved ∩ relevant| / |retrieved|; `None` when nothing was retrieved.
pub fn precision<T: Ord>(retrieved: &BTreeSet<T>, relevant: &BTreeSet<T>) -> Option<f64> {
    if retrieved.is_empty() {
        return None;
    }
    Some(retrieved.intersection(relevant).count() as f64 / retrieved.len() as f64)
}

/// |retrieved ∩ relevant| / |relevant|; `None` when nothing is relevant.
pub fn recall<T: Ord>(retrieved: &BTreeSet<T>, relevant: &BTreeSet<T>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    Some(retrieved.intersection(relevant).count() as f64 / relevant.len() as f64)
}

/// Harmonic mean of precision and recall; `None` when both are zero.
pub fn f_measure(p: f64, r: f64) -> Option<f64> {
    if p + r == 0.0 {
        return None;
    }
    Some(2.0 * p * r / (p + r))
}

fn f_of(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    f_measure(p?, r?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsCell {
    pub query_count: usize,
    pub retrieved_total: usize,
    pub relevant_total: usize,
    pub hit_total: usize,
    /// Metrics over pooled counts.
    pub micro: Prf,
    /// Means of the defined per-query metrics.
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
}

impl MetricsCell {
    fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a QueryOutcome>) -> Self {
        let mut cell = MetricsCell {
            query_count: 0,
            retrieved_total: 0,
            relevant_total: 0,
            hit_total: 0,
            micro: Prf::default(),
            macro_avg: Prf::default(),
        };
        let (mut ps, mut rs, mut fs) = (Vec::new(), Vec::new(), Vec::new());
        for o in outcomes {
            cell.query_count += 1;
            cell.retrieved_total += o.retrieved.len();
            cell.relevant_total += o.relevant.len();
            cell.hit_total += o.hits;
            ps.extend(o.metrics.precision);
            rs.extend(o.metrics.recall);
            fs.extend(o.metrics.f_measure);
        }
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let p = ratio(cell.hit_total, cell.retrieved_total);
        let r = ratio(cell.hit_total, cell.relevant_total);
        cell.micro = Prf {
            precision: p,
            recall: r,
            f_measure: f_of(p, r),
        };
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        cell.macro_avg = Prf {
            precision: mean(&ps),
            recall: mean(&rs),
            f_measure: mean(&fs),
        };
        cell
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub id: String,
    pub department: String,
    pub k: usize,
    /// Returned employee ids in rank order.
    pub retrieved: Vec<String>,
    pub relevant: Vec<String>,
    pub hits: usize,
    pub metrics: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_department: BTreeMap<String, MetricsCell>,
    pub overall: MetricsCell,
    pub params: ScoringParams,
    pub default_k: usize,
    pub corpus_fingerprint: String,
    pub kb_fingerprint: String,
    pub queries: Vec<QueryOutcome>,
}

impl MetricsReport {
    /// Pooled per-department counts must add up to the overall counts.
    pub fn counts_consistent(&self) -> bool {
        let sum = |f: fn(&MetricsCell) -> usize| self.per_department.values().map(f).sum::<usize>();
        sum(|c| c.query_count) == self.overall.query_count
            && sum(|c| c.retrieved_total) == self.overall.retrieved_total
            && sum(|c| c.relevant_total) == self.overall.relevant_total
            && sum(|c| c.hit_total) == self.overall.hit_total
    }
}

pub fn corpus_fingerprint(corpus: &[QueryRecord]) -> String {
    let mut hasher = Sha256::new();
    for q in corpus {
        hasher.update(serde_json::to_vec(q).expect("query record serializes"));
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Runs every query through the full pipeline and aggregates the metrics.
pub fn run_eval(
    kb: &KnowledgeBase,
    corpus: &[QueryRecord],
    params: &ScoringParams,
    default_k: usize,
) -> Result<MetricsReport, EvalError> {
    let mut issues = validate_corpus(kb, corpus);
    if default_k == 0 {
        issues.push("default k must be at least 1".to_owned());
    }
    if let Err(e) = params.validate() {
        issues.push(e.to_string());
    }
    if !issues.is_empty() {
        return Err(EvalError::Corpus(issues));
    }

    let clock = MonotonicClock::new();
    let outcomes = corpus
        .par_iter()
        .map(|q| {
            let k = q.k.unwrap_or(default_k);
            let raw = RawQuery {
                text: q.text.clone(),
                department_filter: None,
                k,
            };
            let response = handle_request(kb, &raw, params, &clock, &q.id).map_err(|e| EvalError::Query {
                id: q.id.clone(),
                message: e.to_string(),
            })?;
            let retrieved: Vec<String> = response.results.into_iter().map(|r| r.employee_id).collect();
            let retrieved_set: BTreeSet<&str> = retrieved.iter().map(String::as_str).collect();
            let relevant_set: BTreeSet<&str> = q.relevant.iter().map(String::as_str).collect();
            let p = precision(&retrieved_set, &relevant_set);
            let r = recall(&retrieved_set, &relevant_set);
            Ok(QueryOutcome {
                id: q.id.clone(),
                department: q.department.clone(),
                k,
                hits: retrieved_set.intersection(&relevant_set).count(),
                retrieved,
                relevant: q.relevant.iter().cloned().collect(),
                metrics: Prf {
                    precision: p,
                    recall: r,
                    f_measure: f_of(p, r),
                },
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let mut by_department: BTreeMap<String, Vec<&QueryOutcome>> = BTreeMap::new();
    for o in &outcomes {
        by_department.entry(o.department.clone()).or_default().push(o);
    }
    let per_department = by_department
        .into_iter()
        .map(|(dept, os)| (dept, MetricsCell::from_outcomes(os)))
        .collect();

    Ok(MetricsReport {
        per_department,
        overall: MetricsCell::from_outcomes(&outcomes),
        params: *params,
        default_k,
        corpus_fingerprint: corpus_fingerprint(corpus),
        kb_fingerprint: kb.fingerprint().to_owned(),
        queries: outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format `{other}` (expected json or csv)")),
        }
    }
}

/// Fixed 4-decimal rendering; `{:.4}` rounds half to even on the exact value.
pub fn format_metric(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// JSON with sorted keys, or a CSV table of micro-averaged metrics with one
/// row per department and a final `overall` row.
pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            // serde_json's Map is ordered, so going through Value sorts keys.
            let value = serde_json::to_value(report).expect("report serializes");
            let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("department,queries,precision,recall,f_measure\n");
            let rows = report
                .per_department
                .iter()
                .map(|(d, c)| (d.as_str(), c))
                .chain(std::iter::once(("overall", &report.overall)));
            for (name, cell) in rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    name,
                    cell.query_count,
                    format_metric(cell.micro.precision),
                    format_metric(cell.micro.recall),
                    format_metric(cell.micro.f_measure)
                ));
            }
            out.into_bytes()
        }
    }
}
