//! Case-based retrieval over the concept index.
//!
//! A case is scored as
//!
//! ```text
//! score = coverage(query, case) * confidence(case) * department_modifier
//! confidence = factor * (1 + lambda_peer * log2(1 + peers))
//! ```
//!
//! where coverage is the share of query weight mass found in the case. Each
//! employee is ranked by their best case.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Case, ConceptId, KnowledgeBase};
use crate::query::SemanticQuery;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReasonerError {
    #[error("query has no concepts to match")]
    EmptyQueryConcepts,
    #[error("invalid scoring parameter {name}: {message}")]
    InvalidParam { name: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringParams {
    pub lambda_peer: f64,
    pub dept_match_boost: f64,
    pub dept_mismatch_penalty: f64,
    pub hard_department_filter: bool,
    /// Minimum employee score kept in results.
    pub tau: f64,
    pub expansion_weight: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            lambda_peer: 0.1,
            dept_match_boost: 1.25,
            dept_mismatch_penalty: 0.75,
            hard_department_filter: false,
            tau: 0.2,
            expansion_weight: 0.5,
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<(), ReasonerError> {
        fn bad(name: &'static str, message: &str) -> Result<(), ReasonerError> {
            Err(ReasonerError::InvalidParam {
                name,
                message: message.to_owned(),
            })
        }
        if !(self.lambda_peer >= 0.0 && self.lambda_peer.is_finite()) {
            return bad("lambda_peer", "must be finite and >= 0");
        }
        if !(self.dept_match_boost > 0.0 && self.dept_match_boost.is_finite()) {
            return bad("dept_match_boost", "must be finite and > 0");
        }
        if !(self.dept_mismatch_penalty > 0.0 && self.dept_mismatch_penalty <= 1.0) {
            return bad("dept_mismatch_penalty", "must be in (0, 1]");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be finite and >= 0");
        }
        if !(self.expansion_weight > 0.0 && self.expansion_weight <= 1.0) {
            return bad("expansion_weight", "must be in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCase {
    pub case_id: String,
    pub similarity: f64,
    pub confidence: f64,
    pub department_modifier: f64,
    pub score: f64,
    pub matched_concepts: BTreeSet<ConceptId>,
    pub factor: f64,
    pub peers: u64,
}

impl ScoredCase {
    pub fn explanation(&self) -> String {
        let matched = self
            .matched_concepts
            .iter()
            .map(ConceptId::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "case {}: coverage {:.4} x confidence {:.4} (factor {}, peers {}) x department {:.2} = {:.4}; matched [{}]",
            self.case_id,
            self.similarity,
            self.confidence,
            self.factor,
            self.peers,
            self.department_modifier,
            self.score,
            matched
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub employee_id: String,
    pub full_name: String,
    pub phone: String,
    pub email: String,
    pub position_title: String,
    pub department_id: String,
    pub score: f64,
    pub best_case: ScoredCase,
    pub explanation: String,
}

/// Weighted query coverage: weight of query concepts present in the case over
/// the total query weight.
pub fn similarity(sq: &SemanticQuery, case: &Case) -> Result<f64, ReasonerError> {
    if sq.concepts.is_empty() {
        return Err(ReasonerError::EmptyQueryConcepts);
    }
    let mut matched = 0.0;
    let mut total = 0.0;
    for (concept, weight) in &sq.concepts {
        total += weight;
        if case.concepts.contains(concept) {
            matched += weight;
        }
    }
    Ok(matched / total)
}

pub fn confidence(case: &Case, params: &ScoringParams) -> f64 {
    case.factor * (1.0 + params.lambda_peer * (1.0 + case.peers as f64).log2())
}

/// Multiplier from the query's department key against the case's department.
/// Returns 0 when the hard filter excludes the case.
pub fn department_modifier(sq: &SemanticQuery, case: &Case, params: &ScoringParams) -> f64 {
    match (&sq.department_key, &case.department_id) {
        (Some(q), Some(c)) if q == c => params.dept_match_boost,
        (Some(_), Some(_)) if params.hard_department_filter => 0.0,
        (Some(_), Some(_)) => params.dept_mismatch_penalty,
        _ => 1.0,
    }
}

pub fn score_case(
    sq: &SemanticQuery,
    case: &Case,
    params: &ScoringParams,
) -> Result<ScoredCase, ReasonerError> {
    let similarity = similarity(sq, case)?;
    let confidence = confidence(case, params);
    let department_modifier = department_modifier(sq, case, params);
    let matched_concepts = sq
        .concepts
        .keys()
        .filter(|c| case.concepts.contains(*c))
        .cloned()
        .collect();
    Ok(ScoredCase {
        case_id: case.id.clone(),
        similarity,
        confidence,
        department_modifier,
        score: similarity * confidence * department_modifier,
        matched_concepts,
        factor: case.factor,
        peers: case.peers,
    })
}

/// Total result order: score descending, then employee id ascending.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// Better case for the same employee: higher score, then lower case id.
fn better_case(candidate: &ScoredCase, incumbent: &ScoredCase) -> bool {
    match candidate.score.total_cmp(&incumbent.score) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => candidate.case_id < incumbent.case_id,
    }
}

/// Ranks employees for a semantic query.
///
/// Candidates come from the concept index only. An employee is kept when
/// their best case scores above zero and at least `params.tau`.
pub fn search(kb: &KnowledgeBase, sq: &SemanticQuery, params: &ScoringParams, k: usize) -> Vec<SearchResult> {
    if sq.concepts.is_empty() || k == 0 {
        return Vec::new();
    }
    let candidates: BTreeSet<&str> = sq
        .concepts
        .keys()
        .filter_map(|c| kb.index().cases_for(c))
        .flatten()
        .map(String::as_str)
        .collect();

    let mut best: BTreeMap<&str, ScoredCase> = BTreeMap::new();
    for case_id in candidates {
        let case = kb.case(case_id).expect("index only references known cases");
        let scored = score_case(sq, case, params).expect("query concepts are non-empty");
        if scored.score <= 0.0 {
            continue;
        }
        match best.get(case.employee_id.as_str()) {
            Some(incumbent) if !better_case(&scored, incumbent) => {}
            _ => {
                best.insert(case.employee_id.as_str(), scored);
            }
        }
    }

    let mut ranked: Vec<(&str, ScoredCase)> = best
        .into_iter()
        .filter(|(_, sc)| sc.score >= params.tau)
        .collect();
    ranked.sort_by(|(a_id, a), (b_id, b)| rank_order(a.score, a_id, b.score, b_id));
    ranked.truncate(k);

    ranked
        .into_iter()
        .map(|(employee_id, best_case)| {
            let emp = kb.employee(employee_id).expect("cases reference known employees");
            SearchResult {
                employee_id: emp.id.clone(),
                full_name: emp.full_name.clone(),
                phone: emp.phone.clone(),
                email: emp.email.clone(),
                position_title: emp.position_title.clone(),
                department_id: emp.department_id.clone(),
                score: best_case.score,
                explanation: best_case.explanation(),
                best_case,
            }
        })
        .collect()
}
