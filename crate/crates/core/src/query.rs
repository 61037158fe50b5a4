//! Turns free text into a weighted [`SemanticQuery`].
//!
//! The flow is `normalize` → `detect_department` → lexicon lookup, with
//! [`expand_query`] as a separate one-hop enrichment step over lexicon
//! co-membership. Every function here only sees the [`Vocabulary`], never
//! employee or case records.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{ConceptId, Vocabulary};

pub const DEFAULT_K: usize = 10;

pub const STOPWORDS: [&str; 27] = [
    "a", "an", "the", "who", "whom", "what", "which", "how", "is", "are", "do", "does", "can",
    "for", "of", "to", "in", "on", "at", "and", "or", "i", "me", "my", "we", "our", "please",
];

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "snake_case")]
pub enum QueryError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("result cap k must be at least 1 (got {0})")]
    InvalidK(usize),
    #[error("unknown department `{0}`")]
    UnknownDepartment(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQuery {
    pub text: String,
    pub department_filter: Option<String>,
    pub k: usize,
}

impl RawQuery {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            department_filter: None,
            k: DEFAULT_K,
        }
    }

    pub fn with_department(mut self, department: impl Into<String>) -> Self {
        self.department_filter = Some(department.into());
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<(), QueryError> {
        if self.text.trim().is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        if self.k == 0 {
            return Err(QueryError::InvalidK(self.k));
        }
        if let Some(dept) = &self.department_filter {
            if vocab.department(dept).is_none() {
                return Err(QueryError::UnknownDepartment(dept.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticQuery {
    /// Concept weights, each in `(0, 1]`.
    pub concepts: BTreeMap<ConceptId, f64>,
    /// Concepts that came straight from the lexicon (weight 1.0). Expansion
    /// only ever starts from these.
    pub direct: BTreeSet<ConceptId>,
    pub department_key: Option<String>,
    pub unknown_terms: Vec<String>,
    pub origin_text: String,
}

impl SemanticQuery {
    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.concepts.values().sum()
    }
}

/// Lowercases, replaces every non-alphanumeric character with a space,
/// splits on whitespace and drops stopwords.
pub fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !is_stopword(t))
        .map(str::to_owned)
        .collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Finds the leftmost token (or adjacent token pair) naming a department.
///
/// At a given position a two-token match is preferred over a one-token match.
/// Returns the department id and the tokens with the matched span removed.
pub fn detect_department(vocab: &Vocabulary, tokens: &[String]) -> (Option<String>, Vec<String>) {
    let surfaces = vocab.department_surfaces();
    for start in 0..tokens.len() {
        for len in [2, 1] {
            let Some(span) = tokens.get(start..start + len) else {
                continue;
            };
            if let Some((_, dept)) = surfaces.iter().find(|(s, _)| s.as_slice() == span) {
                let mut rest = tokens[..start].to_vec();
                rest.extend_from_slice(&tokens[start + len..]);
                return (Some(dept.clone()), rest);
            }
        }
    }
    (None, tokens.to_vec())
}

/// Builds the directly-mapped semantic query. Expansion is a separate step.
///
/// A query whose terms map to nothing is not an error: it comes back with an
/// empty concept map and every term listed in `unknown_terms`.
pub fn build_semantic_query(vocab: &Vocabulary, raw: &RawQuery) -> Result<SemanticQuery, QueryError> {
    if raw.text.trim().is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let tokens = normalize(&raw.text);
    let (department_key, remaining) = match &raw.department_filter {
        Some(dept) => {
            if vocab.department(dept).is_none() {
                return Err(QueryError::UnknownDepartment(dept.clone()));
            }
            (Some(dept.clone()), tokens)
        }
        None => detect_department(vocab, &tokens),
    };

    let mut concepts = BTreeMap::new();
    let mut unknown_terms: Vec<String> = Vec::new();
    for token in remaining {
        let mapped = vocab.lookup_concepts(&token);
        if mapped.is_empty() {
            if !unknown_terms.contains(&token) {
                unknown_terms.push(token);
            }
            continue;
        }
        for concept in mapped {
            concepts.insert(concept, 1.0);
        }
    }
    let direct = concepts.keys().cloned().collect();
    Ok(SemanticQuery {
        concepts,
        direct,
        department_key,
        unknown_terms,
        origin_text: raw.text.clone(),
    })
}

/// Adds lexicon siblings of every directly-mapped concept at `weight`,
/// keeping any existing weight that is at least as high. Idempotent.
pub fn expand_query(vocab: &Vocabulary, sq: &SemanticQuery, weight: f64) -> SemanticQuery {
    let mut out = sq.clone();
    for concept in &sq.direct {
        let Some(siblings) = vocab.siblings(concept) else {
            continue;
        };
        for sibling in siblings {
            let slot = out.concepts.entry(sibling.clone()).or_insert(weight);
            if *slot < weight {
                *slot = weight;
            }
        }
    }
    out
}
