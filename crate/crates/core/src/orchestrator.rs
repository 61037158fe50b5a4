//! The three-agent request pipeline.
//!
//! Interface agent → manipulation agent → extraction agent. Agents are plain
//! stages exchanging owned messages; each stage's inputs are narrowed so the
//! manipulation agent only sees the vocabulary and the extraction agent only
//! sees the semantic query.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{KnowledgeBase, Vocabulary};
use crate::query::{build_semantic_query, expand_query, QueryError, RawQuery, SemanticQuery};
use crate::reasoner::{search, ScoringParams, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentStage {
    Interface,
    Manipulation,
    Extraction,
}

impl AgentStage {
    pub const PIPELINE: [AgentStage; 3] = [
        AgentStage::Interface,
        AgentStage::Manipulation,
        AgentStage::Extraction,
    ];
}

impl fmt::Display for AgentStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Monotonic time source, injected so tests can control timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Advances by a fixed step on every reading.
#[derive(Debug, Default)]
pub struct SteppingClock {
    nanos: AtomicU64,
    step: u64,
}

impl SteppingClock {
    pub fn new(step: Duration) -> Self {
        Self {
            nanos: AtomicU64::new(0),
            step: step.as_nanos() as u64,
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.nanos.fetch_add(self.step, Ordering::SeqCst))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEvent {
    pub request_id: String,
    pub stage: AgentStage,
    pub started_at: Duration,
    pub ended_at: Duration,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub request_id: String,
    pub results: Vec<SearchResult>,
    pub unknown_terms: Vec<String>,
    pub department_key: Option<String>,
    pub trace: Vec<StageEvent>,
    pub diagnostics: Vec<String>,
}

/// A request rejected by the interface agent. The trace holds only the
/// interface event.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("request {request_id} rejected: {error}")]
pub struct RequestError {
    pub request_id: String,
    pub error: QueryError,
    pub trace: Vec<StageEvent>,
}

/// Stage events of a handled request, in pipeline order.
pub fn pipeline_trace(outcome: &Result<SearchResponse, RequestError>) -> &[StageEvent] {
    match outcome {
        Ok(response) => &response.trace,
        Err(err) => &err.trace,
    }
}

// Messages between the agents.

#[derive(Debug, Clone)]
struct ValidatedRequest {
    text: String,
    department_filter: Option<String>,
    k: usize,
}

#[derive(Debug, Clone)]
struct ManipulatedRequest {
    query: SemanticQuery,
    k: usize,
}

struct Recorder<'a> {
    request_id: &'a str,
    clock: &'a dyn Clock,
    events: Vec<StageEvent>,
}

impl<'a> Recorder<'a> {
    fn run<T>(&mut self, stage: AgentStage, body: impl FnOnce() -> (T, String)) -> T {
        let started_at = self.clock.now();
        let (out, summary) = body();
        let ended_at = self.clock.now().max(started_at);
        self.events.push(StageEvent {
            request_id: self.request_id.to_owned(),
            stage,
            started_at,
            ended_at,
            summary,
        });
        out
    }
}

fn interface_intake(vocab: &Vocabulary, raw: &RawQuery) -> Result<ValidatedRequest, QueryError> {
    raw.validate(vocab)?;
    Ok(ValidatedRequest {
        text: raw.text.clone(),
        department_filter: raw.department_filter.clone(),
        k: raw.k,
    })
}

fn manipulation_agent(vocab: &Vocabulary, req: ValidatedRequest, expansion_weight: f64) -> ManipulatedRequest {
    let raw = RawQuery {
        text: req.text,
        department_filter: req.department_filter,
        k: req.k,
    };
    let direct = build_semantic_query(vocab, &raw).expect("interface agent validated the request");
    ManipulatedRequest {
        query: expand_query(vocab, &direct, expansion_weight),
        k: req.k,
    }
}

fn extraction_agent(kb: &KnowledgeBase, query: &SemanticQuery, params: &ScoringParams, k: usize) -> Vec<SearchResult> {
    search(kb, query, params, k)
}

/// Runs one request through the pipeline with an explicit id and clock.
pub fn handle_request(
    kb: &KnowledgeBase,
    raw: &RawQuery,
    params: &ScoringParams,
    clock: &dyn Clock,
    request_id: &str,
) -> Result<SearchResponse, RequestError> {
    let mut rec = Recorder {
        request_id,
        clock,
        events: Vec::with_capacity(3),
    };

    let vocab = kb.vocabulary();
    let validated = rec.run(AgentStage::Interface, || {
        let res = interface_intake(vocab, raw);
        let summary = match &res {
            Ok(v) => format!(
                "accepted query ({} chars, k={}, department filter {})",
                v.text.chars().count(),
                v.k,
                v.department_filter.as_deref().unwrap_or("none")
            ),
            Err(e) => format!("rejected: {e}"),
        };
        (res, summary)
    });
    let validated = match validated {
        Ok(v) => v,
        Err(error) => {
            return Err(RequestError {
                request_id: request_id.to_owned(),
                error,
                trace: rec.events,
            })
        }
    };

    let manipulated = rec.run(AgentStage::Manipulation, || {
        let m = manipulation_agent(vocab, validated, params.expansion_weight);
        let summary = format!(
            "{} concept(s) ({} direct), {} unknown term(s), department {}",
            m.query.concepts.len(),
            m.query.direct.len(),
            m.query.unknown_terms.len(),
            m.query.department_key.as_deref().unwrap_or("none")
        );
        (m, summary)
    });

    let ManipulatedRequest { query, k } = manipulated;
    let results = rec.run(AgentStage::Extraction, || {
        let results = extraction_agent(kb, &query, params, k);
        let summary = format!("{} result(s)", results.len());
        (results, summary)
    });

    let mut diagnostics = Vec::new();
    if query.concepts.is_empty() {
        diagnostics.push("no concepts mapped".to_owned());
    }
    if !query.unknown_terms.is_empty() {
        diagnostics.push(format!("unmapped terms: {}", query.unknown_terms.join(", ")));
    }
    if !query.concepts.is_empty() && results.is_empty() {
        diagnostics.push(format!("no employee scored at or above threshold {}", params.tau));
    }

    Ok(SearchResponse {
        request_id: request_id.to_owned(),
        results,
        unknown_terms: query.unknown_terms,
        department_key: query.department_key,
        trace: rec.events,
        diagnostics,
    })
}

/// Shared entry point for services: owns the KB, the default parameters, the
/// clock and a request counter.
pub struct Orchestrator {
    kb: Arc<KnowledgeBase>,
    params: ScoringParams,
    clock: Arc<dyn Clock>,
    next_id: AtomicU64,
}

impl Orchestrator {
    pub fn new(kb: Arc<KnowledgeBase>, params: ScoringParams) -> Self {
        Self::with_clock(kb, params, Arc::new(MonotonicClock::new()))
    }

    pub fn with_clock(kb: Arc<KnowledgeBase>, params: ScoringParams, clock: Arc<dyn Clock>) -> Self {
        Self {
            kb,
            params,
            clock,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn params(&self) -> &ScoringParams {
        &self.params
    }

    pub fn next_request_id(&self) -> String {
        format!("req-{:06}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    pub fn handle(&self, raw: &RawQuery) -> Result<SearchResponse, RequestError> {
        let id = self.next_request_id();
        handle_request(&self.kb, raw, &self.params, self.clock.as_ref(), &id)
    }
}

impl fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Orchestrator")
            .field("kb_fingerprint", &self.kb.fingerprint())
            .field("params", &self.params)
            .finish()
    }
}
