//! Ontology-backed search for "who is responsible for X" questions inside a company.
//!
//! The crate is organised around the request flow:
//!
//! - [`kb`]: the knowledge base (classes, concepts, departments, employees,
//!   uncertainty-annotated responsibility cases, lexicon) plus its JSON format
//!   and concept index.
//! - [`query`]: free text to weighted concept query.
//! - [`reasoner`]: case-based retrieval and employee ranking.
//! - [`orchestrator`]: the three-stage agent pipeline with request tracing.
//! - [`eval`]: precision / recall / F-measure over a labelled query corpus.

pub mod eval;
pub mod kb;
pub mod orchestrator;
pub mod query;
pub mod reasoner;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use eval::{
    emit_report, f_measure, parse_corpus, precision, recall, run_eval, EvalError, MetricsCell,
    MetricsReport, QueryRecord, ReportFormat,
};
pub use kb::{
    build_index, load_kb, validate, Case, ClassDef, ConceptId, ConceptIndex, Department, Employee,
    KbDocument, KbError, KnowledgeBase, Lexicon, Violation, Vocabulary,
};
pub use orchestrator::{
    handle_request, pipeline_trace, AgentStage, Clock, MonotonicClock, Orchestrator, RequestError,
    SearchResponse, StageEvent,
};
pub use query::{
    build_semantic_query, detect_department, expand_query, normalize, QueryError, RawQuery,
    SemanticQuery,
};
pub use reasoner::{
    confidence, score_case, search, similarity, ReasonerError, ScoredCase, ScoringParams,
    SearchResult,
};
