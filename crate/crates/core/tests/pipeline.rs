mod common;

use std::sync::Arc;
use std::time::Duration;

use ontosearch_core::orchestrator::SteppingClock;
use ontosearch_core::{handle_request, pipeline_trace, AgentStage, Orchestrator, QueryError, RawQuery, ScoringParams};

#[test]
fn every_corpus_query_passes_three_stages_in_order() {
    let kb = common::acme();
    let clock = SteppingClock::new(Duration::from_micros(1));
    for q in common::corpus("queries.jsonl") {
        let outcome = handle_request(&kb, &RawQuery::new(q.text.as_str()), &ScoringParams::default(), &clock, &q.id);
        let trace = pipeline_trace(&outcome);
        let stages: Vec<AgentStage> = trace.iter().map(|e| e.stage).collect();
        assert_eq!(stages, AgentStage::PIPELINE, "{}", q.id);
        for pair in trace.windows(2) {
            assert!(pair[0].ended_at <= pair[1].started_at);
        }
        for e in trace {
            assert_eq!(e.request_id, q.id);
            assert!(e.started_at <= e.ended_at);
        }
    }
}

#[test]
fn empty_query_stops_at_interface() {
    let kb = common::acme();
    let clock = SteppingClock::new(Duration::from_micros(1));
    for text in ["", "   ", "\n\t"] {
        let outcome = handle_request(&kb, &RawQuery::new(text), &ScoringParams::default(), &clock, "r");
        let trace = pipeline_trace(&outcome);
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].stage, AgentStage::Interface);
        assert_eq!(outcome.unwrap_err().error, QueryError::EmptyQuery);
    }
}

#[test]
fn unmapped_query_is_not_an_error() {
    let orch = Orchestrator::new(Arc::new(common::acme()), ScoringParams::default());
    let resp = orch.handle(&RawQuery::new("zzz")).unwrap();
    assert!(resp.results.is_empty());
    assert_eq!(resp.unknown_terms, ["zzz"]);
    assert_eq!(resp.trace.len(), 3);
    assert!(resp.diagnostics.iter().any(|d| d == "no concepts mapped"));
}

#[test]
fn responses_are_deterministic_apart_from_ids_and_times() {
    let orch = Orchestrator::new(Arc::new(common::acme()), ScoringParams::default());
    for q in common::corpus("queries.jsonl") {
        let raw = RawQuery::new(q.text.as_str());
        let a = orch.handle(&raw).unwrap();
        let b = orch.handle(&raw).unwrap();
        assert_ne!(a.request_id, b.request_id);
        assert_eq!(a.results, b.results);
        assert_eq!(a.unknown_terms, b.unknown_terms);
        assert_eq!(a.diagnostics, b.diagnostics);
        let summaries = |r: &ontosearch_core::SearchResponse| r.trace.iter().map(|e| e.summary.clone()).collect::<Vec<_>>();
        assert_eq!(summaries(&a), summaries(&b));
    }
}
