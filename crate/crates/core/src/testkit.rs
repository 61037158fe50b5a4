//! Test support: seeded random knowledge bases and queries, plus brute-force
//! oracles that score without the concept index.
//!
//! Only compiled for tests or with the `testkit` feature.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kb::{Case, ClassDef, ConceptId, Department, Employee, KbDocument, KnowledgeBase, Lexicon};
use crate::query::SemanticQuery;
use crate::reasoner::{rank_order, score_case, search, ScoringParams, SearchResult};

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_concepts: usize,
    pub max_departments: usize,
    pub max_employees: usize,
    pub max_cases: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_concepts: 10,
            max_departments: 4,
            max_employees: 12,
            max_cases: 30,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn concept(i: usize) -> ConceptId {
    ConceptId::new(format!("k{i}")).expect("generated ids are valid")
}

/// A random class forest: every class either is a root or points at an
/// earlier class, so the result is always acyclic.
pub fn random_classes(rng: &mut impl Rng, n: usize) -> Vec<ClassDef> {
    (0..n)
        .map(|i| ClassDef {
            name: format!("C{i}"),
            parent: (i > 0 && rng.random_bool(0.7)).then(|| format!("C{}", rng.random_range(0..i))),
        })
        .collect()
}

/// Factor values in (0, 1], including the boundary 1.0 now and then.
pub fn random_factor(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.1) {
        1.0
    } else {
        rng.random_range(1..=1000) as f64 / 1000.0
    }
}

pub fn random_document(rng: &mut impl Rng, cfg: GenConfig) -> KbDocument {
    let n_concepts = rng.random_range(1..=cfg.max_concepts);
    let n_depts = rng.random_range(1..=cfg.max_departments);
    let n_emps = rng.random_range(1..=cfg.max_employees);
    let n_cases = rng.random_range(0..=cfg.max_cases);

    let concepts: BTreeSet<ConceptId> = (0..n_concepts).map(concept).collect();
    let departments: Vec<Department> = (0..n_depts)
        .map(|i| Department {
            id: format!("d{i}"),
            name: format!("Dept {i}"),
            aliases: [format!("dept{i}")].into(),
        })
        .collect();
    let employees: Vec<Employee> = (0..n_emps)
        .map(|i| Employee {
            id: format!("e{i:02}"),
            full_name: format!("Person {i}"),
            phone: format!("+1 555 01{i:02}"),
            email: format!("p{i}@example.com"),
            position_title: "Specialist".into(),
            department_id: format!("d{}", rng.random_range(0..n_depts)),
        })
        .collect();
    let cases: Vec<Case> = (0..n_cases)
        .map(|i| {
            let size = rng.random_range(1..=n_concepts.min(4));
            let concepts: BTreeSet<ConceptId> = (0..size).map(|_| concept(rng.random_range(0..n_concepts))).collect();
            Case {
                id: format!("c{i:02}"),
                employee_id: employees.choose(rng).expect("non-empty").id.clone(),
                concepts,
                department_id: rng
                    .random_bool(0.6)
                    .then(|| format!("d{}", rng.random_range(0..n_depts))),
                factor: random_factor(rng),
                peers: if rng.random_bool(0.3) { 0 } else { rng.random_range(0..100) },
            }
        })
        .collect();
    let mut entries: BTreeMap<String, BTreeSet<ConceptId>> = BTreeMap::new();
    for i in 0..n_concepts {
        entries.insert(format!("term{i}"), [concept(i)].into());
    }
    for g in 0..rng.random_range(0..=3) {
        let group: BTreeSet<ConceptId> = (0..rng.random_range(2..=3))
            .map(|_| concept(rng.random_range(0..n_concepts)))
            .collect();
        entries.insert(format!("group{g}"), group);
    }
    let n_classes = rng.random_range(0..8);
    KbDocument {
        classes: random_classes(rng, n_classes),
        concepts,
        departments,
        employees,
        cases,
        lexicon: Lexicon { entries },
    }
}

pub fn random_kb(rng: &mut impl Rng, cfg: GenConfig) -> KnowledgeBase {
    KnowledgeBase::from_document(random_document(rng, cfg)).expect("generator only emits valid KBs")
}

/// A random semantic query over the KB's concepts, sometimes with a
/// department key and a mix of direct (1.0) and expanded weights.
pub fn random_query(rng: &mut impl Rng, kb: &KnowledgeBase) -> SemanticQuery {
    let all: Vec<&ConceptId> = kb.concepts().iter().collect();
    let n = rng.random_range(0..=all.len().min(4));
    let mut concepts = BTreeMap::new();
    let mut direct = BTreeSet::new();
    for _ in 0..n {
        let c = (*all.choose(rng).expect("non-empty")).clone();
        if rng.random_bool(0.7) {
            concepts.insert(c.clone(), 1.0);
            direct.insert(c);
        } else {
            concepts.entry(c).or_insert(0.5);
        }
    }
    let department_key = rng
        .random_bool(0.5)
        .then(|| kb.departments().choose(rng).expect("non-empty").id.clone());
    SemanticQuery {
        concepts,
        direct,
        department_key,
        unknown_terms: Vec::new(),
        origin_text: String::new(),
    }
}

pub fn random_params(rng: &mut impl Rng) -> ScoringParams {
    ScoringParams {
        lambda_peer: [0.0, 0.1, 0.25, 1.0][rng.random_range(0..4)],
        dept_match_boost: [1.0, 1.25, 2.0][rng.random_range(0..3)],
        dept_mismatch_penalty: [0.5, 0.75, 1.0][rng.random_range(0..3)],
        hard_department_filter: rng.random_bool(0.25),
        tau: [0.0, 0.1, 0.2, 0.5][rng.random_range(0..4)],
        expansion_weight: 0.5,
    }
}

/// Index-free reference ranking: `(employee_id, best case id, score)`.
///
/// Scores every case in the KB from first principles, keeps each employee's
/// best case (ties to the smaller case id), drops non-positive scores and
/// scores below `tau`, sorts by score desc then employee id asc.
pub fn oracle_search(
    kb: &KnowledgeBase,
    sq: &SemanticQuery,
    params: &ScoringParams,
    k: usize,
) -> Vec<(String, String, f64)> {
    let total: f64 = sq.concepts.values().sum();
    let mut best: BTreeMap<String, (String, f64)> = BTreeMap::new();
    for case in kb.cases() {
        if sq.concepts.is_empty() {
            break;
        }
        let mut covered = 0.0;
        for (c, w) in &sq.concepts {
            if case.concepts.contains(c) {
                covered += w;
            }
        }
        let sim = covered / total;
        let conf = case.factor * (1.0 + params.lambda_peer * ((case.peers + 1) as f64).log2());
        let modifier = match (&sq.department_key, &case.department_id) {
            (Some(a), Some(b)) if a == b => params.dept_match_boost,
            (Some(_), Some(_)) => {
                if params.hard_department_filter {
                    0.0
                } else {
                    params.dept_mismatch_penalty
                }
            }
            _ => 1.0,
        };
        let score = sim * conf * modifier;
        if score <= 0.0 {
            continue;
        }
        let replace = match best.get(&case.employee_id) {
            None => true,
            Some((cid, s)) => score > *s || (score == *s && case.id < *cid),
        };
        if replace {
            best.insert(case.employee_id.clone(), (case.id.clone(), score));
        }
    }
    let mut out: Vec<(String, String, f64)> = best
        .into_iter()
        .filter(|(_, (_, s))| *s >= params.tau)
        .map(|(e, (c, s))| (e, c, s))
        .collect();
    out.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

/// Index rebuilt with the obvious double loop.
pub fn oracle_index(kb: &KnowledgeBase) -> BTreeMap<ConceptId, BTreeSet<String>> {
    let mut out: BTreeMap<ConceptId, BTreeSet<String>> = BTreeMap::new();
    for concept in kb.concepts() {
        for case in kb.cases() {
            if case.concepts.iter().any(|c| c == concept) {
                out.entry(concept.clone()).or_default().insert(case.id.clone());
            }
        }
    }
    out
}

/// One random KB, query, parameter set and cap drawn from a seed.
pub struct Instance {
    pub kb: KnowledgeBase,
    pub query: SemanticQuery,
    pub params: ScoringParams,
    pub k: usize,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let kb = random_kb(&mut r, GenConfig::default());
    let query = random_query(&mut r, &kb);
    let params = random_params(&mut r);
    let k = r.random_range(1..=kb.employees().len() + 2);
    Instance { kb, query, params, k }
}

fn rebuilt(kb: &KnowledgeBase, edit: impl FnOnce(&mut KbDocument)) -> KnowledgeBase {
    let mut doc = kb.to_document();
    edit(&mut doc);
    KnowledgeBase::from_document(doc).expect("edit keeps the KB valid")
}

fn rank_of(results: &[SearchResult], employee_id: &str) -> Option<usize> {
    results.iter().position(|r| r.employee_id == employee_id)
}

/// Indexed search agrees with [`oracle_search`]: same employees in the same
/// order, same best case, scores within 1e-9.
pub fn check_oracle_agreement(seed: u64) -> Result<(), String> {
    let Instance { kb, query, params, k } = random_instance(seed);
    let got = search(&kb, &query, &params, k);
    let want = oracle_search(&kb, &query, &params, k);
    if got.len() != want.len() {
        return Err(format!("seed {seed}: {} results, oracle has {}", got.len(), want.len()));
    }
    for (i, (g, (emp, case, score))) in got.iter().zip(&want).enumerate() {
        if g.employee_id != *emp || g.best_case.case_id != *case || (g.score - score).abs() > 1e-9 {
            return Err(format!(
                "seed {seed}, rank {i}: got ({}, {}, {}), oracle ({emp}, {case}, {score})",
                g.employee_id, g.best_case.case_id, g.score
            ));
        }
    }
    Ok(())
}

/// Picks a case that scores above zero under the instance, if any.
fn live_case(inst: &Instance, r: &mut impl Rng) -> Option<Case> {
    let live: Vec<&Case> = inst
        .kb
        .cases()
        .iter()
        .filter(|c| score_case(&inst.query, c, &inst.params).is_ok_and(|s| s.score > 0.0))
        .collect();
    live.choose(r).map(|c| (*c).clone())
}

/// Raising a matching case's factor strictly raises its score and never
/// worsens its employee's rank.
pub fn check_factor_monotonicity(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed);
    let mut r = rng(seed ^ 0x5eed);
    let Some(case) = live_case(&inst, &mut r) else {
        return Ok(());
    };
    if case.factor >= 1.0 {
        return Ok(());
    }
    let raised = (case.factor + (1.0 - case.factor) * r.random_range(1..=100) as f64 / 100.0).min(1.0);
    let kb2 = rebuilt(&inst.kb, |doc| {
        doc.cases.iter_mut().find(|c| c.id == case.id).expect("case exists").factor = raised;
    });
    let before = score_case(&inst.query, &case, &inst.params).map_err(|e| e.to_string())?;
    let after = score_case(&inst.query, kb2.case(&case.id).expect("case exists"), &inst.params)
        .map_err(|e| e.to_string())?;
    if after.score <= before.score {
        return Err(format!(
            "seed {seed}: factor {} -> {raised} moved score {} -> {}",
            case.factor, before.score, after.score
        ));
    }
    let all = inst.kb.employees().len();
    let old = search(&inst.kb, &inst.query, &inst.params, all);
    let new = search(&kb2, &inst.query, &inst.params, all);
    if let Some(old_rank) = rank_of(&old, &case.employee_id) {
        match rank_of(&new, &case.employee_id) {
            Some(new_rank) if new_rank <= old_rank => {}
            other => {
                return Err(format!(
                    "seed {seed}: {} went from rank {old_rank} to {other:?}",
                    case.employee_id
                ))
            }
        }
    }
    Ok(())
}

/// More peers raise a matching case's score when the peer weight is
/// positive and leave it unchanged when it is zero.
pub fn check_peer_monotonicity(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed);
    let mut r = rng(seed ^ 0xbeef);
    let Some(case) = live_case(&inst, &mut r) else {
        return Ok(());
    };
    let mut more = case.clone();
    more.peers += r.random_range(1..=50);
    for lambda in [inst.params.lambda_peer, 0.0] {
        let params = ScoringParams {
            lambda_peer: lambda,
            ..inst.params
        };
        let before = score_case(&inst.query, &case, &params).map_err(|e| e.to_string())?.score;
        let after = score_case(&inst.query, &more, &params).map_err(|e| e.to_string())?.score;
        let ok = if lambda > 0.0 { after > before } else { after == before };
        if !ok {
            return Err(format!(
                "seed {seed}: lambda {lambda}, peers {} -> {} moved score {before} -> {after}",
                case.peers, more.peers
            ));
        }
    }
    Ok(())
}

/// Result list does not depend on the order cases appear in the KB.
pub fn check_permutation_invariance(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed);
    let mut r = rng(seed ^ 0xcafe);
    let shuffled = rebuilt(&inst.kb, |doc| doc.cases.shuffle(&mut r));
    let a = search(&inst.kb, &inst.query, &inst.params, inst.k);
    let b = search(&shuffled, &inst.query, &inst.params, inst.k);
    if a != b {
        return Err(format!("seed {seed}: results differ after shuffling cases"));
    }
    Ok(())
}

/// Every returned score is finite, positive, at least `tau` and within the
/// largest reachable value; the list is sorted, capped and free of repeats.
pub fn check_score_bounds(seed: u64) -> Result<(), String> {
    let Instance { kb, query, params, k } = random_instance(seed);
    let results = search(&kb, &query, &params, k);
    if results.len() > k {
        return Err(format!("seed {seed}: {} results for k = {k}", results.len()));
    }
    let max_peers = kb.cases().iter().map(|c| c.peers).max().unwrap_or(0);
    let ceiling = params.dept_match_boost.max(1.0) * (1.0 + params.lambda_peer * (1.0 + max_peers as f64).log2());
    let mut seen = BTreeSet::new();
    for (i, res) in results.iter().enumerate() {
        let s = res.score;
        if !s.is_finite() || s <= 0.0 || s < params.tau || s > ceiling + 1e-12 {
            return Err(format!("seed {seed}: score {s} out of bounds (tau {}, ceiling {ceiling})", params.tau));
        }
        let sim = res.best_case.similarity;
        if !(0.0..=1.0).contains(&sim) {
            return Err(format!("seed {seed}: similarity {sim}"));
        }
        if !seen.insert(res.employee_id.as_str()) {
            return Err(format!("seed {seed}: {} listed twice", res.employee_id));
        }
        if let Some(prev) = i.checked_sub(1).map(|j| &results[j]) {
            if rank_order(prev.score, &prev.employee_id, s, &res.employee_id) != std::cmp::Ordering::Less {
                return Err(format!("seed {seed}: results not in rank order at {i}"));
            }
        }
    }
    Ok(())
}

/// Two searches over equal inputs give equal outputs.
pub fn check_determinism(seed: u64) -> Result<(), String> {
    let a = random_instance(seed);
    let b = random_instance(seed);
    if search(&a.kb, &a.query, &a.params, a.k) != search(&b.kb, &b.query, &b.params, b.k) {
        return Err(format!("seed {seed}: repeated search differs"));
    }
    Ok(())
}

pub type Check = fn(u64) -> Result<(), String>;

/// The ranking properties by name.
pub const RANKING_CHECKS: [(&str, Check); 5] = [
    ("factor monotonicity", check_factor_monotonicity),
    ("peer monotonicity", check_peer_monotonicity),
    ("case-order invariance", check_permutation_invariance),
    ("score bounds", check_score_bounds),
    ("determinism", check_determinism),
];
