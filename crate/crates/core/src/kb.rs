//! Knowledge base: the company ontology, its JSON document format and the
//! derived concept index.
//!
//! A [`KnowledgeBase`] can only be obtained through [`KnowledgeBase::from_document`]
//! (or [`load_kb`]), which runs the full validation pass first. Once built it is
//! immutable and can be shared freely between threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::query::normalize;

/// Suffixes tried, in order, when a lexicon lookup misses.
const STRIP_SUFFIXES: [&str; 3] = ["es", "s", "ing"];
const MIN_STEM_LEN: usize = 3;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("knowledge base is invalid ({} violation(s)): {}", .0.len(), join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("failed to read knowledge base: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A concept of the ontology vocabulary, e.g. `invoice`.
///
/// Deserialization does not check the lowercase-token pattern; documents are
/// checked by [`validate`] so that all malformed ids are reported together.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(value: impl Into<String>) -> Result<Self, String> {
        let value = value.into();
        if Self::is_valid(&value) {
            Ok(Self(value))
        } else {
            Err(format!("`{value}` is not a valid concept id ([a-z][a-z0-9_]*)"))
        }
    }

    pub fn is_valid(value: &str) -> bool {
        let mut chars = value.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
            && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for ConceptId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDef {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Department {
    pub id: String,
    pub name: String,
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Employee {
    pub id: String,
    pub full_name: String,
    pub phone: String,
    pub email: String,
    pub position_title: String,
    pub department_id: String,
}

/// A responsibility assertion: `employee_id` handles work described by `concepts`.
///
/// `factor` is the imperfection factor of the case (certainty in `(0, 1]`),
/// `peers` the number of related peers backing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub id: String,
    pub employee_id: String,
    pub concepts: BTreeSet<ConceptId>,
    pub department_id: Option<String>,
    pub factor: f64,
    pub peers: u64,
}

/// Surface term to concept mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    pub entries: BTreeMap<String, BTreeSet<ConceptId>>,
}

impl Lexicon {
    pub fn get(&self, term: &str) -> Option<&BTreeSet<ConceptId>> {
        self.entries.get(term)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The on-disk JSON document. Field order follows the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbDocument {
    pub classes: Vec<ClassDef>,
    pub concepts: BTreeSet<ConceptId>,
    pub departments: Vec<Department>,
    pub employees: Vec<Employee>,
    pub cases: Vec<Case>,
    pub lexicon: Lexicon,
}

impl KbDocument {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, KbError> {
        serde_json::from_slice(bytes).map_err(|e| KbError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("KB document always serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Class,
    Concept,
    Department,
    Employee,
    Case,
    Lexicon,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityKind::Class => "class",
            EntityKind::Concept => "concept",
            EntityKind::Department => "department",
            EntityKind::Employee => "employee",
            EntityKind::Case => "case",
            EntityKind::Lexicon => "lexicon term",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: EntityKind,
    pub id: String,
    pub message: String,
}

impl Violation {
    fn new(kind: EntityKind, id: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind,
            id: id.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} `{}`: {}", self.kind, self.id, self.message)
    }
}

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

/// Checks every invariant of a KB document and returns all violations found.
pub fn validate(doc: &KbDocument) -> Vec<Violation> {
    let mut out = Vec::new();

    // classes
    let mut class_parent: HashMap<&str, Option<&str>> = HashMap::new();
    for class in &doc.classes {
        if blank(&class.name) {
            out.push(Violation::new(EntityKind::Class, &class.name, "name is empty"));
        }
        if class_parent
            .insert(&class.name, class.parent.as_deref())
            .is_some()
        {
            out.push(Violation::new(EntityKind::Class, &class.name, "duplicate class name"));
        }
    }
    for class in &doc.classes {
        if let Some(parent) = &class.parent {
            if !class_parent.contains_key(parent.as_str()) {
                out.push(Violation::new(
                    EntityKind::Class,
                    &class.name,
                    format!("parent `{parent}` is not a declared class"),
                ));
            }
        }
    }
    let mut on_cycle = BTreeSet::new();
    for class in &doc.classes {
        let start = class.name.as_str();
        let mut current = class.parent.as_deref();
        for _ in 0..class_parent.len() {
            match current {
                Some(c) if c == start => {
                    on_cycle.insert(start);
                    break;
                }
                Some(c) => current = class_parent.get(c).copied().flatten(),
                None => break,
            }
        }
    }
    for name in on_cycle {
        out.push(Violation::new(EntityKind::Class, name, "class hierarchy contains a cycle"));
    }

    for concept in &doc.concepts {
        if !ConceptId::is_valid(concept.as_str()) {
            out.push(Violation::new(
                EntityKind::Concept,
                concept.as_str(),
                "concept id must match [a-z][a-z0-9_]*",
            ));
        }
    }

    let mut department_ids = BTreeSet::new();
    for dept in &doc.departments {
        if blank(&dept.id) {
            out.push(Violation::new(EntityKind::Department, &dept.id, "id is empty"));
        }
        if !department_ids.insert(dept.id.as_str()) {
            out.push(Violation::new(EntityKind::Department, &dept.id, "duplicate department id"));
        }
        if blank(&dept.name) {
            out.push(Violation::new(EntityKind::Department, &dept.id, "name is empty"));
        }
        for alias in &dept.aliases {
            if blank(alias) {
                out.push(Violation::new(EntityKind::Department, &dept.id, "alias is empty"));
            } else if *alias != alias.to_lowercase() {
                out.push(Violation::new(
                    EntityKind::Department,
                    &dept.id,
                    format!("alias `{alias}` is not lowercase"),
                ));
            }
        }
    }

    let mut employee_ids = BTreeSet::new();
    for emp in &doc.employees {
        if !employee_ids.insert(emp.id.as_str()) {
            out.push(Violation::new(EntityKind::Employee, &emp.id, "duplicate employee id"));
        }
        for (field, value) in [
            ("id", &emp.id),
            ("full_name", &emp.full_name),
            ("phone", &emp.phone),
            ("email", &emp.email),
            ("position_title", &emp.position_title),
            ("department_id", &emp.department_id),
        ] {
            if blank(value) {
                out.push(Violation::new(EntityKind::Employee, &emp.id, format!("{field} is empty")));
            }
        }
        if !blank(&emp.email) && emp.email.matches('@').count() != 1 {
            out.push(Violation::new(
                EntityKind::Employee,
                &emp.id,
                format!("email `{}` must contain exactly one `@`", emp.email),
            ));
        }
        if !blank(&emp.department_id) && !department_ids.contains(emp.department_id.as_str()) {
            out.push(Violation::new(
                EntityKind::Employee,
                &emp.id,
                format!("department `{}` does not exist", emp.department_id),
            ));
        }
    }

    let mut case_ids = BTreeSet::new();
    for case in &doc.cases {
        if blank(&case.id) {
            out.push(Violation::new(EntityKind::Case, &case.id, "id is empty"));
        }
        if !case_ids.insert(case.id.as_str()) {
            out.push(Violation::new(EntityKind::Case, &case.id, "duplicate case id"));
        }
        if !employee_ids.contains(case.employee_id.as_str()) {
            out.push(Violation::new(
                EntityKind::Case,
                &case.id,
                format!("employee `{}` does not exist", case.employee_id),
            ));
        }
        if let Some(dept) = &case.department_id {
            if !department_ids.contains(dept.as_str()) {
                out.push(Violation::new(
                    EntityKind::Case,
                    &case.id,
                    format!("department `{dept}` does not exist"),
                ));
            }
        }
        if !(case.factor > 0.0 && case.factor <= 1.0) {
            out.push(Violation::new(
                EntityKind::Case,
                &case.id,
                format!("factor {} outside (0, 1]", case.factor),
            ));
        }
        if case.concepts.is_empty() {
            out.push(Violation::new(EntityKind::Case, &case.id, "concept set is empty"));
        }
        for concept in &case.concepts {
            if !doc.concepts.contains(concept) {
                out.push(Violation::new(
                    EntityKind::Case,
                    &case.id,
                    format!("concept `{concept}` is not declared"),
                ));
            }
        }
    }

    for (term, concepts) in &doc.lexicon.entries {
        if term.is_empty() || term.chars().any(char::is_whitespace) {
            out.push(Violation::new(
                EntityKind::Lexicon,
                term,
                "term must be non-empty and contain no whitespace",
            ));
        } else if *term != term.to_lowercase() {
            out.push(Violation::new(EntityKind::Lexicon, term, "term is not lowercase"));
        }
        if concepts.is_empty() {
            out.push(Violation::new(EntityKind::Lexicon, term, "maps to no concepts"));
        }
        for concept in concepts {
            if !doc.concepts.contains(concept) {
                out.push(Violation::new(
                    EntityKind::Lexicon,
                    term,
                    format!("concept `{concept}` is not declared"),
                ));
            }
        }
    }

    out
}

/// Inverted index from concept to the ids of the cases mentioning it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ConceptIndex(BTreeMap<ConceptId, BTreeSet<String>>);

impl ConceptIndex {
    pub fn cases_for(&self, concept: &ConceptId) -> Option<&BTreeSet<String>> {
        self.0.get(concept)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ConceptId, &BTreeSet<String>)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> BTreeMap<ConceptId, BTreeSet<String>> {
        self.0
    }
}

pub fn build_index(cases: &[Case]) -> ConceptIndex {
    let mut index: BTreeMap<ConceptId, BTreeSet<String>> = BTreeMap::new();
    for case in cases {
        for concept in &case.concepts {
            index
                .entry(concept.clone())
                .or_default()
                .insert(case.id.clone());
        }
    }
    ConceptIndex(index)
}

/// The part of the knowledge base needed to turn text into concepts.
///
/// It deliberately carries no employee or case records.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    concepts: BTreeSet<ConceptId>,
    departments: Vec<Department>,
    lexicon: Lexicon,
    siblings: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    /// Normalized token sequences of each department name and alias.
    department_surfaces: Vec<(Vec<String>, String)>,
}

impl Vocabulary {
    fn new(concepts: BTreeSet<ConceptId>, departments: Vec<Department>, lexicon: Lexicon) -> Self {
        let mut siblings: BTreeMap<ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
        for group in lexicon.entries.values() {
            for concept in group {
                let entry = siblings.entry(concept.clone()).or_default();
                entry.extend(group.iter().filter(|c| *c != concept).cloned());
            }
        }
        let mut department_surfaces = Vec::new();
        for dept in &departments {
            let surfaces = std::iter::once(dept.name.as_str()).chain(dept.aliases.iter().map(String::as_str));
            for surface in surfaces {
                let tokens = normalize(surface);
                if !tokens.is_empty() {
                    department_surfaces.push((tokens, dept.id.clone()));
                }
            }
        }
        Self {
            concepts,
            departments,
            lexicon,
            siblings,
            department_surfaces,
        }
    }

    pub fn concepts(&self) -> &BTreeSet<ConceptId> {
        &self.concepts
    }

    pub fn departments(&self) -> &[Department] {
        &self.departments
    }

    pub fn department(&self, id: &str) -> Option<&Department> {
        self.departments.iter().find(|d| d.id == id)
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Concepts sharing at least one lexicon entry with `concept`, excluding itself.
    pub fn siblings(&self, concept: &ConceptId) -> Option<&BTreeSet<ConceptId>> {
        self.siblings.get(concept)
    }

    pub(crate) fn department_surfaces(&self) -> &[(Vec<String>, String)] {
        &self.department_surfaces
    }

    /// Maps a normalized term to concepts: exact hit first, then the term with
    /// `es`, `s` or `ing` stripped (first hit wins, stem at least 3 chars).
    pub fn lookup_concepts(&self, term: &str) -> BTreeSet<ConceptId> {
        if let Some(hit) = self.lexicon.get(term) {
            return hit.clone();
        }
        for suffix in STRIP_SUFFIXES {
            if let Some(stem) = term.strip_suffix(suffix) {
                if stem.chars().count() < MIN_STEM_LEN {
                    continue;
                }
                if let Some(hit) = self.lexicon.get(stem) {
                    return hit.clone();
                }
            }
        }
        BTreeSet::new()
    }
}

/// Validated, indexed, immutable knowledge base.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    classes: Vec<ClassDef>,
    vocabulary: Vocabulary,
    employees: Vec<Employee>,
    cases: Vec<Case>,
    index: ConceptIndex,
    class_parent: HashMap<String, Option<String>>,
    employee_pos: HashMap<String, usize>,
    case_pos: HashMap<String, usize>,
    fingerprint: String,
}

/// Parses and validates a KB from UTF-8 JSON.
pub fn load_kb(mut source: impl Read) -> Result<KnowledgeBase, KbError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    KnowledgeBase::from_document(KbDocument::from_json_slice(&bytes)?)
}

impl KnowledgeBase {
    pub fn from_document(doc: KbDocument) -> Result<Self, KbError> {
        let violations = validate(&doc);
        if !violations.is_empty() {
            return Err(KbError::Validation(violations));
        }
        let fingerprint = fingerprint_of(&doc);
        let KbDocument {
            classes,
            concepts,
            departments,
            employees,
            cases,
            lexicon,
        } = doc;
        let index = build_index(&cases);
        let class_parent = classes
            .iter()
            .map(|c| (c.name.clone(), c.parent.clone()))
            .collect();
        let employee_pos = employees
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        let case_pos = cases
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        Ok(Self {
            classes,
            vocabulary: Vocabulary::new(concepts, departments, lexicon),
            employees,
            cases,
            index,
            class_parent,
            employee_pos,
            case_pos,
            fingerprint,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self, KbError> {
        load_kb(json.as_bytes())
    }

    pub fn to_document(&self) -> KbDocument {
        KbDocument {
            classes: self.classes.clone(),
            concepts: self.vocabulary.concepts.clone(),
            departments: self.vocabulary.departments.clone(),
            employees: self.employees.clone(),
            cases: self.cases.clone(),
            lexicon: self.vocabulary.lexicon.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_document().to_json_pretty()
    }

    /// Always empty for a constructed KB; kept as a self-check.
    pub fn violations(&self) -> Vec<Violation> {
        validate(&self.to_document())
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn concepts(&self) -> &BTreeSet<ConceptId> {
        &self.vocabulary.concepts
    }

    pub fn departments(&self) -> &[Department] {
        &self.vocabulary.departments
    }

    pub fn department(&self, id: &str) -> Option<&Department> {
        self.vocabulary.department(id)
    }

    pub fn employees(&self) -> &[Employee] {
        &self.employees
    }

    pub fn employee(&self, id: &str) -> Option<&Employee> {
        self.employee_pos.get(id).map(|&i| &self.employees[i])
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn case(&self, id: &str) -> Option<&Case> {
        self.case_pos.get(id).map(|&i| &self.cases[i])
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.vocabulary.lexicon
    }

    pub fn index(&self) -> &ConceptIndex {
        &self.index
    }

    pub fn lookup_concepts(&self, term: &str) -> BTreeSet<ConceptId> {
        self.vocabulary.lookup_concepts(term)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// `true` iff `sub == sup` or `sup` is an ancestor of `sub`.
    pub fn subclass_of(&self, sub: &str, sup: &str) -> Result<bool, KbError> {
        for name in [sub, sup] {
            if !self.class_parent.contains_key(name) {
                return Err(KbError::UnknownClass(name.to_owned()));
            }
        }
        let mut current = Some(sub);
        // The hierarchy is acyclic, so this walk terminates.
        while let Some(name) = current {
            if name == sup {
                return Ok(true);
            }
            current = self.class_parent.get(name).and_then(|p| p.as_deref());
        }
        Ok(false)
    }
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.to_document() == other.to_document()
    }
}

fn fingerprint_of(doc: &KbDocument) -> String {
    let bytes = serde_json::to_vec(doc).expect("KB document always serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "classes": [{"name": "Person", "parent": null}, {"name": "Employee", "parent": "Person"}],
        "concepts": ["invoice"],
        "departments": [{"id": "finance", "name": "Finance", "aliases": ["accounting"]}],
        "employees": [{"id": "e1", "full_name": "Ana Petrova", "phone": "+359 2 555 0101",
                       "email": "ana@acme.example", "position_title": "Accountant", "department_id": "finance"}],
        "cases": [{"id": "c1", "employee_id": "e1", "concepts": ["invoice"], "department_id": "finance",
                   "factor": 0.9, "peers": 2}],
        "lexicon": {"invoice": ["invoice"]}
    }"#;

    fn minimal_doc() -> KbDocument {
        KbDocument::from_json_slice(MINIMAL.as_bytes()).unwrap()
    }

    fn concept(s: &str) -> ConceptId {
        ConceptId::new(s).unwrap()
    }

    #[test]
    fn loads_minimal_document() {
        let kb = KnowledgeBase::from_json_str(MINIMAL).unwrap();
        assert_eq!(kb.departments().len(), 1);
        assert_eq!(kb.employees().len(), 1);
        assert_eq!(kb.cases().len(), 1);
        assert_eq!(kb.lexicon().len(), 1);
        assert!(kb.violations().is_empty());
    }

    #[test]
    fn factor_above_one_is_reported_with_case_id() {
        let mut doc = minimal_doc();
        doc.cases[0].factor = 1.5;
        let err = KnowledgeBase::from_document(doc).unwrap_err();
        let KbError::Validation(v) = err else {
            panic!("expected validation error, got {err:?}");
        };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, EntityKind::Case);
        assert_eq!(v[0].id, "c1");
        assert!(v[0].message.contains("(0, 1]"), "{}", v[0].message);
    }

    #[test]
    fn zero_and_nan_factors_are_rejected() {
        for factor in [0.0, -0.1, f64::NAN] {
            let mut doc = minimal_doc();
            doc.cases[0].factor = factor;
            assert_eq!(validate(&doc).len(), 1, "factor {factor}");
        }
        let mut doc = minimal_doc();
        doc.cases[0].factor = 1.0;
        assert!(validate(&doc).is_empty());
    }

    #[test]
    fn dangling_employee_reference() {
        let mut doc = minimal_doc();
        doc.cases[0].employee_id = "e99".into();
        let v = validate(&doc);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("e99"));
    }

    #[test]
    fn violations_are_accumulated() {
        let mut doc = minimal_doc();
        doc.cases[0].factor = 2.0;
        doc.cases[0].department_id = Some("nowhere".into());
        let v = validate(&doc);
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn employee_field_checks() {
        let mut doc = minimal_doc();
        doc.employees[0].email = "a@b@c".into();
        doc.employees[0].phone = "  ".into();
        let v = validate(&doc);
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v.iter().all(|x| x.kind == EntityKind::Employee && x.id == "e1"));
    }

    #[test]
    fn lexicon_and_concept_checks() {
        let mut doc = minimal_doc();
        doc.concepts.insert(ConceptId("Bad-Id".into()));
        doc.lexicon
            .entries
            .insert("two words".into(), [concept("invoice")].into());
        doc.lexicon
            .entries
            .insert("Upper".into(), [concept("invoice")].into());
        doc.lexicon
            .entries
            .insert("ghost".into(), [concept("ghost")].into());
        let v = validate(&doc);
        let kinds: Vec<_> = v.iter().map(|x| (x.kind, x.id.as_str())).collect();
        assert_eq!(
            kinds,
            vec![
                (EntityKind::Concept, "Bad-Id"),
                (EntityKind::Lexicon, "Upper"),
                (EntityKind::Lexicon, "ghost"),
                (EntityKind::Lexicon, "two words"),
            ]
        );
    }

    #[test]
    fn class_cycle_and_missing_parent() {
        let mut doc = minimal_doc();
        doc.classes = vec![
            ClassDef { name: "A".into(), parent: Some("B".into()) },
            ClassDef { name: "B".into(), parent: Some("A".into()) },
            ClassDef { name: "C".into(), parent: Some("Nope".into()) },
        ];
        let v = validate(&doc);
        assert_eq!(v.len(), 3, "{v:?}");
        assert_eq!(v.iter().filter(|x| x.message.contains("cycle")).count(), 2);
    }

    #[test]
    fn unknown_top_level_key_is_a_parse_error() {
        let json = MINIMAL.replacen("\"classes\"", "\"extra\": 1, \"classes\"", 1);
        match KnowledgeBase::from_json_str(&json) {
            Err(KbError::Parse { line, .. }) => assert!(line >= 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = KnowledgeBase::from_json_str("{\n  \"classes\": [,]\n}").unwrap_err();
        match err {
            KbError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn index_inverts_case_concepts() {
        assert!(build_index(&[]).is_empty());
        let case = Case {
            id: "c1".into(),
            employee_id: "e1".into(),
            concepts: [concept("invoice"), concept("approve")].into(),
            department_id: None,
            factor: 1.0,
            peers: 0,
        };
        let index = build_index(&[case]).into_inner();
        let expected: BTreeMap<ConceptId, BTreeSet<String>> = [
            (concept("approve"), ["c1".to_string()].into()),
            (concept("invoice"), ["c1".to_string()].into()),
        ]
        .into();
        assert_eq!(index, expected);
    }

    #[test]
    fn lookup_with_suffix_fallback() {
        let mut doc = minimal_doc();
        doc.concepts.insert(concept("approve"));
        doc.lexicon.entries.insert("approve".into(), [concept("approve")].into());
        let kb = KnowledgeBase::from_document(doc).unwrap();
        assert_eq!(kb.lookup_concepts("invoice"), [concept("invoice")].into());
        assert_eq!(kb.lookup_concepts("invoices"), [concept("invoice")].into());
        assert_eq!(kb.lookup_concepts("approves"), [concept("approve")].into());
        assert!(kb.lookup_concepts("zzz").is_empty());
    }

    #[test]
    fn suffix_order_and_minimum_stem() {
        let mut doc = minimal_doc();
        for c in ["box", "boxe", "tax", "bus"] {
            doc.concepts.insert(concept(c));
            doc.lexicon.entries.insert(c.into(), [concept(c)].into());
        }
        doc.concepts.insert(concept("print"));
        doc.lexicon.entries.insert("print".into(), [concept("print")].into());
        let kb = KnowledgeBase::from_document(doc).unwrap();
        // "es" is tried before "s"
        assert_eq!(kb.lookup_concepts("boxes"), [concept("box")].into());
        assert_eq!(kb.lookup_concepts("printing"), [concept("print")].into());
        assert_eq!(kb.lookup_concepts("buses"), [concept("bus")].into());
        // stems shorter than three characters are never tried
        let mut doc = minimal_doc();
        doc.concepts.insert(concept("go"));
        doc.lexicon.entries.insert("go".into(), [concept("go")].into());
        let kb = KnowledgeBase::from_document(doc).unwrap();
        assert!(kb.lookup_concepts("going").is_empty());
        assert!(kb.lookup_concepts("gos").is_empty());
    }

    #[test]
    fn subclass_queries() {
        let mut doc = minimal_doc();
        doc.classes.push(ClassDef { name: "SalesAgent".into(), parent: Some("Employee".into()) });
        doc.classes.push(ClassDef { name: "Department".into(), parent: None });
        let kb = KnowledgeBase::from_document(doc).unwrap();
        assert!(kb.subclass_of("Employee", "Employee").unwrap());
        assert!(kb.subclass_of("SalesAgent", "Employee").unwrap());
        assert!(kb.subclass_of("SalesAgent", "Person").unwrap());
        assert!(!kb.subclass_of("Employee", "SalesAgent").unwrap());
        assert!(!kb.subclass_of("Department", "Employee").unwrap());
        assert!(matches!(kb.subclass_of("Robot", "Employee"), Err(KbError::UnknownClass(c)) if c == "Robot"));
    }

    #[test]
    fn round_trip_and_fingerprint() {
        let kb = KnowledgeBase::from_json_str(MINIMAL).unwrap();
        let again = KnowledgeBase::from_json_str(&kb.to_json()).unwrap();
        assert_eq!(kb, again);
        assert_eq!(kb.fingerprint(), again.fingerprint());
        assert_eq!(kb.fingerprint().len(), 64);
    }

    #[test]
    fn lexicon_siblings() {
        let mut doc = minimal_doc();
        doc.concepts.insert(concept("payment"));
        doc.lexicon
            .entries
            .insert("billing".into(), [concept("invoice"), concept("payment")].into());
        let kb = KnowledgeBase::from_document(doc).unwrap();
        let sib = kb.vocabulary().siblings(&concept("invoice")).unwrap();
        assert_eq!(sib, &[concept("payment")].into());
    }
}
