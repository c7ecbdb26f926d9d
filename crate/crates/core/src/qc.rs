//! Ontology quality control: detection and repair of deprecated, obsolete
//! and punned entities, malformed identifiers and ill-typed literals.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::rdf::vocab::*;
use crate::rdf::{validate_iri, Literal, Term, TermId, Triple, TripleGraph};
use crate::stats::compute_stats;

/// OWL entity declaration kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclKind {
    Class,
    ObjectProperty,
    AnnotationProperty,
    DatatypeProperty,
    NamedIndividual,
}

impl DeclKind {
    pub const ALL: [DeclKind; 5] = [
        DeclKind::Class,
        DeclKind::ObjectProperty,
        DeclKind::AnnotationProperty,
        DeclKind::DatatypeProperty,
        DeclKind::NamedIndividual,
    ];

    pub fn iri(self) -> &'static str {
        match self {
            DeclKind::Class => OWL_CLASS,
            DeclKind::ObjectProperty => OWL_OBJECT_PROPERTY,
            DeclKind::AnnotationProperty => OWL_ANNOTATION_PROPERTY,
            DeclKind::DatatypeProperty => OWL_DATATYPE_PROPERTY,
            DeclKind::NamedIndividual => OWL_NAMED_INDIVIDUAL,
        }
    }

    pub fn from_iri(iri: &str) -> Option<DeclKind> {
        DeclKind::ALL.into_iter().find(|k| k.iri() == iri)
    }
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeclKind::Class => "owl:Class",
            DeclKind::ObjectProperty => "owl:ObjectProperty",
            DeclKind::AnnotationProperty => "owl:AnnotationProperty",
            DeclKind::DatatypeProperty => "owl:DatatypeProperty",
            DeclKind::NamedIndividual => "owl:NamedIndividual",
        })
    }
}

/// Declared kinds per subject, from `(e, rdf:type, kind)` triples.
pub fn declarations(graph: &TripleGraph) -> BTreeMap<Term, BTreeSet<DeclKind>> {
    let mut out: BTreeMap<Term, BTreeSet<DeclKind>> = BTreeMap::new();
    let Some(rdf_type) = graph.id_of(&Term::iri(RDF_TYPE)) else { return out };
    for kind in DeclKind::ALL {
        let Some(k) = graph.id_of(&Term::iri(kind.iri())) else { continue };
        for s in graph.subjects(rdf_type, k) {
            out.entry(graph.term(s).clone()).or_default().insert(kind);
        }
    }
    out
}

fn iri_subjects_of_type(graph: &TripleGraph, type_iri: &str) -> BTreeSet<TermId> {
    match (graph.id_of(&Term::iri(RDF_TYPE)), graph.id_of(&Term::iri(type_iri))) {
        (Some(t), Some(k)) => graph.subjects(t, k).filter(|s| graph.term(*s).is_iri()).collect(),
        _ => BTreeSet::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OntologyStats {
    pub triples: u64,
    pub classes: u64,
    pub individuals: u64,
    pub object_properties: u64,
    pub annotation_properties: u64,
    pub connected_components: u64,
}

pub fn profile_ontology(graph: &TripleGraph) -> OntologyStats {
    OntologyStats {
        triples: graph.len() as u64,
        classes: iri_subjects_of_type(graph, OWL_CLASS).len() as u64,
        individuals: iri_subjects_of_type(graph, OWL_NAMED_INDIVIDUAL).len() as u64,
        object_properties: iri_subjects_of_type(graph, OWL_OBJECT_PROPERTY).len() as u64,
        annotation_properties: iri_subjects_of_type(graph, OWL_ANNOTATION_PROPERTY).len() as u64,
        connected_components: compute_stats(graph).connected_components,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    ValueError,
    IdentifierError,
    Deprecated,
    Obsolete,
    Punning,
}

impl FindingKind {
    pub const ALL: [FindingKind; 5] = [
        FindingKind::ValueError,
        FindingKind::IdentifierError,
        FindingKind::Deprecated,
        FindingKind::Obsolete,
        FindingKind::Punning,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FindingKind::ValueError => "value-errors",
            FindingKind::IdentifierError => "identifier-errors",
            FindingKind::Deprecated => "deprecated-entities",
            FindingKind::Obsolete => "obsolete-entities",
            FindingKind::Punning => "punning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QcFinding {
    pub kind: FindingKind,
    pub entity: Term,
    pub detail: String,
    /// The offending statement, for findings tied to a single triple.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
}

pub fn detect_deprecated(graph: &TripleGraph) -> BTreeSet<Term> {
    let Some(dep) = graph.id_of(&Term::iri(OWL_DEPRECATED)) else { return BTreeSet::new() };
    graph
        .match_ids(None, Some(dep), None)
        .filter(|[_, _, o]| graph.term(*o).as_literal().is_some_and(|l| l.lexical.trim() == "true"))
        .map(|[s, _, _]| graph.term(s).clone())
        .collect()
}

static OBSOLETE_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^obsolete\b").unwrap());

pub fn detect_obsolete(graph: &TripleGraph) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    if let Some(label) = graph.id_of(&Term::iri(RDFS_LABEL)) {
        for [s, _, o] in graph.match_ids(None, Some(label), None) {
            if graph.term(o).as_literal().is_some_and(|l| OBSOLETE_LABEL.is_match(&l.lexical)) {
                out.insert(graph.term(s).clone());
            }
        }
    }
    if let (Some(sub), Some(obs)) =
        (graph.id_of(&Term::iri(RDFS_SUBCLASS_OF)), graph.id_of(&Term::iri(OBO_IN_OWL_OBSOLETE_CLASS)))
    {
        out.extend(graph.subjects(sub, obs).map(|s| graph.term(s).clone()));
    }
    out
}

pub fn detect_punning(graph: &TripleGraph) -> BTreeSet<Term> {
    declarations(graph).into_iter().filter(|(_, kinds)| kinds.len() >= 2).map(|(e, _)| e).collect()
}

static OBO_LOCAL_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z][A-Za-z0-9]*_[A-Za-z0-9]+$").unwrap());

/// Why an IRI is malformed, if it is.
fn identifier_problem(iri: &str, declared: bool) -> Option<String> {
    if let Err(e) = validate_iri(iri) {
        return Some(e.to_string());
    }
    if declared {
        if let Some(local) = iri.strip_prefix(OBO_NS) {
            if !local.contains(['/', '#']) && !OBO_LOCAL_ID.is_match(local) {
                return Some(format!("OBO identifier '{local}' does not match PREFIX_ID"));
            }
        }
    }
    None
}

pub fn detect_identifier_errors(graph: &TripleGraph) -> Vec<QcFinding> {
    let declared: HashSet<Term> = declarations(graph).into_keys().collect();
    let mut seen: BTreeSet<Term> = BTreeSet::new();
    for t in graph.iter() {
        for term in t.terms() {
            if term.is_iri() {
                seen.insert(term.clone());
            }
        }
    }
    seen.into_iter()
        .filter_map(|term| {
            let iri = term.as_iri()?;
            let detail = identifier_problem(iri, declared.contains(&term))?;
            Some(QcFinding { kind: FindingKind::IdentifierError, entity: term, detail, triple: None })
        })
        .collect()
}

static DECIMAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?(\d+(\.\d*)?|\.\d+)$").unwrap());
static FLOAT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+$").unwrap());
static DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^-?\d{4,}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])(Z|[+-]\d{2}:\d{2})?$").unwrap());
static DATE_TIME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^-?\d{4,}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])T([01]\d|2[0-4]):[0-5]\d:[0-5]\d(\.\d+)?(Z|[+-]\d{2}:\d{2})?$")
        .unwrap()
});

/// Whether the lexical form is valid for the literal's datatype. Datatypes
/// without a rule are accepted.
pub fn literal_is_valid(lit: &Literal) -> bool {
    let Some(dt) = lit.datatype.as_deref() else { return true };
    let Some(local) = dt.strip_prefix(XSD_NS) else { return true };
    let v = lit.lexical.trim();
    let int_sign = |pred: fn(i8) -> bool| {
        INTEGER.is_match(v) && {
            let digits = v.trim_start_matches(['+', '-']);
            let zero = digits.bytes().all(|b| b == b'0');
            let sign = if zero { 0 } else if v.starts_with('-') { -1 } else { 1 };
            pred(sign)
        }
    };
    match local {
        "integer" => INTEGER.is_match(v),
        "int" => v.parse::<i32>().is_ok(),
        "long" => v.parse::<i64>().is_ok(),
        "short" => v.parse::<i16>().is_ok(),
        "byte" => v.parse::<i8>().is_ok(),
        "unsignedInt" => v.parse::<u32>().is_ok(),
        "unsignedLong" => v.parse::<u64>().is_ok(),
        "unsignedShort" => v.parse::<u16>().is_ok(),
        "unsignedByte" => v.parse::<u8>().is_ok(),
        "nonNegativeInteger" => int_sign(|s| s >= 0),
        "positiveInteger" => int_sign(|s| s > 0),
        "nonPositiveInteger" => int_sign(|s| s <= 0),
        "negativeInteger" => int_sign(|s| s < 0),
        "decimal" => DECIMAL.is_match(v),
        "float" | "double" => matches!(v, "INF" | "-INF" | "+INF" | "NaN") || FLOAT.is_match(v),
        "boolean" => matches!(v, "true" | "false" | "1" | "0"),
        "date" => DATE.is_match(v),
        "dateTime" => DATE_TIME.is_match(v),
        _ => true,
    }
}

pub fn detect_value_errors(graph: &TripleGraph) -> Vec<QcFinding> {
    graph
        .iter()
        .filter_map(|t| {
            let lit = t.object.as_literal()?;
            if literal_is_valid(lit) {
                return None;
            }
            Some(QcFinding {
                kind: FindingKind::ValueError,
                entity: t.subject.clone(),
                detail: format!("{} is not a valid {}", t.object, lit.datatype.as_deref().unwrap_or("")),
                triple: Some(t),
            })
        })
        .collect()
}

/// Which finding kinds `clean_ontology` repairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcPolicy {
    pub value_errors: bool,
    pub identifier_errors: bool,
    pub deprecated: bool,
    pub obsolete: bool,
    pub punning: bool,
}

impl Default for QcPolicy {
    fn default() -> Self {
        QcPolicy { value_errors: true, identifier_errors: true, deprecated: true, obsolete: true, punning: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RepairCounts {
    pub value_error_triples_dropped: u64,
    pub identifiers_rewritten: u64,
    pub identifiers_dropped: u64,
    pub identifier_triples_dropped: u64,
    pub deprecated_removed: u64,
    pub obsolete_removed: u64,
    pub entity_triples_dropped: u64,
    pub punning_resolved: u64,
    pub punning_type_triples_dropped: u64,
}

impl RepairCounts {
    pub fn total(&self) -> u64 {
        self.value_error_triples_dropped
            + self.identifiers_rewritten
            + self.identifiers_dropped
            + self.deprecated_removed
            + self.obsolete_removed
            + self.punning_resolved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub ontology: String,
    pub pre: OntologyStats,
    pub post: OntologyStats,
    pub findings: Vec<QcFinding>,
    pub repairs: RepairCounts,
    /// Class IRIs declared before cleaning and no longer declared after.
    pub removed_classes: Vec<String>,
    pub notes: Vec<String>,
}

impl QcReport {
    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }

    /// Section of the line-oriented cleaning report.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[{}]", self.ontology);
        let stats = |out: &mut String, tag: &str, s: &OntologyStats| {
            for (k, v) in [
                ("triples", s.triples),
                ("classes", s.classes),
                ("individuals", s.individuals),
                ("object-properties", s.object_properties),
                ("annotation-properties", s.annotation_properties),
                ("connected-components", s.connected_components),
            ] {
                let _ = writeln!(out, "{tag}.{k}\t{v}");
            }
        };
        stats(&mut out, "pre", &self.pre);
        for kind in FindingKind::ALL {
            let _ = writeln!(out, "check.{}\t{}", kind.label(), self.count(kind));
        }
        let r = &self.repairs;
        for (k, v) in [
            ("value-error-triples-dropped", r.value_error_triples_dropped),
            ("identifiers-rewritten", r.identifiers_rewritten),
            ("identifiers-dropped", r.identifiers_dropped),
            ("identifier-triples-dropped", r.identifier_triples_dropped),
            ("deprecated-removed", r.deprecated_removed),
            ("obsolete-removed", r.obsolete_removed),
            ("entity-triples-dropped", r.entity_triples_dropped),
            ("punning-resolved", r.punning_resolved),
            ("punning-type-triples-dropped", r.punning_type_triples_dropped),
        ] {
            let _ = writeln!(out, "repair.{k}\t{v}");
        }
        stats(&mut out, "post", &self.post);
        for n in &self.notes {
            let _ = writeln!(out, "note\t{n}");
        }
        out
    }
}

const NO_ADDED_TRIPLES_NOTE: &str = "cleaning only removes or rewrites triples; no repair triples are added";

/// Rebuilds `graph` with every term passed through `map`; terms mapped to
/// `None` drop the triples that mention them.
fn rewrite(graph: &TripleGraph, map: &HashMap<Term, Option<Term>>) -> (TripleGraph, u64) {
    let mut out = TripleGraph::new();
    let mut dropped = 0;
    'triples: for t in graph.iter() {
        let mut terms = [t.subject, t.predicate, t.object];
        for term in terms.iter_mut() {
            if let Some(target) = map.get(term) {
                match target {
                    Some(new) => *term = new.clone(),
                    None => {
                        dropped += 1;
                        continue 'triples;
                    }
                }
            }
        }
        let [subject, predicate, object] = terms;
        out.insert_owned(Triple { subject, predicate, object });
    }
    (out, dropped)
}

/// Removes every triple mentioning one of `entities`, then every triple
/// mentioning a blank node that appeared in a removed triple (so partial
/// class expressions do not survive). Returns the number of triples removed.
fn remove_entities(graph: &mut TripleGraph, entities: &BTreeSet<Term>) -> u64 {
    let mut doomed: BTreeSet<[TermId; 3]> = BTreeSet::new();
    let mut blanks: Vec<TermId> = Vec::new();
    let mut seen_blanks: HashSet<TermId> = HashSet::new();
    let mut visit = |t: [TermId; 3], g: &TripleGraph, doomed: &mut BTreeSet<[TermId; 3]>, blanks: &mut Vec<TermId>| {
        if doomed.insert(t) {
            for id in [t[0], t[2]] {
                if g.term(id).is_blank() && seen_blanks.insert(id) {
                    blanks.push(id);
                }
            }
        }
    };
    for e in entities {
        let Some(id) = graph.id_of(e) else { continue };
        let hits: Vec<_> = graph
            .match_ids(Some(id), None, None)
            .chain(graph.match_ids(None, Some(id), None))
            .chain(graph.match_ids(None, None, Some(id)))
            .collect();
        for t in hits {
            visit(t, graph, &mut doomed, &mut blanks);
        }
    }
    while let Some(b) = blanks.pop() {
        let hits: Vec<_> = graph.match_ids(Some(b), None, None).chain(graph.match_ids(None, None, Some(b))).collect();
        for t in hits {
            visit(t, graph, &mut doomed, &mut blanks);
        }
    }
    for t in &doomed {
        graph.remove_ids(*t);
    }
    doomed.len() as u64
}

const CLASS_SUPPORT_OUT: [&str; 3] = [RDFS_SUBCLASS_OF, OWL_EQUIVALENT_CLASS, OWL_DISJOINT_WITH];
const CLASS_SUPPORT_IN: [&str; 4] = [RDFS_SUBCLASS_OF, OWL_EQUIVALENT_CLASS, OWL_SOME_VALUES_FROM, OWL_ALL_VALUES_FROM];
const PROPERTY_SUPPORT_OUT: [&str; 4] = [RDFS_SUBPROPERTY_OF, RDFS_DOMAIN, RDFS_RANGE, OWL_INVERSE_OF];

/// Number of axioms using `entity` in the role implied by `kind`.
fn support(graph: &TripleGraph, entity: TermId, kind: DeclKind) -> usize {
    let id = |iri: &str| graph.id_of(&Term::iri(iri));
    let out_count = |preds: &[&str]| -> usize {
        preds.iter().filter_map(|p| id(p)).map(|p| graph.objects(entity, p).count()).sum()
    };
    let in_count = |preds: &[&str]| -> usize {
        preds.iter().filter_map(|p| id(p)).map(|p| graph.subjects(p, entity).count()).sum()
    };
    let decl_ids: HashSet<TermId> = DeclKind::ALL.iter().filter_map(|k| id(k.iri())).collect();
    match kind {
        DeclKind::Class => {
            let typed = id(RDF_TYPE).map_or(0, |t| graph.subjects(t, entity).count());
            out_count(&CLASS_SUPPORT_OUT) + in_count(&CLASS_SUPPORT_IN) + typed
        }
        DeclKind::NamedIndividual => {
            let types = id(RDF_TYPE)
                .map_or(0, |t| graph.objects(entity, t).filter(|o| !decl_ids.contains(o)).count());
            let object_props = iri_subjects_of_type(graph, OWL_OBJECT_PROPERTY);
            let assertions = graph
                .match_ids(Some(entity), None, None)
                .chain(graph.match_ids(None, None, Some(entity)))
                .filter(|[_, p, _]| object_props.contains(p))
                .count();
            types + assertions
        }
        _ => graph.match_ids(None, Some(entity), None).count() + out_count(&PROPERTY_SUPPORT_OUT),
    }
}

/// Picks the declaration to keep for a punned entity: the kind with the most
/// supporting axioms, ties going to owl:Class and then declaration order.
fn punning_winner(graph: &TripleGraph, entity: TermId, kinds: &BTreeSet<DeclKind>) -> DeclKind {
    let scored: Vec<(DeclKind, usize)> = kinds.iter().map(|&k| (k, support(graph, entity, k))).collect();
    let best = scored.iter().map(|(_, s)| *s).max().unwrap_or(0);
    scored.iter().find(|(_, s)| *s == best).map(|(k, _)| *k).expect("punned entity has kinds")
}

/// Detects every defect kind, applies the repairs the policy enables, and
/// reports before/after statistics.
pub fn clean_ontology(name: &str, graph: &TripleGraph, policy: &QcPolicy) -> (TripleGraph, QcReport) {
    let pre = profile_ontology(graph);
    let pre_classes: BTreeSet<String> = iri_subjects_of_type(graph, OWL_CLASS)
        .into_iter()
        .filter_map(|id| graph.term(id).as_iri().map(str::to_owned))
        .collect();

    let mut findings = detect_value_errors(graph);
    findings.extend(detect_identifier_errors(graph));
    let deprecated = detect_deprecated(graph);
    let obsolete = detect_obsolete(graph);
    let punned = detect_punning(graph);
    let decls = declarations(graph);
    for e in &deprecated {
        findings.push(QcFinding { kind: FindingKind::Deprecated, entity: e.clone(), detail: "owl:deprecated true".into(), triple: None });
    }
    for e in &obsolete {
        findings.push(QcFinding { kind: FindingKind::Obsolete, entity: e.clone(), detail: "obsolete label or ObsoleteClass parent".into(), triple: None });
    }
    for e in &punned {
        let kinds: Vec<String> = decls[e].iter().map(ToString::to_string).collect();
        findings.push(QcFinding { kind: FindingKind::Punning, entity: e.clone(), detail: kinds.join(", "), triple: None });
    }
    findings.sort();

    let mut repairs = RepairCounts::default();
    let mut g = graph.clone();
    let mut renamed: HashMap<String, String> = HashMap::new();

    if policy.identifier_errors {
        let mut map: HashMap<Term, Option<Term>> = HashMap::new();
        let declared: HashSet<Term> = declarations(&g).into_keys().collect();
        for f in detect_identifier_errors(&g) {
            let iri = f.entity.as_iri().expect("identifier findings are IRIs");
            let stripped: String = iri.chars().filter(|c| !c.is_whitespace()).collect();
            let fixed = (stripped != iri && identifier_problem(&stripped, declared.contains(&f.entity)).is_none())
                .then(|| Term::iri(stripped));
            match &fixed {
                Some(t) => {
                    repairs.identifiers_rewritten += 1;
                    renamed.insert(iri.to_owned(), t.as_iri().unwrap_or_default().to_owned());
                }
                None => repairs.identifiers_dropped += 1,
            }
            map.insert(f.entity, fixed);
        }
        if !map.is_empty() {
            let (next, dropped) = rewrite(&g, &map);
            repairs.identifier_triples_dropped = dropped;
            g = next;
        }
    }

    if policy.value_errors {
        for f in detect_value_errors(&g) {
            if let Some(t) = &f.triple {
                if g.remove(t) {
                    repairs.value_error_triples_dropped += 1;
                }
            }
        }
    }

    let mut doomed: BTreeSet<Term> = BTreeSet::new();
    if policy.deprecated {
        let found = detect_deprecated(&g);
        repairs.deprecated_removed = found.len() as u64;
        doomed.extend(found);
    }
    if policy.obsolete {
        let found: BTreeSet<Term> = detect_obsolete(&g).into_iter().filter(|e| !doomed.contains(e)).collect();
        repairs.obsolete_removed = found.len() as u64;
        doomed.extend(found);
    }
    if !doomed.is_empty() {
        repairs.entity_triples_dropped = remove_entities(&mut g, &doomed);
    }

    if policy.punning {
        let rdf_type = g.id_of(&Term::iri(RDF_TYPE));
        let mut drops = Vec::new();
        for (entity, kinds) in declarations(&g).into_iter().filter(|(_, k)| k.len() >= 2) {
            let id = g.id_of(&entity).expect("declared entity is interned");
            let keep = punning_winner(&g, id, &kinds);
            repairs.punning_resolved += 1;
            for k in kinds.into_iter().filter(|k| *k != keep) {
                let kind_id = g.id_of(&Term::iri(k.iri())).expect("declared kind is interned");
                drops.push([id, rdf_type.expect("declarations imply rdf:type"), kind_id]);
            }
        }
        for t in drops {
            if g.remove_ids(t) {
                repairs.punning_type_triples_dropped += 1;
            }
        }
    }

    let post = profile_ontology(&g);
    let post_classes: BTreeSet<String> = iri_subjects_of_type(&g, OWL_CLASS)
        .into_iter()
        .filter_map(|id| g.term(id).as_iri().map(str::to_owned))
        .collect();
    let removed_classes = pre_classes
        .into_iter()
        .filter(|c| !post_classes.contains(renamed.get(c).unwrap_or(c)))
        .collect();

    let report = QcReport {
        ontology: name.to_owned(),
        pre,
        post,
        findings,
        repairs,
        removed_classes,
        notes: vec![NO_ADDED_TRIPLES_NOTE.to_owned()],
    };
    (g, report)
}

/// Renders the full cleaning report for several ontologies.
pub fn render_reports(reports: &[QcReport]) -> String {
    let mut out = String::from("# ontology cleaning report\n");
    for r in reports {
        out.push('\n');
        out.push_str(&r.to_text());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_str, ParseMode};

    fn obo(id: &str) -> String {
        format!("<{OBO_NS}{id}>")
    }

    fn graph(lines: &[String]) -> TripleGraph {
        parse_str(&lines.join("\n"), ParseMode::Strict).unwrap()
    }

    fn class(id: &str) -> String {
        format!("{} <{RDF_TYPE}> <{OWL_CLASS}> .", obo(id))
    }

    #[test]
    fn profile_counts_two_classes() {
        let g = graph(&[class("A_1"), class("A_2")]);
        let s = profile_ontology(&g);
        assert_eq!((s.classes, s.triples), (2, 2));
    }

    #[test]
    fn deprecated_any_boolean_datatype() {
        let g = graph(&[
            format!("{} <{OWL_DEPRECATED}> \"true\"^^<{XSD_NS}boolean> .", obo("X_1")),
            format!("{} <{OWL_DEPRECATED}> \"true\" .", obo("X_2")),
            format!("{} <{OWL_DEPRECATED}> \"false\"^^<{XSD_NS}boolean> .", obo("X_3")),
        ]);
        let found = detect_deprecated(&g);
        assert_eq!(found.len(), 2);
        assert!(found.contains(&Term::iri(format!("{OBO_NS}X_1"))));
        assert!(detect_deprecated(&graph(&[class("A_1")])).is_empty());
    }

    #[test]
    fn obsolete_label_rule() {
        let g = graph(&[
            format!("{} <{RDFS_LABEL}> \"obsolete gene fusion\" .", obo("X_1")),
            format!("{} <{RDFS_LABEL}> \"Obsolescence studies\" .", obo("X_2")),
            format!("{} <{RDFS_LABEL}> \"OBSOLETE: thing\" .", obo("X_3")),
            format!("{} <{RDFS_LABEL}> \"not obsolete\" .", obo("X_4")),
            format!("{} <{RDFS_SUBCLASS_OF}> <{OBO_IN_OWL_OBSOLETE_CLASS}> .", obo("X_5")),
        ]);
        let ids: BTreeSet<String> = detect_obsolete(&g).iter().map(|t| t.as_iri().unwrap().to_owned()).collect();
        let want: BTreeSet<String> = ["X_1", "X_3", "X_5"].iter().map(|i| format!("{OBO_NS}{i}")).collect();
        assert_eq!(ids, want);
    }

    #[test]
    fn punning_requires_two_kinds() {
        let g = graph(&[class("A_1"), format!("{} <{RDF_TYPE}> <{OWL_NAMED_INDIVIDUAL}> .", obo("A_1")), class("A_2")]);
        assert_eq!(detect_punning(&g), BTreeSet::from([Term::iri(format!("{OBO_NS}A_1"))]));
        assert!(detect_punning(&graph(&[class("A_2")])).is_empty());
    }

    #[test]
    fn identifier_errors() {
        let g = graph(&[
            format!("<{OBO_NS}VO 0000001> <{RDF_TYPE}> <{OWL_CLASS}> ."),
            class("GO_0008150"),
            class("bad-id"),
            format!("<relative> <{RDFS_SEE_ALSO}> {} .", obo("GO_0008150")),
            format!("<{OBO_NS}uberon/core#part_of> <{RDF_TYPE}> <{OWL_OBJECT_PROPERTY}> ."),
        ]);
        let found: BTreeSet<String> =
            detect_identifier_errors(&g).iter().map(|f| f.entity.as_iri().unwrap().to_owned()).collect();
        let want = BTreeSet::from([format!("{OBO_NS}VO 0000001"), format!("{OBO_NS}bad-id"), "relative".to_owned()]);
        assert_eq!(found, want);
    }

    #[test]
    fn value_errors() {
        let g = graph(&[
            format!("{} <http://x/n> \"abc\"^^<{XSD_NS}integer> .", obo("A_1")),
            format!("{} <http://x/n> \"12\"^^<{XSD_NS}integer> .", obo("A_1")),
            format!("{} <http://x/n> \"-1\"^^<{XSD_NS}nonNegativeInteger> .", obo("A_1")),
            format!("{} <http://x/n> \"1.5e3\"^^<{XSD_NS}double> .", obo("A_1")),
            format!("{} <http://x/n> \"2021-13-01\"^^<{XSD_NS}date> .", obo("A_1")),
            format!("{} <http://x/n> \"yes\"^^<{XSD_NS}boolean> .", obo("A_1")),
        ]);
        assert_eq!(detect_value_errors(&g).len(), 4);
    }

    #[test]
    fn clean_removes_deprecated_classes_and_their_axioms() {
        let mut lines: Vec<String> = (1..=5).map(|i| class(&format!("C_{i}"))).collect();
        lines.push(format!("{} <{OWL_DEPRECATED}> \"true\"^^<{XSD_NS}boolean> .", obo("C_4")));
        lines.push(format!("{} <{OWL_DEPRECATED}> \"true\"^^<{XSD_NS}boolean> .", obo("C_5")));
        lines.push(format!("{} <{RDFS_SUBCLASS_OF}> _:r .", obo("C_1")));
        lines.push(format!("_:r <{RDF_TYPE}> <{OWL_RESTRICTION}> ."));
        lines.push(format!("_:r <{OWL_ON_PROPERTY}> <http://x/p> ."));
        lines.push(format!("_:r <{OWL_SOME_VALUES_FROM}> {} .", obo("C_5")));
        let g = graph(&lines);
        let (clean, report) = clean_ontology("toy", &g, &QcPolicy::default());
        assert_eq!(report.pre.classes, 5);
        assert_eq!(report.post.classes, 3);
        assert_eq!(report.removed_classes.len(), 2);
        assert_eq!(clean.len(), 3);
        let c5 = Term::iri(format!("{OBO_NS}C_5"));
        assert!(clean.iter().all(|t| !t.mentions(&c5)));
    }

    #[test]
    fn clean_resolves_punning_by_support() {
        let g = graph(&[
            class("A_1"),
            format!("{} <{RDF_TYPE}> <{OWL_NAMED_INDIVIDUAL}> .", obo("A_1")),
            format!("{} <{RDFS_SUBCLASS_OF}> {} .", obo("A_1"), obo("A_2")),
            class("A_2"),
            class("B_1"),
            format!("{} <{RDF_TYPE}> <{OWL_NAMED_INDIVIDUAL}> .", obo("B_1")),
        ]);
        let (clean, report) = clean_ontology("toy", &g, &QcPolicy::default());
        assert_eq!(report.repairs.punning_resolved, 2);
        assert!(detect_punning(&clean).is_empty());
        // A_1 has a subclass axiom; B_1 is a tie and keeps owl:Class.
        assert_eq!(profile_ontology(&clean).classes, 3);
        assert_eq!(profile_ontology(&clean).individuals, 0);
    }

    #[test]
    fn identifier_repair_rewrites_or_drops() {
        let g = graph(&[
            format!("<http://example.org/a b> <{RDFS_SEE_ALSO}> {} .", obo("A_1")),
            format!("<{OBO_NS}VO 0000001> <{RDF_TYPE}> <{OWL_CLASS}> ."),
            class("A_1"),
        ]);
        let (clean, report) = clean_ontology("toy", &g, &QcPolicy::default());
        assert_eq!(report.repairs.identifiers_rewritten, 1);
        assert_eq!(report.repairs.identifiers_dropped, 1);
        assert!(clean.contains(&Triple::iris("http://example.org/ab", RDFS_SEE_ALSO, &format!("{OBO_NS}A_1"))));
        assert_eq!(clean.len(), 2);
    }

    #[test]
    fn clean_is_idempotent_and_never_grows() {
        let g = graph(&[
            class("A_1"),
            format!("{} <{RDFS_LABEL}> \"obsolete thing\" .", obo("A_1")),
            format!("{} <http://x/n> \"abc\"^^<{XSD_NS}integer> .", obo("A_2")),
            class("A_2"),
            format!("{} <{RDF_TYPE}> <{OWL_OBJECT_PROPERTY}> .", obo("A_2")),
        ]);
        let (once, r1) = clean_ontology("toy", &g, &QcPolicy::default());
        assert!(r1.repairs.total() > 0);
        assert!(once.len() <= g.len());
        let (twice, r2) = clean_ontology("toy", &once, &QcPolicy::default());
        assert_eq!(r2.repairs.total(), 0);
        assert!(r2.findings.is_empty());
        assert_eq!(once, twice);
    }

    #[test]
    fn disabled_policy_repairs_nothing() {
        let g = graph(&[class("A_1"), format!("{} <{OWL_DEPRECATED}> \"true\" .", obo("A_1"))]);
        let policy = QcPolicy { value_errors: false, identifier_errors: false, deprecated: false, obsolete: false, punning: false };
        let (clean, report) = clean_ontology("toy", &g, &policy);
        assert_eq!(clean, g);
        assert_eq!(report.count(FindingKind::Deprecated), 1);
        assert_eq!(report.repairs.total(), 0);
    }

    #[test]
    fn text_report_rows() {
        let g = graph(&[class("A_1")]);
        let (_, report) = clean_ontology("PW", &g, &QcPolicy::default());
        let text = report.to_text();
        assert!(text.starts_with("[PW]\n"));
        assert!(text.contains("pre.classes\t1\n"));
        assert!(text.contains("check.deprecated-entities\t0\n"));
    }
}
