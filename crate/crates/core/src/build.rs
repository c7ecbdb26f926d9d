//! Inserting edge lists into the core ontology graph under a knowledge
//! model and relation strategy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use indexmap::IndexSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::edges::{parse_tabular, EdgeCollection, EdgeError};
use crate::rdf::{vocab, NamespaceTable, Term, TermId, TripleGraph};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error(transparent)]
    Read(#[from] EdgeError),
    #[error("anchor class {anchor} (for {entity}) is not declared owl:Class in the core graph")]
    AnchorNotInCore { entity: String, anchor: String },
    #[error("edge type '{edge_type}': relation {relation} is not in the relation catalog")]
    UnknownRelation { edge_type: String, relation: String },
    #[error("relation catalog: {0}")]
    Catalog(String),
    #[error("generated node label _:{0} already occurs in the core graph")]
    LabelCollision(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeModel {
    Class,
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationStrategy {
    Standard,
    Inverse,
}

impl KnowledgeModel {
    pub const ALL: [KnowledgeModel; 2] = [KnowledgeModel::Class, KnowledgeModel::Instance];

    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeModel::Class => "class",
            KnowledgeModel::Instance => "instance",
        }
    }
}

impl RelationStrategy {
    pub const ALL: [RelationStrategy; 2] = [RelationStrategy::Standard, RelationStrategy::Inverse];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationStrategy::Standard => "standard",
            RelationStrategy::Inverse => "inverse",
        }
    }
}

impl fmt::Display for KnowledgeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for RelationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KnowledgeModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "class" | "class-based" => Ok(KnowledgeModel::Class),
            "instance" | "instance-based" => Ok(KnowledgeModel::Instance),
            _ => Err(format!("unknown knowledge model '{s}' (expected class or instance)")),
        }
    }
}

impl FromStr for RelationStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(RelationStrategy::Standard),
            "inverse" => Ok(RelationStrategy::Inverse),
            _ => Err(format!("unknown relation strategy '{s}' (expected standard or inverse)")),
        }
    }
}

/// Database entity IRI to the ontology class it is grounded under.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnchorMap {
    map: HashMap<String, String>,
}

impl AnchorMap {
    pub fn insert(&mut self, entity: impl Into<String>, anchor: impl Into<String>) {
        self.map.insert(entity.into(), anchor.into());
    }

    pub fn get(&self, entity: &str) -> Option<&str> {
        self.map.get(entity).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Distinct anchor classes.
    pub fn anchors(&self) -> BTreeSet<&str> {
        self.map.values().map(String::as_str).collect()
    }

    /// `entity<TAB>anchor_class` lines; either side may be a CURIE.
    pub fn load(path: &Path, ns: &NamespaceTable) -> Result<Self, BuildError> {
        let mut out = AnchorMap::default();
        for (line, fields) in read_tsv(path)? {
            let [entity, anchor] = &fields[..] else {
                return Err(format_err(path, line, "expected entity<TAB>anchor_class"));
            };
            let entity = resolve(ns, entity, path, line)?;
            let anchor = resolve(ns, anchor, path, line)?;
            if let Some(prev) = out.map.get(&entity) {
                if *prev != anchor {
                    return Err(format_err(path, line, &format!("{entity} anchored to both {prev} and {anchor}")));
                }
            }
            out.insert(entity, anchor);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub label: String,
    pub inverse: Option<String>,
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationCatalog {
    map: BTreeMap<String, RelationRecord>,
}

impl RelationCatalog {
    pub fn insert(&mut self, relation: impl Into<String>, record: RelationRecord) -> Result<(), BuildError> {
        let relation = relation.into();
        if record.inverse.as_deref() == Some(relation.as_str()) {
            return Err(BuildError::Catalog(format!("{relation} is declared its own inverse")));
        }
        if record.symmetric && record.inverse.is_some() {
            return Err(BuildError::Catalog(format!("{relation} is symmetric and also has an inverse")));
        }
        self.map.insert(relation, record);
        Ok(())
    }

    pub fn get(&self, relation: &str) -> Option<&RelationRecord> {
        self.map.get(relation)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `relation<TAB>label<TAB>inverse|SYMMETRIC|NONE` lines.
    pub fn load(path: &Path, ns: &NamespaceTable) -> Result<Self, BuildError> {
        let mut out = RelationCatalog::default();
        for (line, fields) in read_tsv(path)? {
            let [relation, label, kind] = &fields[..] else {
                return Err(format_err(path, line, "expected relation<TAB>label<TAB>inverse|SYMMETRIC|NONE"));
            };
            let relation = resolve(ns, relation, path, line)?;
            let record = match kind.trim() {
                "SYMMETRIC" => RelationRecord { label: label.trim().into(), inverse: None, symmetric: true },
                "NONE" | "" => RelationRecord { label: label.trim().into(), inverse: None, symmetric: false },
                inv => RelationRecord { label: label.trim().into(), inverse: Some(resolve(ns, inv, path, line)?), symmetric: false },
            };
            if out.map.contains_key(&relation) {
                return Err(format_err(path, line, &format!("duplicate relation {relation}")));
            }
            out.insert(relation, record).map_err(|e| format_err(path, line, &e.to_string()))?;
        }
        Ok(out)
    }
}

fn read_tsv(path: &Path) -> Result<Vec<(usize, Vec<String>)>, BuildError> {
    let mut out = Vec::new();
    for row in parse_tabular(path, "\t")? {
        let row = row?;
        if !row.fields[0].starts_with('#') {
            out.push((row.line, row.fields));
        }
    }
    Ok(out)
}

fn format_err(path: &Path, line: usize, message: &str) -> BuildError {
    BuildError::Format { path: path.display().to_string(), line, message: message.to_owned() }
}

fn resolve(ns: &NamespaceTable, value: &str, path: &Path, line: usize) -> Result<String, BuildError> {
    ns.resolve(value.trim()).ok_or_else(|| format_err(path, line, &format!("'{value}' is not an IRI or known CURIE")))
}

/// Expands source pairs into directed `(s, p, o)` edges. The result keeps
/// first-seen order and has no duplicates.
pub fn apply_relation_strategy<'a>(
    pairs: impl IntoIterator<Item = &'a (String, String)>,
    relation: &str,
    catalog: &RelationCatalog,
    strategy: RelationStrategy,
    pre_symmetrized: bool,
) -> Result<IndexSet<(String, String, String)>, String> {
    let record = catalog.get(relation).ok_or_else(|| relation.to_owned())?;
    let mut out = IndexSet::new();
    for (s, o) in pairs {
        out.insert((s.clone(), relation.to_owned(), o.clone()));
        if strategy == RelationStrategy::Standard {
            continue;
        }
        if let Some(inv) = &record.inverse {
            out.insert((o.clone(), inv.clone(), s.clone()));
        } else if record.symmetric && !pre_symmetrized {
            out.insert((o.clone(), relation.to_owned(), s.clone()));
        }
    }
    Ok(out)
}

/// Deterministic blank label for slot 1 or 2 of one logical edge.
pub fn fresh_label(edge_type: &str, s: &str, p: &str, o: &str, slot: u8) -> String {
    let mut h = Sha256::new();
    for part in [edge_type, s, p, o] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    h.update([slot]);
    let digest = h.finalize();
    format!("n{}", hex::encode(&digest[..16]))
}

fn is_label_shaped(label: &str) -> bool {
    label.len() == 33 && label.starts_with('n') && label[1..].bytes().all(|b| b.is_ascii_hexdigit())
}

/// The 5 triples representing one edge under the class model.
pub fn class_model_triples(u1: &Term, u2: &Term, s: &str, p: &str, o: &str) -> [[Term; 3]; 5] {
    let iri = |v: &str| Term::iri(v);
    [
        [u1.clone(), iri(vocab::RDFS_SUBCLASS_OF), iri(s)],
        [u1.clone(), iri(vocab::RDFS_SUBCLASS_OF), u2.clone()],
        [u2.clone(), iri(vocab::RDF_TYPE), iri(vocab::OWL_RESTRICTION)],
        [u2.clone(), iri(vocab::OWL_SOME_VALUES_FROM), iri(o)],
        [u2.clone(), iri(vocab::OWL_ON_PROPERTY), iri(p)],
    ]
}

/// The 5 triples representing one edge under the instance model.
pub fn instance_model_triples(u1: &Term, u2: &Term, s: &str, p: &str, o: &str) -> [[Term; 3]; 5] {
    let iri = |v: &str| Term::iri(v);
    [
        [u1.clone(), iri(vocab::RDF_TYPE), iri(s)],
        [u1.clone(), iri(vocab::RDF_TYPE), iri(vocab::OWL_NAMED_INDIVIDUAL)],
        [u2.clone(), iri(vocab::RDF_TYPE), iri(o)],
        [u2.clone(), iri(vocab::RDF_TYPE), iri(vocab::OWL_NAMED_INDIVIDUAL)],
        [u1.clone(), iri(p), u2.clone()],
    ]
}

fn edge_triples(model: KnowledgeModel, edge_type: &str, s: &str, p: &str, o: &str) -> [[Term; 3]; 5] {
    let u1 = Term::blank(fresh_label(edge_type, s, p, o, 1));
    let u2 = Term::blank(fresh_label(edge_type, s, p, o, 2));
    match model {
        KnowledgeModel::Class => class_model_triples(&u1, &u2, s, p, o),
        KnowledgeModel::Instance => instance_model_triples(&u1, &u2, s, p, o),
    }
}

fn insert_all(graph: &mut TripleGraph, triples: &[[Term; 3]]) -> u64 {
    triples.iter().filter(|[s, p, o]| graph.insert_terms(s, p, o)).count() as u64
}

/// Adds the class-model representation of `(s, p, o)`; returns the number
/// of new triples.
pub fn add_edge_class_model(graph: &mut TripleGraph, edge_type: &str, s: &str, p: &str, o: &str) -> u64 {
    insert_all(graph, &edge_triples(KnowledgeModel::Class, edge_type, s, p, o))
}

/// Adds the instance-model representation of `(s, p, o)`.
pub fn add_edge_instance_model(graph: &mut TripleGraph, edge_type: &str, s: &str, p: &str, o: &str) -> u64 {
    insert_all(graph, &edge_triples(KnowledgeModel::Instance, edge_type, s, p, o))
}

/// Outcome of grounding one edge endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensured {
    /// Already a class; nothing added.
    Present,
    /// Subclass and class declaration triples added.
    Added,
    /// Not a class and absent from the anchor map.
    MissingAnchor,
}

/// Grounds `entity` under its anchor class unless it is already declared
/// owl:Class.
pub fn ensure_entity(graph: &mut TripleGraph, entity: &str, anchors: &AnchorMap) -> Ensured {
    if is_class(graph, entity) {
        return Ensured::Present;
    }
    let Some(anchor) = anchors.get(entity) else { return Ensured::MissingAnchor };
    let e = Term::iri(entity);
    graph.insert_terms(&e, &Term::iri(vocab::RDFS_SUBCLASS_OF), &Term::iri(anchor));
    graph.insert_terms(&e, &Term::iri(vocab::RDF_TYPE), &Term::iri(vocab::OWL_CLASS));
    Ensured::Added
}

fn is_class(graph: &TripleGraph, entity: &str) -> bool {
    let ids = (graph.id_of(&Term::iri(entity)), graph.id_of(&Term::iri(vocab::RDF_TYPE)), graph.id_of(&Term::iri(vocab::OWL_CLASS)));
    matches!(ids, (Some(e), Some(t), Some(c)) if graph.contains_ids([e, t, c]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BuildConfig {
    pub model: KnowledgeModel,
    pub strategy: RelationStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeTypeBuildStats {
    pub relation: String,
    pub source_pairs: u64,
    pub directed_edges: u64,
    pub inserted_edges: u64,
    pub skipped_edges: u64,
    pub entities_added: u64,
    pub triples_added: u64,
    /// Entities lacking an anchor, sorted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_anchors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BuildStats {
    pub core_triples: u64,
    pub output_triples: u64,
    pub edge_types: BTreeMap<String, EdgeTypeBuildStats>,
    pub expansion_seconds: f64,
    pub insertion_seconds: f64,
}

impl BuildStats {
    pub fn total_missing_anchors(&self) -> usize {
        self.edge_types.values().map(|e| e.missing_anchors.len()).sum()
    }
}

/// Checks the anchor map and catalog against the core graph and edges.
pub fn validate_inputs(
    core: &TripleGraph,
    edges: &EdgeCollection,
    anchors: &AnchorMap,
    catalog: &RelationCatalog,
) -> Result<(), BuildError> {
    let ty = core.id_of(&Term::iri(vocab::RDF_TYPE));
    let class = core.id_of(&Term::iri(vocab::OWL_CLASS));
    for anchor in anchors.anchors() {
        let declared = match (core.id_of(&Term::iri(anchor)), ty, class) {
            (Some(a), Some(t), Some(c)) => core.contains_ids([a, t, c]),
            _ => false,
        };
        if !declared {
            let entity = anchors.map.iter().filter(|(_, a)| a.as_str() == anchor).map(|(e, _)| e.as_str()).min().unwrap_or_default();
            return Err(BuildError::AnchorNotInCore { entity: entity.to_owned(), anchor: anchor.to_owned() });
        }
    }
    for (name, list) in &edges.edge_types {
        if catalog.get(&list.relation).is_none() {
            return Err(BuildError::UnknownRelation { edge_type: name.clone(), relation: list.relation.clone() });
        }
    }
    for id in 0..core.term_capacity() {
        if let Term::Blank(label) = core.term(TermId(id as u32)) {
            if is_label_shaped(label) {
                return Err(BuildError::LabelCollision(label.clone()));
            }
        }
    }
    Ok(())
}

/// Inserts every edge type into a copy of `core`. Edge types are processed
/// in name order. Edges with an ungrounded endpoint are skipped and
/// reported; configuration problems abort.
pub fn build(
    core: &TripleGraph,
    edges: &EdgeCollection,
    cfg: BuildConfig,
    anchors: &AnchorMap,
    catalog: &RelationCatalog,
) -> Result<(TripleGraph, BuildStats), BuildError> {
    validate_inputs(core, edges, anchors, catalog)?;
    let t0 = Instant::now();
    let expanded: Vec<(&String, IndexSet<(String, String, String)>)> = edges
        .edge_types
        .par_iter()
        .map(|(name, list)| {
            let directed = apply_relation_strategy(&list.pairs, &list.relation, catalog, cfg.strategy, list.pre_symmetrized)
                .expect("relations checked against the catalog");
            (name, directed)
        })
        .collect();
    let expansion_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut graph = core.clone();
    let mut stats = BuildStats { core_triples: core.len() as u64, ..Default::default() };
    for (name, directed) in expanded {
        let list = &edges.edge_types[name];
        let mut st = EdgeTypeBuildStats {
            relation: list.relation.clone(),
            source_pairs: list.pairs.len() as u64,
            directed_edges: directed.len() as u64,
            ..Default::default()
        };
        let mut missing = BTreeSet::new();
        for (s, p, o) in &directed {
            let before = graph.len();
            let missing_now: Vec<&String> = [s, o].into_iter().filter(|e| !is_class(&graph, e) && anchors.get(e).is_none()).collect();
            if missing_now.is_empty() {
                for e in [s, o] {
                    if ensure_entity(&mut graph, e, anchors) == Ensured::Added {
                        st.entities_added += 1;
                    }
                }
                insert_all(&mut graph, &edge_triples(cfg.model, name, s, p, o));
                st.inserted_edges += 1;
            } else {
                missing.extend(missing_now.into_iter().cloned());
                st.skipped_edges += 1;
            }
            st.triples_added += (graph.len() - before) as u64;
        }
        if !missing.is_empty() {
            log::warn!("edge type '{name}': {} entities without an anchor class", missing.len());
        }
        st.missing_anchors = missing.into_iter().collect();
        stats.edge_types.insert(name.clone(), st);
    }
    stats.insertion_seconds = t1.elapsed().as_secs_f64();
    stats.expansion_seconds = expansion_seconds;
    stats.output_triples = graph.len() as u64;
    Ok((graph, stats))
}
