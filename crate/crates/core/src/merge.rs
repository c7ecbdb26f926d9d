//! Merging cleaned ontologies into one core graph, plus the checks that
//! only make sense after the merge.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qc::{declarations, DeclKind};
use crate::rdf::{validate_iri, Term, Triple, TripleGraph};

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("alignment map: {0}")]
    Alignment(String),
}

/// One ontology listed in the merge manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologySource {
    pub name: String,
    pub path: PathBuf,
}

/// `name<TAB>path` lines; relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MergeManifest {
    pub ontologies: Vec<OntologySource>,
}

fn read(path: &Path) -> Result<String, MergeError> {
    fs::read_to_string(path).map_err(|source| MergeError::Io { path: path.display().to_string(), source })
}

/// Data lines of a tab-separated file: trimmed, blank and `#` lines skipped.
pub(crate) fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

impl MergeManifest {
    pub fn load(path: &Path) -> Result<Self, MergeError> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fmt_err = |line, message: String| MergeError::Format { path: path.display().to_string(), line, message };
        let mut ontologies: Vec<OntologySource> = Vec::new();
        for (line, fields) in tsv_lines(&text) {
            let [name, file] = fields[..] else {
                return Err(fmt_err(line, format!("expected name<TAB>path, found {} fields", fields.len())));
            };
            if ontologies.iter().any(|o| o.name == name) {
                return Err(fmt_err(line, format!("duplicate ontology name '{name}'")));
            }
            let resolved = base.join(file);
            if !resolved.is_file() {
                return Err(fmt_err(line, format!("file not found: {}", resolved.display())));
            }
            ontologies.push(OntologySource { name: name.to_owned(), path: resolved });
        }
        Ok(MergeManifest { ontologies })
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    if s.is_empty() {
        "src".to_owned()
    } else {
        s
    }
}

/// Set union of the sources. Blank nodes of each source are renamed with a
/// per-source prefix so they never coalesce across sources.
pub fn merge(sources: &[(&str, &TripleGraph)]) -> TripleGraph {
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut out = TripleGraph::new();
    for (i, (name, graph)) in sources.iter().enumerate() {
        let mut prefix = sanitize(name);
        if !used.insert(prefix.clone()) {
            prefix = format!("{prefix}{i}");
            used.insert(prefix.clone());
        }
        let rename = |t: &Term| match t {
            Term::Blank(l) => Term::Blank(format!("{prefix}_{l}")),
            other => other.clone(),
        };
        for t in graph.iter() {
            out.insert_owned(Triple { subject: rename(&t.subject), predicate: t.predicate, object: rename(&t.object) });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeterogeneityFinding {
    pub entity: Term,
    /// Declared kinds per contributing source.
    pub sources: BTreeMap<String, BTreeSet<DeclKind>>,
}

/// Entities whose declarations conflict only once sources are combined:
/// punned in the merged view, with no single source declaring all of the
/// conflicting kinds.
pub fn detect_semantic_heterogeneity(sources: &[(&str, &TripleGraph)]) -> Vec<HeterogeneityFinding> {
    let mut per_entity: BTreeMap<Term, BTreeMap<String, BTreeSet<DeclKind>>> = BTreeMap::new();
    for (name, graph) in sources {
        for (entity, kinds) in declarations(graph) {
            if entity.is_iri() {
                per_entity.entry(entity).or_default().entry((*name).to_owned()).or_default().extend(kinds);
            }
        }
    }
    per_entity
        .into_iter()
        .filter(|(_, by_source)| {
            let all: BTreeSet<DeclKind> = by_source.values().flatten().copied().collect();
            all.len() >= 2 && !by_source.values().any(|k| *k == all)
        })
        .map(|(entity, sources)| HeterogeneityFinding { entity, sources })
        .collect()
}

/// Non-canonical IRI to canonical IRI.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentMap {
    map: BTreeMap<String, String>,
}

impl AlignmentMap {
    /// Validates that the map has no cycles and no chains.
    pub fn new(map: BTreeMap<String, String>) -> Result<Self, MergeError> {
        for (from, to) in &map {
            if from == to {
                return Err(MergeError::Alignment(format!("cycle: {from} maps to itself")));
            }
            if map.contains_key(to) {
                return Err(MergeError::Alignment(format!(
                    "{from} -> {to} but {to} is itself mapped (chains and cycles must be resolved in the map)"
                )));
            }
            for iri in [from, to] {
                validate_iri(iri).map_err(|e| MergeError::Alignment(e.to_string()))?;
            }
        }
        Ok(AlignmentMap { map })
    }

    /// `from_iri<TAB>to_iri` lines.
    pub fn load(path: &Path) -> Result<Self, MergeError> {
        let text = read(path)?;
        let mut map = BTreeMap::new();
        for (line, fields) in tsv_lines(&text) {
            let [from, to] = fields[..] else {
                return Err(MergeError::Format {
                    path: path.display().to_string(),
                    line,
                    message: "expected from_iri<TAB>to_iri".into(),
                });
            };
            if map.insert(from.to_owned(), to.to_owned()).is_some() {
                return Err(MergeError::Format {
                    path: path.display().to_string(),
                    line,
                    message: format!("duplicate key {from}"),
                });
            }
        }
        Self::new(map)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, iri: &str) -> Option<&str> {
        self.map.get(iri).map(String::as_str)
    }
}

/// Rewrites every occurrence of a mapped IRI, in any position. Returns the
/// rewritten graph and the number of term occurrences rewritten.
pub fn align_identifiers(graph: &TripleGraph, map: &AlignmentMap) -> (TripleGraph, u64) {
    if map.is_empty() {
        return (graph.clone(), 0);
    }
    let mut cache: HashMap<Term, Option<Term>> = HashMap::new();
    let mut count = 0;
    let mut out = TripleGraph::new();
    for t in graph.iter() {
        let mut swap = |term: Term| -> Term {
            let mapped = cache
                .entry(term.clone())
                .or_insert_with(|| term.as_iri().and_then(|i| map.get(i)).map(Term::iri))
                .clone();
            match mapped {
                Some(m) => {
                    count += 1;
                    m
                }
                None => term,
            }
        };
        let subject = swap(t.subject);
        let predicate = swap(t.predicate);
        let object = swap(t.object);
        out.insert_owned(Triple { subject, predicate, object });
    }
    (out, count)
}
