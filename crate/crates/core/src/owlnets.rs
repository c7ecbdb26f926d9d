//! Semantic abstraction: decoding OWL-encoded edges into plain
//! subject-predicate-object edges, and harmonizing typing edges to a
//! knowledge model.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::build::KnowledgeModel;
use crate::rdf::{vocab, IdTriple, Term, TermId, TripleGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbstractionMode {
    None,
    Abstract,
    Harmonized,
}

impl AbstractionMode {
    pub const ALL: [AbstractionMode; 3] = [AbstractionMode::None, AbstractionMode::Abstract, AbstractionMode::Harmonized];

    pub fn as_str(self) -> &'static str {
        match self {
            AbstractionMode::None => "none",
            AbstractionMode::Abstract => "abstract",
            AbstractionMode::Harmonized => "harmonized",
        }
    }
}

impl fmt::Display for AbstractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AbstractionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(AbstractionMode::None),
            "abstract" | "abstract-only" => Ok(AbstractionMode::Abstract),
            "harmonized" | "abstract-harmonized" => Ok(AbstractionMode::Harmonized),
            _ => Err(format!("unknown abstraction mode '{s}' (expected none, abstract or harmonized)")),
        }
    }
}

/// Output edges by origin. `backbone` includes named members of decoded
/// intersections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodedCounts {
    pub restriction: u64,
    pub instance: u64,
    pub backbone: u64,
    pub typing: u64,
    pub other: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DroppedCounts {
    pub owl_utility: u64,
    pub literal_annotation: u64,
    pub undecodable: u64,
}

impl DroppedCounts {
    pub fn total(&self) -> u64 {
        self.owl_utility + self.literal_annotation + self.undecodable
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AbstractionReport {
    pub input_triples: u64,
    /// Input triples copied unchanged into the output.
    pub retained: u64,
    /// Input triples used up by a decoded pattern.
    pub consumed: u64,
    pub dropped: DroppedCounts,
    pub decoded: DecodedCounts,
    pub output_triples: u64,
    pub undecodable_nodes: Vec<String>,
}

impl AbstractionReport {
    pub fn accounting_holds(&self) -> bool {
        self.input_triples == self.retained + self.consumed + self.dropped.total()
    }
}

const ANNOTATION_NAMESPACES: [&str; 5] = [
    vocab::OBO_IN_OWL_NS,
    "http://purl.org/dc/elements/1.1/",
    "http://purl.org/dc/terms/",
    "http://www.w3.org/2004/02/skos/core#",
    "http://purl.obolibrary.org/obo/IAO_",
];

const ANNOTATION_PREDICATES: [&str; 6] = [
    vocab::RDFS_LABEL,
    vocab::RDFS_COMMENT,
    vocab::RDFS_SEE_ALSO,
    vocab::RDFS_IS_DEFINED_BY,
    "http://www.w3.org/2002/07/owl#versionInfo",
    vocab::OWL_DEPRECATED,
];

struct Vocab {
    ty: Option<TermId>,
    sub: Option<TermId>,
    equiv: Option<TermId>,
    restriction: Option<TermId>,
    on_property: Option<TermId>,
    some: Option<TermId>,
    intersection: Option<TermId>,
    union: Option<TermId>,
    first: Option<TermId>,
    rest: Option<TermId>,
    nil: Option<TermId>,
    individual: Option<TermId>,
    class: Option<TermId>,
}

impl Vocab {
    fn new(g: &TripleGraph) -> Self {
        let id = |iri: &str| g.id_of(&Term::iri(iri));
        Vocab {
            ty: id(vocab::RDF_TYPE),
            sub: id(vocab::RDFS_SUBCLASS_OF),
            equiv: id(vocab::OWL_EQUIVALENT_CLASS),
            restriction: id(vocab::OWL_RESTRICTION),
            on_property: id(vocab::OWL_ON_PROPERTY),
            some: id(vocab::OWL_SOME_VALUES_FROM),
            intersection: id(vocab::OWL_INTERSECTION_OF),
            union: id(vocab::OWL_UNION_OF),
            first: id(vocab::RDF_FIRST),
            rest: id(vocab::RDF_REST),
            nil: id(vocab::RDF_NIL),
            individual: id(vocab::OWL_NAMED_INDIVIDUAL),
            class: id(vocab::OWL_CLASS),
        }
    }
}

struct Decoder<'g> {
    g: &'g TripleGraph,
    v: Vocab,
}

/// A decodable existential restriction.
struct Restriction {
    property: TermId,
    fillers: Vec<TermId>,
    triples: Vec<IdTriple>,
}

impl<'g> Decoder<'g> {
    fn named(&self, t: TermId) -> bool {
        matches!(self.g.term(t), Term::Iri(v) if !vocab::is_builtin(v))
    }

    fn blank(&self, t: TermId) -> bool {
        self.g.term(t).is_blank()
    }

    fn objects(&self, s: TermId, p: Option<TermId>) -> Vec<TermId> {
        p.map(|p| self.g.objects(s, p).collect()).unwrap_or_default()
    }

    fn single(&self, s: TermId, p: Option<TermId>) -> Option<TermId> {
        match self.objects(s, p)[..] {
            [o] => Some(o),
            _ => None,
        }
    }

    /// Members of an RDF list and the triples forming it.
    fn list(&self, mut head: TermId) -> Option<(Vec<TermId>, Vec<IdTriple>)> {
        let (first, rest) = (self.v.first?, self.v.rest?);
        let mut members = Vec::new();
        let mut triples = Vec::new();
        let mut seen = HashSet::new();
        while Some(head) != self.v.nil {
            if !self.blank(head) || !seen.insert(head) {
                return None;
            }
            let m = self.single(head, Some(first))?;
            let next = self.single(head, Some(rest))?;
            triples.push([head, first, m]);
            triples.push([head, rest, next]);
            members.push(m);
            head = next;
        }
        Some((members, triples))
    }

    fn restriction(&self, b: TermId) -> Option<Restriction> {
        let (ty, r) = (self.v.ty?, self.v.restriction?);
        if !self.blank(b) || !self.g.contains_ids([b, ty, r]) {
            return None;
        }
        let property = self.single(b, self.v.on_property)?;
        let filler = self.single(b, self.v.some)?;
        if !self.named(property) {
            return None;
        }
        let mut triples = vec![[b, ty, r], [b, self.v.on_property?, property], [b, self.v.some?, filler]];
        let fillers = if self.named(filler) {
            vec![filler]
        } else if self.blank(filler) {
            let head = self.single(filler, self.v.union)?;
            let (members, list) = self.list(head)?;
            if members.is_empty() || !members.iter().all(|&m| self.named(m)) {
                return None;
            }
            triples.push([filler, self.v.union?, head]);
            triples.extend(list);
            if let Some(c) = self.v.class {
                if self.g.contains_ids([filler, ty, c]) {
                    triples.push([filler, ty, c]);
                }
            }
            members
        } else {
            return None;
        };
        Some(Restriction { property, fillers, triples })
    }

    /// Named stand-in for a subclass-side node: itself when named, else its
    /// unique named superclass.
    fn subject_class(&self, x: TermId) -> Option<(TermId, Option<IdTriple>)> {
        if self.named(x) {
            return Some((x, None));
        }
        if !self.blank(x) {
            return None;
        }
        let sub = self.v.sub?;
        let supers: Vec<TermId> = self.g.objects(x, sub).filter(|&c| self.named(c)).collect();
        match supers[..] {
            [c] => Some((c, Some([x, sub, c]))),
            _ => None,
        }
    }
}

fn is_annotation_predicate(iri: &str, declared: &HashSet<&str>) -> bool {
    declared.contains(iri) || ANNOTATION_PREDICATES.contains(&iri) || ANNOTATION_NAMESPACES.iter().any(|ns| iri.starts_with(ns))
}

/// Decodes the OWL encodings of `graph` into a hybrid graph of IRI to IRI
/// edges. Every input triple is retained, consumed by a decoded pattern, or
/// dropped with a reason.
pub fn abstract_graph(graph: &TripleGraph) -> (TripleGraph, AbstractionReport) {
    let d = Decoder { g: graph, v: Vocab::new(graph) };
    let mut out = TripleGraph::new();
    let mut consumed: HashSet<IdTriple> = HashSet::new();
    let mut report = AbstractionReport { input_triples: graph.len() as u64, ..Default::default() };
    let sub_term = Term::iri(vocab::RDFS_SUBCLASS_OF);
    let emit = |out: &mut TripleGraph, s: TermId, p: &Term, o: TermId, count: &mut u64| {
        if out.insert_terms(graph.term(s), p, graph.term(o)) {
            *count += 1;
        }
    };

    // restrictions and intersections reached through subClassOf or equivalentClass
    let mut cache: HashMap<TermId, Option<Restriction>> = HashMap::new();
    for link_p in [d.v.sub, d.v.equiv].into_iter().flatten() {
        let links: Vec<IdTriple> = graph.match_ids(None, Some(link_p), None).filter(|t| d.blank(t[2])).collect();
        for [x, _, b] in links {
            let Some((xc, via)) = d.subject_class(x) else { continue };
            let mut used = Vec::new();
            if let Some(r) = cache.entry(b).or_insert_with(|| d.restriction(b)) {
                let p = graph.term(r.property).clone();
                for &y in &r.fillers {
                    emit(&mut out, xc, &p, y, &mut report.decoded.restriction);
                }
                used.extend(r.triples.iter().copied());
            } else if let Some(head) = d.single(b, d.v.intersection) {
                let Some((members, list)) = d.list(head) else { continue };
                let mut any = false;
                for m in members {
                    if d.named(m) {
                        emit(&mut out, xc, &sub_term, m, &mut report.decoded.backbone);
                        any = true;
                    } else if let Some(r) = cache.entry(m).or_insert_with(|| d.restriction(m)) {
                        let p = graph.term(r.property).clone();
                        for &y in &r.fillers {
                            emit(&mut out, xc, &p, y, &mut report.decoded.restriction);
                        }
                        used.extend(r.triples.iter().copied());
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                used.push([b, d.v.intersection.expect("matched"), head]);
                used.extend(list);
                if let (Some(ty), Some(c)) = (d.v.ty, d.v.class) {
                    if graph.contains_ids([b, ty, c]) {
                        used.push([b, ty, c]);
                    }
                }
            } else {
                continue;
            }
            used.push([x, link_p, b]);
            used.extend(via);
            consumed.extend(used);
        }
    }

    // assertions between named individuals
    if let (Some(ty), Some(ind)) = (d.v.ty, d.v.individual) {
        let individuals: HashSet<TermId> = graph.subjects(ty, ind).collect();
        let types = |i: TermId| -> Vec<TermId> { graph.objects(i, ty).filter(|&c| d.named(c)).collect() };
        let mut used_blank = BTreeSet::new();
        for &i in &individuals {
            for [_, p, j] in graph.match_ids(Some(i), None, None).collect::<Vec<_>>() {
                if !individuals.contains(&j) || graph.term(p).as_iri().is_none_or(vocab::is_builtin) {
                    continue;
                }
                let (xs, ys) = (types(i), types(j));
                if xs.is_empty() || ys.is_empty() {
                    continue;
                }
                let pt = graph.term(p).clone();
                for &x in &xs {
                    for &y in &ys {
                        emit(&mut out, x, &pt, y, &mut report.decoded.instance);
                    }
                }
                consumed.insert([i, p, j]);
                for n in [i, j] {
                    if d.blank(n) {
                        used_blank.insert(n);
                    }
                }
            }
        }
        for n in used_blank {
            consumed.extend(graph.match_ids(Some(n), Some(ty), None));
        }
    }

    // everything else
    let declared: HashSet<&str> = match (d.v.ty, graph.id_of(&Term::iri(vocab::OWL_ANNOTATION_PROPERTY))) {
        (Some(ty), Some(ap)) => graph.subjects(ty, ap).filter_map(|p| graph.term(p).as_iri()).collect(),
        _ => HashSet::new(),
    };
    let mut undecodable = BTreeSet::new();
    for t @ [s, p, o] in graph.id_triples() {
        if consumed.contains(&t) {
            report.consumed += 1;
            continue;
        }
        let p_iri = graph.term(p).as_iri().expect("predicates are IRIs");
        if graph.term(o).is_literal() || is_annotation_predicate(p_iri, &declared) {
            report.dropped.literal_annotation += 1;
        } else if d.blank(s) || d.blank(o) {
            report.dropped.undecodable += 1;
            undecodable.extend([s, o].into_iter().filter(|&n| d.blank(n)));
        } else if d.named(s) && d.named(o) && (Some(p) == d.v.sub || Some(p) == d.v.ty || !vocab::is_builtin(p_iri)) {
            report.retained += 1;
            let counter = if Some(p) == d.v.sub {
                &mut report.decoded.backbone
            } else if Some(p) == d.v.ty {
                &mut report.decoded.typing
            } else {
                &mut report.decoded.other
            };
            emit(&mut out, s, graph.term(p), o, counter);
        } else {
            report.dropped.owl_utility += 1;
        }
    }
    report.undecodable_nodes = undecodable.into_iter().map(|n| graph.term(n).to_string()).collect();
    report.undecodable_nodes.sort();
    report.output_triples = out.len() as u64;
    (out, report)
}

/// Rewrites typing edges to the model's predicate: rdf:type becomes
/// rdfs:subClassOf for the class model and the reverse for the instance
/// model.
pub fn harmonize(graph: &TripleGraph, model: KnowledgeModel) -> TripleGraph {
    let (from, to) = match model {
        KnowledgeModel::Class => (vocab::RDF_TYPE, vocab::RDFS_SUBCLASS_OF),
        KnowledgeModel::Instance => (vocab::RDFS_SUBCLASS_OF, vocab::RDF_TYPE),
    };
    let from = Term::iri(from);
    let to = Term::iri(to);
    let mut out = TripleGraph::new();
    for t in graph.iter() {
        let p = if t.predicate == from { &to } else { &t.predicate };
        out.insert_terms(&t.subject, p, &t.object);
    }
    out
}

/// Writes `subject<TAB>predicate<TAB>object` lines in sorted order.
pub fn write_edge_tsv(graph: &TripleGraph, mut out: impl Write) -> io::Result<()> {
    let text = |t: &Term| match t {
        Term::Iri(v) => v.clone(),
        other => other.to_string(),
    };
    let mut lines: Vec<String> =
        graph.iter().map(|t| format!("{}\t{}\t{}", text(&t.subject), text(&t.predicate), text(&t.object))).collect();
    lines.sort_unstable();
    for l in lines {
        writeln!(out, "{l}")?;
    }
    out.flush()
}
