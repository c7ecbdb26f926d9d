//! Edge list creation: delimited source files are parsed, filtered, mapped
//! to IRIs and deduplicated into one pair set per edge type.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use indexmap::IndexSet;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rdf::{validate_iri, NamespaceTable, ParseMode};

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Row { path: String, line: usize, message: String },
    #[error("edge type '{spec}': {message}")]
    Spec { spec: String, message: String },
    #[error("edge list file: {0}")]
    Serde(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EdgeError + '_ {
    move |source| EdgeError::Io { path: path.display().to_string(), source }
}

/// Opens a file for line reading, transparently decompressing gzip and zip
/// (first entry) content, detected by magic bytes.
pub fn open_decoded(path: &Path) -> Result<Box<dyn BufRead + Send>, EdgeError> {
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut magic = [0u8; 4];
    let n = read_prefix(&mut file, &mut magic).map_err(io_err(path))?;
    let file = File::open(path).map_err(io_err(path))?;
    if n >= 2 && magic[..2] == [0x1f, 0x8b] {
        return Ok(Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file))));
    }
    if n == 4 && magic == *b"PK\x03\x04" {
        let mut archive = zip::ZipArchive::new(file)
            .map_err(|e| EdgeError::Io { path: path.display().to_string(), source: io::Error::other(e) })?;
        let mut entry = archive
            .by_index(0)
            .map_err(|e| EdgeError::Io { path: path.display().to_string(), source: io::Error::other(e) })?;
        let mut buf = Vec::new();
        entry.read_to_end(&mut buf).map_err(io_err(path))?;
        return Ok(Box::new(io::Cursor::new(buf)));
    }
    Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
}

fn read_prefix(file: &mut File, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    /// 1-based line number in the decoded stream.
    pub line: usize,
    pub fields: Vec<String>,
}

/// Streams the rows of a delimited file. Blank lines are skipped.
pub fn parse_tabular(path: &Path, delimiter: &str) -> Result<impl Iterator<Item = Result<Row, EdgeError>>, EdgeError> {
    let reader = open_decoded(path)?;
    let delimiter = delimiter.to_owned();
    let path = path.to_path_buf();
    Ok(reader.lines().enumerate().filter_map(move |(i, line)| match line {
        Err(source) => Some(Err(EdgeError::Io { path: path.display().to_string(), source })),
        Ok(line) => {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                return None;
            }
            Some(Ok(Row { line: i + 1, fields: line.split(delimiter.as_str()).map(str::to_owned).collect() }))
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "in")]
    In,
    #[serde(rename = "matches")]
    Matches,
}

/// Filter operand: a scalar (strings and numbers accepted) or a list for `in`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Operand {
    One(String),
    Many(Vec<String>),
}

impl<'de> Deserialize<'de> for Operand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Scalar {
            S(String),
            I(i64),
            F(f64),
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(Scalar),
            Many(Vec<Scalar>),
        }
        let text = |s: Scalar| match s {
            Scalar::S(s) => s,
            Scalar::I(i) => i.to_string(),
            Scalar::F(f) => f.to_string(),
        };
        Ok(match Raw::deserialize(d)? {
            Raw::One(s) => Operand::One(text(s)),
            Raw::Many(v) => Operand::Many(v.into_iter().map(text).collect()),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRule {
    pub column: usize,
    pub op: FilterOp,
    pub value: Operand,
    #[serde(skip)]
    compiled: Option<Regex>,
}

impl PartialEq for FilterRule {
    fn eq(&self, other: &Self) -> bool {
        self.column == other.column && self.op == other.op && self.value == other.value
    }
}

impl FilterRule {
    pub fn new(column: usize, op: FilterOp, value: Operand) -> Result<Self, String> {
        let mut rule = FilterRule { column, op, value, compiled: None };
        rule.prepare()?;
        Ok(rule)
    }

    /// Validates the operand and compiles regexes. Must run before `holds`
    /// on rules that came from deserialization.
    pub fn prepare(&mut self) -> Result<(), String> {
        match (self.op, &self.value) {
            (FilterOp::In, Operand::Many(_)) => Ok(()),
            (FilterOp::In, Operand::One(_)) => Err("'in' requires a list operand".into()),
            (_, Operand::Many(_)) => Err(format!("{:?} requires a scalar operand", self.op)),
            (FilterOp::Lt | FilterOp::Le | FilterOp::Gt | FilterOp::Ge, Operand::One(v)) => {
                v.trim().parse::<f64>().map(|_| ()).map_err(|_| format!("numeric operator needs a numeric operand, got '{v}'"))
            }
            (FilterOp::Matches, Operand::One(v)) => {
                self.compiled = Some(Regex::new(v).map_err(|e| e.to_string())?);
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether the rule holds for the row. Rows too short for the column fail.
    pub fn holds(&self, fields: &[String]) -> bool {
        let Some(cell) = fields.get(self.column) else { return false };
        match (&self.value, self.op) {
            (Operand::Many(set), FilterOp::In) => set.iter().any(|v| v == cell),
            (Operand::One(_), FilterOp::Matches) => {
                self.compiled.as_ref().expect("rule prepared before use").is_match(cell)
            }
            (Operand::One(v), op) => {
                let ord = compare(cell, v);
                match op {
                    FilterOp::Eq => ord == std::cmp::Ordering::Equal,
                    FilterOp::Ne => ord != std::cmp::Ordering::Equal,
                    FilterOp::Lt => ord.is_lt(),
                    FilterOp::Le => ord.is_le(),
                    FilterOp::Gt => ord.is_gt(),
                    FilterOp::Ge => ord.is_ge(),
                    FilterOp::In | FilterOp::Matches => unreachable!(),
                }
            }
            (Operand::Many(_), _) => false,
        }
    }
}

/// Numeric when both sides parse as numbers, lexicographic otherwise.
fn compare(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) if !x.is_nan() && !y.is_nan() => x.partial_cmp(&y).expect("non-NaN"),
        _ => a.cmp(b),
    }
}

/// Rows for which every rule holds.
pub fn apply_filters<'a>(rows: impl IntoIterator<Item = Row> + 'a, rules: &'a [FilterRule]) -> impl Iterator<Item = Row> + 'a {
    rows.into_iter().filter(move |r| rules.iter().all(|rule| rule.holds(&r.fields)))
}

/// Source identifier to target IRIs, one-to-many.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MappingTable {
    map: HashMap<String, Vec<String>>,
}

impl MappingTable {
    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>) {
        let targets = self.map.entry(source.into()).or_default();
        let target = target.into();
        if !targets.contains(&target) {
            targets.push(target);
        }
    }

    pub fn get(&self, source: &str) -> Option<&[String]> {
        self.map.get(source).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `source<TAB>target` lines; targets may be CURIEs over `ns`.
    pub fn load(path: &Path, ns: &NamespaceTable) -> Result<Self, EdgeError> {
        let mut table = MappingTable::default();
        for row in parse_tabular(path, "\t")? {
            let row = row?;
            if row.fields[0].starts_with('#') {
                continue;
            }
            let [source, target] = &row.fields[..] else {
                return Err(EdgeError::Row {
                    path: path.display().to_string(),
                    line: row.line,
                    message: "expected source<TAB>target".into(),
                });
            };
            let iri = ns.resolve(target).ok_or_else(|| EdgeError::Row {
                path: path.display().to_string(),
                line: row.line,
                message: format!("target '{target}' is not an IRI"),
            })?;
            table.insert(source.trim(), iri);
        }
        Ok(table)
    }
}

fn resolve_side(raw: &str, map: Option<&MappingTable>, ns: &NamespaceTable) -> Vec<String> {
    let raw = raw.trim();
    match map {
        Some(m) => m.get(raw).map(<[String]>::to_vec).unwrap_or_default(),
        None => ns.resolve(raw).into_iter().collect(),
    }
}

/// Maps raw `(subject, object)` identifiers to IRI pairs (cross product of
/// the targets on each side). Pairs with an unmapped side are dropped and
/// counted.
pub fn map_identifiers<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    subject_map: Option<&MappingTable>,
    object_map: Option<&MappingTable>,
    ns: &NamespaceTable,
) -> (Vec<(String, String)>, u64) {
    let mut out = Vec::new();
    let mut unmapped = 0;
    for (s, o) in pairs {
        let subjects = resolve_side(s, subject_map, ns);
        let objects = resolve_side(o, object_map, ns);
        if subjects.is_empty() || objects.is_empty() {
            unmapped += 1;
            continue;
        }
        for s in &subjects {
            for o in &objects {
                out.push((s.clone(), o.clone()));
            }
        }
    }
    (out, unmapped)
}

/// Declared inverse behaviour for an edge type; when given it must agree
/// with the relation catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseMode {
    Inverse(String),
    Symmetric,
    None,
}

fn default_delimiter() -> String {
    "\t".to_owned()
}

/// Recipe for one edge type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeTypeSpec {
    pub name: String,
    pub source: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    /// Number of leading lines to skip.
    #[serde(default)]
    pub header_lines: usize,
    pub subject_column: usize,
    pub object_column: usize,
    /// Relation IRI or CURIE.
    pub relation: String,
    #[serde(default)]
    pub inverse: Option<InverseMode>,
    #[serde(default)]
    pub filters: Vec<FilterRule>,
    #[serde(default)]
    pub subject_map: Option<PathBuf>,
    #[serde(default)]
    pub object_map: Option<PathBuf>,
    #[serde(default)]
    pub pre_symmetrized: bool,
}

impl EdgeTypeSpec {
    /// Checks column and operand invariants and compiles filters.
    pub fn prepare(&mut self) -> Result<(), EdgeError> {
        let err = |message: String| EdgeError::Spec { spec: self.name.clone(), message };
        if self.subject_column == self.object_column {
            return Err(err("subject and object columns must differ".into()));
        }
        if self.delimiter.is_empty() {
            return Err(err("empty delimiter".into()));
        }
        if let Some(InverseMode::Inverse(inv)) = &self.inverse {
            if *inv == self.relation {
                return Err(err("inverse relation must differ from the relation".into()));
            }
        }
        for f in &mut self.filters {
            f.prepare().map_err(|m| EdgeError::Spec { spec: self.name.clone(), message: m })?;
        }
        Ok(())
    }

    fn max_column(&self) -> usize {
        self.filters.iter().map(|f| f.column).chain([self.subject_column, self.object_column]).max().unwrap_or(0)
    }

    /// Makes relative paths absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.source);
        if let Some(p) = self.subject_map.as_mut() {
            fix(p);
        }
        if let Some(p) = self.object_map.as_mut() {
            fix(p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub rows_filtered: u64,
    pub rows_unmapped: u64,
    pub pairs_deduplicated: u64,
    pub pairs: u64,
    pub distinct_subjects: u64,
    pub distinct_objects: u64,
}

/// The assembled pairs of one edge type. Pairs keep first-seen order but
/// compare as sets; serialization is sorted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeList {
    pub relation: String,
    #[serde(default)]
    pub pre_symmetrized: bool,
    #[serde(serialize_with = "sorted_pairs", deserialize_with = "pair_set")]
    pub pairs: IndexSet<(String, String)>,
    pub stats: IngestStats,
}

fn sorted_pairs<S: Serializer>(pairs: &IndexSet<(String, String)>, s: S) -> Result<S::Ok, S::Error> {
    let mut v: Vec<&(String, String)> = pairs.iter().collect();
    v.sort();
    v.serialize(s)
}

fn pair_set<'de, D: Deserializer<'de>>(d: D) -> Result<IndexSet<(String, String)>, D::Error> {
    Ok(Vec::<(String, String)>::deserialize(d)?.into_iter().collect())
}

impl PartialEq for EdgeList {
    fn eq(&self, other: &Self) -> bool {
        self.relation == other.relation
            && self.pre_symmetrized == other.pre_symmetrized
            && self.stats == other.stats
            && self.pairs.len() == other.pairs.len()
            && self.pairs.iter().all(|p| other.pairs.contains(p))
    }
}

impl EdgeList {
    pub fn new(relation: impl Into<String>, pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut list = EdgeList { relation: relation.into(), pre_symmetrized: false, pairs: IndexSet::new(), stats: IngestStats::default() };
        let mut dups = 0;
        for p in pairs {
            if !list.pairs.insert(p) {
                dups += 1;
            }
        }
        list.stats.pairs_deduplicated = dups;
        list.refresh_counts();
        list
    }

    fn refresh_counts(&mut self) {
        self.stats.pairs = self.pairs.len() as u64;
        self.stats.distinct_subjects = self.pairs.iter().map(|(s, _)| s).collect::<BTreeSet<_>>().len() as u64;
        self.stats.distinct_objects = self.pairs.iter().map(|(_, o)| o).collect::<BTreeSet<_>>().len() as u64;
    }
}

/// Edge lists keyed by edge type name, plus the specs that failed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeCollection {
    pub edge_types: BTreeMap<String, EdgeList>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failures: BTreeMap<String, String>,
}

impl EdgeCollection {
    pub fn to_json(&self) -> Result<String, EdgeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, EdgeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), EdgeError> {
        fs::write(path, self.to_json()? + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, EdgeError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }
}

/// Runs parse, filter, map and dedup for one spec.
pub fn assemble_one(spec: &EdgeTypeSpec, ns: &NamespaceTable, mode: ParseMode) -> Result<EdgeList, EdgeError> {
    let mut spec = spec.clone();
    spec.prepare()?;
    let relation = ns.resolve(&spec.relation).ok_or_else(|| EdgeError::Spec {
        spec: spec.name.clone(),
        message: format!("relation '{}' is not an IRI or known CURIE", spec.relation),
    })?;
    if let Err(e) = validate_iri(&relation) {
        return Err(EdgeError::Spec { spec: spec.name.clone(), message: e.to_string() });
    }
    let subject_map = spec.subject_map.as_deref().map(|p| MappingTable::load(p, ns)).transpose()?;
    let object_map = spec.object_map.as_deref().map(|p| MappingTable::load(p, ns)).transpose()?;
    let need = spec.max_column() + 1;

    let mut stats = IngestStats::default();
    let mut pairs: IndexSet<(String, String)> = IndexSet::new();
    for row in parse_tabular(&spec.source, &spec.delimiter)? {
        let row = row?;
        if row.line <= spec.header_lines {
            continue;
        }
        stats.rows_read += 1;
        if row.fields.len() < need {
            stats.rows_malformed += 1;
            if mode == ParseMode::Strict {
                return Err(EdgeError::Row {
                    path: spec.source.display().to_string(),
                    line: row.line,
                    message: format!("expected at least {need} columns, found {}", row.fields.len()),
                });
            }
            log::warn!("{}:{}: short row skipped", spec.source.display(), row.line);
            continue;
        }
        if !spec.filters.iter().all(|f| f.holds(&row.fields)) {
            stats.rows_filtered += 1;
            continue;
        }
        let (mapped, unmapped) = map_identifiers(
            [(row.fields[spec.subject_column].as_str(), row.fields[spec.object_column].as_str())],
            subject_map.as_ref(),
            object_map.as_ref(),
            ns,
        );
        stats.rows_unmapped += unmapped;
        for p in mapped {
            if !pairs.insert(p) {
                stats.pairs_deduplicated += 1;
            }
        }
    }
    let mut list = EdgeList { relation, pre_symmetrized: spec.pre_symmetrized, pairs, stats };
    list.refresh_counts();
    Ok(list)
}

/// Assembles every spec independently; failures are collected rather than
/// aborting the rest.
pub fn assemble_edges(specs: &[EdgeTypeSpec], ns: &NamespaceTable, mode: ParseMode) -> EdgeCollection {
    let results: Vec<(String, Result<EdgeList, EdgeError>)> =
        specs.par_iter().map(|s| (s.name.clone(), assemble_one(s, ns, mode))).collect();
    let mut out = EdgeCollection::default();
    for (name, r) in results {
        match r {
            Ok(list) => {
                out.edge_types.insert(name, list);
            }
            Err(e) => {
                log::error!("edge type '{name}' failed: {e}");
                out.failures.insert(name, e.to_string());
            }
        }
    }
    out
}
