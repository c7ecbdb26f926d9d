//! End-to-end orchestration from one manifest: quality control, merge,
//! edge lists, and the build matrix. Every stage writes its output under
//! the output directory and the later stages can resume from those files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::build::{self, AnchorMap, BuildConfig, BuildError, BuildStats, KnowledgeModel, RelationCatalog, RelationStrategy};
use crate::edges::{assemble_edges, EdgeCollection, EdgeTypeSpec, InverseMode};
use crate::merge::{align_identifiers, detect_semantic_heterogeneity, merge, AlignmentMap, MergeError, MergeManifest};
use crate::metadata::{record_source, sha256_hex, BuildLog, BuildMetadata, SourceRecord, Step, StepRecord};
use crate::owlnets::{abstract_graph, harmonize, write_edge_tsv, AbstractionMode, AbstractionReport};
use crate::qc::{clean_ontology, render_reports, QcPolicy, QcReport};
use crate::rdf::{load_file, save_file, vocab, NamespaceTable, ParseMode, Term, TripleGraph};
use crate::stats::{compute_stats, render_table, GraphStats};

#[derive(Debug)]
pub enum PipelineError {
    /// Invalid manifest or configuration file; `field` names the manifest
    /// entry at fault.
    Config { field: String, message: String },
    /// Unreadable or malformed data, or a failed write.
    Data(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 1,
            PipelineError::Data(_) => 2,
        }
    }

    fn config(field: impl Into<String>, message: impl fmt::Display) -> Self {
        PipelineError::Config { field: field.into(), message: message.to_string() }
    }

    fn data(message: impl fmt::Display) -> Self {
        PipelineError::Data(message.to_string())
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Config { field, message } => write!(f, "configuration error in '{field}': {message}"),
            PipelineError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for PipelineError {}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |e| PipelineError::data(format!("cannot write {}: {e}", path.display()))
}

/// One cell of the build matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildTuple {
    pub model: KnowledgeModel,
    pub strategy: RelationStrategy,
    pub abstraction: AbstractionMode,
}

impl BuildTuple {
    /// All 12 combinations, in model, strategy, abstraction order.
    pub fn all() -> Vec<BuildTuple> {
        let mut out = Vec::new();
        for model in KnowledgeModel::ALL {
            for strategy in RelationStrategy::ALL {
                for abstraction in AbstractionMode::ALL {
                    out.push(BuildTuple { model, strategy, abstraction });
                }
            }
        }
        out
    }

    pub fn name(&self) -> String {
        format!("{}_{}_{}", self.model, self.strategy, self.abstraction)
    }

    pub fn config(&self) -> BuildConfig {
        BuildConfig { model: self.model, strategy: self.strategy }
    }
}

impl fmt::Display for BuildTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Annotation predicates copied into the node metadata sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeMetadataPredicates {
    pub label: Vec<String>,
    pub definition: Vec<String>,
    pub synonym: Vec<String>,
}

impl Default for NodeMetadataPredicates {
    fn default() -> Self {
        NodeMetadataPredicates {
            label: vec![vocab::RDFS_LABEL.into()],
            definition: vec![vocab::IAO_DEFINITION.into()],
            synonym: vec![
                vocab::OBO_IN_OWL_EXACT_SYNONYM.into(),
                vocab::OBO_IN_OWL_RELATED_SYNONYM.into(),
                vocab::OBO_IN_OWL_BROAD_SYNONYM.into(),
                vocab::OBO_IN_OWL_NARROW_SYNONYM.into(),
            ],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    ontologies: PathBuf,
    anchor_map: PathBuf,
    relation_catalog: PathBuf,
    #[serde(default)]
    alignment_map: Option<PathBuf>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    namespaces: BTreeMap<String, String>,
    #[serde(default)]
    qc: QcPolicy,
    #[serde(default)]
    node_metadata: NodeMetadataPredicates,
    #[serde(default)]
    builds: Vec<BuildTuple>,
    #[serde(default)]
    edges: Vec<EdgeTypeSpec>,
}

/// A validated manifest with every path resolved.
#[derive(Debug, Clone)]
pub struct BuildManifest {
    pub path: PathBuf,
    pub digest: String,
    pub ontologies_path: PathBuf,
    pub ontologies: MergeManifest,
    pub anchor_map: PathBuf,
    pub relation_catalog: PathBuf,
    pub alignment_map: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub namespaces: NamespaceTable,
    pub qc: QcPolicy,
    pub node_metadata: NodeMetadataPredicates,
    pub builds: Vec<BuildTuple>,
    pub edges: Vec<EdgeTypeSpec>,
}

fn require_file(field: &str, path: &Path) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::config(field, format!("{} does not exist", path.display())))
    }
}

impl BuildManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = fs::read(path).map_err(|e| PipelineError::config("manifest", format!("cannot read {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| PipelineError::config("manifest", "not UTF-8"))?;
        let raw: RawManifest = toml::from_str(&text).map_err(|e| PipelineError::config("manifest", e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let abs = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };

        let mut namespaces = NamespaceTable::with_defaults();
        for (prefix, iri) in &raw.namespaces {
            namespaces.insert(prefix, iri).map_err(|e| PipelineError::config(format!("namespaces.{prefix}"), e))?;
        }

        let ontologies_path = abs(&raw.ontologies);
        require_file("ontologies", &ontologies_path)?;
        let ontologies = MergeManifest::load(&ontologies_path).map_err(|e| PipelineError::config("ontologies", e))?;
        if ontologies.ontologies.is_empty() {
            return Err(PipelineError::config("ontologies", "no ontologies listed"));
        }
        let anchor_map = abs(&raw.anchor_map);
        require_file("anchor_map", &anchor_map)?;
        let relation_catalog = abs(&raw.relation_catalog);
        require_file("relation_catalog", &relation_catalog)?;
        let alignment_map = raw.alignment_map.as_deref().map(abs);
        if let Some(p) = &alignment_map {
            require_file("alignment_map", p)?;
        }

        if raw.builds.is_empty() {
            return Err(PipelineError::config("builds", "at least one build is required"));
        }
        let mut seen = BTreeSet::new();
        for b in &raw.builds {
            if !seen.insert(*b) {
                return Err(PipelineError::config("builds", format!("duplicate build {b}")));
            }
        }

        let mut names = BTreeSet::new();
        let mut edges = raw.edges;
        for (i, spec) in edges.iter_mut().enumerate() {
            let field = |f: &str| format!("edges[{i}].{f}");
            if spec.name.trim().is_empty() || !names.insert(spec.name.clone()) {
                return Err(PipelineError::config(field("name"), format!("missing or duplicate name '{}'", spec.name)));
            }
            spec.resolve_paths(&base);
            require_file(&field("source"), &spec.source)?;
            for (f, p) in [("subject_map", &spec.subject_map), ("object_map", &spec.object_map)] {
                if let Some(p) = p {
                    require_file(&field(f), p)?;
                }
            }
            spec.prepare().map_err(|e| PipelineError::config(format!("edges[{i}]"), e))?;
            let relation = namespaces
                .resolve(&spec.relation)
                .ok_or_else(|| PipelineError::config(field("relation"), format!("'{}' is not an IRI or known CURIE", spec.relation)))?;
            spec.relation = relation;
            if let Some(InverseMode::Inverse(inv)) = &mut spec.inverse {
                *inv = namespaces
                    .resolve(inv)
                    .ok_or_else(|| PipelineError::config(field("inverse"), format!("'{inv}' is not an IRI or known CURIE")))?;
            }
        }

        Ok(BuildManifest {
            path: path.to_path_buf(),
            digest: sha256_hex(&bytes),
            ontologies_path,
            ontologies,
            anchor_map,
            relation_catalog,
            alignment_map,
            output_dir: raw.output_dir.as_deref().map(abs),
            namespaces,
            qc: raw.qc,
            node_metadata: raw.node_metadata,
            builds: raw.builds,
            edges,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub mode: ParseMode,
}

/// Output locations, all derived from the output directory.
pub struct Layout<'a>(pub &'a Path);

impl Layout<'_> {
    pub fn qc_dir(&self) -> PathBuf {
        self.0.join("qc")
    }
    pub fn core_dir(&self) -> PathBuf {
        self.0.join("core")
    }
    pub fn core_file(&self) -> PathBuf {
        self.core_dir().join("core.nt")
    }
    pub fn edges_dir(&self) -> PathBuf {
        self.0.join("edges")
    }
    pub fn edges_file(&self) -> PathBuf {
        self.edges_dir().join("edge_lists.json")
    }
    pub fn build_dir(&self, t: BuildTuple) -> PathBuf {
        self.0.join("builds").join(t.name())
    }
    pub fn kg_file(&self, t: BuildTuple) -> PathBuf {
        self.build_dir(t).join(format!("kg_{}.nt", t.name()))
    }
    pub fn hybrid_file(&self, t: BuildTuple) -> PathBuf {
        self.build_dir(t).join(format!("kg_{}_hybrid.nt", t.name()))
    }
    pub fn hybrid_tsv(&self, t: BuildTuple) -> PathBuf {
        self.build_dir(t).join(format!("kg_{}_hybrid.tsv", t.name()))
    }
    /// The graph the statistics describe: the hybrid graph when abstracted.
    pub fn final_graph(&self, t: BuildTuple) -> PathBuf {
        if t.abstraction == AbstractionMode::None {
            self.kg_file(t)
        } else {
            self.hybrid_file(t)
        }
    }
    pub fn stats_json(&self, t: BuildTuple) -> PathBuf {
        self.build_dir(t).join("graph_stats.json")
    }
}

fn mkdir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(write_err(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(write_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::data(format!("cannot read {} ({hint}): {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))
}

fn save_graph(graph: &TripleGraph, path: &Path) -> Result<(), PipelineError> {
    save_file(graph, path).map_err(write_err(path))
}

fn load_graph_file(path: &Path, mode: ParseMode, hint: &str) -> Result<TripleGraph, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::data(format!("{} is missing ({hint})", path.display())));
    }
    load_file(path, mode).map(|(g, _)| g).map_err(PipelineError::data)
}

fn source(name: &str, path: &Path) -> Result<SourceRecord, PipelineError> {
    record_source(name, path).map_err(PipelineError::data)
}

/// Timing and provenance of one shared stage, stored as `step.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub step: StepRecord,
    pub sources: Vec<SourceRecord>,
}

fn open_log(dir: &Path) -> Result<BuildLog, PipelineError> {
    BuildLog::open(&dir.join("build.log")).map_err(PipelineError::data)
}

fn log(log: &BuildLog, step: Step, message: &str) -> Result<(), PipelineError> {
    log.info(step.as_str(), message).map_err(PipelineError::data)
}

/// Cleans every ontology and writes the cleaned graphs and reports to
/// `out/qc`.
pub fn cmd_qc(m: &BuildManifest, opts: &RunOptions) -> Result<Vec<QcReport>, PipelineError> {
    Ok(qc_stage(m, opts)?.1)
}

type Cleaned = Vec<(String, TripleGraph)>;

fn qc_stage(m: &BuildManifest, opts: &RunOptions) -> Result<(Cleaned, Vec<QcReport>), PipelineError> {
    let layout = Layout(&opts.out);
    let dir = layout.qc_dir();
    mkdir(&dir)?;
    let blog = open_log(&opts.out)?;
    let t = Instant::now();
    let mut sources = vec![source("manifest", &m.path)?, source("ontologies", &m.ontologies_path)?];
    for o in &m.ontologies.ontologies {
        sources.push(source(&o.name, &o.path)?);
    }
    let loaded: Vec<Result<(String, TripleGraph, QcReport, u64), PipelineError>> = m
        .ontologies
        .ontologies
        .par_iter()
        .map(|o| {
            let (g, summary) = load_file(&o.path, opts.mode).map_err(PipelineError::data)?;
            if summary.skipped > 0 {
                log::warn!("{}: skipped {} malformed lines", o.path.display(), summary.skipped);
            }
            let (clean, report) = clean_ontology(&o.name, &g, &m.qc);
            Ok((o.name.clone(), clean, report, g.len() as u64))
        })
        .collect();
    let mut cleaned = Vec::new();
    let mut reports = Vec::new();
    let mut triples_in = 0;
    for r in loaded {
        let (name, g, report, n) = r?;
        save_graph(&g, &dir.join(format!("{name}.nt")))?;
        log(&blog, Step::DataDownload, &format!("qc {name}: {} -> {} triples", n, g.len()))?;
        triples_in += n;
        cleaned.push((name, g));
        reports.push(report);
    }
    fs::write(dir.join("qc_report.txt"), render_reports(&reports)).map_err(write_err(&dir))?;
    write_json(&dir.join("qc_report.json"), &reports)?;
    let out: u64 = cleaned.iter().map(|(_, g)| g.len() as u64).sum();
    let record = StageRecord {
        step: StepRecord { step: Step::DataDownload, seconds: t.elapsed().as_secs_f64(), count_in: triples_in, count_out: out },
        sources,
    };
    write_json(&dir.join("step.json"), &record)?;
    Ok((cleaned, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSummary {
    pub core_triples: u64,
    pub heterogeneity: Vec<crate::merge::HeterogeneityFinding>,
    pub aligned_triples: u64,
}

/// Merges the cleaned ontologies from `out/qc` into `out/core/core.nt`.
pub fn cmd_merge(m: &BuildManifest, opts: &RunOptions) -> Result<MergeSummary, PipelineError> {
    let layout = Layout(&opts.out);
    let mut cleaned = Vec::new();
    for o in &m.ontologies.ontologies {
        let p = layout.qc_dir().join(format!("{}.nt", o.name));
        cleaned.push((o.name.clone(), load_graph_file(&p, ParseMode::Strict, "run the qc stage first")?));
    }
    Ok(merge_stage(m, opts, &cleaned)?.1)
}

fn merge_stage(m: &BuildManifest, opts: &RunOptions, cleaned: &Cleaned) -> Result<(TripleGraph, MergeSummary), PipelineError> {
    let layout = Layout(&opts.out);
    let qc_record: StageRecord = read_json(&layout.qc_dir().join("step.json"), "run the qc stage first")?;
    let t = Instant::now();
    let blog = open_log(&opts.out)?;
    let refs: Vec<(&str, &TripleGraph)> = cleaned.iter().map(|(n, g)| (n.as_str(), g)).collect();
    let heterogeneity = detect_semantic_heterogeneity(&refs);
    let mut core = merge(&refs);
    let mut sources = qc_record.sources;
    let mut aligned_triples = 0;
    if let Some(p) = &m.alignment_map {
        let map = AlignmentMap::load(p).map_err(|e| match e {
            MergeError::Io { .. } => PipelineError::data(e),
            other => PipelineError::config("alignment_map", other),
        })?;
        sources.push(source("alignment_map", p)?);
        let (aligned, n) = align_identifiers(&core, &map);
        core = aligned;
        aligned_triples = n;
    }
    let dir = layout.core_dir();
    mkdir(&dir)?;
    save_graph(&core, &layout.core_file())?;
    let summary = MergeSummary { core_triples: core.len() as u64, heterogeneity, aligned_triples };
    write_json(&dir.join("merge_report.json"), &summary)?;
    log(
        &blog,
        Step::DataDownload,
        &format!(
            "merged {} ontologies into {} triples ({} heterogeneity findings, {} triples aligned)",
            cleaned.len(),
            core.len(),
            summary.heterogeneity.len(),
            aligned_triples
        ),
    )?;
    let record = StageRecord {
        step: StepRecord {
            step: Step::DataDownload,
            seconds: qc_record.step.seconds + t.elapsed().as_secs_f64(),
            count_in: qc_record.step.count_in,
            count_out: core.len() as u64,
        },
        sources,
    };
    write_json(&dir.join("step.json"), &record)?;
    Ok((core, summary))
}

/// Assembles every edge type into `out/edges/edge_lists.json`.
pub fn cmd_edges(m: &BuildManifest, opts: &RunOptions) -> Result<EdgeCollection, PipelineError> {
    let layout = Layout(&opts.out);
    let dir = layout.edges_dir();
    mkdir(&dir)?;
    let blog = open_log(&opts.out)?;
    let t = Instant::now();
    let edges = assemble_edges(&m.edges, &m.namespaces, opts.mode);
    let mut sources = Vec::new();
    let mut seen = BTreeSet::new();
    for spec in &m.edges {
        for (name, p) in [
            (spec.name.clone(), Some(&spec.source)),
            (format!("{}.subject_map", spec.name), spec.subject_map.as_ref()),
            (format!("{}.object_map", spec.name), spec.object_map.as_ref()),
        ] {
            if let Some(p) = p {
                if seen.insert(p.clone()) {
                    sources.push(source(&name, p)?);
                }
            }
        }
    }
    edges.save(&layout.edges_file()).map_err(PipelineError::data)?;
    for (name, list) in &edges.edge_types {
        let s = &list.stats;
        log(
            &blog,
            Step::EdgeListCreation,
            &format!(
                "{name}: rows={} malformed={} filtered={} unmapped={} pairs={}",
                s.rows_read, s.rows_malformed, s.rows_filtered, s.rows_unmapped, s.pairs
            ),
        )?;
    }
    if let Some((name, message)) = edges.failures.iter().next() {
        blog.log(crate::metadata::Level::Error, Step::EdgeListCreation.as_str(), &format!("{name}: {message}")).map_err(PipelineError::data)?;
        return Err(PipelineError::data(format!("edge type '{name}': {message}")));
    }
    let record = StageRecord {
        step: StepRecord {
            step: Step::EdgeListCreation,
            seconds: t.elapsed().as_secs_f64(),
            count_in: edges.edge_types.values().map(|l| l.stats.rows_read).sum(),
            count_out: edges.edge_types.values().map(|l| l.stats.pairs).sum(),
        },
        sources,
    };
    write_json(&dir.join("step.json"), &record)?;
    Ok(edges)
}

struct BuildInputs {
    anchors: AnchorMap,
    catalog: RelationCatalog,
    sources: Vec<SourceRecord>,
}

fn build_error(e: BuildError, m: &BuildManifest) -> PipelineError {
    let field = match &e {
        BuildError::Format { path, .. } if Path::new(path) == m.relation_catalog => "relation_catalog",
        BuildError::Format { .. } => "anchor_map",
        BuildError::Catalog(_) | BuildError::UnknownRelation { .. } => "relation_catalog",
        BuildError::AnchorNotInCore { .. } => "anchor_map",
        BuildError::Read(_) | BuildError::LabelCollision(_) => return PipelineError::data(e),
    };
    PipelineError::config(field, e)
}

fn load_build_inputs(m: &BuildManifest) -> Result<BuildInputs, PipelineError> {
    let anchors = AnchorMap::load(&m.anchor_map, &m.namespaces).map_err(|e| build_error(e, m))?;
    let catalog = RelationCatalog::load(&m.relation_catalog, &m.namespaces).map_err(|e| build_error(e, m))?;
    for (i, spec) in m.edges.iter().enumerate() {
        let Some(mode) = &spec.inverse else { continue };
        let Some(record) = catalog.get(&spec.relation) else { continue };
        let agrees = match mode {
            InverseMode::Inverse(inv) => record.inverse.as_deref() == Some(inv.as_str()),
            InverseMode::Symmetric => record.symmetric,
            InverseMode::None => !record.symmetric && record.inverse.is_none(),
        };
        if !agrees {
            return Err(PipelineError::config(
                format!("edges[{i}].inverse"),
                format!("declared {:?} but the relation catalog records {:?}", mode, record),
            ));
        }
    }
    let sources = vec![source("anchor_map", &m.anchor_map)?, source("relation_catalog", &m.relation_catalog)?];
    Ok(BuildInputs { anchors, catalog, sources })
}

fn tuple_metadata_path(layout: &Layout<'_>, t: BuildTuple) -> PathBuf {
    layout.build_dir(t)
}

fn update_metadata(layout: &Layout<'_>, t: BuildTuple, f: impl FnOnce(&mut BuildMetadata)) -> Result<(), PipelineError> {
    let dir = tuple_metadata_path(layout, t);
    let mut meta = crate::metadata::read_build_metadata(&dir)
        .map_err(|e| PipelineError::data(format!("{e} (run the build stage first)")))?;
    f(&mut meta);
    crate::metadata::write_build_metadata(&meta, &dir).map_err(PipelineError::data)
}

fn set_step(meta: &mut BuildMetadata, record: StepRecord) {
    meta.steps.retain(|s| s.step != record.step);
    meta.steps.push(record);
}

fn group_by_config(tuples: &[BuildTuple]) -> BTreeMap<(KnowledgeModel, RelationStrategy), Vec<BuildTuple>> {
    let mut groups: BTreeMap<_, Vec<BuildTuple>> = BTreeMap::new();
    for &t in tuples {
        groups.entry((t.model, t.strategy)).or_default().push(t);
    }
    groups
}

fn dedup_sources(records: impl IntoIterator<Item = SourceRecord>) -> Vec<SourceRecord> {
    let mut seen = BTreeSet::new();
    records.into_iter().filter(|s| seen.insert(s.path.clone())).collect()
}

/// Builds the full KG for every tuple from `out/core` and `out/edges`.
pub fn cmd_build(m: &BuildManifest, opts: &RunOptions, tuples: &[BuildTuple]) -> Result<BTreeMap<BuildTuple, BuildStats>, PipelineError> {
    let layout = Layout(&opts.out);
    let core = load_graph_file(&layout.core_file(), ParseMode::Strict, "run the merge stage first")?;
    let edges = EdgeCollection::load(&layout.edges_file())
        .map_err(|e| PipelineError::data(format!("{e} (run the edges stage first)")))?;
    let out = build_stage(m, opts, &core, &edges, tuples)?;
    Ok(out.into_iter().map(|(t, (_, s))| (t, s)).collect())
}

fn build_stage(
    m: &BuildManifest,
    opts: &RunOptions,
    core: &TripleGraph,
    edges: &EdgeCollection,
    tuples: &[BuildTuple],
) -> Result<BTreeMap<BuildTuple, (std::sync::Arc<TripleGraph>, BuildStats)>, PipelineError> {
    let layout = Layout(&opts.out);
    let inputs = load_build_inputs(m)?;
    let data: StageRecord = read_json(&layout.core_dir().join("step.json"), "run the merge stage first")?;
    let edge_rec: StageRecord = read_json(&layout.edges_dir().join("step.json"), "run the edges stage first")?;
    let groups = group_by_config(tuples);
    let results: Vec<Result<Vec<(BuildTuple, (std::sync::Arc<TripleGraph>, BuildStats))>, PipelineError>> = groups
        .par_iter()
        .map(|(&(model, strategy), members)| {
            let t = Instant::now();
            let cfg = BuildConfig { model, strategy };
            let (kg, stats) = build::build(core, edges, cfg, &inputs.anchors, &inputs.catalog).map_err(|e| build_error(e, m))?;
            let seconds = t.elapsed().as_secs_f64();
            let kg = std::sync::Arc::new(kg);
            let mut out = Vec::new();
            for &tuple in members {
                let dir = layout.build_dir(tuple);
                mkdir(&dir)?;
                save_graph(&kg, &layout.kg_file(tuple))?;
                write_json(&dir.join("build_stats.json"), &stats)?;
                if tuple.abstraction == AbstractionMode::None {
                    write_sidecars(m, &layout, tuple, &kg, &kg)?;
                }
                let blog = open_log(&dir)?;
                log(&blog, Step::GraphConstruction, &format!("{tuple}: {} core triples -> {} triples", core.len(), kg.len()))?;
                for (name, st) in &stats.edge_types {
                    log(
                        &blog,
                        Step::GraphConstruction,
                        &format!(
                            "{name}: pairs={} directed={} inserted={} skipped={} entities_added={}",
                            st.source_pairs, st.directed_edges, st.inserted_edges, st.skipped_edges, st.entities_added
                        ),
                    )?;
                }
                let mut meta = BuildMetadata::new(tuple.name(), &m.digest);
                meta.sources = dedup_sources(
                    data.sources.iter().chain(&edge_rec.sources).chain(&inputs.sources).cloned(),
                );
                meta.steps = vec![
                    data.step.clone(),
                    edge_rec.step.clone(),
                    StepRecord { step: Step::GraphConstruction, seconds, count_in: core.len() as u64, count_out: kg.len() as u64 },
                ];
                crate::metadata::write_build_metadata(&meta, &dir).map_err(PipelineError::data)?;
                out.push((tuple, (kg.clone(), stats.clone())));
            }
            Ok(out)
        })
        .collect();
    let mut out = BTreeMap::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Abstracts (and harmonizes) the full KG of every tuple that asks for it.
pub fn cmd_abstract(m: &BuildManifest, opts: &RunOptions, tuples: &[BuildTuple]) -> Result<BTreeMap<BuildTuple, AbstractionReport>, PipelineError> {
    let layout = Layout(&opts.out);
    let results: Vec<Result<Option<(BuildTuple, AbstractionReport)>, PipelineError>> = tuples
        .par_iter()
        .map(|&t| {
            if t.abstraction == AbstractionMode::None {
                return Ok(None);
            }
            let kg = load_graph_file(&layout.kg_file(t), ParseMode::Strict, "run the build stage first")?;
            abstract_stage(m, &layout, t, &kg).map(|(_, r)| Some((t, r)))
        })
        .collect();
    let mut out = BTreeMap::new();
    for r in results {
        if let Some((t, rep)) = r? {
            out.insert(t, rep);
        }
    }
    Ok(out)
}

fn abstract_stage(m: &BuildManifest, layout: &Layout<'_>, t: BuildTuple, kg: &TripleGraph) -> Result<(TripleGraph, AbstractionReport), PipelineError> {
    let start = Instant::now();
    let (mut hybrid, report) = abstract_graph(kg);
    if t.abstraction == AbstractionMode::Harmonized {
        hybrid = harmonize(&hybrid, t.model);
    }
    let seconds = start.elapsed().as_secs_f64();
    let dir = layout.build_dir(t);
    save_graph(&hybrid, &layout.hybrid_file(t))?;
    let tsv = layout.hybrid_tsv(t);
    let file = fs::File::create(&tsv).map_err(write_err(&tsv))?;
    write_edge_tsv(&hybrid, BufWriter::new(file)).map_err(write_err(&tsv))?;
    write_json(&dir.join("abstraction_report.json"), &report)?;
    write_sidecars(m, layout, t, kg, &hybrid)?;
    let blog = open_log(&dir)?;
    log(
        &blog,
        Step::Abstraction,
        &format!(
            "{t}: {} triples -> {} hybrid triples (consumed={} retained={} dropped={} undecodable nodes={})",
            kg.len(),
            hybrid.len(),
            report.consumed,
            report.retained,
            report.dropped.total(),
            report.undecodable_nodes.len()
        ),
    )?;
    update_metadata(layout, t, |meta| {
        set_step(meta, StepRecord { step: Step::Abstraction, seconds, count_in: kg.len() as u64, count_out: hybrid.len() as u64 })
    })?;
    Ok((hybrid, report))
}

fn write_sidecars(m: &BuildManifest, layout: &Layout<'_>, t: BuildTuple, full: &TripleGraph, graph: &TripleGraph) -> Result<(), PipelineError> {
    let dir = layout.build_dir(t);
    let nodes = dir.join(format!("kg_{}_node_metadata.tsv", t.name()));
    let file = fs::File::create(&nodes).map_err(write_err(&nodes))?;
    export_node_metadata(full, graph, &m.node_metadata, BufWriter::new(file)).map_err(write_err(&nodes))?;
    let catalog = RelationCatalog::load(&m.relation_catalog, &m.namespaces).map_err(|e| build_error(e, m))?;
    let rels = dir.join(format!("kg_{}_relation_metadata.tsv", t.name()));
    let file = fs::File::create(&rels).map_err(write_err(&rels))?;
    export_relation_metadata(full, graph, &catalog, BufWriter::new(file)).map_err(write_err(&rels))?;
    Ok(())
}

fn clean_field(v: &str) -> String {
    v.replace(['\t', '\n', '\r'], " ")
}

fn literal_values(full: &TripleGraph, node: &Term, predicates: &[String]) -> String {
    let mut values = BTreeSet::new();
    if let Some(n) = full.id_of(node) {
        for p in predicates {
            if let Some(p) = full.id_of(&Term::iri(p.as_str())) {
                for o in full.objects(n, p) {
                    if let Some(l) = full.term(o).as_literal() {
                        values.insert(clean_field(&l.lexical));
                    }
                }
            }
        }
    }
    values.into_iter().collect::<Vec<_>>().join("|")
}

/// Writes `iri<TAB>label<TAB>definition<TAB>synonyms` for every IRI node of
/// `graph`, with values taken from the annotation triples of `full`.
/// Multiple values are joined with `|`. Returns the row count.
pub fn export_node_metadata(full: &TripleGraph, graph: &TripleGraph, preds: &NodeMetadataPredicates, mut out: impl Write) -> io::Result<u64> {
    let mut nodes = BTreeSet::new();
    for t in graph.iter() {
        for n in [t.subject, t.object] {
            if n.is_iri() {
                nodes.insert(n);
            }
        }
    }
    writeln!(out, "iri\tlabel\tdefinition\tsynonyms")?;
    for n in &nodes {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            n.as_iri().expect("iri"),
            literal_values(full, n, &preds.label),
            literal_values(full, n, &preds.definition),
            literal_values(full, n, &preds.synonym)
        )?;
    }
    out.flush()?;
    Ok(nodes.len() as u64)
}

/// Writes `iri<TAB>label` for every predicate of `graph`. Labels come from
/// the relation catalog, else from rdfs:label in `full`.
pub fn export_relation_metadata(full: &TripleGraph, graph: &TripleGraph, catalog: &RelationCatalog, mut out: impl Write) -> io::Result<u64> {
    let preds: BTreeSet<String> = graph.predicates().into_iter().filter_map(|p| graph.term(p).as_iri().map(str::to_owned)).collect();
    writeln!(out, "iri\tlabel")?;
    for p in &preds {
        let label = match catalog.get(p) {
            Some(r) => clean_field(&r.label),
            None => literal_values(full, &Term::iri(p.as_str()), &[vocab::RDFS_LABEL.to_owned()]),
        };
        writeln!(out, "{p}\t{label}")?;
    }
    out.flush()?;
    Ok(preds.len() as u64)
}

/// Computes statistics for every tuple's final graph and writes the
/// per-tuple records plus `out/stats_table.txt`.
pub fn cmd_stats(opts: &RunOptions, tuples: &[BuildTuple]) -> Result<BTreeMap<BuildTuple, GraphStats>, PipelineError> {
    let layout = Layout(&opts.out);
    let results: Vec<Result<(BuildTuple, GraphStats), PipelineError>> = tuples
        .par_iter()
        .map(|&t| {
            let hint = if t.abstraction == AbstractionMode::None { "run the build stage first" } else { "run the abstract stage first" };
            let g = load_graph_file(&layout.final_graph(t), ParseMode::Strict, hint)?;
            stats_stage(&layout, t, &g).map(|s| (t, s))
        })
        .collect();
    let mut out = BTreeMap::new();
    for r in results {
        let (t, s) = r?;
        out.insert(t, s);
    }
    write_stats_table(&layout)?;
    Ok(out)
}

fn stats_stage(layout: &Layout<'_>, t: BuildTuple, g: &TripleGraph) -> Result<GraphStats, PipelineError> {
    let start = Instant::now();
    let stats = compute_stats(g);
    let seconds = start.elapsed().as_secs_f64();
    let dir = layout.build_dir(t);
    write_json(&layout.stats_json(t), &stats)?;
    let txt = dir.join("graph_stats.txt");
    fs::write(&txt, render_table(&[(t.name(), stats.clone())])).map_err(write_err(&txt))?;
    let blog = open_log(&dir)?;
    log(
        &blog,
        Step::Stats,
        &format!("{t}: triples={} nodes={} relations={} avg_degree={:.2}", stats.triples, stats.nodes, stats.relations, stats.average_degree),
    )?;
    update_metadata(layout, t, |meta| {
        set_step(meta, StepRecord { step: Step::Stats, seconds, count_in: stats.triples, count_out: stats.nodes })
    })?;
    Ok(stats)
}

/// Collects every `graph_stats.json` under `out/builds` into one table.
fn write_stats_table(layout: &Layout<'_>) -> Result<(), PipelineError> {
    let mut rows = Vec::new();
    for t in BuildTuple::all() {
        let p = layout.stats_json(t);
        if p.is_file() {
            rows.push((t.name(), read_json::<GraphStats>(&p, "stats")?));
        }
    }
    let path = layout.0.join("stats_table.txt");
    fs::write(&path, render_table(&rows)).map_err(write_err(&path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub qc: Vec<QcReport>,
    pub merge: MergeSummary,
    pub stats: BTreeMap<BuildTuple, GraphStats>,
    pub abstraction: BTreeMap<BuildTuple, AbstractionReport>,
    pub build: BTreeMap<BuildTuple, BuildStats>,
}

/// Runs every stage. The core graph and edge lists are computed once and
/// shared by all tuples.
pub fn cmd_pipeline(m: &BuildManifest, opts: &RunOptions, tuples: &[BuildTuple]) -> Result<PipelineSummary, PipelineError> {
    let layout = Layout(&opts.out);
    let (cleaned, qc) = qc_stage(m, opts)?;
    let (core, merge) = merge_stage(m, opts, &cleaned)?;
    drop(cleaned);
    let edges = cmd_edges(m, opts)?;
    let built = build_stage(m, opts, &core, &edges, tuples)?;
    let results: Vec<Result<(BuildTuple, Option<AbstractionReport>, GraphStats), PipelineError>> = built
        .par_iter()
        .map(|(&t, (kg, _))| {
            let (report, stats) = if t.abstraction == AbstractionMode::None {
                (None, stats_stage(&layout, t, kg)?)
            } else {
                let (hybrid, report) = abstract_stage(m, &layout, t, kg)?;
                (Some(report), stats_stage(&layout, t, &hybrid)?)
            };
            Ok((t, report, stats))
        })
        .collect();
    let mut summary = PipelineSummary {
        qc,
        merge,
        stats: BTreeMap::new(),
        abstraction: BTreeMap::new(),
        build: built.into_iter().map(|(t, (_, s))| (t, s)).collect(),
    };
    for r in results {
        let (t, report, stats) = r?;
        if let Some(report) = report {
            summary.abstraction.insert(t, report);
        }
        summary.stats.insert(t, stats);
    }
    write_stats_table(&layout)?;
    Ok(summary)
}
