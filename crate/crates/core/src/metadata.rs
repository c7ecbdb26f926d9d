//! Build provenance: source records, per-step timing, and the build log.

use std::fmt::{self, Write as _};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::edges::open_decoded;

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("metadata file {path}: {message}")]
    Format { path: String, message: String },
    #[error("invalid metadata: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MetadataError + '_ {
    move |source| MetadataError::Io { path: path.display().to_string(), source }
}

pub fn now_utc() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub name: String,
    pub path: String,
    pub acquired_at: String,
    pub sha256: String,
    pub bytes: u64,
    /// Non-blank lines not starting with `#`, after decompression.
    pub records: u64,
}

/// Digests and counts one input file.
pub fn record_source(name: &str, path: &Path) -> Result<SourceRecord, MetadataError> {
    let acquired_at = now_utc();
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    let mut records = 0;
    if bytes > 0 {
        let reader = open_decoded(path).map_err(|e| MetadataError::Io { path: path.display().to_string(), source: io::Error::other(e.to_string()) })?;
        for line in reader.split(b'\n') {
            let line = line.map_err(io_err(path))?;
            let t = line.trim_ascii();
            if !t.is_empty() && !t.starts_with(b"#") {
                records += 1;
            }
        }
    }
    Ok(SourceRecord {
        name: name.to_owned(),
        path: path.display().to_string(),
        acquired_at,
        sha256: hex::encode(hasher.finalize()),
        bytes,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    DataDownload,
    EdgeListCreation,
    GraphConstruction,
    Abstraction,
    Stats,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::DataDownload => "data-download",
            Step::EdgeListCreation => "edge-list-creation",
            Step::GraphConstruction => "graph-construction",
            Step::Abstraction => "abstraction",
            Step::Stats => "stats",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Step {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Step::DataDownload, Step::EdgeListCreation, Step::GraphConstruction, Step::Abstraction, Step::Stats]
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown step '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: Step,
    pub seconds: f64,
    pub count_in: u64,
    pub count_out: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub build_id: String,
    pub tool_version: String,
    pub config_digest: String,
    pub created_at: String,
    pub sources: Vec<SourceRecord>,
    pub steps: Vec<StepRecord>,
}

impl BuildMetadata {
    pub fn new(build_id: impl Into<String>, config_digest: impl Into<String>) -> Self {
        BuildMetadata {
            build_id: build_id.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_digest: config_digest.into(),
            created_at: now_utc(),
            sources: Vec::new(),
            steps: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), MetadataError> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.steps {
            if !seen.insert(s.step) {
                return Err(MetadataError::Invalid(format!("step {} recorded twice", s.step)));
            }
            if !(s.seconds >= 0.0) {
                return Err(MetadataError::Invalid(format!("step {} has negative time", s.step)));
            }
        }
        let mut paths = std::collections::HashSet::new();
        for s in &self.sources {
            if !paths.insert(&s.path) {
                return Err(MetadataError::Invalid(format!("source {} recorded twice", s.path)));
            }
        }
        Ok(())
    }

    /// Copy with timestamps and wall times cleared, for comparisons
    /// across runs.
    pub fn without_timings(&self) -> Self {
        let mut m = self.clone();
        m.created_at.clear();
        for s in &mut m.sources {
            s.acquired_at.clear();
        }
        for s in &mut m.steps {
            s.seconds = 0.0;
        }
        m
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[build]");
        let _ = writeln!(out, "id = {}", self.build_id);
        let _ = writeln!(out, "tool_version = {}", self.tool_version);
        let _ = writeln!(out, "config_digest = {}", self.config_digest);
        let _ = writeln!(out, "created_at = {}", self.created_at);
        for s in &self.sources {
            let _ = writeln!(out, "\n[source {}]", s.name);
            let _ = writeln!(out, "path = {}", s.path);
            let _ = writeln!(out, "acquired_at = {}", s.acquired_at);
            let _ = writeln!(out, "sha256 = {}", s.sha256);
            let _ = writeln!(out, "bytes = {}", s.bytes);
            let _ = writeln!(out, "records = {}", s.records);
        }
        for s in &self.steps {
            let _ = writeln!(out, "\n[step {}]", s.step);
            let _ = writeln!(out, "seconds = {}", s.seconds);
            let _ = writeln!(out, "count_in = {}", s.count_in);
            let _ = writeln!(out, "count_out = {}", s.count_out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut meta = BuildMetadata {
            build_id: String::new(),
            tool_version: String::new(),
            config_digest: String::new(),
            created_at: String::new(),
            sources: Vec::new(),
            steps: Vec::new(),
        };
        enum Section {
            None,
            Build,
            Source,
            Step,
        }
        let mut section = Section::None;
        for (i, line) in text.lines().enumerate() {
            let err = |m: &str| format!("line {}: {m}", i + 1);
            if line.trim().is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if header == "build" {
                    section = Section::Build;
                } else if let Some(name) = header.strip_prefix("source ") {
                    meta.sources.push(SourceRecord {
                        name: name.to_owned(),
                        path: String::new(),
                        acquired_at: String::new(),
                        sha256: String::new(),
                        bytes: 0,
                        records: 0,
                    });
                    section = Section::Source;
                } else if let Some(name) = header.strip_prefix("step ") {
                    meta.steps.push(StepRecord { step: name.parse().map_err(|e: String| err(&e))?, seconds: 0.0, count_in: 0, count_out: 0 });
                    section = Section::Step;
                } else {
                    return Err(err("unknown section"));
                }
                continue;
            }
            let (key, value) = line.split_once(" = ").or_else(|| line.strip_suffix(" =").map(|k| (k, ""))).ok_or_else(|| err("expected key = value"))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| err("expected an integer"));
            match section {
                Section::Build => match key {
                    "id" => meta.build_id = value.into(),
                    "tool_version" => meta.tool_version = value.into(),
                    "config_digest" => meta.config_digest = value.into(),
                    "created_at" => meta.created_at = value.into(),
                    _ => return Err(err("unknown key")),
                },
                Section::Source => {
                    let s = meta.sources.last_mut().expect("section opened");
                    match key {
                        "path" => s.path = value.into(),
                        "acquired_at" => s.acquired_at = value.into(),
                        "sha256" => s.sha256 = value.into(),
                        "bytes" => s.bytes = num(value)?,
                        "records" => s.records = num(value)?,
                        _ => return Err(err("unknown key")),
                    }
                }
                Section::Step => {
                    let s = meta.steps.last_mut().expect("section opened");
                    match key {
                        "seconds" => s.seconds = value.parse().map_err(|_| err("expected a number"))?,
                        "count_in" => s.count_in = num(value)?,
                        "count_out" => s.count_out = num(value)?,
                        _ => return Err(err("unknown key")),
                    }
                }
                Section::None => return Err(err("key outside a section")),
            }
        }
        Ok(meta)
    }
}

pub const METADATA_TEXT: &str = "build_metadata.txt";
pub const METADATA_JSON: &str = "build_metadata.json";

/// Writes `build_metadata.txt` and `build_metadata.json` into `dir`.
pub fn write_build_metadata(meta: &BuildMetadata, dir: &Path) -> Result<(), MetadataError> {
    meta.validate()?;
    let txt = dir.join(METADATA_TEXT);
    fs::write(&txt, meta.to_text()).map_err(io_err(&txt))?;
    let json = dir.join(METADATA_JSON);
    let body = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&json, body + "\n").map_err(io_err(&json))
}

pub fn read_build_metadata(dir: &Path) -> Result<BuildMetadata, MetadataError> {
    let json = dir.join(METADATA_JSON);
    let text = fs::read_to_string(&json).map_err(io_err(&json))?;
    serde_json::from_str(&text).map_err(|e| MetadataError::Format { path: json.display().to_string(), message: e.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Info,
    Warn,
    Error,
}

impl Level {
    fn as_str(self) -> &'static str {
        match self {
            Level::Info => "INFO",
            Level::Warn => "WARN",
            Level::Error => "ERROR",
        }
    }
}

/// Append-only `build.log`: `ISO8601 LEVEL step message` per line.
pub struct BuildLog {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl BuildLog {
    pub fn open(path: &Path) -> Result<Self, MetadataError> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        Ok(BuildLog { path: path.to_path_buf(), out: Mutex::new(BufWriter::new(file)) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log(&self, level: Level, step: &str, message: &str) -> Result<(), MetadataError> {
        let message = message.replace(['\n', '\r'], " ");
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(out, "{} {} {} {}", now_utc(), level.as_str(), step, message)
            .and_then(|_| out.flush())
            .map_err(io_err(&self.path))
    }

    pub fn info(&self, step: &str, message: &str) -> Result<(), MetadataError> {
        self.log(Level::Info, step, message)
    }
}

/// Runs one pipeline stage, logging its start and end and returning the
/// timed step record. The closure returns its result with input and output
/// counts.
pub fn log_step<T, E: fmt::Display>(
    log: &BuildLog,
    step: Step,
    f: impl FnOnce() -> Result<(T, u64, u64), E>,
) -> Result<Result<(T, StepRecord), E>, MetadataError> {
    log.info(step.as_str(), "start")?;
    let t = Instant::now();
    match f() {
        Ok((value, count_in, count_out)) => {
            let seconds = t.elapsed().as_secs_f64();
            log.info(step.as_str(), &format!("done in {seconds:.3}s (in={count_in}, out={count_out})"))?;
            Ok(Ok((value, StepRecord { step, seconds, count_in, count_out })))
        }
        Err(e) => {
            log.log(Level::Error, step.as_str(), &e.to_string())?;
            Ok(Err(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty");
        fs::write(&p, "").unwrap();
        let r = record_source("empty", &p).unwrap();
        assert_eq!(r.sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!((r.bytes, r.records), (0, 0));
    }

    #[test]
    fn digest_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.tsv");
        fs::write(&p, "# header\na\tb\n\nc\td\n").unwrap();
        let a = record_source("f", &p).unwrap();
        let b = record_source("f", &p).unwrap();
        assert_eq!(a.sha256, b.sha256);
        assert_eq!(a.records, 2);
        assert_eq!(a.sha256, sha256_hex(b"# header\na\tb\n\nc\td\n"));
        fs::write(&p, "changed\n").unwrap();
        assert_ne!(record_source("f", &p).unwrap().sha256, a.sha256);
    }

    fn sample() -> BuildMetadata {
        let mut m = BuildMetadata::new("class_standard_none", "abc");
        m.sources.push(SourceRecord {
            name: "go".into(),
            path: "/data/go.nt".into(),
            acquired_at: now_utc(),
            sha256: "00".into(),
            bytes: 10,
            records: 2,
        });
        m.steps.push(StepRecord { step: Step::DataDownload, seconds: 0.25, count_in: 1, count_out: 2 });
        m.steps.push(StepRecord { step: Step::GraphConstruction, seconds: 1.5, count_in: 2, count_out: 3 });
        m
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        write_build_metadata(&m, dir.path()).unwrap();
        assert_eq!(read_build_metadata(dir.path()).unwrap(), m);
        let txt = fs::read_to_string(dir.path().join(METADATA_TEXT)).unwrap();
        assert_eq!(BuildMetadata::from_text(&txt).unwrap(), m);
    }

    #[test]
    fn duplicate_steps_rejected() {
        let mut m = sample();
        m.steps.push(m.steps[0].clone());
        assert!(m.validate().is_err());
    }

    #[test]
    fn log_lines_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("build.log");
        let log = BuildLog::open(&p).unwrap();
        let (v, rec) = log_step(&log, Step::EdgeListCreation, || Ok::<_, String>((7, 1, 2))).unwrap().unwrap();
        assert_eq!((v, rec.count_in, rec.count_out), (7, 1, 2));
        let failed = log_step(&log, Step::Stats, || Err::<((), u64, u64), _>("boom".to_string())).unwrap();
        assert!(failed.is_err());
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let fields: Vec<&str> = lines[0].splitn(4, ' ').collect();
        assert!(chrono::DateTime::parse_from_rfc3339(fields[0]).is_ok());
        assert_eq!(&fields[1..], ["INFO", "edge-list-creation", "start"]);
        assert!(lines[3].contains(" ERROR stats boom"));
    }
}
