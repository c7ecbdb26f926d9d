//! Terms, triples, the indexed triple set, and N-Triples I/O.

mod canon;
mod graph;
mod namespace;
pub mod ntriples;
mod term;
pub mod vocab;

pub use canon::canonical_relabel;
pub use graph::{IdTriple, Pattern, TermId, TripleGraph};
pub use namespace::{NamespaceError, NamespaceTable};
pub use ntriples::{load_graph, parse_str, to_canonical_string, write_ntriples, LoadSummary, NTriplesReader, ParseError, ParseMode};
pub use term::{has_scheme, validate_iri, Literal, Term, TermError, Triple};

use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

/// Loads an N-Triples file from disk.
pub fn load_file(path: &Path, mode: ParseMode) -> Result<(TripleGraph, LoadSummary), FileParseError> {
    let file = File::open(path).map_err(|source| FileParseError::Io { path: path.display().to_string(), source })?;
    load_graph(BufReader::with_capacity(1 << 16, file), mode)
        .map_err(|source| FileParseError::Parse { path: path.display().to_string(), source })
}

/// Writes canonical N-Triples to `path`.
pub fn save_file(graph: &TripleGraph, path: &Path) -> io::Result<()> {
    let file = File::create(path)?;
    write_ntriples(graph, true, BufWriter::new(file))
}

#[derive(Debug, thiserror::Error)]
pub enum FileParseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
}
