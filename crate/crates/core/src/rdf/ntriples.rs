//! Streaming N-Triples reader and canonical writer.
//!
//! The reader pulls one line at a time from any `BufRead`, so memory use is
//! bounded by the longest line rather than the file. IRIs are accepted
//! lexically (anything up to the closing `>`); whether they are well formed
//! is a quality-control question, see `qc::detect_identifier_errors`.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::graph::TripleGraph;
use super::term::{Literal, Term, Triple};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}: {text}")]
    Syntax { line: usize, message: String, text: String },
    #[error("line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: io::Error,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. } | ParseError::Io { line, .. } => *line,
        }
    }
}

/// How malformed statements are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Log and skip malformed lines.
    Lenient,
}

/// Iterator over the statements of an N-Triples stream.
pub struct NTriplesReader<R> {
    reader: R,
    buf: String,
    line: usize,
    mode: ParseMode,
    skipped: usize,
    done: bool,
}

impl<R: BufRead> NTriplesReader<R> {
    pub fn new(reader: R, mode: ParseMode) -> Self {
        NTriplesReader { reader, buf: String::new(), line: 0, mode, skipped: 0, done: false }
    }

    /// Lines skipped so far in lenient mode.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn lines_read(&self) -> usize {
        self.line
    }
}

impl<R: BufRead> Iterator for NTriplesReader<R> {
    type Item = Result<Triple, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            self.line += 1;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(source) => {
                    self.done = true;
                    return Some(Err(ParseError::Io { line: self.line, source }));
                }
            }
            match parse_line(&self.buf) {
                Ok(None) => continue,
                Ok(Some(t)) => return Some(Ok(t)),
                Err(message) => {
                    let err = ParseError::Syntax {
                        line: self.line,
                        message,
                        text: self.buf.trim_end().to_owned(),
                    };
                    match self.mode {
                        ParseMode::Strict => {
                            self.done = true;
                            return Some(Err(err));
                        }
                        ParseMode::Lenient => {
                            log::warn!("skipping malformed statement: {err}");
                            self.skipped += 1;
                        }
                    }
                }
            }
        }
        None
    }
}

/// Summary of a graph load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub statements: usize,
    pub skipped: usize,
}

pub fn load_graph(reader: impl BufRead, mode: ParseMode) -> Result<(TripleGraph, LoadSummary), ParseError> {
    let mut graph = TripleGraph::new();
    let summary = load_into(&mut graph, reader, mode)?;
    Ok((graph, summary))
}

pub fn load_into(
    graph: &mut TripleGraph,
    reader: impl BufRead,
    mode: ParseMode,
) -> Result<LoadSummary, ParseError> {
    let mut it = NTriplesReader::new(reader, mode);
    let mut statements = 0;
    for t in it.by_ref() {
        graph.insert_owned(t?);
        statements += 1;
    }
    Ok(LoadSummary { statements, skipped: it.skipped() })
}

pub fn parse_str(input: &str, mode: ParseMode) -> Result<TripleGraph, ParseError> {
    load_graph(input.as_bytes(), mode).map(|(g, _)| g)
}

/// Writes the graph as N-Triples. In canonical mode lines are sorted
/// bytewise so equal graphs serialize identically.
pub fn write_ntriples(graph: &TripleGraph, canonical: bool, mut out: impl Write) -> io::Result<()> {
    if canonical {
        let mut lines: Vec<String> = graph.iter().map(|t| t.to_string()).collect();
        lines.sort_unstable();
        for l in lines {
            out.write_all(l.as_bytes())?;
            out.write_all(b"\n")?;
        }
    } else {
        for t in graph.iter() {
            writeln!(out, "{t}")?;
        }
    }
    out.flush()
}

pub fn to_canonical_string(graph: &TripleGraph) -> String {
    let mut buf = Vec::new();
    write_ntriples(graph, true, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("N-Triples output is UTF-8")
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t']);
        self.pos = self.s.len() - trimmed.len();
    }

    fn peek(&self) -> Option<u8> {
        self.s.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

/// Parses one line. `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str) -> Result<Option<Triple>, String> {
    let line = line.trim_end_matches(['\n', '\r']);
    let mut c = Cursor { s: line, pos: 0 };
    c.skip_ws();
    match c.peek() {
        None | Some(b'#') => return Ok(None),
        _ => {}
    }
    let subject = match c.peek() {
        Some(b'<') => Term::Iri(iri(&mut c)?),
        Some(b'_') => Term::Blank(blank(&mut c)?),
        Some(b'"') => return Err("literal in subject position".into()),
        _ => return Err("expected subject".into()),
    };
    c.skip_ws();
    let predicate = match c.peek() {
        Some(b'<') => Term::Iri(iri(&mut c)?),
        _ => return Err("predicate must be an IRI".into()),
    };
    c.skip_ws();
    let object = match c.peek() {
        Some(b'<') => Term::Iri(iri(&mut c)?),
        Some(b'_') => Term::Blank(blank(&mut c)?),
        Some(b'"') => Term::Literal(literal(&mut c)?),
        _ => return Err("expected object".into()),
    };
    c.skip_ws();
    if !c.eat(b'.') {
        return Err("missing terminating '.'".into());
    }
    c.skip_ws();
    match c.peek() {
        None | Some(b'#') => Ok(Some(Triple { subject, predicate, object })),
        _ => Err("trailing content after '.'".into()),
    }
}

fn iri(c: &mut Cursor<'_>) -> Result<String, String> {
    c.pos += 1;
    let rest = c.rest();
    let end = rest.find('>').ok_or("unterminated IRI")?;
    let raw = &rest[..end];
    c.pos += end + 1;
    if raw.is_empty() {
        return Err("empty IRI".into());
    }
    if raw.contains('<') || raw.contains('"') {
        return Err("illegal character in IRI".into());
    }
    if raw.contains('\\') {
        unescape(raw, false)
    } else {
        Ok(raw.to_owned())
    }
}

fn blank(c: &mut Cursor<'_>) -> Result<String, String> {
    if !c.rest().starts_with("_:") {
        return Err("malformed blank node".into());
    }
    c.pos += 2;
    let rest = c.rest();
    let end = rest
        .char_indices()
        .find(|&(_, ch)| !(ch.is_alphanumeric() || matches!(ch, '_' | '-' | '.' | '\u{b7}')))
        .map_or(rest.len(), |(i, _)| i);
    // A label cannot end with '.', which would be the statement terminator.
    let label = rest[..end].trim_end_matches('.');
    if label.is_empty() {
        return Err("empty blank node label".into());
    }
    c.pos += label.len();
    Ok(label.to_owned())
}

fn literal(c: &mut Cursor<'_>) -> Result<Literal, String> {
    c.pos += 1;
    let bytes = c.s.as_bytes();
    let start = c.pos;
    let mut i = start;
    let mut escaped = false;
    loop {
        match bytes.get(i) {
            None => return Err("unterminated literal".into()),
            Some(b'\\') => {
                escaped = true;
                i += 2;
            }
            Some(b'"') => break,
            Some(_) => i += 1,
        }
    }
    let raw = &c.s[start..i];
    let lexical = if escaped { unescape(raw, true)? } else { raw.to_owned() };
    c.pos = i + 1;
    let mut lit = Literal::plain(lexical);
    if c.eat(b'@') {
        let rest = c.rest();
        let end = rest
            .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '-'))
            .unwrap_or(rest.len());
        if end == 0 {
            return Err("empty language tag".into());
        }
        lit.language = Some(rest[..end].to_owned());
        c.pos += end;
    } else if c.rest().starts_with("^^") {
        c.pos += 2;
        if c.peek() != Some(b'<') {
            return Err("datatype must be an IRI".into());
        }
        lit.datatype = Some(iri(c)?);
    }
    Ok(lit)
}

fn unescape(raw: &str, string_escapes: bool) -> Result<String, String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        let esc = chars.next().ok_or("dangling escape")?;
        match esc {
            'u' | 'U' => {
                let n = if esc == 'u' { 4 } else { 8 };
                let hex: String = chars.by_ref().take(n).collect();
                if hex.len() != n {
                    return Err("truncated unicode escape".into());
                }
                let code = u32::from_str_radix(&hex, 16).map_err(|_| "bad unicode escape")?;
                out.push(char::from_u32(code).ok_or("invalid code point")?);
            }
            't' if string_escapes => out.push('\t'),
            'n' if string_escapes => out.push('\n'),
            'r' if string_escapes => out.push('\r'),
            'b' if string_escapes => out.push('\u{8}'),
            'f' if string_escapes => out.push('\u{c}'),
            '"' if string_escapes => out.push('"'),
            '\'' if string_escapes => out.push('\''),
            '\\' if string_escapes => out.push('\\'),
            other => return Err(format!("unknown escape \\{other}")),
        }
    }
    Ok(out)
}
