use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("invalid IRI <{0}>: {1}")]
    InvalidIri(String, &'static str),
    #[error("blank node label must be nonempty")]
    EmptyBlank,
    #[error("literal cannot carry both a datatype and a language tag")]
    DatatypeAndLanguage,
    #[error("predicate must be an IRI, found {0}")]
    NonIriPredicate(String),
    #[error("subject cannot be a literal, found {0}")]
    LiteralSubject(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub lexical: String,
    pub datatype: Option<String>,
    pub language: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: None, language: None }
    }

    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: Some(datatype.into()), language: None }
    }

    pub fn lang(lexical: impl Into<String>, language: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: None, language: Some(language.into()) }
    }
}

/// An RDF term. IRIs are stored without angle brackets, blank nodes without
/// the `_:` prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal(Literal),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri(value.into())
    }

    pub fn blank(label: impl Into<String>) -> Self {
        Term::Blank(label.into())
    }

    pub fn literal(lexical: impl Into<String>) -> Self {
        Term::Literal(Literal::plain(lexical))
    }

    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Term::Literal(Literal::typed(lexical, datatype))
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Term::Blank(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            _ => None,
        }
    }

    /// Checks the structural invariants of the term.
    pub fn validate(&self) -> Result<(), TermError> {
        match self {
            Term::Iri(v) => validate_iri(v),
            Term::Blank(l) if l.is_empty() => Err(TermError::EmptyBlank),
            Term::Blank(_) => Ok(()),
            Term::Literal(l) if l.datatype.is_some() && l.language.is_some() => {
                Err(TermError::DatatypeAndLanguage)
            }
            Term::Literal(l) => match &l.datatype {
                Some(dt) => validate_iri(dt),
                None => Ok(()),
            },
        }
    }
}

pub fn validate_iri(value: &str) -> Result<(), TermError> {
    if value.chars().any(char::is_whitespace) {
        return Err(TermError::InvalidIri(value.to_owned(), "contains whitespace"));
    }
    if value.contains(['<', '>']) {
        return Err(TermError::InvalidIri(value.to_owned(), "contains an angle bracket"));
    }
    if !has_scheme(value) {
        return Err(TermError::InvalidIri(value.to_owned(), "missing scheme"));
    }
    Ok(())
}

/// `scheme ":"` where scheme is `ALPHA *( ALPHA / DIGIT / "+" / "-" / "." )`.
pub fn has_scheme(value: &str) -> bool {
    let Some(colon) = value.find(':') else { return false };
    let scheme = &value[..colon];
    let mut chars = scheme.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(v) => write!(f, "<{v}>"),
            Term::Blank(l) => write!(f, "_:{l}"),
            Term::Literal(l) => {
                f.write_str("\"")?;
                write_escaped(f, &l.lexical)?;
                f.write_str("\"")?;
                if let Some(lang) = &l.language {
                    write!(f, "@{lang}")
                } else if let Some(dt) = &l.datatype {
                    write!(f, "^^<{dt}>")
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn write_escaped(f: &mut impl fmt::Write, value: &str) -> fmt::Result {
    for c in value.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            '\u{8}' => f.write_str("\\b")?,
            '\u{c}' => f.write_str("\\f")?,
            c if (c as u32) < 0x20 || c == '\u{7f}' => write!(f, "\\u{:04X}", c as u32)?,
            c => f.write_char(c)?,
        }
    }
    Ok(())
}

/// One RDF statement. Construct through [`Triple::new`] to enforce
/// position rules.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, TermError> {
        if subject.is_literal() {
            return Err(TermError::LiteralSubject(subject.to_string()));
        }
        if !predicate.is_iri() {
            return Err(TermError::NonIriPredicate(predicate.to_string()));
        }
        Ok(Triple { subject, predicate, object })
    }

    /// Shorthand for an all-IRI triple.
    pub fn iris(s: &str, p: &str, o: &str) -> Self {
        Triple { subject: Term::iri(s), predicate: Term::iri(p), object: Term::iri(o) }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn mentions(&self, term: &Term) -> bool {
        self.subject == *term || self.predicate == *term || self.object == *term
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
