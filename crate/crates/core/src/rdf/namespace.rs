use std::collections::BTreeMap;

use thiserror::Error;

use super::vocab;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NamespaceError {
    #[error("unknown prefix '{0}'")]
    UnknownPrefix(String),
    #[error("'{0}' is not a CURIE")]
    NotACurie(String),
    #[error("prefix '{0}' is already bound")]
    DuplicatePrefix(String),
    #[error("base '{base}' for prefix '{prefix}' must end in '/', '#' or '_'")]
    BadBase { prefix: String, base: String },
    #[error("base '{0}' is already bound to another prefix")]
    DuplicateBase(String),
}

/// Prefix to IRI-base table used for CURIE expansion and contraction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NamespaceTable {
    prefixes: BTreeMap<String, String>,
}

impl NamespaceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Table with the RDF/OWL vocabularies and the OBO PURL base.
    pub fn with_defaults() -> Self {
        let mut t = Self::new();
        for (p, b) in [
            ("rdf", vocab::RDF_NS),
            ("rdfs", vocab::RDFS_NS),
            ("owl", vocab::OWL_NS),
            ("xsd", vocab::XSD_NS),
            ("obo", vocab::OBO_NS),
            ("oboInOwl", vocab::OBO_IN_OWL_NS),
        ] {
            t.insert(p, b).expect("default namespaces are consistent");
        }
        t
    }

    pub fn insert(&mut self, prefix: &str, base: &str) -> Result<(), NamespaceError> {
        if self.prefixes.contains_key(prefix) {
            return Err(NamespaceError::DuplicatePrefix(prefix.to_owned()));
        }
        if !(base.ends_with('/') || base.ends_with('#') || base.ends_with('_')) {
            return Err(NamespaceError::BadBase { prefix: prefix.to_owned(), base: base.to_owned() });
        }
        if self.prefixes.values().any(|b| b == base) {
            return Err(NamespaceError::DuplicateBase(base.to_owned()));
        }
        self.prefixes.insert(prefix.to_owned(), base.to_owned());
        Ok(())
    }

    pub fn base(&self, prefix: &str) -> Option<&str> {
        self.prefixes.get(prefix).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.prefixes.iter().map(|(p, b)| (p.as_str(), b.as_str()))
    }

    /// `obo:HP_0000001` → `http://purl.obolibrary.org/obo/HP_0000001`.
    pub fn expand_curie(&self, curie: &str) -> Result<String, NamespaceError> {
        let (prefix, local) = curie.split_once(':').ok_or_else(|| NamespaceError::NotACurie(curie.to_owned()))?;
        let base = self.base(prefix).ok_or_else(|| NamespaceError::UnknownPrefix(prefix.to_owned()))?;
        Ok(format!("{base}{local}"))
    }

    /// Inverse of [`expand_curie`](Self::expand_curie) using the longest
    /// matching base; IRIs matching no base come back unchanged.
    pub fn contract_iri(&self, iri: &str) -> String {
        self.prefixes
            .iter()
            .filter(|(_, base)| iri.starts_with(base.as_str()))
            .max_by_key(|(_, base)| base.len())
            .map(|(prefix, base)| format!("{prefix}:{}", &iri[base.len()..]))
            .unwrap_or_else(|| iri.to_owned())
    }

    /// Resolves a value that is either a CURIE over a known prefix or an
    /// absolute IRI. Returns `None` for anything else.
    pub fn resolve(&self, value: &str) -> Option<String> {
        let value = value.trim();
        let value = value.strip_prefix('<').and_then(|v| v.strip_suffix('>')).unwrap_or(value);
        if let Some((prefix, local)) = value.split_once(':') {
            if let Some(base) = self.base(prefix) {
                return Some(format!("{base}{local}"));
            }
        }
        super::term::validate_iri(value).is_ok().then(|| value.to_owned())
    }
}
