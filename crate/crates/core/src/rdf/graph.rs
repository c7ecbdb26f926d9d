//! In-memory triple set with subject, predicate and object indexes.
//!
//! Terms are interned into dense `TermId` handles; the three orderings
//! (SPO, POS, OSP) are kept as sorted sets of id triples so every bound
//! pattern is a single range scan. Interned terms are never released, so a
//! graph that has triples removed keeps the dictionary entries; everything
//! observable through the public API is stated over triples only.

use std::collections::{BTreeSet, HashMap};
use std::ops::Bound;

use super::term::{Term, Triple};

/// Dense handle for an interned term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

impl TermId {
    const MIN: TermId = TermId(0);
    const MAX: TermId = TermId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Default)]
struct Interner {
    terms: Vec<Term>,
    ids: HashMap<Term, TermId>,
}

impl Interner {
    fn intern(&mut self, term: &Term) -> TermId {
        if let Some(id) = self.ids.get(term) {
            return *id;
        }
        let id = TermId(u32::try_from(self.terms.len()).expect("more than u32::MAX distinct terms"));
        self.terms.push(term.clone());
        self.ids.insert(term.clone(), id);
        id
    }

    fn intern_owned(&mut self, term: Term) -> TermId {
        if let Some(id) = self.ids.get(&term) {
            return *id;
        }
        let id = TermId(u32::try_from(self.terms.len()).expect("more than u32::MAX distinct terms"));
        self.terms.push(term.clone());
        self.ids.insert(term, id);
        id
    }
}

/// Id-level triple in subject, predicate, object order.
pub type IdTriple = [TermId; 3];

/// A pattern slot: `None` is a wildcard.
pub type Pattern<'a> = (Option<&'a Term>, Option<&'a Term>, Option<&'a Term>);

#[derive(Debug, Clone, Default)]
pub struct TripleGraph {
    interner: Interner,
    spo: BTreeSet<[TermId; 3]>,
    pos: BTreeSet<[TermId; 3]>,
    osp: BTreeSet<[TermId; 3]>,
}

impl TripleGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    /// Inserts a triple; returns `true` when it was not already present.
    pub fn insert(&mut self, triple: &Triple) -> bool {
        let s = self.interner.intern(&triple.subject);
        let p = self.interner.intern(&triple.predicate);
        let o = self.interner.intern(&triple.object);
        self.insert_ids([s, p, o])
    }

    pub fn insert_owned(&mut self, triple: Triple) -> bool {
        let s = self.interner.intern_owned(triple.subject);
        let p = self.interner.intern_owned(triple.predicate);
        let o = self.interner.intern_owned(triple.object);
        self.insert_ids([s, p, o])
    }

    pub fn insert_terms(&mut self, s: &Term, p: &Term, o: &Term) -> bool {
        let ids = [self.interner.intern(s), self.interner.intern(p), self.interner.intern(o)];
        self.insert_ids(ids)
    }

    pub fn insert_ids(&mut self, [s, p, o]: IdTriple) -> bool {
        if !self.spo.insert([s, p, o]) {
            return false;
        }
        self.pos.insert([p, o, s]);
        self.osp.insert([o, s, p]);
        true
    }

    pub fn intern(&mut self, term: &Term) -> TermId {
        self.interner.intern(term)
    }

    pub fn remove(&mut self, triple: &Triple) -> bool {
        match self.ids_of(triple) {
            Some(ids) => self.remove_ids(ids),
            None => false,
        }
    }

    pub fn remove_ids(&mut self, [s, p, o]: IdTriple) -> bool {
        if !self.spo.remove(&[s, p, o]) {
            return false;
        }
        self.pos.remove(&[p, o, s]);
        self.osp.remove(&[o, s, p]);
        true
    }

    /// Keeps only the triples for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(&TripleGraph, IdTriple) -> bool) -> usize {
        let doomed: Vec<IdTriple> = self.spo.iter().copied().filter(|t| !keep(self, *t)).collect();
        for t in &doomed {
            self.remove_ids(*t);
        }
        doomed.len()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.ids_of(triple).is_some_and(|ids| self.spo.contains(&ids))
    }

    pub fn contains_ids(&self, ids: IdTriple) -> bool {
        self.spo.contains(&ids)
    }

    pub fn id_of(&self, term: &Term) -> Option<TermId> {
        self.interner.ids.get(term).copied()
    }

    fn ids_of(&self, t: &Triple) -> Option<IdTriple> {
        Some([self.id_of(&t.subject)?, self.id_of(&t.predicate)?, self.id_of(&t.object)?])
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.interner.terms[id.index()]
    }

    /// Number of interned terms; an upper bound for `TermId::index`.
    pub fn term_capacity(&self) -> usize {
        self.interner.terms.len()
    }

    pub fn resolve(&self, [s, p, o]: IdTriple) -> Triple {
        Triple {
            subject: self.term(s).clone(),
            predicate: self.term(p).clone(),
            object: self.term(o).clone(),
        }
    }

    /// Id triples in SPO order.
    pub fn id_triples(&self) -> impl Iterator<Item = IdTriple> + '_ {
        self.spo.iter().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|t| self.resolve(*t))
    }

    /// Id-level pattern match. Results are always in `[s, p, o]` order.
    pub fn match_ids(
        &self,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Box<dyn Iterator<Item = IdTriple> + '_> {
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                Box::new(self.spo.contains(&[s, p, o]).then_some([s, p, o]).into_iter())
            }
            (Some(s), Some(p), None) => Box::new(prefix2(&self.spo, s, p).copied()),
            (Some(s), None, None) => Box::new(prefix1(&self.spo, s).copied()),
            (None, Some(p), Some(o)) => Box::new(prefix2(&self.pos, p, o).map(|&[p, o, s]| [s, p, o])),
            (None, Some(p), None) => Box::new(prefix1(&self.pos, p).map(|&[p, o, s]| [s, p, o])),
            (Some(s), None, Some(o)) => Box::new(prefix2(&self.osp, o, s).map(|&[o, s, p]| [s, p, o])),
            (None, None, Some(o)) => Box::new(prefix1(&self.osp, o).map(|&[o, s, p]| [s, p, o])),
            (None, None, None) => Box::new(self.spo.iter().copied()),
        }
    }

    /// Triples matching every bound slot of the pattern.
    pub fn matching(&self, (s, p, o): Pattern<'_>) -> Vec<Triple> {
        let lookup = |t: Option<&Term>| -> Result<Option<TermId>, ()> {
            match t {
                None => Ok(None),
                Some(t) => self.id_of(t).map(Some).ok_or(()),
            }
        };
        let (Ok(s), Ok(p), Ok(o)) = (lookup(s), lookup(p), lookup(o)) else {
            return Vec::new();
        };
        self.match_ids(s, p, o).map(|t| self.resolve(t)).collect()
    }

    /// Objects of `(s, p, *)`.
    pub fn objects(&self, s: TermId, p: TermId) -> impl Iterator<Item = TermId> + '_ {
        prefix2(&self.spo, s, p).map(|t| t[2])
    }

    /// Subjects of `(*, p, o)`.
    pub fn subjects(&self, p: TermId, o: TermId) -> impl Iterator<Item = TermId> + '_ {
        prefix2(&self.pos, p, o).map(|t| t[2])
    }

    /// Distinct predicates, in id order.
    pub fn predicates(&self) -> Vec<TermId> {
        let mut out = Vec::new();
        let mut cursor = TermId::MIN;
        loop {
            let next = self
                .pos
                .range((Bound::Included([cursor, TermId::MIN, TermId::MIN]), Bound::Unbounded))
                .next();
            match next {
                Some(&[p, _, _]) => {
                    out.push(p);
                    if p == TermId::MAX {
                        break;
                    }
                    cursor = TermId(p.0 + 1);
                }
                None => break,
            }
        }
        out
    }
}

fn prefix1(set: &BTreeSet<[TermId; 3]>, a: TermId) -> impl Iterator<Item = &[TermId; 3]> {
    set.range([a, TermId::MIN, TermId::MIN]..=[a, TermId::MAX, TermId::MAX])
}

fn prefix2(set: &BTreeSet<[TermId; 3]>, a: TermId, b: TermId) -> impl Iterator<Item = &[TermId; 3]> {
    set.range([a, b, TermId::MIN]..=[a, b, TermId::MAX])
}

impl PartialEq for TripleGraph {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().all(|t| other.contains(&t))
    }
}

impl Eq for TripleGraph {}

impl FromIterator<Triple> for TripleGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = TripleGraph::new();
        g.extend(iter);
        g
    }
}

impl Extend<Triple> for TripleGraph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        for t in iter {
            self.insert_owned(t);
        }
    }
}
