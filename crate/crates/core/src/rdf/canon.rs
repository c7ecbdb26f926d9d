//! Deterministic blank-node relabeling.
//!
//! Blank nodes are colored by iterated neighbourhood hashing (each round a
//! node's color is the digest of its incident edges, with neighbouring blank
//! nodes contributing their previous color) and then renamed `c0, c1, ...` in
//! color order. Two isomorphic graphs get identical output whenever no two
//! blank nodes end up with the same color; remaining ties are broken by the
//! original label.

use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use super::graph::TripleGraph;
use super::term::{Term, Triple};

pub fn canonical_relabel(graph: &TripleGraph) -> TripleGraph {
    let triples: Vec<Triple> = graph.iter().collect();
    let mut colors: HashMap<String, String> = HashMap::new();
    for t in &triples {
        for term in [&t.subject, &t.object] {
            if let Term::Blank(l) = term {
                colors.insert(l.clone(), String::new());
            }
        }
    }
    if colors.is_empty() {
        return graph.clone();
    }

    let render = |term: &Term, colors: &HashMap<String, String>| match term {
        Term::Blank(l) => format!("_:{}", colors[l]),
        other => other.to_string(),
    };

    let mut distinct = 0;
    for _ in 0..=colors.len() {
        let mut incident: HashMap<&str, Vec<String>> = HashMap::new();
        for t in &triples {
            let p = t.predicate.to_string();
            if let Term::Blank(l) = &t.subject {
                incident.entry(l).or_default().push(format!("+{p} {}", render(&t.object, &colors)));
            }
            if let Term::Blank(l) = &t.object {
                incident.entry(l).or_default().push(format!("-{p} {}", render(&t.subject, &colors)));
            }
        }
        let mut next = HashMap::with_capacity(colors.len());
        for (label, prev) in &colors {
            let mut edges = incident.remove(label.as_str()).unwrap_or_default();
            edges.sort_unstable();
            let mut h = Sha256::new();
            h.update(prev.as_bytes());
            for e in &edges {
                h.update(e.as_bytes());
                h.update([0]);
            }
            next.insert(label.clone(), hex::encode(h.finalize()));
        }
        colors = next;
        let now = colors.values().collect::<std::collections::HashSet<_>>().len();
        if now == distinct {
            break;
        }
        distinct = now;
    }

    let mut order: BTreeMap<(&str, &str), ()> = BTreeMap::new();
    for (label, color) in &colors {
        order.insert((color.as_str(), label.as_str()), ());
    }
    let rename: HashMap<&str, String> =
        order.keys().enumerate().map(|(i, (_, label))| (*label, format!("c{i}"))).collect();
    let relabel = |term: &Term| match term {
        Term::Blank(l) => Term::Blank(rename[l.as_str()].clone()),
        other => other.clone(),
    };
    triples
        .iter()
        .map(|t| Triple { subject: relabel(&t.subject), predicate: t.predicate.clone(), object: relabel(&t.object) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::ntriples::{parse_str, to_canonical_string, ParseMode};

    #[test]
    fn isomorphic_graphs_relabel_identically() {
        let a = parse_str(
            "_:x <http://p> _:y .\n_:y <http://q> <http://o> .\n<http://s> <http://r> _:x .\n",
            ParseMode::Strict,
        )
        .unwrap();
        let b = parse_str(
            "_:k1 <http://p> _:k0 .\n_:k0 <http://q> <http://o> .\n<http://s> <http://r> _:k1 .\n",
            ParseMode::Strict,
        )
        .unwrap();
        assert_ne!(to_canonical_string(&a), to_canonical_string(&b));
        assert_eq!(to_canonical_string(&canonical_relabel(&a)), to_canonical_string(&canonical_relabel(&b)));
    }

    #[test]
    fn non_isomorphic_graphs_differ() {
        let a = parse_str("_:x <http://p> <http://o1> .\n", ParseMode::Strict).unwrap();
        let b = parse_str("_:x <http://p> <http://o2> .\n", ParseMode::Strict).unwrap();
        assert_ne!(to_canonical_string(&canonical_relabel(&a)), to_canonical_string(&canonical_relabel(&b)));
    }
}
