//! Construction of ontologically grounded knowledge graphs.
//!
//! Ontologies are quality-checked and merged into a core graph, tabular
//! sources are turned into typed edge lists, and the edges are inserted
//! under a class-based or instance-based knowledge model with standard or
//! inverse relations. Built graphs can be abstracted into plain
//! subject-predicate-object edge sets and summarised with graph statistics.

pub mod build;
pub mod edges;
pub mod merge;
pub mod metadata;
pub mod owlnets;
pub mod pipeline;
pub mod qc;
pub mod rdf;
pub mod stats;
