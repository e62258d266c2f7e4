//! Species flow networks built from shipping voyages.

pub mod analytics;
pub mod ballast;
pub mod graph;
pub mod ingest;
pub mod sfn;
pub mod mapeq;
pub mod risk;
pub mod cli;
