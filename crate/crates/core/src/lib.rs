//! Typed context objects for telecom agents and a declarative multi-agent
//! workflow engine built on them.

pub mod agents;
pub mod context;
pub mod engine;
pub mod graph;
pub mod ingest;
pub mod prebuilt;
pub mod service;
