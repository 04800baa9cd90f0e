//! Safety-property tooling for unsafe Rust APIs.
//!
//! * [`taxonomy`]: the property catalog and its prerequisite hierarchy.
//! * [`docstore`]: the triplet-structured API document database.
//! * [`analysis`]: label matrices, dataset filters and phi correlation.
//! * [`scanner`]: unsafe-API usage mining over local source corpora.
//! * [`cvebench`]: vulnerability records classified by violated property.
//! * [`lsp`]: a stdio hover server over the document database.
//! * [`cli`]: the `unsafe-props` command.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod cvebench;
pub mod diagnostic;
pub mod docstore;
pub mod exec;
pub mod lsp;
pub mod scanner;
pub mod taxonomy;

pub use diagnostic::{Diagnostic, Location, Site};
