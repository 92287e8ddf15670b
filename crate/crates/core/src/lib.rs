//! Music genre classification workbench.
//!
//! The pipeline runs audio ingest ([`audio`]) and feature extraction
//! ([`features`]), then five independent classifiers ([`classify`]), the
//! evaluation harness ([`eval`]), persistence ([`store`]) and the HTTP
//! service ([`service`]).

pub mod audio;
pub mod classify;
pub mod eval;
pub mod features;
pub mod genre;
pub mod service;
pub mod store;

pub use genre::{Genre, N_GENRES};
