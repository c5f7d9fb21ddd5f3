//! Personalized code-completion dataset construction and evaluation.
//!
//! The crate turns version-control histories into developer- and
//! organization-specific fill-in-the-middle datasets with temporal leak
//! guarantees, then scores externally produced predictions and compares
//! models with paired statistics.
//!
//! Module map, in pipeline order:
//!
//! * [`mining`]: commit streaming, bot/outlier filters, line diffs.
//! * [`identity`]: author alias merging and contributor ranking.
//! * [`java`]: Java lexing, method extraction and method filters.
//! * [`forge`]: segmentation and masking into completion instances.
//! * [`assembly`]: developer/organization/generic dataset builders.
//! * [`metrics`]: Exact Match, BLEU and CrystalBLEU scoring.
//! * [`stats`]: McNemar, Wilcoxon signed-rank and paired Cliff's delta.
//! * [`insight`]: coverage analyses and the cost/breakeven model.
//! * [`pipeline`]: configured, resumable, deterministic stage runner.

pub mod assembly;
pub mod fixtures;
pub mod forge;
pub mod identity;
pub mod insight;
pub mod io;
pub mod java;
pub mod metrics;
pub mod mining;
pub mod pipeline;
pub mod seed;
pub mod stats;
