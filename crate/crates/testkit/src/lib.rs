//! Independent reference implementations used as test oracles, plus
//! deterministic fixture generators. Nothing here depends on the crates it
//! checks: every oracle is a separate, deliberately naive formulation.

pub mod fixtures;
pub mod knn;
pub mod mwu;
pub mod scan;
pub mod splitter;
