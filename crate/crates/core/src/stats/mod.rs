//! Nonparametric tests, agreement statistics and descriptive summaries used
//! to analyse rating data.

mod chisq;
mod describe;
mod kappa;
mod kruskal;
mod mwu;
mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chisq::{chi_square, chi_square_goodness_of_fit, chi_square_sf};
pub use describe::{describe, format_mean_sd, format_p, SummaryStat};
pub use kappa::{cohens_kappa, cohens_kappa_from_table, Kappa, KappaBand};
pub use kruskal::kruskal_wallis;
pub use mwu::{mann_whitney_u, mann_whitney_u_with, MannWhitney, MwuOptions, PValueMethod, EXACT_MAX_TOTAL};
pub use rank::{midranks, tie_term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("at least two groups are required, got {0}")]
    TooFewGroups(usize),
    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),
    #[error("rating vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("expected agreement is 1; kappa is undefined")]
    DegenerateAgreement,
    #[error("standard deviation needs at least two values")]
    SdUndefined,
    #[error("no values")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
}

/// A test statistic with its reference distribution metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub method: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}
