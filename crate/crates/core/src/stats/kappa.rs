//! Unweighted Cohen's kappa and its interpretation bands.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{StatResult, StatsError};

/// Agreement band. Intervals are on κ rounded to two decimals:
/// 0.01–0.20 slight, 0.21–0.40 fair, 0.41–0.60 moderate, 0.61–0.80
/// substantial, above 0.80 almost perfect. Non-positive κ is `Poor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn classify(kappa: f64) -> Self {
        if kappa <= 0.0 {
            return Self::Poor;
        }
        let hundredths = (kappa * 100.0).round() as i64;
        match hundredths {
            ..=20 => Self::Slight,
            21..=40 => Self::Fair,
            41..=60 => Self::Moderate,
            61..=80 => Self::Substantial,
            _ => Self::AlmostPerfect,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Poor => "poor",
            Self::Slight => "slight",
            Self::Fair => "fair",
            Self::Moderate => "moderate",
            Self::Substantial => "substantial",
            Self::AlmostPerfect => "almost perfect",
        }
    }
}

impl fmt::Display for KappaBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kappa {
    pub kappa: f64,
    pub band: KappaBand,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub result: StatResult,
}

pub fn cohens_kappa<T: Ord>(r1: &[T], r2: &[T]) -> Result<Kappa, StatsError> {
    if r1.len() != r2.len() {
        return Err(StatsError::LengthMismatch(r1.len(), r2.len()));
    }
    if r1.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = r1.len() as f64;
    let mut first: BTreeMap<&T, f64> = BTreeMap::new();
    let mut second: BTreeMap<&T, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (a, b) in r1.iter().zip(r2) {
        *first.entry(a).or_default() += 1.0;
        *second.entry(b).or_default() += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = first
        .iter()
        .map(|(cat, c1)| c1 / n * second.get(cat).copied().unwrap_or(0.0) / n)
        .sum();
    finish(p_o, p_e)
}

/// κ from a square confusion matrix (rows: rater 1, columns: rater 2).
pub fn cohens_kappa_from_table(table: &[Vec<f64>]) -> Result<Kappa, StatsError> {
    let k = table.len();
    if k == 0 || table.iter().any(|r| r.len() != k) {
        return Err(StatsError::DegenerateTable("confusion matrix must be square".into()));
    }
    let n: f64 = table.iter().flatten().sum();
    if n <= 0.0 {
        return Err(StatsError::EmptyInput);
    }
    let p_o = (0..k).map(|i| table[i][i]).sum::<f64>() / n;
    let p_e = (0..k)
        .map(|i| {
            let row: f64 = table[i].iter().sum();
            let col: f64 = table.iter().map(|r| r[i]).sum();
            row / n * col / n
        })
        .sum();
    finish(p_o, p_e)
}

fn finish(p_o: f64, p_e: f64) -> Result<Kappa, StatsError> {
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(StatsError::DegenerateAgreement);
    }
    let kappa = (p_o - p_e) / (1.0 - p_e);
    let band = KappaBand::classify(kappa);
    Ok(Kappa {
        kappa,
        band,
        observed_agreement: p_o,
        expected_agreement: p_e,
        result: StatResult {
            method: "Cohen's kappa (unweighted)".into(),
            statistic: kappa,
            df: None,
            p_value: None,
            notes: vec![format!("{band} agreement")],
        },
    })
}
