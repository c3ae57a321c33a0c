use statrs::function::gamma::gamma_ur;

use super::{StatResult, StatsError};

/// Upper tail of the χ² distribution, Q(df/2, x/2).
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(f64::from(df) / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Pearson χ² test of independence on an r×c table of counts (no continuity
/// correction).
pub fn chi_square(table: &[Vec<f64>]) -> Result<StatResult, StatsError> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return Err(StatsError::DegenerateTable(format!("{rows}x{cols} table")));
    }
    if table.iter().any(|r| r.len() != cols) {
        return Err(StatsError::DegenerateTable("ragged rows".into()));
    }
    if table.iter().flatten().any(|&c| !c.is_finite() || c < 0.0) {
        return Err(StatsError::DegenerateTable(
            "counts must be finite and non-negative".into(),
        ));
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    if let Some(i) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(StatsError::DegenerateTable(format!("row {i} is all zero")));
    }
    if let Some(j) = col_sums.iter().position(|&s| s == 0.0) {
        return Err(StatsError::DegenerateTable(format!("column {j} is all zero")));
    }
    let total: f64 = row_sums.iter().sum();

    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            stat += (observed - expected).powi(2) / expected;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as u32;
    Ok(StatResult {
        method: "Pearson chi-square".into(),
        statistic: stat,
        df: Some(df),
        p_value: Some(chi_square_sf(stat, df)),
        notes: vec!["no continuity correction".into()],
    })
}

/// χ² goodness of fit of observed counts against expected proportions.
pub fn chi_square_goodness_of_fit(observed: &[f64], proportions: &[f64]) -> Result<StatResult, StatsError> {
    if observed.len() < 2 || observed.len() != proportions.len() {
        return Err(StatsError::DegenerateTable(
            "need matching observed/expected with ≥ 2 cells".into(),
        ));
    }
    let total: f64 = observed.iter().sum();
    let norm: f64 = proportions.iter().sum();
    if total <= 0.0 || norm <= 0.0 || proportions.iter().any(|&p| p <= 0.0) {
        return Err(StatsError::DegenerateTable(
            "empty sample or non-positive expectation".into(),
        ));
    }
    let stat: f64 = observed
        .iter()
        .zip(proportions)
        .map(|(&o, &p)| {
            let e = total * p / norm;
            (o - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as u32;
    Ok(StatResult {
        method: "chi-square goodness of fit".into(),
        statistic: stat,
        df: Some(df),
        p_value: Some(chi_square_sf(stat, df)),
        notes: Vec::new(),
    })
}
