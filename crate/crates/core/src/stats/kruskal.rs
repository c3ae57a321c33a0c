use super::{check_finite, chi_square_sf, midranks, tie_term, StatResult, StatsError};

/// Kruskal-Wallis H with tie correction; p from χ² with `groups − 1` df.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<StatResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup(i));
    }
    for g in groups {
        check_finite(g)?;
    }

    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let ranks = midranks(&pooled);
    // deviation form of H: no cancellation near zero, where the χ² tail is steep
    let centre = (n + 1.0) / 2.0;
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let size = g.len() as f64;
        let mean_rank = ranks[offset..offset + g.len()].iter().sum::<f64>() / size;
        sum += size * (mean_rank - centre).powi(2);
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum;
    let correction = 1.0 - tie_term(&pooled) / (n * n * n - n);
    let df = (groups.len() - 1) as u32;

    let mut notes = Vec::new();
    let (h, p) = if correction <= 0.0 {
        notes.push("all values tied".to_string());
        (0.0, 1.0)
    } else {
        if correction < 1.0 {
            notes.push("tie correction applied".to_string());
        }
        let h = (h_raw / correction).max(0.0);
        (h, chi_square_sf(h, df))
    };
    Ok(StatResult {
        method: "Kruskal-Wallis".into(),
        statistic: h,
        df: Some(df),
        p_value: Some(p),
        notes,
    })
}
