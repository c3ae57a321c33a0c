//! Two-sided Mann-Whitney U test.

use super::{check_finite, chi_square_sf, midranks, tie_term, StatResult, StatsError};

/// Largest combined sample size for which the exact null distribution is used.
pub const EXACT_MAX_TOTAL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueMethod {
    /// Exact when `n_a + n_b <= EXACT_MAX_TOTAL` and there are no ties.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MwuOptions {
    pub method: PValueMethod,
    /// Half-unit continuity correction in the normal approximation.
    pub continuity: bool,
}

impl Default for MwuOptions {
    fn default() -> Self {
        Self {
            method: PValueMethod::Auto,
            continuity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MannWhitney {
    pub u_a: f64,
    pub u_b: f64,
    /// Standardised statistic; absent in exact mode.
    pub z: Option<f64>,
    pub exact: bool,
    pub result: StatResult,
}

impl MannWhitney {
    pub fn p_value(&self) -> f64 {
        self.result.p_value.unwrap_or(1.0)
    }
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    mann_whitney_u_with(a, b, MwuOptions::default())
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], opts: MwuOptions) -> Result<MannWhitney, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptyGroup(0));
    }
    if b.is_empty() {
        return Err(StatsError::EmptyGroup(1));
    }
    check_finite(a)?;
    check_finite(b)?;

    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;
    let ties = tie_term(&pooled);

    let exact = match opts.method {
        PValueMethod::Exact => ties == 0.0,
        PValueMethod::Normal => false,
        PValueMethod::Auto => ties == 0.0 && na + nb <= EXACT_MAX_TOTAL,
    };

    let mut notes = vec!["two-sided".to_string()];
    let (p, z) = if exact {
        notes.push("exact null distribution".into());
        (exact_two_sided(na, nb, u_a), None)
    } else {
        let n = (na + nb) as f64;
        let mean = (na * nb) as f64 / 2.0;
        let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
        notes.push("normal approximation".into());
        if ties > 0.0 {
            notes.push("tie-corrected variance".into());
        }
        if var <= 0.0 {
            notes.push("all values tied".into());
            (1.0, Some(0.0))
        } else {
            let diff = u_a - mean;
            let correction = if opts.continuity {
                notes.push("continuity correction".into());
                if diff == 0.0 {
                    0.0
                } else {
                    0.5 * diff.signum()
                }
            } else {
                0.0
            };
            let z = (diff - correction) / var.sqrt();
            (normal_two_sided(z), Some(z))
        }
    };

    Ok(MannWhitney {
        u_a,
        u_b,
        z,
        exact,
        result: StatResult {
            method: "Mann-Whitney U".into(),
            statistic: u_a,
            df: None,
            p_value: Some(p.clamp(0.0, 1.0)),
            notes,
        },
    })
}

/// P(|Z| >= |z|) for a standard normal, written as the χ²₁ tail of z².
pub(super) fn normal_two_sided(z: f64) -> f64 {
    chi_square_sf(z * z, 1)
}

/// Number of rank arrangements giving each value of U_a, for u in 0..=na·nb.
fn u_counts(na: usize, nb: usize) -> Vec<f64> {
    // table[i][j] holds the distribution for group sizes (i, j)
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); nb + 1]; na + 1];
    for i in 0..=na {
        for j in 0..=nb {
            let mut dist = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1.0;
            } else {
                // the largest observation is either in group a (beating all j) or in b
                for (u, slot) in dist.iter_mut().enumerate() {
                    let from_a = u.checked_sub(j).and_then(|v| table[i - 1][j].get(v)).copied();
                    let from_b = table[i][j - 1].get(u).copied();
                    *slot = from_a.unwrap_or(0.0) + from_b.unwrap_or(0.0);
                }
            }
            table[i][j] = dist;
        }
    }
    std::mem::take(&mut table[na][nb])
}

fn exact_two_sided(na: usize, nb: usize, u_a: f64) -> f64 {
    let counts = u_counts(na, nb);
    let total: f64 = counts.iter().sum();
    let u = u_a.round() as usize;
    let lower: f64 = counts[..=u].iter().sum::<f64>() / total;
    let upper: f64 = counts[u..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}
