use serde::{Deserialize, Serialize};

use super::{check_finite, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub n: usize,
    pub mean: f64,
    /// Sample (n − 1) standard deviation; absent when n = 1.
    pub sd: Option<f64>,
}

impl SummaryStat {
    pub fn sd(&self) -> Result<f64, StatsError> {
        self.sd.ok_or(StatsError::SdUndefined)
    }

    /// `"mean ± sd"` with two decimals.
    pub fn mean_sd(&self) -> Result<String, StatsError> {
        Ok(format_mean_sd(self.mean, self.sd()?))
    }
}

pub fn describe(values: &[f64]) -> Result<SummaryStat, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    check_finite(values)?;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(SummaryStat { n, mean, sd })
}

pub fn format_mean_sd(mean: f64, sd: f64) -> String {
    format!("{mean:.2} ± {sd:.2}")
}

/// Three decimals, or `<0.001`.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_summary() {
        let s = describe(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, Some(1.0));
        assert_eq!(s.mean_sd().unwrap(), "2.00 ± 1.00");
    }

    #[test]
    fn formatting() {
        assert_eq!(format_mean_sd(15.14, 4.64), "15.14 ± 4.64");
        assert_eq!(format_p(0.0004), "<0.001");
        assert_eq!(format_p(0.351), "0.351");
    }

    #[test]
    fn single_value_has_no_sd() {
        let s = describe(&[4.0]).unwrap();
        assert_eq!(s.sd(), Err(StatsError::SdUndefined));
        assert_eq!(describe(&[]), Err(StatsError::EmptyInput));
    }
}
