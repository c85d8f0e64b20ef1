//! Statistics used by the validation harness.

mod correlation;
mod ks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correlation::{
    correlation_p_value, pearson, spearman, student_t_two_tailed, CorrelationResult, Significance,
};
pub use ks::{kolmogorov_q, ks_statistic, ks_two_sample, KsResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input is constant")]
    ConstantInput,
    #[error("input contains a non-finite value")]
    NonFinite,
}

/// Summary of a sample; `std` uses the population convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn describe(x: &[f64]) -> Result<Description, StatsError> {
    if x.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Description {
        mean,
        std: var.sqrt(),
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_cases() {
        let d = describe(&[5.0]).unwrap();
        assert_eq!((d.mean, d.std, d.min, d.max, d.n), (5.0, 0.0, 5.0, 5.0, 1));

        let d = describe(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.mean, 2.0);
        assert!((d.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((d.min, d.max, d.n), (1.0, 3.0, 3));

        assert_eq!(describe(&[2.0; 9]).unwrap().std, 0.0);
        assert_eq!(describe(&[]), Err(StatsError::EmptyInput));
        assert_eq!(describe(&[1.0, f64::NAN]), Err(StatsError::NonFinite));
    }
}
