use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::StatsError;

/// Significance flag of a correlation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Significance {
    /// p < 0.05
    Significant,
    /// 0.05 <= p < 0.1
    Marginal,
    None,
}

impl Significance {
    pub const SIGNIFICANT_BELOW: f64 = 0.05;
    pub const MARGINAL_BELOW: f64 = 0.1;

    pub fn from_p(p: f64) -> Self {
        if p < Self::SIGNIFICANT_BELOW {
            Significance::Significant
        } else if p < Self::MARGINAL_BELOW {
            Significance::Marginal
        } else {
            Significance::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Significance::Significant => "significant",
            Significance::Marginal => "marginal",
            Significance::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Two-tailed.
    pub p_value: f64,
    pub n: usize,
    pub significance: Significance,
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom,
/// `P(|T| >= |t|) = I_{df/(df+t²)}(df/2, 1/2)`.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewSamples {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Two-tailed p-value of a correlation `r` over `n` pairs, from Student's t
/// on `n − 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = n.saturating_sub(2) as f64;
    // With t = r·√df / √(1 − r²), df / (df + t²) reduces to 1 − r².
    beta_reg(df / 2.0, 0.5, 1.0 - r * r).clamp(0.0, 1.0)
}

/// Pearson product-moment correlation with a two-tailed t-test on n − 2
/// degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    check_pair(x, y)?;
    // Tested on the values: the mean of a constant column need not equal it.
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return Err(StatsError::ConstantInput);
    }
    let n = x.len();
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p_value = correlation_p_value(r, n);
    Ok(CorrelationResult {
        r,
        p_value,
        n,
        significance: Significance::from_p(p_value),
    })
}

/// Average ranks, ties sharing the mean of their positions (1-based).
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson on average ranks, same t-test.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    check_pair(x, y)?;
    pearson(&ranks(x), &ranks(y))
}
