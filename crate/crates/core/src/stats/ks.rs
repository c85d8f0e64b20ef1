use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn sorted(x: &[f64]) -> Result<Vec<f64>, StatsError> {
    if x.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Largest gap between the two empirical CDFs.
///
/// Walks both sorted samples together, stepping past every copy of the
/// current smallest value before comparing, so ties across samples are
/// evaluated at the distinct values only.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    Ok(d)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
///
/// For small λ the alternating series converges slowly, so the complementary
/// form `1 − (√(2π)/λ) Σ_{k≥1} e^{−(2k−1)²π²/(8λ²)}` is used instead.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda.is_nan() || lambda <= 0.0 {
        return 1.0;
    }
    let sum_until_small = |term: &dyn Fn(f64) -> f64| {
        let mut sum = 0.0;
        for k in 1..=100 {
            let t = term(f64::from(k));
            sum += t;
            if t.abs() <= f64::EPSILON * sum.abs() {
                break;
            }
        }
        sum
    };
    let q = if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * sum_until_small(&|k| (-(2.0 * k - 1.0).powi(2) * c).exp());
        1.0 - cdf
    } else {
        2.0 * sum_until_small(&|k| {
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * lambda * lambda).exp()
        })
    };
    q.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value,
/// `λ = d·(√n + 0.12 + 0.11/√n)` for effective size `n = n1·n2/(n1+n2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let d = ks_statistic(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let n_eff = (n1 * n2) as f64 / (n1 + n2) as f64;
    let root = n_eff.sqrt();
    let lambda = d * (root + 0.12 + 0.11 / root);
    Ok(KsResult {
        d_statistic: d,
        p_value: kolmogorov_q(lambda),
        n1,
        n2,
    })
}
