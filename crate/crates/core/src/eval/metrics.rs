use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Units the error metrics are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScale {
    /// Min-max normalized signals, errors multiplied by 100.
    #[default]
    NormalizedX100,
    /// Degrees and N·m/kg.
    Physical,
}

impl MetricScale {
    pub fn factor(self) -> f64 {
        match self {
            Self::NormalizedX100 => 100.0,
            Self::Physical => 1.0,
        }
    }
}

impl std::str::FromStr for MetricScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "normalized" | "normalized_x100" => Ok(Self::NormalizedX100),
            "physical" => Ok(Self::Physical),
            other => Err(format!("unknown scale `{other}` (normalized|physical)")),
        }
    }
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Length(a.len(), b.len()));
    }
    if a.len() < min {
        return Err(EvalError::TooShort {
            needed: min,
            found: a.len(),
        });
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ as the Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>, EvalError> {
    check_pair(x, y, 2)?;
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Two-sided p-value of ρ from `t = ρ √((n−2)/(1−ρ²))` with `n − 2` degrees of freedom.
pub fn spearman_p_value(rho: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    let df = (n - 2) as f64;
    if rho.abs() >= 1.0 {
        return Some(0.0);
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

/// `1 − SS_res / SS_tot`; `None` for a constant truth series.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> Result<Option<f64>, EvalError> {
    check_pair(truth, pred, 2)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Ok(None);
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(Some(1.0 - ss_res / ss_tot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// RMSE over the range of the truth series; `None` when that range is zero.
    pub nrmse: Option<f64>,
}

pub fn error_metrics(
    truth: &[f64],
    pred: &[f64],
    scale: MetricScale,
) -> Result<ErrorMetrics, EvalError> {
    check_pair(truth, pred, 1)?;
    let n = truth.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (t, p) in truth.iter().zip(pred) {
        let e = p - t;
        abs += e.abs();
        sq += e * e;
    }
    let mae = abs / n;
    let rmse = (sq / n).sqrt();
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let k = scale.factor();
    Ok(ErrorMetrics {
        mae: mae * k,
        rmse: rmse * k,
        nrmse: (range > 0.0).then(|| rmse / range * k),
    })
}
