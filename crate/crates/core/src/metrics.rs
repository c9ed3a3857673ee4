//! Evaluation metrics for oracle feeds against a reference feed.
//!
//! All metrics run on [`AlignedFeeds`]: both feeds resampled onto a common
//! grid by holding each price until the next update. Scores compare an
//! oracle against a baseline oracle (normally the exact sliding median), so
//! a score above 1 means better than the baseline.

use serde::{Deserialize, Serialize};

use crate::harness::PriceSeries;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("feeds do not overlap")]
    EmptyOverlap,
    #[error("deviance power {0} needs strictly positive values")]
    NonPositiveValue(u8),
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("delay denominator is zero")]
    ZeroDenominator,
    #[error("cost must be positive")]
    ZeroCost,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("deviance power {0} not in 0..=2")]
    InvalidPower(u8),
    #[error("invalid grid step {0}")]
    InvalidGrid(i64),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Reference and candidate sampled at the same grid instants.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedFeeds {
    timestamps: Vec<i64>,
    reference: Vec<f64>,
    candidate: Vec<f64>,
}

impl AlignedFeeds {
    /// Resamples both feeds over their overlap with previous-tick values.
    pub fn align(reference: &PriceSeries, candidate: &PriceSeries, grid_step: i64) -> Result<Self> {
        if grid_step <= 0 {
            return Err(MetricsError::InvalidGrid(grid_step));
        }
        let (Some(r0), Some(c0), Some(r1), Some(c1)) =
            (reference.first(), candidate.first(), reference.last(), candidate.last())
        else {
            return Err(MetricsError::EmptyOverlap);
        };
        let start = r0.t.max(c0.t);
        let end = r1.t.min(c1.t);
        if start > end {
            return Err(MetricsError::EmptyOverlap);
        }
        let timestamps: Vec<i64> = (start..=end).step_by(grid_step as usize).collect();
        let sample = |s: &PriceSeries| -> Vec<f64> {
            let pts = s.points();
            let mut idx = 0;
            timestamps
                .iter()
                .map(|&t| {
                    while idx + 1 < pts.len() && pts[idx + 1].t <= t {
                        idx += 1;
                    }
                    pts[idx].price.to_f64()
                })
                .collect()
        };
        Ok(Self {
            reference: sample(reference),
            candidate: sample(candidate),
            timestamps,
        })
    }

    /// Pre-sampled values on a unit grid starting at 0.
    pub fn from_values(reference: Vec<f64>, candidate: Vec<f64>) -> Result<Self> {
        if reference.len() != candidate.len() {
            return Err(MetricsError::LengthMismatch(reference.len(), candidate.len()));
        }
        if reference.is_empty() {
            return Err(MetricsError::EmptyOverlap);
        }
        Ok(Self {
            timestamps: (0..reference.len() as i64).collect(),
            reference,
            candidate,
        })
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.reference.iter().copied().zip(self.candidate.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub mse: f64,
    pub medae: f64,
    pub max_err: f64,
    /// Percent.
    pub mape: f64,
}

pub fn regression_metrics(a: &AlignedFeeds) -> RegressionMetrics {
    let n = a.len() as f64;
    let mut abs: Vec<f64> = a.pairs().map(|(y, yh)| (y - yh).abs()).collect();
    let mae = abs.iter().sum::<f64>() / n;
    let mse = abs.iter().map(|e| e * e).sum::<f64>() / n;
    let max_err = abs.iter().copied().fold(0.0, f64::max);
    let mape = 100.0 * a.pairs().map(|(y, yh)| ((y - yh) / y).abs()).sum::<f64>() / n;
    abs.sort_by(f64::total_cmp);
    let mid = abs.len() / 2;
    let medae = if abs.len() % 2 == 1 {
        abs[mid]
    } else {
        (abs[mid - 1] + abs[mid]) / 2.0
    };
    RegressionMetrics {
        mae,
        mse,
        medae,
        max_err,
        mape,
    }
}

/// Mean Tweedie deviance: power 0 is squared error, 1 Poisson, 2 Gamma.
pub fn tweedie_deviance(a: &AlignedFeeds, power: u8) -> Result<f64> {
    let unit: fn(f64, f64) -> f64 = match power {
        0 => |y, yh| (y - yh).powi(2),
        1 => |y, yh| 2.0 * (y * (y / yh).ln() + yh - y),
        2 => |y, yh| 2.0 * ((yh / y).ln() + y / yh - 1.0),
        p => return Err(MetricsError::InvalidPower(p)),
    };
    if power > 0 && a.pairs().any(|(y, yh)| y <= 0.0 || yh <= 0.0) {
        return Err(MetricsError::NonPositiveValue(power));
    }
    Ok(a.pairs().map(|(y, yh)| unit(y, yh)).sum::<f64>() / a.len() as f64)
}

/// Deviances at powers 0, 1 and 2.
pub fn tweedie_triple(a: &AlignedFeeds) -> Result<[f64; 3]> {
    Ok([tweedie_deviance(a, 0)?, tweedie_deviance(a, 1)?, tweedie_deviance(a, 2)?])
}

/// `3 / (3 + Σ (td_x[p] - td_baseline[p])²)`: 1 when the candidate's
/// deviances match the baseline's, falling toward 0 as they diverge.
pub fn stationary_score(td_x: [f64; 3], td_baseline: [f64; 3]) -> f64 {
    let sum: f64 = td_x.iter().zip(&td_baseline).map(|(a, b)| (a - b).powi(2)).sum();
    3.0 / (3.0 + sum)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn has_variance(v: &[f64]) -> bool {
    v.iter().any(|&x| x != v[0])
}

/// Shift `s` in `0..=cap` grid steps maximising the correlation between
/// `x[i]` and `y[i + s]`, i.e. how far `y` trails `x`. Ties go to the
/// smallest shift.
pub fn delay_lag(x: &[f64], y: &[f64], cap: usize) -> Result<usize> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 || !has_variance(x) || !has_variance(y) {
        return Err(MetricsError::ZeroVariance);
    }
    let n = x.len();
    let mut best: Option<(usize, f64)> = None;
    for s in 0..=cap.min(n - 2) {
        if let Some(r) = pearson(&x[..n - s], &y[s..]) {
            if best.map_or(true, |(_, b)| r > b) {
                best = Some((s, r));
            }
        }
    }
    best.map(|(s, _)| s).ok_or(MetricsError::ZeroVariance)
}

/// Delay over per-window chunks (averaged) and over the whole series, in
/// grid steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delays {
    pub window: f64,
    pub all: f64,
}

/// `window_len` and `cap` are in grid steps. Chunks with no variance are
/// skipped; a series shorter than one chunk is its own chunk.
pub fn delays(a: &AlignedFeeds, window_len: usize, cap: usize) -> Result<Delays> {
    let all = delay_lag(&a.reference, &a.candidate, cap)? as f64;
    let window_len = window_len.max(2);
    let chunks: Vec<(usize, usize)> = if a.len() < window_len {
        vec![(0, a.len())]
    } else {
        (0..a.len() / window_len).map(|k| (k * window_len, (k + 1) * window_len)).collect()
    };
    let lags: Vec<f64> = chunks
        .into_iter()
        .filter_map(|(lo, hi)| {
            let cap = cap.min(hi - lo - 2);
            delay_lag(&a.reference[lo..hi], &a.candidate[lo..hi], cap).ok()
        })
        .map(|s| s as f64)
        .collect();
    if lags.is_empty() {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(Delays {
        window: lags.iter().sum::<f64>() / lags.len() as f64,
        all,
    })
}

/// Baseline total delay over candidate total delay.
pub fn delay_score(candidate: Delays, baseline: Delays) -> Result<f64> {
    let den = candidate.all + candidate.window;
    if den == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok((baseline.all + baseline.window) / den)
}

/// Baseline cost over candidate cost.
pub fn gas_score(candidate: f64, baseline: f64) -> Result<f64> {
    if candidate <= 0.0 {
        return Err(MetricsError::ZeroCost);
    }
    Ok(baseline / candidate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreWeights {
    pub stationary: f64,
    pub delay: f64,
    pub gas: f64,
}

impl ScoreWeights {
    pub fn new(stationary: f64, delay: f64, gas: f64) -> Result<Self> {
        let w = [stationary, delay, gas];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetricsError::InvalidWeights(format!("{w:?} must be finite and non-negative")));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(MetricsError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(Self { stationary, delay, gas })
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            stationary: 1.0,
            delay: 2.0,
            gas: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubScores {
    pub stationary: f64,
    pub delay: f64,
    pub gas: f64,
}

/// Weighted mean of the three sub-scores.
pub fn resistance_efficiency(s: SubScores, w: &ScoreWeights) -> f64 {
    (w.stationary * s.stationary + w.delay * s.delay + w.gas * s.gas) / (w.stationary + w.delay + w.gas)
}

/// One report row, keyed by the conventional column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "Price Feed")]
    pub feed: String,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "MSE")]
    pub mse: f64,
    #[serde(rename = "MedAE")]
    pub medae: f64,
    #[serde(rename = "MaxErr")]
    pub max_err: f64,
    #[serde(rename = "TDP")]
    pub tdp: f64,
    #[serde(rename = "TDG")]
    pub tdg: f64,
    #[serde(rename = "MAPE")]
    pub mape: f64,
    #[serde(rename = "Stationary Score")]
    pub stationary_score: Option<f64>,
    #[serde(rename = "Delay (Window)")]
    pub delay_window: Option<f64>,
    #[serde(rename = "Delay (All)")]
    pub delay_all: Option<f64>,
    #[serde(rename = "Delay Score")]
    pub delay_score: Option<f64>,
    #[serde(rename = "Gas Consumption")]
    pub gas: f64,
    #[serde(rename = "Gas Score")]
    pub gas_score: Option<f64>,
    #[serde(rename = "Overall Resistance Efficiency Score")]
    pub overall: Option<f64>,
}
