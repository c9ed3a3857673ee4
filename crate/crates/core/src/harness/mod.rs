//! Backtesting harness: feeds, synthetic generators, sampling, attack
//! injection, metered replay and reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineError;
use crate::costmodel::CostError;
use crate::fixedmath::FixedError;
use crate::metrics::MetricsError;
use crate::ormer::OrmerError;

pub mod attack;
pub mod config;
pub mod replay;
pub mod report;
pub mod sampling;
mod series;
pub mod synth;

pub use attack::{inject_attack, AttackOutcome, AttackSpec, AttackTargets};
pub use config::{Config, ConfigWarning};
pub use replay::{evaluate_security, replay, ReplayOptions, ReplayOutput, SecurityCheck};
pub use report::{compare, emit_report, Comparison, OracleReport, Report};
pub use sampling::poisson_sample;
pub use series::{load_feed, parse_feed, save_feed, write_feed, PricePoint, PriceSeries};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: timestamp not after the previous row")]
    NonMonotonicTimestamp { row: usize },
    #[error("row {row}: price must be strictly positive")]
    NonPositivePrice { row: usize },
    #[error("attack spec out of range: {0}")]
    SpecOutOfRange(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown oracle {0:?}")]
    UnknownOracle(String),
    #[error("empty feed")]
    EmptyFeed,
    #[error(transparent)]
    Ormer(#[from] OrmerError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            Self::Io { message, .. } => Self::io(path, message),
            other => other,
        }
    }

    /// Stable machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::NonMonotonicTimestamp { .. } => "non_monotonic_timestamp",
            Self::NonPositivePrice { .. } => "non_positive_price",
            Self::SpecOutOfRange(_) => "spec_out_of_range",
            Self::InvalidConfig(_) => "invalid_config",
            Self::UnknownOracle(_) => "unknown_oracle",
            Self::EmptyFeed => "empty_feed",
            Self::Ormer(_) => "estimator",
            Self::Baseline(_) => "baseline",
            Self::Cost(_) => "cost",
            Self::Fixed(_) => "arithmetic",
            Self::Metrics(_) => "metrics",
        }
    }

    /// Input row the error refers to, if any.
    pub fn row(&self) -> Option<usize> {
        match self {
            Self::Parse { row, .. } | Self::NonMonotonicTimestamp { row } | Self::NonPositivePrice { row } => {
                Some(*row)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Twap,
    Ema,
    TrueMedian,
    OrmerMed,
    OrmerMedds,
}

impl OracleKind {
    pub const ALL: [OracleKind; 5] = [
        OracleKind::Twap,
        OracleKind::Ema,
        OracleKind::TrueMedian,
        OracleKind::OrmerMed,
        OracleKind::OrmerMedds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Twap => "twap",
            OracleKind::Ema => "ema",
            OracleKind::TrueMedian => "true-median",
            OracleKind::OrmerMed => "ormer-med",
            OracleKind::OrmerMedds => "ormer-medds",
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| HarnessError::UnknownOracle(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_names_roundtrip() {
        for k in OracleKind::ALL {
            assert_eq!(k.name().parse::<OracleKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("Ormer_MED".parse::<OracleKind>().unwrap(), OracleKind::OrmerMed);
        assert!(matches!("chainlink".parse::<OracleKind>(), Err(HarnessError::UnknownOracle(_))));
    }
}
