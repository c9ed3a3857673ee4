//! Run configuration, loaded from TOML.
//!
//! ```toml
//! oracles = ["twap", "ormer-med", "ormer-medds"]
//! window = 25
//! seed = 7
//! baseline = "true-median"
//! sampling_rate = 0.2      # optional Poisson thinning of the input
//! epsilon = 10.0           # deviation bound, required with [attack]
//!
//! [cost]
//! read_cold = 2100
//!
//! [weights]
//! stationary = 1.0
//! delay = 2.0
//! gas = 2.0
//!
//! [attack]
//! beta = 1
//! magnitude = 10.0
//! at = [40]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::attack::{AttackSpec, AttackTargets};
use super::replay::ReplayOptions;
use super::{HarnessError, OracleKind, Result};
use crate::baselines::DEFAULT_RING_CAPACITY;
use crate::costmodel::CostTable;
use crate::fixedmath::FixedQ64;
use crate::metrics::ScoreWeights;

/// Smallest windows at which the median oracles settle; smaller windows
/// are accepted with a warning.
pub const MED_MIN_STABLE_WINDOW: u32 = 9;
pub const MEDDS_MIN_STABLE_WINDOW: u32 = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub oracles: Vec<OracleKind>,
    pub window: u32,
    pub seed: u64,
    /// Oracle the scores are relative to.
    pub baseline: OracleKind,
    pub epsilon: Option<f64>,
    pub sampling_rate: Option<f64>,
    /// Metric resampling step, seconds.
    pub grid_step: i64,
    /// Chunk length for the windowed delay, seconds.
    pub delay_window: i64,
    /// Largest lag searched, seconds.
    pub delay_cap: i64,
    pub twap_window_seconds: Option<i64>,
    pub ring_capacity: usize,
    pub plot: bool,
    pub cost: CostTable,
    pub weights: ScoreWeights,
    pub attack: Option<AttackConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            oracles: OracleKind::ALL.to_vec(),
            window: 25,
            seed: 0,
            baseline: OracleKind::TrueMedian,
            epsilon: None,
            sampling_rate: None,
            grid_step: 1,
            delay_window: 3600,
            delay_cap: 1800,
            twap_window_seconds: None,
            ring_capacity: DEFAULT_RING_CAPACITY,
            plot: true,
            cost: CostTable::default(),
            weights: ScoreWeights::default(),
            attack: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub beta: usize,
    /// Defaults to the oracle window.
    pub window: Option<usize>,
    pub magnitude: f64,
    #[serde(default)]
    pub at: Vec<usize>,
    /// Seeded random targets instead of `at`.
    pub random: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigWarning(pub String);

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Hard errors for unusable settings, warnings for windows below the
    /// stable thresholds.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.oracles.is_empty() {
            return bad("no oracles selected".into());
        }
        if self.grid_step <= 0 || self.delay_window <= 0 || self.delay_cap < 0 {
            return bad("grid_step and delay_window must be positive, delay_cap non-negative".into());
        }
        if let Some(r) = self.sampling_rate {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("sampling_rate {r} must be positive"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return bad(format!("epsilon {e} must be non-negative"));
            }
        }
        ScoreWeights::new(self.weights.stationary, self.weights.delay, self.weights.gas)?;
        if self.attack.is_some() && self.epsilon.is_none() {
            return bad("epsilon is required with an attack".into());
        }
        let mut warnings = Vec::new();
        let has = |k| self.oracles.contains(&k);
        if has(OracleKind::OrmerMedds) && self.window < MEDDS_MIN_STABLE_WINDOW {
            warnings.push(ConfigWarning(format!(
                "ormer-medds window {} below {MEDDS_MIN_STABLE_WINDOW}: half-window estimates are unstable",
                self.window
            )));
        }
        if has(OracleKind::OrmerMed) && self.window < MED_MIN_STABLE_WINDOW {
            warnings.push(ConfigWarning(format!(
                "ormer-med window {} below {MED_MIN_STABLE_WINDOW}: markers barely move before reset",
                self.window
            )));
        }
        Ok(warnings)
    }

    pub fn replay_options(&self) -> ReplayOptions {
        ReplayOptions {
            window: self.window,
            twap_window_seconds: self.twap_window_seconds,
            ring_capacity: self.ring_capacity,
            cost_table: self.cost,
        }
    }

    pub fn attack_spec(&self) -> Result<Option<AttackSpec>> {
        let Some(a) = &self.attack else {
            return Ok(None);
        };
        Ok(Some(AttackSpec {
            beta: a.beta,
            window: a.window.unwrap_or(self.window as usize),
            targets: match a.random {
                Some(count) => AttackTargets::Random { count },
                None => AttackTargets::Indices(a.at.clone()),
            },
            magnitude: magnitude_from_f64(a.magnitude)?,
        }))
    }
}

/// Exact decimal reading of the shortest `f64` rendering, so `1.1` becomes
/// 1.1 rather than its binary neighbour.
pub fn magnitude_from_f64(v: f64) -> Result<FixedQ64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(HarnessError::SpecOutOfRange(format!("magnitude {v} must be positive")));
    }
    Ok(v.to_string().parse()?)
}
