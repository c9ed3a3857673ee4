//! Price manipulation: scale a bounded number of points per window.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, PricePoint, PriceSeries, Result};
use crate::fixedmath::FixedQ64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackTargets {
    /// Explicit point indices.
    Indices(Vec<usize>),
    /// As many seeded random indices as the window budget allows, up to
    /// `count`.
    Random { count: usize },
}

/// At most `beta` manipulated points in any `window` consecutive points,
/// each multiplied by `magnitude`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub beta: usize,
    pub window: usize,
    pub targets: AttackTargets,
    pub magnitude: FixedQ64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub series: PriceSeries,
    /// Sorted indices of the scaled points.
    pub manipulated: Vec<usize>,
}

/// Largest number of sorted indices falling in any run of `window`
/// consecutive positions.
fn max_per_window(sorted: &[usize], window: usize) -> usize {
    let mut lo = 0;
    let mut best = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] - sorted[lo] >= window {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

impl AttackSpec {
    fn validate(&self, len: usize) -> Result<()> {
        let err = |m: String| Err(HarnessError::SpecOutOfRange(m));
        if self.window == 0 {
            return err("window must be positive".into());
        }
        if self.beta > self.window {
            return err(format!("beta {} exceeds window {}", self.beta, self.window));
        }
        if !self.magnitude.is_positive() {
            return err(format!("magnitude {} must be positive", self.magnitude));
        }
        if let AttackTargets::Indices(idx) = &self.targets {
            if let Some(bad) = idx.iter().find(|&&i| i >= len) {
                return err(format!("index {bad} beyond feed of {len} points"));
            }
        }
        Ok(())
    }

    fn select(&self, len: usize, seed: u64) -> Result<Vec<usize>> {
        let mut chosen = match &self.targets {
            AttackTargets::Indices(idx) => {
                let mut v = idx.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            AttackTargets::Random { count } => {
                let mut order: Vec<usize> = (0..len).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let mut picked: Vec<usize> = Vec::new();
                for i in order {
                    if picked.len() == *count {
                        break;
                    }
                    let pos = picked.partition_point(|&p| p < i);
                    picked.insert(pos, i);
                    if max_per_window(&picked, self.window) > self.beta {
                        picked.remove(pos);
                    }
                }
                picked
            }
        };
        if self.beta == 0 {
            chosen.clear();
        }
        let worst = max_per_window(&chosen, self.window);
        if worst > self.beta {
            return Err(HarnessError::SpecOutOfRange(format!(
                "{worst} targets within one window of {}, budget {}",
                self.window, self.beta
            )));
        }
        Ok(chosen)
    }
}

/// Multiplies the selected points by the magnitude; every other point is
/// left bit-identical.
pub fn inject_attack(series: &PriceSeries, spec: &AttackSpec, seed: u64) -> Result<AttackOutcome> {
    spec.validate(series.len())?;
    let manipulated = spec.select(series.len(), seed)?;
    let mut points: Vec<PricePoint> = series.points().to_vec();
    for &i in &manipulated {
        points[i].price = points[i].price.mul(spec.magnitude)?;
    }
    Ok(AttackOutcome {
        series: PriceSeries::new(points)?,
        manipulated,
    })
}
