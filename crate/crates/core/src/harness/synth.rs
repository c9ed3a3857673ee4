//! Seeded synthetic reference feeds on a one-second grid.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{HarnessError, PricePoint, PriceSeries, Result};
use crate::fixedmath::FixedQ64;

/// First timestamp of every generated feed.
pub const EPOCH: i64 = 1_700_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Gbm,
    Ramp,
    CaseStudy,
}

impl FromStr for SynthKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gbm" => Ok(Self::Gbm),
            "ramp" => Ok(Self::Ramp),
            "case-study" | "case_study" => Ok(Self::CaseStudy),
            other => Err(HarnessError::InvalidConfig(format!("unknown synth kind {other:?}"))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gbm => "gbm",
            Self::Ramp => "ramp",
            Self::CaseStudy => "case-study",
        })
    }
}

/// Geometric Brownian motion, per-second parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub start_price: f64,
    pub drift: f64,
    pub volatility: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            start_price: 100.0,
            drift: 0.0,
            volatility: 0.0005,
        }
    }
}

/// Linear trend plus a sine swing plus Gaussian noise, all relative to the
/// start price.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampParams {
    pub start_price: f64,
    pub slope: f64,
    pub sine_amplitude: f64,
    pub sine_period: f64,
    pub noise: f64,
}

impl Default for RampParams {
    fn default() -> Self {
        Self {
            start_price: 100.0,
            slope: 2e-6,
            sine_amplitude: 0.05,
            sine_period: 7200.0,
            noise: 0.002,
        }
    }
}

/// Flat level with light noise, the backdrop of the spike case study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub level: f64,
    pub noise: f64,
}

impl Default for LevelParams {
    fn default() -> Self {
        Self {
            level: 407.0,
            noise: 0.0005,
        }
    }
}

fn to_series(values: impl Iterator<Item = f64>) -> Result<PriceSeries> {
    let points = values
        .enumerate()
        .map(|(i, v)| {
            // six decimals keeps CSV output short and exact
            let price: FixedQ64 = format!("{v:.6}").parse()?;
            Ok(PricePoint::new(EPOCH + i as i64, price))
        })
        .collect::<Result<Vec<_>>>()?;
    PriceSeries::new(points)
}

fn check_len(seconds: u64) -> Result<()> {
    if seconds == 0 {
        return Err(HarnessError::InvalidConfig("seconds must be positive".into()));
    }
    Ok(())
}

pub fn gbm(seconds: u64, seed: u64, params: GbmParams) -> Result<PriceSeries> {
    check_len(seconds)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = params.drift - params.volatility.powi(2) / 2.0;
    let mut price = params.start_price;
    to_series((0..seconds).map(|i| {
        if i > 0 {
            price *= (step + params.volatility * normal.sample(&mut rng)).exp();
        }
        price
    }))
}

pub fn ramp(seconds: u64, seed: u64, params: RampParams) -> Result<PriceSeries> {
    check_len(seconds)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    to_series((0..seconds).map(|i| {
        let t = i as f64;
        let shape = 1.0
            + params.slope * t
            + params.sine_amplitude * (tau * t / params.sine_period).sin()
            + params.noise * normal.sample(&mut rng);
        params.start_price * shape
    }))
}

pub fn level(seconds: u64, seed: u64, params: LevelParams) -> Result<PriceSeries> {
    check_len(seconds)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    to_series((0..seconds).map(|_| params.level * (1.0 + params.noise * normal.sample(&mut rng))))
}

/// Generator with default parameters.
pub fn synth(kind: SynthKind, seconds: u64, seed: u64) -> Result<PriceSeries> {
    match kind {
        SynthKind::Gbm => gbm(seconds, seed, GbmParams::default()),
        SynthKind::Ramp => ramp(seconds, seed, RampParams::default()),
        SynthKind::CaseStudy => level(seconds, seed, LevelParams::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_gridded() {
        for kind in [SynthKind::Gbm, SynthKind::Ramp, SynthKind::CaseStudy] {
            let a = synth(kind, 500, 3).unwrap();
            assert_eq!(a, synth(kind, 500, 3).unwrap());
            assert_ne!(a, synth(kind, 500, 4).unwrap());
            assert_eq!(a.len(), 500);
            assert!(a.timestamps().zip(EPOCH..).all(|(t, want)| t == want));
        }
    }

    #[test]
    fn gbm_log_returns_match_volatility() {
        let p = GbmParams::default();
        let s = gbm(50_000, 1, p).unwrap();
        let prices: Vec<f64> = s.prices().map(FixedQ64::to_f64).collect();
        let r: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
        // six-decimal rounding adds ~3e-9 of noise per step
        assert!((sd - p.volatility).abs() / p.volatility < 0.02, "sd {sd}");
    }

    #[test]
    fn case_study_stays_near_level() {
        let s = synth(SynthKind::CaseStudy, 1000, 7).unwrap();
        assert!(s.prices().all(|p| (p.to_f64() - 407.0).abs() < 5.0));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("case-study".parse::<SynthKind>().unwrap(), SynthKind::CaseStudy);
        assert_eq!(SynthKind::Ramp.to_string(), "ramp");
        assert!("noise".parse::<SynthKind>().is_err());
        assert!(synth(SynthKind::Gbm, 0, 1).is_err());
    }
}
