use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{HarnessError, PricePoint, PriceSeries, Result};

/// Keeps the feed's value at Poisson arrival instants.
///
/// Inter-arrival gaps are exponential with the given rate. Arrivals are
/// floored to whole seconds and deduplicated, and each keeps the price in
/// effect at that second. Very high rates therefore reproduce a one-second
/// grid.
pub fn poisson_sample(series: &PriceSeries, rate_per_second: f64, seed: u64) -> Result<PriceSeries> {
    if !(rate_per_second.is_finite() && rate_per_second > 0.0) {
        return Err(HarnessError::InvalidConfig(format!(
            "sampling rate {rate_per_second} must be positive"
        )));
    }
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(HarnessError::EmptyFeed);
    };
    let exp = Exp::new(rate_per_second).expect("rate checked positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (last.t - first.t) as f64;
    let mut clock = 0.0;
    let mut points: Vec<PricePoint> = Vec::new();
    loop {
        clock += exp.sample(&mut rng);
        // The last point's second is [span, span + 1).
        if clock >= span + 1.0 {
            break;
        }
        let t = first.t + clock.floor() as i64;
        if points.last().is_some_and(|p| p.t == t) {
            continue;
        }
        let price = series.value_at(t).expect("t within the feed span");
        points.push(PricePoint::new(t, price));
    }
    PriceSeries::new(points)
}
