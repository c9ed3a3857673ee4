//! Reference oracles: time-weighted average, exponential moving average and
//! the exact sliding-window median.

use std::collections::VecDeque;

use crate::fixedmath::{FixedError, FixedQ64};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("no checkpoint at or before the window start")]
    InsufficientHistory,
    #[error("timestamp {got} not after {previous}")]
    NonMonotonicTimestamp { previous: i64, got: i64 },
    #[error("empty window")]
    EmptyWindow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Fixed(#[from] FixedError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

pub const DEFAULT_RING_CAPACITY: usize = 65536;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub timestamp: i64,
    pub cumulative: FixedQ64,
}

/// Cumulative price-seconds with a bounded ring of checkpoints.
///
/// An update at `t` with price `p` first credits the previous price for the
/// elapsed time, so the accumulator at `t` integrates the step function that
/// holds each price until the next update.
#[derive(Clone, Debug)]
pub struct TwapAccumulator {
    ring: VecDeque<Checkpoint>,
    capacity: usize,
    last_price: Option<FixedQ64>,
}

impl TwapAccumulator {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(BaselineError::InvalidParameter(format!(
                "ring capacity {capacity} below 2"
            )));
        }
        Ok(Self {
            ring: VecDeque::new(),
            capacity,
            last_price: None,
        })
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Checkpoint by position, oldest first.
    pub fn checkpoint(&self, i: usize) -> Option<Checkpoint> {
        self.ring.get(i).copied()
    }

    pub fn latest(&self) -> Option<Checkpoint> {
        self.ring.back().copied()
    }

    pub fn update(&mut self, t: i64, p: FixedQ64) -> Result<()> {
        let cumulative = match (self.ring.back(), self.last_price) {
            (Some(prev), Some(last)) => {
                if t <= prev.timestamp {
                    return Err(BaselineError::NonMonotonicTimestamp {
                        previous: prev.timestamp,
                        got: t,
                    });
                }
                let dt = (t - prev.timestamp) as i128;
                prev.cumulative.checked_add(last.mul_int(dt)?)?
            }
            _ => FixedQ64::ZERO,
        };
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(Checkpoint {
            timestamp: t,
            cumulative,
        });
        self.last_price = Some(p);
        Ok(())
    }

    /// Accumulator value at `t`, interpolating between checkpoints and
    /// extrapolating with the last price after the newest one.
    pub fn cumulative_at(&self, t: i64) -> Result<FixedQ64> {
        let first = self.ring.front().ok_or(BaselineError::InsufficientHistory)?;
        if t < first.timestamp {
            return Err(BaselineError::InsufficientHistory);
        }
        // last checkpoint with timestamp <= t
        let idx = self.ring.partition_point(|c| c.timestamp <= t) - 1;
        let at = self.ring[idx];
        let price = match self.ring.get(idx + 1) {
            Some(next) => next
                .cumulative
                .checked_sub(at.cumulative)?
                .div_int((next.timestamp - at.timestamp) as i128)?,
            None => self.last_price.expect("non-empty ring has a last price"),
        };
        Ok(at.cumulative.checked_add(price.mul_int((t - at.timestamp) as i128)?)?)
    }

    /// Time-weighted mean over `(now - window, now]`, where `now` is the
    /// newest checkpoint.
    pub fn query(&self, window: i64) -> Result<FixedQ64> {
        if window <= 0 {
            return Err(BaselineError::InvalidParameter(format!("window {window} not positive")));
        }
        let now = self.latest().ok_or(BaselineError::InsufficientHistory)?;
        let start = now.timestamp - window;
        let a_start = self.cumulative_at(start)?;
        Ok(now.cumulative.checked_sub(a_start)?.div_int(window as i128)?)
    }

    /// Checkpoint slots a query reads: a binary search over the ring plus the
    /// head.
    pub fn query_reads(&self) -> usize {
        let n = self.ring.len().max(1);
        (usize::BITS - (n - 1).leading_zeros()) as usize + 1
    }
}

/// Exponential moving average seeded with its first observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmaState {
    alpha: FixedQ64,
    value: Option<FixedQ64>,
}

impl EmaState {
    pub fn new(alpha: FixedQ64) -> Result<Self> {
        if !alpha.is_positive() || alpha > FixedQ64::ONE {
            return Err(BaselineError::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
        }
        Ok(Self { alpha, value: None })
    }

    /// `alpha = 2 / (window + 1)`.
    pub fn with_window(window: u32) -> Result<Self> {
        if window == 0 {
            return Err(BaselineError::InvalidParameter("window 0".into()));
        }
        Self::new(FixedQ64::from_ratio(2, window as i64 + 1)?.min(FixedQ64::ONE))
    }

    pub fn alpha(&self) -> FixedQ64 {
        self.alpha
    }

    pub fn value(&self) -> Option<FixedQ64> {
        self.value
    }

    pub fn update(&mut self, p: FixedQ64) -> Result<FixedQ64> {
        let next = match self.value {
            None => p,
            Some(v) => v.checked_add(p.checked_sub(v)?.mul(self.alpha)?)?,
        };
        self.value = Some(next);
        Ok(next)
    }
}

/// The last `window` prices, for the exact median.
#[derive(Clone, Debug)]
pub struct MedianBuffer {
    window: usize,
    values: VecDeque<FixedQ64>,
}

impl MedianBuffer {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(BaselineError::InvalidParameter("window 0".into()));
        }
        Ok(Self {
            window,
            values: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, p: FixedQ64) {
        if self.values.len() == self.window {
            self.values.pop_front();
        }
        self.values.push_back(p);
    }

    pub fn median(&self) -> Result<FixedQ64> {
        true_median(self.values.iter().copied())
    }
}

/// Exact median; an even count takes the mean of the middle pair, floored.
pub fn true_median(values: impl IntoIterator<Item = FixedQ64>) -> Result<FixedQ64> {
    let mut v: Vec<FixedQ64> = values.into_iter().collect();
    if v.is_empty() {
        return Err(BaselineError::EmptyWindow);
    }
    let mid = v.len() / 2;
    let (_, upper, _) = v.select_nth_unstable(mid);
    let upper = *upper;
    if v.len() % 2 == 1 {
        return Ok(upper);
    }
    let lower = *v[..mid].iter().max().expect("even length >= 2");
    // halve each side first so the sum cannot overflow
    let mean = lower.half().checked_add(upper.half())?;
    let carry = FixedQ64::from_raw(lower.raw() & upper.raw() & 1);
    Ok(mean.checked_add(carry)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fx(v: i64) -> FixedQ64 {
        FixedQ64::from_int(v)
    }

    fn twap(feed: &[(i64, i64)]) -> TwapAccumulator {
        let mut acc = TwapAccumulator::new(DEFAULT_RING_CAPACITY).unwrap();
        for &(t, p) in feed {
            acc.update(t, fx(p)).unwrap();
        }
        acc
    }

    #[test]
    fn twap_constant() {
        let acc = twap(&(0..50).map(|t| (t, 100)).collect::<Vec<_>>());
        assert_eq!(acc.query(20).unwrap(), fx(100));
        assert_eq!(acc.query(49).unwrap(), fx(100));
    }

    #[test]
    fn twap_two_levels() {
        // 100 held over [0, 10), 200 over [10, 20)
        let acc = twap(&[(0, 100), (10, 200), (20, 200)]);
        assert_eq!(acc.query(20).unwrap(), fx(150));
    }

    #[test]
    fn twap_single_spike() {
        let mut feed: Vec<(i64, i64)> = (0..=40).map(|t| (t, 100)).collect();
        feed[30].1 = 1000;
        let acc = twap(&feed);
        assert_eq!(acc.query(25).unwrap(), fx(136));
    }

    #[test]
    fn twap_interpolates_between_sparse_checkpoints() {
        // 100 over [0, 100), query window starts at 60
        let acc = twap(&[(0, 100), (100, 300), (110, 300)]);
        // (40 * 100 + 10 * 300) / 50
        assert_eq!(acc.query(50).unwrap(), fx(140));
    }

    #[test]
    fn twap_errors() {
        let mut acc = twap(&[(10, 100), (20, 100)]);
        assert_eq!(acc.query(11), Err(BaselineError::InsufficientHistory));
        assert_eq!(acc.query(10).unwrap(), fx(100));
        assert_eq!(
            acc.update(20, fx(1)),
            Err(BaselineError::NonMonotonicTimestamp { previous: 20, got: 20 })
        );
        assert!(TwapAccumulator::new(DEFAULT_RING_CAPACITY).unwrap().query(1).is_err());
    }

    #[test]
    fn twap_ring_evicts_oldest() {
        let mut acc = TwapAccumulator::new(4).unwrap();
        for t in 0..10 {
            acc.update(t, fx(100)).unwrap();
        }
        assert_eq!(acc.len(), 4);
        assert!(acc.query(3).is_ok());
        assert_eq!(acc.query(4), Err(BaselineError::InsufficientHistory));
    }

    #[test]
    fn query_reads_grow_logarithmically() {
        let acc = twap(&(0..1024).map(|t| (t, 1)).collect::<Vec<_>>());
        assert_eq!(acc.query_reads(), 11);
        let acc = twap(&[(0, 1)]);
        assert_eq!(acc.query_reads(), 1);
    }

    #[test]
    fn ema_examples() {
        let mut e = EmaState::new(FixedQ64::from_ratio(1, 2).unwrap()).unwrap();
        assert_eq!(e.update(fx(100)).unwrap(), fx(100));
        assert_eq!(e.update(fx(200)).unwrap(), fx(150));
        let mut one = EmaState::new(FixedQ64::ONE).unwrap();
        for p in [5, 900, 3, 42] {
            assert_eq!(one.update(fx(p)).unwrap(), fx(p));
        }
        let mut c = EmaState::with_window(20).unwrap();
        for _ in 0..100 {
            assert_eq!(c.update(fx(77)).unwrap(), fx(77));
        }
        assert!(EmaState::new(FixedQ64::ZERO).is_err());
        assert!(EmaState::new(fx(2)).is_err());
        assert_eq!(EmaState::with_window(1).unwrap().alpha(), FixedQ64::ONE);
    }

    #[test]
    fn ema_step_converges_monotonically() {
        let mut e = EmaState::with_window(9).unwrap();
        e.update(fx(100)).unwrap();
        let mut prev = fx(100);
        for _ in 0..200 {
            let v = e.update(fx(200)).unwrap();
            assert!(v >= prev && v <= fx(200));
            prev = v;
        }
        assert!((prev.to_f64() - 200.0).abs() < 1e-6);
    }

    #[test]
    fn median_examples() {
        assert_eq!(true_median([1, 2, 3, 4, 5].map(fx)).unwrap(), fx(3));
        assert_eq!(true_median([1, 2, 3, 4].map(fx)).unwrap().to_f64(), 2.5);
        assert_eq!(true_median([100, 100, 1000, 100, 100].map(fx)).unwrap(), fx(100));
        assert_eq!(true_median(std::iter::empty()), Err(BaselineError::EmptyWindow));
        assert_eq!(true_median([FixedQ64::MAX, FixedQ64::MAX]).unwrap(), FixedQ64::MAX);
    }

    #[test]
    fn median_buffer_slides() {
        let mut b = MedianBuffer::new(3).unwrap();
        assert!(b.median().is_err());
        for p in [1, 9, 5, 7] {
            b.push(fx(p));
        }
        // window holds 9, 5, 7
        assert_eq!(b.median().unwrap(), fx(7));
    }

    proptest! {
        #[test]
        fn twap_is_linear(prices in proptest::collection::vec(1i64..10_000, 30..80), scale in 1i64..50) {
            let feed: Vec<_> = prices.iter().enumerate().map(|(t, &p)| (t as i64, p)).collect();
            let scaled: Vec<_> = feed.iter().map(|&(t, p)| (t, p * scale)).collect();
            let a = twap(&feed).query(20).unwrap();
            let b = twap(&scaled).query(20).unwrap();
            // floor division loses under one ulp before scaling
            let diff = (a.mul_int(scale as i128).unwrap().raw() - b.raw()).abs();
            prop_assert!(diff <= scale as i128, "{} ulps", diff);
        }

        #[test]
        fn median_matches_sort(values in proptest::collection::vec(-1_000_000i64..1_000_000, 1..60)) {
            let mut sorted = values.clone();
            sorted.sort();
            let n = sorted.len();
            let want = if n % 2 == 1 {
                fx(sorted[n / 2])
            } else {
                FixedQ64::from_ratio(sorted[n / 2 - 1] + sorted[n / 2], 2).unwrap()
            };
            prop_assert_eq!(true_median(values.into_iter().map(fx)).unwrap(), want);
        }

        #[test]
        fn median_breakdown(base in proptest::collection::vec(0i64..1000, 11), extremes in proptest::collection::vec(any::<bool>(), 5)) {
            // distinct values, replace up to floor((L-1)/2) below-median ones
            let mut values: Vec<i64> = base.iter().enumerate().map(|(i, v)| v * 100 + i as i64).collect();
            values.sort();
            let med = true_median(values.iter().copied().map(fx)).unwrap();
            for (i, high) in extremes.iter().enumerate() {
                values[i] = if *high { -1_000_000 } else { -2_000_000 };
            }
            prop_assert_eq!(true_median(values.into_iter().map(fx)).unwrap(), med);
        }
    }
}
