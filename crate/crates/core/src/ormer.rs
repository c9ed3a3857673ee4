//! Windowed median oracles built on the five-marker engine.
//!
//! [`WindowState`] runs the marker engine over consecutive windows of `L`
//! observations. At the end of each window the middle marker is frozen as the
//! previous estimate and the engine restarts. The published price blends the
//! previous and current estimates by how far the current window has
//! progressed:
//!
//! ```text
//! out = ((L - c) * previous + c * current) / L
//! ```
//!
//! so the output slides continuously from one window's median to the next.
//!
//! [`MedDsState`] runs a full and a half window side by side and
//! extrapolates along the slope between them:
//!
//! ```text
//! out = (half + full) / 2 * (half / full)
//! ```
//!
//! which cancels most of the lag a median of `T` observations carries on a
//! trending feed.
//!
//! Both states persist into fixed-size slot words: one for a single window,
//! two for the delay-suppressed pair.

use crate::fixedmath::{self, FixedError, FixedQ64, Tick, MAX_PRICE_TICK, MIN_PRICE_TICK};
use crate::p2core::{MarkerState, P2Error};
use crate::slotcodec::{decode_slot, encode_slot, PackedState, SlotError, SlotWord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrmerError {
    #[error("window size {0} below minimum {MIN_WINDOW}")]
    WindowTooSmall(u32),
    #[error("window size {0} above maximum 65535")]
    WindowTooLarge(u32),
    #[error("tick {0} outside the convertible price range")]
    TickOutOfRange(i32),
    #[error("invalid stored state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Marker(#[from] P2Error),
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error(transparent)]
    Slot(#[from] SlotError),
}

pub type Result<T> = std::result::Result<T, OrmerError>;

/// Smallest window: five observations boot the markers, one more moves them.
pub const MIN_WINDOW: u16 = 6;

/// Stored in place of the previous estimate before the first window closes.
/// It lies outside the convertible tick range, so it never collides with a
/// real estimate.
pub const NO_ESTIMATE: Tick = Tick::MIN;

fn check_tick(p: Tick) -> Result<()> {
    if (MIN_PRICE_TICK..=MAX_PRICE_TICK).contains(&p.get()) {
        Ok(())
    } else {
        Err(OrmerError::TickOutOfRange(p.get()))
    }
}

fn window_from(len: u32) -> Result<u16> {
    if len < MIN_WINDOW as u32 {
        return Err(OrmerError::WindowTooSmall(len));
    }
    u16::try_from(len).map_err(|_| OrmerError::WindowTooLarge(len))
}

/// Sliding-window median with blended output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WindowState {
    window: u16,
    last: Option<Tick>,
    inner: MarkerState,
}

impl WindowState {
    pub fn new(window: u32) -> Result<Self> {
        Ok(Self {
            window: window_from(window)?,
            last: None,
            inner: MarkerState::new(),
        })
    }

    pub fn window(&self) -> u16 {
        self.window
    }

    /// Observations received in the current window.
    pub fn count(&self) -> u16 {
        self.inner.count()
    }

    /// Median of the previous window, once one has closed.
    pub fn last_estimate(&self) -> Option<Tick> {
        self.last
    }

    pub fn markers(&self) -> &MarkerState {
        &self.inner
    }

    /// Feeds one observation and returns the published price.
    pub fn update(&mut self, p: Tick) -> Result<Option<FixedQ64>> {
        check_tick(p)?;
        self.inner.observe(p)?;
        if self.inner.count() == self.window {
            self.last = Some(self.inner.estimate_median()?);
            self.inner = MarkerState::new();
        }
        self.estimate()
    }

    /// Converts a price to its tick and feeds it.
    pub fn update_price(&mut self, p: FixedQ64) -> Result<Option<FixedQ64>> {
        self.update(fixedmath::price_to_tick(p)?)
    }

    /// Published price; a pure function of the stored state.
    ///
    /// `None` until the first window's markers boot. While a later window
    /// re-boots, the current estimate is the median of its buffered
    /// observations.
    pub fn estimate(&self) -> Result<Option<FixedQ64>> {
        let Some(last) = self.last else {
            return match self.inner.is_booted() {
                true => Ok(Some(fixedmath::tick_to_price(self.inner.estimate_median()?)?)),
                false => Ok(None),
            };
        };
        let previous = fixedmath::tick_to_price(last)?;
        // A median of fewer than five points has no outlier tolerance, so a
        // fresh window contributes nothing until its markers boot.
        if !self.inner.is_booted() {
            return Ok(Some(previous));
        }
        let current = fixedmath::tick_to_price(self.inner.estimate_median()?)?;
        Ok(Some(blend(self.window, self.count(), previous, current)?))
    }

    pub fn to_packed(&self) -> PackedState {
        PackedState {
            window_size: self.window,
            observation_count: self.inner.count(),
            last_estimation: self.last.unwrap_or(NO_ESTIMATE),
            positions: self.inner.positions(),
            heights: self.inner.heights(),
        }
    }

    pub fn from_packed(s: &PackedState) -> Result<Self> {
        s.validate().map_err(OrmerError::InvalidState)?;
        if s.observation_count >= s.window_size {
            return Err(OrmerError::InvalidState(format!(
                "observation count {} not below window {}",
                s.observation_count, s.window_size
            )));
        }
        let last = match s.last_estimation {
            NO_ESTIMATE => None,
            t => {
                check_tick(t)?;
                Some(t)
            }
        };
        Ok(Self {
            window: s.window_size,
            last,
            inner: MarkerState::from_parts(s.positions, s.heights, s.observation_count)?,
        })
    }

    pub fn persist(&self) -> SlotWord {
        encode_slot(&self.to_packed())
    }

    pub fn restore(word: SlotWord) -> Result<Self> {
        Self::from_packed(&decode_slot(word))
    }
}

/// `((L - c) * previous + c * current) / L`, floored. Integer weights keep
/// the result between the two inputs.
pub fn blend(window: u16, count: u16, previous: FixedQ64, current: FixedQ64) -> Result<FixedQ64> {
    let l = window as i128;
    let c = count as i128;
    let sum = previous.mul_int(l - c)?.checked_add(current.mul_int(c)?)?;
    Ok(sum.div_int(l)?)
}

/// `(short + long) / 2 * (short / long)`.
pub fn extrapolate(short: FixedQ64, long: FixedQ64) -> Result<FixedQ64> {
    if long.is_zero() {
        return Err(FixedError::DivisionByZero.into());
    }
    if short == long {
        return Ok(short);
    }
    let sum = short.checked_add(long)?;
    // multiplying first keeps integer inputs exact; fall back for huge prices
    let out = match sum.mul(short).and_then(|n| n.div(long)) {
        Ok(v) => v.half(),
        Err(FixedError::Overflow) => sum.half().mul(short.div(long)?)?,
        Err(e) => return Err(e.into()),
    };
    Ok(out)
}

/// Delay-suppressed median: a full window and a half window, combined by
/// [`extrapolate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MedDsState {
    full: WindowState,
    half: WindowState,
}

impl MedDsState {
    /// `window` is the full window; the half window is `window / 2` and must
    /// itself be at least [`MIN_WINDOW`].
    pub fn new(window: u32) -> Result<Self> {
        let half = window / 2;
        if half < MIN_WINDOW as u32 {
            return Err(OrmerError::WindowTooSmall(window));
        }
        Ok(Self {
            full: WindowState::new(window)?,
            half: WindowState::new(half)?,
        })
    }

    pub fn window(&self) -> u16 {
        self.full.window()
    }

    pub fn full(&self) -> &WindowState {
        &self.full
    }

    pub fn half(&self) -> &WindowState {
        &self.half
    }

    pub fn update(&mut self, p: Tick) -> Result<Option<FixedQ64>> {
        check_tick(p)?;
        self.full.update(p)?;
        self.half.update(p)?;
        self.estimate()
    }

    pub fn update_price(&mut self, p: FixedQ64) -> Result<Option<FixedQ64>> {
        self.update(fixedmath::price_to_tick(p)?)
    }

    /// `None` until both windows publish.
    pub fn estimate(&self) -> Result<Option<FixedQ64>> {
        match (self.half.estimate()?, self.full.estimate()?) {
            (Some(short), Some(long)) => Ok(Some(extrapolate(short, long)?)),
            _ => Ok(None),
        }
    }

    pub fn persist(&self) -> [SlotWord; 2] {
        [self.full.persist(), self.half.persist()]
    }

    pub fn restore(words: [SlotWord; 2]) -> Result<Self> {
        let full = WindowState::restore(words[0])?;
        let half = WindowState::restore(words[1])?;
        if half.window() != full.window() / 2 {
            return Err(OrmerError::InvalidState(format!(
                "half window {} is not half of {}",
                half.window(),
                full.window()
            )));
        }
        Ok(Self { full, half })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tick(v: i32) -> Tick {
        Tick::new(v).unwrap()
    }

    fn fx(v: i64) -> FixedQ64 {
        FixedQ64::from_int(v)
    }

    fn price_of(v: i32) -> FixedQ64 {
        fixedmath::tick_to_price(tick(v)).unwrap()
    }

    #[test]
    fn blend_arithmetic() {
        assert_eq!(blend(10, 4, fx(100), fx(110)).unwrap(), fx(104));
        assert_eq!(blend(10, 0, fx(100), fx(110)).unwrap(), fx(100));
        assert_eq!(blend(10, 10, fx(100), fx(110)).unwrap(), fx(110));
    }

    #[test]
    fn extrapolate_arithmetic() {
        assert_eq!(extrapolate(fx(100), fx(100)).unwrap(), fx(100));
        assert_eq!(extrapolate(fx(110), fx(100)).unwrap().to_f64(), 115.5);
        assert_eq!(extrapolate(fx(90), fx(100)).unwrap().to_f64(), 85.5);
        assert!(matches!(
            extrapolate(fx(1), FixedQ64::ZERO),
            Err(OrmerError::Fixed(FixedError::DivisionByZero))
        ));
        // overflow in the exact ordering falls back to dividing first
        let v = extrapolate(fx(4_400_000_000), fx(4_000_000_000)).unwrap();
        assert!((v.to_f64() - 4_620_000_000.0).abs() < 1e-6);
    }

    #[test]
    fn window_bounds() {
        assert_eq!(WindowState::new(5), Err(OrmerError::WindowTooSmall(5)));
        assert!(WindowState::new(6).is_ok());
        assert!(WindowState::new(65535).is_ok());
        assert_eq!(WindowState::new(65536), Err(OrmerError::WindowTooLarge(65536)));
        assert_eq!(MedDsState::new(11), Err(OrmerError::WindowTooSmall(11)));
        let m = MedDsState::new(13).unwrap();
        assert_eq!(m.half().window(), 6);
    }

    #[test]
    fn rejects_unconvertible_ticks() {
        let mut w = WindowState::new(10).unwrap();
        assert_eq!(w.update(NO_ESTIMATE), Err(OrmerError::TickOutOfRange(NO_ESTIMATE.get())));
        assert_eq!(w.count(), 0);
    }

    #[test]
    fn first_window_waits_for_boot() {
        let mut w = WindowState::new(10).unwrap();
        for _ in 0..4 {
            assert_eq!(w.update(tick(100)).unwrap(), None);
        }
        assert_eq!(w.update(tick(100)).unwrap(), Some(price_of(100)));
    }

    #[test]
    fn constant_feed_is_constant() {
        let mut w = WindowState::new(8).unwrap();
        let mut m = MedDsState::new(16).unwrap();
        for i in 0..100 {
            let a = w.update(tick(4000)).unwrap();
            let b = m.update(tick(4000)).unwrap();
            if i >= 4 {
                assert_eq!(a, Some(price_of(4000)));
                assert_eq!(b, Some(price_of(4000)));
            }
        }
    }

    #[test]
    fn step_feed_ramps_across_next_window() {
        // ticks 46052 and 52984 decode to about 100 and 200
        let (lo, hi) = (46052, 52984);
        let (plo, phi) = (price_of(lo), price_of(hi));
        let l = 10u16;
        let mut w = WindowState::new(l as u32).unwrap();
        for _ in 0..l {
            w.update(tick(lo)).unwrap();
        }
        assert_eq!(w.last_estimate(), Some(tick(lo)));
        assert_eq!(w.estimate().unwrap(), Some(plo));
        for c in 1..=l {
            let out = w.update(tick(hi)).unwrap().unwrap();
            let c = c % l;
            let want = match c {
                0 => phi,
                1..=4 => plo,
                _ => blend(l, c, plo, phi).unwrap(),
            };
            assert_eq!(out, want, "c = {c}");
            // closed form once booted: lo + (hi - lo) * c / L
            let closed = match c {
                0 => phi.to_f64(),
                1..=4 => plo.to_f64(),
                _ => plo.to_f64() + (phi.to_f64() - plo.to_f64()) * c as f64 / l as f64,
            };
            assert!((out.to_f64() - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn reboot_holds_previous_until_booted() {
        let mut w = WindowState::new(6).unwrap();
        for _ in 0..6 {
            w.update(tick(0)).unwrap();
        }
        // a lone spike opening the next window must not leak into the output
        assert_eq!(w.update(tick(20000)).unwrap(), Some(price_of(0)));
        for t in [5, 15, 10] {
            assert_eq!(w.update(tick(t)).unwrap(), Some(price_of(0)));
        }
        let out = w.update(tick(12)).unwrap().unwrap();
        assert_eq!(out, blend(6, 5, price_of(0), price_of(12)).unwrap());
    }

    #[test]
    fn persisted_sizes() {
        let w = WindowState::new(10).unwrap();
        assert_eq!(std::mem::size_of_val(&w.persist()) * 8, 256);
        let m = MedDsState::new(24).unwrap();
        assert_eq!(std::mem::size_of_val(&m.persist()) * 8, 512);
    }

    #[test]
    fn fresh_state_roundtrip() {
        let w = WindowState::new(10).unwrap();
        assert_eq!(WindowState::restore(w.persist()).unwrap(), w);
        assert_eq!(w.persist().to_packed_last(), NO_ESTIMATE);
    }

    trait LastField {
        fn to_packed_last(self) -> Tick;
    }
    impl LastField for SlotWord {
        fn to_packed_last(self) -> Tick {
            decode_slot(self).last_estimation
        }
    }

    #[test]
    fn restore_rejects_bad_words() {
        assert!(WindowState::restore(SlotWord::ZERO).is_err());
        let mut s = WindowState::new(10).unwrap().to_packed();
        s.observation_count = 10;
        assert!(WindowState::from_packed(&s).is_err());
        let mut s = WindowState::new(10).unwrap().to_packed();
        s.last_estimation = tick(400_000);
        assert!(WindowState::from_packed(&s).is_err());
        let a = WindowState::new(24).unwrap().persist();
        let b = WindowState::new(11).unwrap().persist();
        assert!(MedDsState::restore([a, b]).is_err());
    }

    #[test]
    fn medds_roundtrip_random_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let t = rng.random_range(12..200u32);
            let mut m = MedDsState::new(t).unwrap();
            let len = rng.random_range(0..3 * t as usize);
            let base = rng.random_range(-100_000..100_000);
            for _ in 0..len {
                m.update(tick(base + rng.random_range(-500..500))).unwrap();
            }
            let back = MedDsState::restore(m.persist()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.estimate().unwrap(), m.estimate().unwrap());
        }
    }

    #[test]
    fn persist_restore_every_step_matches_uninterrupted() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut live = MedDsState::new(30).unwrap();
        let mut words = live.persist();
        for _ in 0..2000 {
            let p = tick(rng.random_range(40_000..50_000));
            let a = live.update(p).unwrap();
            let mut cycled = MedDsState::restore(words).unwrap();
            let b = cycled.update(p).unwrap();
            words = cycled.persist();
            assert_eq!(a, b);
        }
    }

    proptest! {
        #[test]
        fn output_between_previous_and_current(values in proptest::collection::vec(-50_000i32..50_000, 1..200), l in 6u32..40) {
            let mut w = WindowState::new(l).unwrap();
            for v in values {
                let out = w.update(tick(v)).unwrap();
                if let (Some(out), Some(last)) = (out, w.last_estimate()) {
                    let prev = fixedmath::tick_to_price(last).unwrap();
                    let cur = w.markers().provisional_median().map(|t| fixedmath::tick_to_price(t).unwrap()).unwrap_or(prev);
                    prop_assert!(prev.min(cur) <= out && out <= prev.max(cur));
                }
            }
        }

        #[test]
        fn extrapolation_overshoots_in_trend_direction(short in 1i64..1_000_000, long in 1i64..1_000_000) {
            let (s, l) = (fx(short), fx(long));
            let out = extrapolate(s, l).unwrap();
            if short > long {
                prop_assert!(out > s);
            } else if short < long {
                prop_assert!(out < s);
            } else {
                prop_assert_eq!(out, s);
            }
        }
    }
}
