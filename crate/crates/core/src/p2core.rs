//! Five-marker piecewise-parabolic streaming median.
//!
//! Markers track the minimum, the quartiles and the maximum of everything
//! observed since the last reset. Heights live in the tick domain so the
//! whole state fits the packed slot layout; every adjusted height is rounded
//! back to the nearest tick.
//!
//! The update follows the classic P² scheme:
//!
//! 1. the first five observations are buffered, then sorted into the markers;
//! 2. each later observation selects the cell `k` it falls into (stretching
//!    the boundary markers when it is a new extreme);
//! 3. markers above the cell shift right by one position;
//! 4. each inner marker whose position lags its desired position
//!    `count * [0, 1/4, 1/2, 3/4, 1]` by at least one moves one step toward
//!    it, provided it does not collide with its neighbour. Its height is
//!    re-estimated with the parabola through itself and both neighbours,
//!    or linearly toward the neighbour it moves to when the parabola would
//!    break height ordering.

use crate::fixedmath::{FixedError, FixedQ64, Tick};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum P2Error {
    #[error("estimator not booted: {count} of 5 observations")]
    NotBooted { count: u16 },
    #[error("estimator already booted")]
    AlreadyBooted,
    #[error("observation count overflow at 65535")]
    CountOverflow,
    #[error("degenerate marker spacing")]
    DegenerateSpacing,
    #[error("invalid marker state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Fixed(#[from] FixedError),
}

pub type Result<T> = std::result::Result<T, P2Error>;

/// Observations needed before the markers are initialised.
pub const BOOT_COUNT: u16 = 5;

/// Desired-position increments in quarters: `[0, 1/4, 1/2, 3/4, 1]`.
const DESIRED_QUARTERS: [i64; 5] = [0, 1, 2, 3, 4];

/// Direction of a single marker move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Left,
    Right,
}

impl Step {
    pub const fn sign(self) -> i64 {
        match self {
            Step::Left => -1,
            Step::Right => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MarkerState {
    positions: [u16; 5],
    heights: [Tick; 5],
    count: u16,
}

impl Default for MarkerState {
    fn default() -> Self {
        Self {
            positions: [1, 2, 3, 4, 5],
            heights: [Tick::ZERO; 5],
            count: 0,
        }
    }
}

impl MarkerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a state from stored fields, checking the marker invariants.
    pub fn from_parts(positions: [u16; 5], heights: [Tick; 5], count: u16) -> Result<Self> {
        let s = Self {
            positions,
            heights,
            count,
        };
        s.check_invariants().map_err(P2Error::InvalidState)?;
        Ok(s)
    }

    pub fn positions(&self) -> [u16; 5] {
        self.positions
    }

    pub fn heights(&self) -> [Tick; 5] {
        self.heights
    }

    pub fn count(&self) -> u16 {
        self.count
    }

    pub fn is_booted(&self) -> bool {
        self.count >= BOOT_COUNT
    }

    /// Ordering invariants, plus the bracketing `n[0] = 1`, `n[4] = count`
    /// once booted.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("positions {:?} not strictly increasing", self.positions));
        }
        if self.is_booted() {
            if self.heights.windows(2).any(|w| w[0] > w[1]) {
                return Err(format!("heights {:?} not ascending", self.heights));
            }
            if self.positions[0] != 1 || self.positions[4] != self.count {
                return Err(format!(
                    "positions {:?} do not bracket count {}",
                    self.positions, self.count
                ));
            }
        } else if self.positions != [1, 2, 3, 4, 5] {
            return Err(format!("unbooted positions {:?}", self.positions));
        }
        Ok(())
    }

    /// Buffers one of the first five observations; the fifth sorts the
    /// buffer into the markers.
    pub fn init_observe(&mut self, p: Tick) -> Result<()> {
        if self.is_booted() {
            return Err(P2Error::AlreadyBooted);
        }
        self.heights[self.count as usize] = p;
        self.count += 1;
        if self.count == BOOT_COUNT {
            self.heights.sort_unstable();
            self.positions = [1, 2, 3, 4, 5];
        }
        Ok(())
    }

    /// Cell `k` with `h[k] <= p <= h[k+1]`, first match wins; new extremes
    /// replace the boundary marker heights.
    pub fn find_cell(&mut self, p: Tick) -> Result<usize> {
        if !self.is_booted() {
            return Err(P2Error::NotBooted { count: self.count });
        }
        let h = &mut self.heights;
        let k = if p < h[0] {
            h[0] = p;
            0
        } else if p <= h[1] {
            0
        } else if p <= h[2] {
            1
        } else if p <= h[3] {
            2
        } else {
            if p > h[4] {
                h[4] = p;
            }
            3
        };
        Ok(k)
    }

    /// Feeds one observation.
    pub fn observe(&mut self, p: Tick) -> Result<()> {
        if !self.is_booted() {
            return self.init_observe(p);
        }
        if self.count == u16::MAX {
            return Err(P2Error::CountOverflow);
        }
        self.count += 1;
        let k = self.find_cell(p)?;
        for n in &mut self.positions[k + 1..] {
            *n += 1;
        }

        let count = self.count as i64;
        for i in 1..4 {
            let n = |j: usize| self.positions[j] as i64;
            // desired - actual, in quarters
            let lag_q = count * DESIRED_QUARTERS[i] - 4 * n(i);
            let step = if lag_q >= 4 && n(i + 1) - n(i) > 1 {
                Step::Right
            } else if lag_q <= -4 && n(i - 1) - n(i) < -1 {
                Step::Left
            } else {
                continue;
            };

            let h = |j: usize| FixedQ64::from_int(self.heights[j].get() as i64);
            let candidate = parabolic_adjust(
                [n(i - 1), n(i), n(i + 1)],
                [h(i - 1), h(i), h(i + 1)],
                step,
            )?;
            let adjusted = if h(i - 1) < candidate && candidate < h(i + 1) {
                candidate
            } else {
                let j = (i as i64 + step.sign()) as usize;
                linear_adjust(n(i), n(j), h(i), h(j), step)?
            };
            self.heights[i] = quantize(adjusted)?;
            self.positions[i] = (n(i) + step.sign()) as u16;
        }
        Ok(())
    }

    /// The middle marker.
    pub fn estimate_median(&self) -> Result<Tick> {
        if !self.is_booted() {
            return Err(P2Error::NotBooted { count: self.count });
        }
        Ok(self.heights[2])
    }

    /// Median of whatever has been seen so far: the middle marker once
    /// booted, otherwise the exact median of the buffered observations
    /// (even counts average the middle pair, rounded to nearest tick).
    /// `None` before the first observation.
    pub fn provisional_median(&self) -> Option<Tick> {
        match self.count {
            0 => None,
            c if c >= BOOT_COUNT => Some(self.heights[2]),
            c => {
                let mut buf = self.heights;
                let buf = &mut buf[..c as usize];
                buf.sort_unstable();
                let mid = buf.len() / 2;
                if buf.len() % 2 == 1 {
                    Some(buf[mid])
                } else {
                    let sum = buf[mid - 1].get() as i64 + buf[mid].get() as i64;
                    // ticks are 24-bit, the mean of two always fits
                    let mean = FixedQ64::from_int(sum).half().round_to_int();
                    Some(Tick::from_i128(mean).expect("mean of two ticks is a tick"))
                }
            }
        }
    }
}

fn quantize(h: FixedQ64) -> Result<Tick> {
    Ok(Tick::from_i128(h.round_to_int())?)
}

/// Height of the parabola through three markers, evaluated one step from
/// the middle one:
///
/// ```text
/// h' = h + d/(n₊ - n₋) · [ (n - n₋ + d)(h₊ - h)/(n₊ - n) + (n₊ - n - d)(h - h₋)/(n - n₋) ]
/// ```
pub fn parabolic_adjust(positions: [i64; 3], heights: [FixedQ64; 3], step: Step) -> Result<FixedQ64> {
    let [n_prev, n_i, n_next] = positions;
    let [h_prev, h_i, h_next] = heights;
    let d = step.sign();
    if n_next == n_i || n_i == n_prev || n_next == n_prev {
        return Err(P2Error::DegenerateSpacing);
    }
    let toward_next = h_next
        .checked_sub(h_i)?
        .mul_int((n_i - n_prev + d) as i128)?
        .div_int((n_next - n_i) as i128)?;
    let toward_prev = h_i
        .checked_sub(h_prev)?
        .mul_int((n_next - n_i - d) as i128)?
        .div_int((n_i - n_prev) as i128)?;
    let delta = toward_next
        .checked_add(toward_prev)?
        .mul_int(d as i128)?
        .div_int((n_next - n_prev) as i128)?;
    Ok(h_i.checked_add(delta)?)
}

/// Height one step along the segment toward the neighbour at `n_i + d`.
pub fn linear_adjust(
    n_i: i64,
    n_neighbor: i64,
    h_i: FixedQ64,
    h_neighbor: FixedQ64,
    step: Step,
) -> Result<FixedQ64> {
    if n_neighbor == n_i {
        return Err(P2Error::DegenerateSpacing);
    }
    let delta = h_neighbor
        .checked_sub(h_i)?
        .mul_int(step.sign() as i128)?
        .div_int((n_neighbor - n_i) as i128)?;
    Ok(h_i.checked_add(delta)?)
}
