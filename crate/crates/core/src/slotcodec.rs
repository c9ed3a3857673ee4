//! Packing of one estimator state into a single 256-bit storage word.
//!
//! Layout, most significant bits first:
//!
//! | bits      | field              | width  | signed |
//! |-----------|--------------------|--------|--------|
//! | 255..240  | window size        | 16     | no     |
//! | 239..224  | observation count  | 16     | no     |
//! | 223..200  | last estimation    | 24     | yes    |
//! | 199..120  | marker positions   | 16 × 5 | no     |
//! | 119..0    | marker heights     | 24 × 5 | yes    |
//!
//! Marker index 0 occupies the highest bits of its group. Signed fields are
//! two's complement.

use std::fmt;
use std::str::FromStr;

use ethnum::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::fixedmath::Tick;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SlotError {
    #[error("field {field} value {value} does not fit in {bits} bits")]
    FieldOutOfRange {
        field: &'static str,
        value: i64,
        bits: u32,
    },
    #[error("invalid slot word hex: {0}")]
    BadHex(String),
}

/// A 256-bit storage word.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotWord(U256);

impl SlotWord {
    pub const ZERO: SlotWord = SlotWord(U256::ZERO);
    pub const BITS: u32 = 256;

    pub const fn from_u256(v: U256) -> Self {
        Self(v)
    }

    pub const fn as_u256(self) -> U256 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == U256::ZERO
    }

    pub fn to_be_bytes(self) -> [u8; 32] {
        self.0.to_be_bytes()
    }

    /// 64 lowercase hex characters, big-endian.
    pub fn to_hex(self) -> String {
        format!("{:064x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, SlotError> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.len() != 64 {
            return Err(SlotError::BadHex(s.to_string()));
        }
        U256::from_str_radix(digits, 16)
            .map(Self)
            .map_err(|_| SlotError::BadHex(s.to_string()))
    }

    fn field(self, lsb: u32, width: u32) -> u32 {
        ((self.0 >> lsb).as_u32()) & ((1u32 << width) - 1)
    }

    fn with_field(self, lsb: u32, width: u32, value: u32) -> Self {
        debug_assert!(width == 32 || value < (1u32 << width));
        Self(self.0 | (U256::from(value) << lsb))
    }
}

impl fmt::Debug for SlotWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SlotWord(0x{})", self.to_hex())
    }
}

impl fmt::Display for SlotWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for SlotWord {
    type Err = SlotError;
    fn from_str(s: &str) -> Result<Self, SlotError> {
        Self::from_hex(s)
    }
}

impl Serialize for SlotWord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for SlotWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Field view of one packed estimator slot.
///
/// Any combination of field values encodes; semantic validity (window
/// bounds, marker ordering) is checked by [`PackedState::validate`] and by
/// the estimators that own the state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PackedState {
    pub window_size: u16,
    pub observation_count: u16,
    pub last_estimation: Tick,
    pub positions: [u16; 5],
    pub heights: [Tick; 5],
}

const WINDOW_LSB: u32 = 240;
const COUNT_LSB: u32 = 224;
const LAST_LSB: u32 = 200;
const POSITIONS_LSB: u32 = 120;
const HEIGHTS_LSB: u32 = 0;
const TICK_MASK: u32 = (1 << Tick::BITS) - 1;

fn tick_bits(t: Tick) -> u32 {
    (t.get() as u32) & TICK_MASK
}

fn tick_from_bits(bits: u32) -> Tick {
    // sign-extend from 24 bits
    let v = ((bits << 8) as i32) >> 8;
    Tick::new(v).expect("24-bit value is always a valid tick")
}

pub fn encode_slot(s: &PackedState) -> SlotWord {
    let mut w = SlotWord::ZERO
        .with_field(WINDOW_LSB, 16, s.window_size as u32)
        .with_field(COUNT_LSB, 16, s.observation_count as u32)
        .with_field(LAST_LSB, 24, tick_bits(s.last_estimation));
    for i in 0..5 {
        let pos_lsb = POSITIONS_LSB + 16 * (4 - i as u32);
        let h_lsb = HEIGHTS_LSB + 24 * (4 - i as u32);
        w = w
            .with_field(pos_lsb, 16, s.positions[i] as u32)
            .with_field(h_lsb, 24, tick_bits(s.heights[i]));
    }
    w
}

pub fn decode_slot(w: SlotWord) -> PackedState {
    let mut s = PackedState {
        window_size: w.field(WINDOW_LSB, 16) as u16,
        observation_count: w.field(COUNT_LSB, 16) as u16,
        last_estimation: tick_from_bits(w.field(LAST_LSB, 24)),
        ..PackedState::default()
    };
    for i in 0..5 {
        s.positions[i] = w.field(POSITIONS_LSB + 16 * (4 - i as u32), 16) as u16;
        s.heights[i] = tick_from_bits(w.field(HEIGHTS_LSB + 24 * (4 - i as u32), 24));
    }
    s
}

/// Narrows a wide value into a 16-bit unsigned slot field.
pub fn narrow_u16(field: &'static str, value: impl TryInto<u16> + Copy + Into<i64>) -> Result<u16, SlotError> {
    value.try_into().map_err(|_| SlotError::FieldOutOfRange {
        field,
        value: value.into(),
        bits: 16,
    })
}

/// Narrows a wide value into a 24-bit signed slot field.
pub fn narrow_tick(field: &'static str, value: i64) -> Result<Tick, SlotError> {
    i32::try_from(value)
        .ok()
        .and_then(|v| Tick::new(v).ok())
        .ok_or(SlotError::FieldOutOfRange {
            field,
            value,
            bits: Tick::BITS,
        })
}

impl PackedState {
    /// Estimator-level invariants: window in `6..=65535`, count within the
    /// window, strictly increasing positions and, once booted (five or more
    /// observations), non-decreasing heights.
    pub fn validate(&self) -> Result<(), String> {
        if self.window_size < 6 {
            return Err(format!("window size {} below 6", self.window_size));
        }
        if self.observation_count > self.window_size {
            return Err(format!(
                "observation count {} exceeds window {}",
                self.observation_count, self.window_size
            ));
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("positions {:?} not strictly increasing", self.positions));
        }
        if self.observation_count >= 5 && self.heights.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("heights {:?} not ascending", self.heights));
        }
        Ok(())
    }
}

/// How a storage write changes a slot, which determines its cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteTransition {
    ZeroToNonzero,
    NonzeroToNonzero,
    ToZero,
}

impl WriteTransition {
    /// Zero-to-zero writes are classed as `ToZero`; rewriting the same
    /// nonzero value is `NonzeroToNonzero`.
    pub fn classify(old: SlotWord, new: SlotWord) -> Self {
        match (old.is_zero(), new.is_zero()) {
            (_, true) => WriteTransition::ToZero,
            (true, false) => WriteTransition::ZeroToNonzero,
            (false, false) => WriteTransition::NonzeroToNonzero,
        }
    }
}
