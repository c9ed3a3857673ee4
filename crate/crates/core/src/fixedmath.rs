//! Signed 64.64 fixed-point numbers and tick (log base 1.0001) prices.
//!
//! Every numeric path that ends up in persisted oracle state goes through
//! this module. Nothing here touches platform floating point, so results are
//! bit-identical everywhere. `f64` conversions exist for reporting and for the
//! synthetic feed generators only.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ethnum::{I256, U256};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixedError {
    #[error("fixed-point overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("price must be strictly positive")]
    NonPositivePrice,
    #[error("tick {0} outside the representable range")]
    TickOutOfRange(i64),
    #[error("cannot parse {0:?} as a decimal number")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FixedError>;

const FRAC_BITS: u32 = 64;
const ONE_RAW: i128 = 1 << FRAC_BITS;

/// A signed 64.64 fixed-point number: `raw / 2^64`.
///
/// Integers with `|v| < 2^63` are represented exactly.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedQ64 {
    raw: i128,
}

impl FixedQ64 {
    pub const ZERO: Self = Self { raw: 0 };
    pub const ONE: Self = Self { raw: ONE_RAW };
    pub const MAX: Self = Self { raw: i128::MAX };
    pub const MIN: Self = Self { raw: i128::MIN };

    pub const fn from_raw(raw: i128) -> Self {
        Self { raw }
    }

    pub const fn raw(self) -> i128 {
        self.raw
    }

    pub const fn from_int(v: i64) -> Self {
        Self {
            raw: (v as i128) << FRAC_BITS,
        }
    }

    /// `num / den`, floored.
    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        fp_div(Self::from_int(num), Self::from_int(den))
    }

    /// Nearest representable value below `v` (floor of `v * 2^64`).
    ///
    /// Exact for every finite `f64` in range since scaling by a power of two
    /// is exact.
    pub fn from_f64(v: f64) -> Result<Self> {
        let scaled = (v * 2f64.powi(FRAC_BITS as i32)).floor();
        if !scaled.is_finite() || scaled >= 2f64.powi(127) || scaled < -(2f64.powi(127)) {
            return Err(FixedError::Overflow);
        }
        Ok(Self { raw: scaled as i128 })
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / 2f64.powi(FRAC_BITS as i32)
    }

    pub const fn is_positive(self) -> bool {
        self.raw > 0
    }

    pub const fn is_zero(self) -> bool {
        self.raw == 0
    }

    pub fn abs(self) -> Result<Self> {
        self.raw.checked_abs().map(Self::from_raw).ok_or(FixedError::Overflow)
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self> {
        self.raw.checked_add(rhs.raw).map(Self::from_raw).ok_or(FixedError::Overflow)
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self> {
        self.raw.checked_sub(rhs.raw).map(Self::from_raw).ok_or(FixedError::Overflow)
    }

    pub fn checked_neg(self) -> Result<Self> {
        self.raw.checked_neg().map(Self::from_raw).ok_or(FixedError::Overflow)
    }

    pub fn mul(self, rhs: Self) -> Result<Self> {
        fp_mul(self, rhs)
    }

    pub fn div(self, rhs: Self) -> Result<Self> {
        fp_div(self, rhs)
    }

    /// Exact multiplication by an integer.
    pub fn mul_int(self, k: i128) -> Result<Self> {
        self.raw.checked_mul(k).map(Self::from_raw).ok_or(FixedError::Overflow)
    }

    /// Division by an integer, floored.
    pub fn div_int(self, k: i128) -> Result<Self> {
        if k == 0 {
            return Err(FixedError::DivisionByZero);
        }
        if self.raw == i128::MIN && k == -1 {
            return Err(FixedError::Overflow);
        }
        Ok(Self::from_raw(floor_div_i128(self.raw, k)))
    }

    /// Halving rounds toward negative infinity.
    pub const fn half(self) -> Self {
        Self { raw: self.raw >> 1 }
    }

    /// Nearest integer; exact halves round toward zero.
    pub fn round_to_int(self) -> i128 {
        let floor = self.raw >> FRAC_BITS;
        let frac = self.raw & (ONE_RAW - 1);
        match frac.cmp(&(ONE_RAW / 2)) {
            Ordering::Less => floor,
            Ordering::Greater => floor + 1,
            // tie: floor is toward zero for positives, floor + 1 for negatives
            Ordering::Equal if floor >= 0 => floor,
            Ordering::Equal => floor + 1,
        }
    }
}

fn floor_div_i128(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn i256_to_i128(v: I256) -> Result<i128> {
    if v > I256::from(i128::MAX) || v < I256::from(i128::MIN) {
        Err(FixedError::Overflow)
    } else {
        Ok(v.as_i128())
    }
}

/// `floor(a * b / 2^64)`.
pub fn fp_mul(a: FixedQ64, b: FixedQ64) -> Result<FixedQ64> {
    let wide = I256::from(a.raw) * I256::from(b.raw);
    // arithmetic shift floors
    i256_to_i128(wide >> FRAC_BITS).map(FixedQ64::from_raw)
}

/// `floor(a * 2^64 / b)`.
pub fn fp_div(a: FixedQ64, b: FixedQ64) -> Result<FixedQ64> {
    if b.raw == 0 {
        return Err(FixedError::DivisionByZero);
    }
    // Fast path: the shifted numerator still fits in 128 bits.
    if let Some(num) = a.raw.checked_mul(ONE_RAW) {
        if !(num == i128::MIN && b.raw == -1) {
            return Ok(FixedQ64::from_raw(floor_div_i128(num, b.raw)));
        }
    }
    let num = I256::from(a.raw) << FRAC_BITS;
    let den = I256::from(b.raw);
    let mut q = num / den;
    if num % den != 0 && ((num < 0) != (den < 0)) {
        q -= 1;
    }
    i256_to_i128(q).map(FixedQ64::from_raw)
}

impl FixedQ64 {
    /// Shortest trimmed decimal that parses back to the same raw value:
    /// 20 fractional digits resolve steps of 2^-64.
    pub fn to_decimal_string(self) -> String {
        let s = format!("{self:.20}");
        let s = s.trim_end_matches('0');
        s.strip_suffix('.').unwrap_or(s).to_string()
    }
}

impl fmt::Debug for FixedQ64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedQ64({self})")
    }
}

impl fmt::Display for FixedQ64 {
    /// Exact decimal rendering rounded to the requested precision (18
    /// fractional digits with trailing zeros trimmed by default).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (digits, trim) = match f.precision() {
            Some(p) => (p.min(40) as u32, false),
            None => (18, true),
        };
        let neg = self.raw < 0;
        let mag = self.raw.unsigned_abs();
        let mut int = U256::from(mag >> FRAC_BITS);
        let frac = U256::from(mag & ((1u128 << FRAC_BITS) - 1));
        let scale = U256::from(10u8).pow(digits);
        let scaled = frac * scale;
        let mut frac_digits = scaled >> FRAC_BITS;
        let rem = scaled & U256::from((1u128 << FRAC_BITS) - 1);
        if rem > U256::from(1u128 << (FRAC_BITS - 1)) {
            frac_digits += U256::ONE;
            if frac_digits == scale {
                frac_digits = U256::ZERO;
                int += U256::ONE;
            }
        }
        let mut s = String::new();
        if neg && (int != U256::ZERO || frac_digits != U256::ZERO) {
            s.push('-');
        }
        s.push_str(&int.to_string());
        if digits > 0 {
            let mut fs = format!("{:0>width$}", frac_digits.to_string(), width = digits as usize);
            if trim {
                while fs.ends_with('0') {
                    fs.pop();
                }
            }
            if !fs.is_empty() {
                s.push('.');
                s.push_str(&fs);
            }
        }
        match f.width() {
            Some(w) => write!(f, "{s:>w$}"),
            None => f.write_str(&s),
        }
    }
}

impl FromStr for FixedQ64 {
    type Err = FixedError;

    /// Parses plain decimals with an optional exponent (`"407.25"`,
    /// `"-1.5"`, `"1e-6"`). The result is rounded to nearest, ties toward
    /// zero.
    fn from_str(s: &str) -> Result<Self> {
        let err = || FixedError::Parse(s.to_string());
        let text = s.trim();
        let (neg, body) = match text.as_bytes().first() {
            Some(b'-') => (true, &text[1..]),
            Some(b'+') => (false, &text[1..]),
            _ => (false, text),
        };
        let (mantissa, exp_part) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], Some(&body[i + 1..])),
            None => (body, None),
        };
        let mut exp10: i64 = match exp_part {
            Some(e) => e.parse().map_err(|_| err())?,
            None => 0,
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        let mut m = U256::ZERO;
        let mut significant = 0usize;
        for c in int_part.chars().chain(frac_part.chars()) {
            let d = c.to_digit(10).ok_or_else(err)?;
            if m != U256::ZERO || d != 0 {
                significant += 1;
            }
            if significant > 70 {
                return Err(FixedError::Overflow);
            }
            m = m * U256::from(10u8) + U256::from(d);
        }
        exp10 -= frac_part.len() as i64;

        let mag = if exp10 >= 0 {
            if exp10 > 40 && m != U256::ZERO {
                return Err(FixedError::Overflow);
            }
            m.checked_mul(U256::from(10u8).pow(exp10 as u32))
                .and_then(|v| v.checked_mul(U256::ONE << FRAC_BITS))
                .ok_or(FixedError::Overflow)?
        } else {
            let shift = (-exp10) as u32;
            if shift > 76 {
                U256::ZERO
            } else {
                let den = U256::from(10u8).pow(shift);
                let num = m.checked_shl(FRAC_BITS).filter(|v| (*v >> FRAC_BITS) == m).ok_or(FixedError::Overflow)?;
                let q = num / den;
                let r = num % den;
                if r > den - r {
                    q + U256::ONE
                } else {
                    q
                }
            }
        };
        if mag > U256::from(i128::MAX as u128) + U256::from(neg as u8) {
            return Err(FixedError::Overflow);
        }
        let raw = if neg {
            (mag.as_u128() as i128).wrapping_neg()
        } else {
            mag.as_u128() as i128
        };
        Ok(Self::from_raw(raw))
    }
}

/// Integer log base 1.0001 of a price, stored in 24 signed bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Tick(i32);

impl Tick {
    pub const BITS: u32 = 24;
    pub const MIN: Tick = Tick(-(1 << 23));
    pub const MAX: Tick = Tick((1 << 23) - 1);
    pub const ZERO: Tick = Tick(0);

    pub const fn new(tau: i32) -> Result<Self> {
        if tau < Self::MIN.0 || tau > Self::MAX.0 {
            Err(FixedError::TickOutOfRange(tau as i64))
        } else {
            Ok(Self(tau))
        }
    }

    /// Like [`Tick::new`] for wider integers.
    pub fn from_i128(tau: i128) -> Result<Self> {
        i32::try_from(tau)
            .map_err(|_| FixedError::TickOutOfRange(tau.clamp(i64::MIN as i128, i64::MAX as i128) as i64))
            .and_then(Self::new)
    }

    pub const fn get(self) -> i32 {
        self.0
    }
}

impl TryFrom<i32> for Tick {
    type Error = FixedError;
    fn try_from(v: i32) -> Result<Self> {
        Tick::new(v)
    }
}

impl From<Tick> for i32 {
    fn from(t: Tick) -> i32 {
        t.0
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Largest tick magnitude that converts to a price. Beyond it the 64.64
/// representation either overflows or loses the precision needed to tell
/// adjacent ticks apart.
pub const MAX_PRICE_TICK: i32 = 300_000;
pub const MIN_PRICE_TICK: i32 = -MAX_PRICE_TICK;

/// `round(2^128 / 1.0001^(2^k))` for k = 0..=18, computed offline with
/// 120-digit arithmetic.
const INV_POW_LADDER: [u128; 19] = [
    0xfff97272373d413259a46990580e213a,
    0xfff2e50f5f656932ef12357cf3c7fdcc,
    0xffe5caca7e10e4e61c3624eaa0941cd0,
    0xffcb9843d60f6159c9db58835c926644,
    0xff973b41fa98c081472e6896dfb254c0,
    0xff2ea16466c96a3843ec78b326b52861,
    0xfe5dee046a99a2a811c461f1969c3053,
    0xfcbe86c7900a88aedcffc83b479aa3a4,
    0xf987a7253ac413176f2b074cf7815e54,
    0xf3392b0822b70005940c7a398e4b70f3,
    0xe7159475a2c29b7443b29c7fa6e889d9,
    0xd097f3bdfd2022b8845ad8f792aa5825,
    0xa9f746462d870fdf8a65dc1f90e061e5,
    0x70d869a156d2a1b890bb3df62baf32f7,
    0x31be135f97d08fd981231505542fcfa6,
    0x09aa508b5b7a84e1c677de54f3e99bc9,
    0x005d6af8dedb81196699c329225ee604,
    0x00002216e584f5fa1ea926041bedfe98,
    0x00000000048a170391f7dc42444e8fa2,
];

#[cfg(test)]
pub(crate) fn ladder() -> &'static [u128] {
    &INV_POW_LADDER
}

/// `1.0001^-|t|` as a 0.128 fraction, built from the ladder by binary
/// decomposition of `|t|`.
fn inverse_ratio_q128(abs_tick: u32) -> U256 {
    debug_assert!(abs_tick < 1 << INV_POW_LADDER.len());
    let mut r: U256 = U256::ONE << 128u32;
    for (k, c) in INV_POW_LADDER.iter().enumerate() {
        if abs_tick & (1 << k) != 0 {
            r = (r * U256::from(*c)) >> 128u32;
        }
    }
    r
}

fn tick_to_raw_unchecked(tau: i32) -> u128 {
    if tau == 0 {
        return ONE_RAW as u128;
    }
    let r = inverse_ratio_q128(tau.unsigned_abs());
    if tau < 0 {
        // ties toward zero: add just under one half
        ((r + U256::from((1u128 << 63) - 1)) >> 64u32).as_u128()
    } else {
        let num: U256 = U256::ONE << 192u32;
        let q = num / r;
        let rem = num % r;
        if rem > r - rem {
            (q + U256::ONE).as_u128()
        } else {
            q.as_u128()
        }
    }
}

/// `1.0001^t` rounded to the nearest 64.64 value.
pub fn tick_to_price(t: Tick) -> Result<FixedQ64> {
    let tau = t.get();
    if !(MIN_PRICE_TICK..=MAX_PRICE_TICK).contains(&tau) {
        return Err(FixedError::Overflow);
    }
    Ok(FixedQ64::from_raw(tick_to_raw_unchecked(tau) as i128))
}

/// Nearest tick (in log space) to a positive price.
///
/// Binary search over [`tick_to_price`] followed by an exact comparison
/// against the geometric midpoint of the bracketing ticks, so
/// `price_to_tick(tick_to_price(t)) == t` for every convertible tick.
pub fn price_to_tick(p: FixedQ64) -> Result<Tick> {
    if p.raw() <= 0 {
        return Err(FixedError::NonPositivePrice);
    }
    let target = p.raw() as u128;
    if target < tick_to_raw_unchecked(MIN_PRICE_TICK) {
        return Err(FixedError::TickOutOfRange(i64::MIN));
    }
    // largest tau with price(tau) <= target
    let (mut lo, mut hi) = (MIN_PRICE_TICK, MAX_PRICE_TICK + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tick_to_raw_unchecked(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let below = U256::from(tick_to_raw_unchecked(lo));
    let above = U256::from(tick_to_raw_unchecked(lo + 1));
    let sq = U256::from(target) * U256::from(target);
    let midpoint_sq = below * above;
    let tau = match sq.cmp(&midpoint_sq) {
        Ordering::Less => lo,
        Ordering::Greater => lo + 1,
        Ordering::Equal if lo >= 0 => lo,
        Ordering::Equal => lo + 1,
    };
    if tau > MAX_PRICE_TICK {
        return Err(FixedError::TickOutOfRange(tau as i64));
    }
    Tick::new(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fx(s: &str) -> FixedQ64 {
        s.parse().unwrap()
    }

    fn t(v: i32) -> Tick {
        Tick::new(v).unwrap()
    }

    #[test]
    fn mul_examples() {
        assert_eq!(fp_mul(FixedQ64::ONE, FixedQ64::ONE).unwrap(), FixedQ64::ONE);
        assert_eq!(fp_mul(fx("2.5"), fx("4")).unwrap(), FixedQ64::from_int(10));
        for x in ["0", "1", "-3.75", "123456789.125", "1e-9"] {
            assert_eq!(fp_mul(FixedQ64::ZERO, fx(x)).unwrap(), FixedQ64::ZERO);
        }
    }

    #[test]
    fn mul_floors_and_overflows() {
        // 2^-64 * 0.5 floors to zero, and to -2^-64 on the negative side
        let ulp = FixedQ64::from_raw(1);
        assert_eq!(fp_mul(ulp, fx("0.5")).unwrap().raw(), 0);
        assert_eq!(fp_mul(ulp.checked_neg().unwrap(), fx("0.5")).unwrap().raw(), -1);
        let big = FixedQ64::from_int(1 << 62);
        assert_eq!(fp_mul(big, FixedQ64::from_int(4)), Err(FixedError::Overflow));
        assert_eq!(
            fp_mul(big, FixedQ64::from_int(-2)).unwrap(),
            FixedQ64::from_int(i64::MIN)
        );
    }

    #[test]
    fn div_examples() {
        assert_eq!(fp_div(fx("10"), fx("2")).unwrap(), FixedQ64::from_int(5));
        for x in ["1", "-7.5", "0.0001", "407.123"] {
            assert_eq!(fp_div(fx(x), fx(x)).unwrap(), FixedQ64::ONE);
        }
        assert_eq!(fp_div(FixedQ64::ONE, FixedQ64::ZERO), Err(FixedError::DivisionByZero));
        assert_eq!(
            fp_div(FixedQ64::from_int(1 << 62), fx("0.125")),
            Err(FixedError::Overflow)
        );
        // floor semantics on the negative side
        assert_eq!(fp_div(fx("-1"), fx("3")).unwrap().raw(), floor_div_i128(-ONE_RAW, 3));
        assert_eq!(floor_div_i128(-ONE_RAW, 3), -ONE_RAW / 3 - 1);
    }

    #[test]
    fn wide_division_path_matches_definition() {
        let a = FixedQ64::from_int(3_000_000_000_000);
        let b = fx("7.25");
        let expected: I256 = (I256::from(a.raw()) << 64u32) / I256::from(b.raw());
        assert_eq!(fp_div(a, b).unwrap().raw(), expected.as_i128());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(fx("100").raw(), 100 << 64);
        assert_eq!(fx("-1.5").raw(), -(3 << 63));
        assert_eq!(fx("1e2"), fx("100"));
        assert_eq!(fx("2.5E-1"), fx("0.25"));
        assert_eq!(fx("407.25").to_string(), "407.25");
        assert_eq!(fx("-0.125").to_string(), "-0.125");
        assert_eq!(format!("{:.2}", fx("1.005")), "1.00");
        assert_eq!(format!("{:.3}", fx("2")), "2.000");
        assert!("abc".parse::<FixedQ64>().is_err());
        assert!("".parse::<FixedQ64>().is_err());
        assert!("1e40".parse::<FixedQ64>().is_err());
    }

    #[test]
    fn tick_bounds() {
        assert!(Tick::new((1 << 23) - 1).is_ok());
        assert!(Tick::new(-(1 << 23)).is_ok());
        assert!(Tick::new(1 << 23).is_err());
        assert!(Tick::new(-(1 << 23) - 1).is_err());
    }

    #[test]
    fn ladder_is_self_consistent() {
        // c_{k+1} must equal c_k^2 / 2^128 up to accumulated rounding.
        for w in ladder().windows(2) {
            let sq = (U256::from(w[0]) * U256::from(w[0])) >> 128;
            let diff = if sq > U256::from(w[1]) { sq - U256::from(w[1]) } else { U256::from(w[1]) - sq };
            assert!(diff <= U256::from(2u8), "ladder step drift {diff}");
        }
    }

    #[test]
    fn tick_to_price_examples() {
        assert_eq!(tick_to_price(t(0)).unwrap(), FixedQ64::ONE);
        // reference raws from 120-digit arithmetic
        assert_eq!(tick_to_price(t(1)).unwrap().raw(), 18448588748116922571);
        assert_eq!(tick_to_price(t(2)).unwrap().raw(), 18450433606991734263);
        assert_eq!(tick_to_price(t(-1)).unwrap().raw(), 18444899583751176498);
        assert_eq!(tick_to_price(t(100)).unwrap().raw(), 18632127618364105992);
        assert_eq!(tick_to_price(t(-100)).unwrap().raw(), 18263205034381099368);
        assert_eq!(tick_to_price(t(46052)).unwrap().raw(), 1844304715151582586654);
        assert_eq!(tick_to_price(t(-300000)).unwrap().raw(), 1728768);
        let hi = tick_to_price(t(300000)).unwrap().raw();
        let reference: i128 = 196835207006294262292126797421032;
        assert!((hi - reference).abs() <= reference >> 70);
        // 1.0001^2 = 1.00020001 and 1/1.0001 agree with decimal parsing to the last ulp
        assert!((tick_to_price(t(2)).unwrap().raw() - fx("1.00020001").raw()).abs() <= 1);
        let inv = fp_div(FixedQ64::ONE, fx("1.0001")).unwrap();
        assert!((tick_to_price(t(-1)).unwrap().raw() - inv.raw()).abs() <= 1);
        assert_eq!(tick_to_price(t(300_001)), Err(FixedError::Overflow));
        assert_eq!(tick_to_price(Tick::MIN), Err(FixedError::Overflow));
    }

    #[test]
    fn price_to_tick_examples() {
        assert_eq!(price_to_tick(FixedQ64::ONE).unwrap(), t(0));
        assert_eq!(price_to_tick(fx("1.0001")).unwrap(), t(1));
        // log_1.0001(407) = 60091.136... by 120-digit arithmetic
        let tau = price_to_tick(fx("407")).unwrap();
        assert_eq!(tau, t(60091));
        let back = tick_to_price(tau).unwrap().to_f64();
        assert!((back / 407.0 - 1.0).abs() <= 0.5e-4);
        // log_1.0001(1234.5678) = 71188.32..., log_1.0001(0.5) = -6931.82...
        assert_eq!(price_to_tick(fx("1234.5678")).unwrap(), t(71188));
        assert_eq!(price_to_tick(fx("0.5")).unwrap(), t(-6932));
        assert_eq!(price_to_tick(fx("2")).unwrap(), t(6932));
        assert_eq!(price_to_tick(fx("1e-6")).unwrap(), t(-138162));
        assert_eq!(price_to_tick(fx("1e6")).unwrap(), t(138162));
    }

    #[test]
    fn price_to_tick_errors() {
        assert_eq!(price_to_tick(FixedQ64::ZERO), Err(FixedError::NonPositivePrice));
        assert_eq!(price_to_tick(fx("-5")), Err(FixedError::NonPositivePrice));
        assert!(matches!(price_to_tick(fx("1e-15")), Err(FixedError::TickOutOfRange(_))));
        assert!(matches!(price_to_tick(fx("1e15")), Err(FixedError::TickOutOfRange(_))));
    }

    #[test]
    fn round_to_int_ties_toward_zero() {
        assert_eq!(fx("2.5").round_to_int(), 2);
        assert_eq!(fx("-2.5").round_to_int(), -2);
        assert_eq!(fx("2.5000001").round_to_int(), 3);
        assert_eq!(fx("-2.51").round_to_int(), -3);
        assert_eq!(fx("0.49").round_to_int(), 0);
    }

    proptest! {
        #[test]
        fn tick_roundtrip(tau in MIN_PRICE_TICK..=MAX_PRICE_TICK) {
            let tick = t(tau);
            prop_assert_eq!(price_to_tick(tick_to_price(tick).unwrap()).unwrap(), tick);
        }

        #[test]
        fn tick_precision(log10 in -6.0f64..6.0) {
            let p = FixedQ64::from_f64(10f64.powf(log10)).unwrap();
            let back = tick_to_price(price_to_tick(p).unwrap()).unwrap();
            let rel = (back.to_f64() - p.to_f64()).abs() / p.to_f64();
            prop_assert!(rel <= 1e-4, "relative error {rel}");
        }

        #[test]
        fn mul_div_monotone(a in 1i128..(1i128 << 90), b in 1i128..(1i128 << 90), c in 1i128..(1i128 << 80)) {
            let (lo, hi) = (FixedQ64::from_raw(a.min(b)), FixedQ64::from_raw(a.max(b)));
            let c = FixedQ64::from_raw(c);
            prop_assert!(fp_mul(lo, c).unwrap() <= fp_mul(hi, c).unwrap());
            prop_assert!(fp_div(lo, c).unwrap() <= fp_div(hi, c).unwrap());
            prop_assert!(fp_div(c, lo).unwrap() >= fp_div(c, hi).unwrap());
        }

        #[test]
        fn decimal_string_is_exact(raw in any::<i128>()) {
            let x = FixedQ64::from_raw(raw);
            prop_assert_eq!(x.to_decimal_string().parse::<FixedQ64>().unwrap(), x);
        }

        #[test]
        fn decimal_display_parse_roundtrip(raw in any::<i64>(), scale in 0u32..40) {
            let x = FixedQ64::from_raw((raw as i128) << scale);
            let printed = format!("{x:.30}");
            let back: FixedQ64 = printed.parse().unwrap();
            prop_assert!((back.raw() - x.raw()).abs() <= 1);
        }
    }
}
