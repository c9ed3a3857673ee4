//! Streaming replay of a feed through an oracle contract with metered
//! storage.
//!
//! Every input point triggers one update and then one query, so all oracles
//! see the same call sequence and their ledgers are comparable. The median
//! oracles keep nothing in memory between calls: each invocation restores
//! the estimator from its slot words and writes it back.

use ethnum::U256;
use serde::{Deserialize, Serialize};

use super::{OracleKind, PricePoint, PriceSeries, Result};
use crate::baselines::{BaselineError, EmaState, MedianBuffer, TwapAccumulator, DEFAULT_RING_CAPACITY};
use crate::costmodel::{CostLedger, CostSummary, CostTable, OpKind, SlotId, SlotStore};
use crate::fixedmath::FixedQ64;
use crate::metrics::MetricsError;
use crate::ormer::{MedDsState, WindowState};
use crate::slotcodec::SlotWord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayOptions {
    /// Window in observations.
    pub window: u32,
    /// Time-weighted window; defaults to `window` times the feed's mean
    /// spacing, rounded, at least one second.
    pub twap_window_seconds: Option<i64>,
    pub ring_capacity: usize,
    pub cost_table: CostTable,
}

impl ReplayOptions {
    pub fn new(window: u32) -> Self {
        Self {
            window,
            twap_window_seconds: None,
            ring_capacity: DEFAULT_RING_CAPACITY,
            cost_table: CostTable::default(),
        }
    }

    pub fn twap_seconds_for(&self, series: &PriceSeries) -> i64 {
        self.twap_window_seconds.unwrap_or_else(|| {
            let spacing = series.mean_interval().unwrap_or(1.0);
            ((self.window as f64 * spacing).round() as i64).max(1)
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReplayOutput {
    pub kind: OracleKind,
    pub window: u32,
    pub twap_window_seconds: Option<i64>,
    /// Query result after each input point.
    pub outputs: Vec<Option<FixedQ64>>,
    /// Emitted outputs stamped with their input timestamps.
    pub feed: PriceSeries,
    pub ledger: CostLedger,
    /// Final persisted words of the median oracles; empty for the others.
    pub state: Vec<SlotWord>,
}

impl ReplayOutput {
    pub fn update_cost(&self) -> Result<CostSummary> {
        Ok(self.ledger.invocation_cost(OpKind::Update)?)
    }

    pub fn query_cost(&self) -> Result<CostSummary> {
        Ok(self.ledger.invocation_cost(OpKind::Query)?)
    }

    /// Mean update cost plus mean query cost.
    pub fn gas(&self) -> Result<f64> {
        Ok(self.update_cost()?.mean + self.query_cost()?.mean)
    }
}

// Rough arithmetic operation counts per call, priced by `arithmetic_unit`.
const MED_UPDATE_OPS: u64 = 40;
const MED_QUERY_OPS: u64 = 8;
const TWAP_UPDATE_OPS: u64 = 4;
const TWAP_QUERY_OPS: u64 = 8;
const EMA_UPDATE_OPS: u64 = 3;

trait Contract {
    fn update(&mut self, store: &mut SlotStore, t: i64, p: FixedQ64) -> Result<()>;
    fn query(&mut self, store: &mut SlotStore) -> Result<Option<FixedQ64>>;
    fn state(&self, _store: &SlotStore) -> Vec<SlotWord> {
        Vec::new()
    }
}

fn word(hi: u128, lo: u128) -> SlotWord {
    SlotWord::from_u256(U256::from_words(hi, lo))
}

const HEAD: SlotId = SlotId(0);

struct MedContract {
    window: u32,
}

impl Contract for MedContract {
    fn update(&mut self, store: &mut SlotStore, _t: i64, p: FixedQ64) -> Result<()> {
        let w = store.read(HEAD)?;
        let mut s = match w.is_zero() {
            true => WindowState::new(self.window)?,
            false => WindowState::restore(w)?,
        };
        s.update_price(p)?;
        store.ledger_mut().charge_compute(MED_UPDATE_OPS)?;
        store.write(HEAD, s.persist())?;
        Ok(())
    }

    fn query(&mut self, store: &mut SlotStore) -> Result<Option<FixedQ64>> {
        let w = store.read(HEAD)?;
        store.ledger_mut().charge_compute(MED_QUERY_OPS)?;
        if w.is_zero() {
            return Ok(None);
        }
        Ok(WindowState::restore(w)?.estimate()?)
    }

    fn state(&self, store: &SlotStore) -> Vec<SlotWord> {
        vec![store.peek(HEAD)]
    }
}

struct MedDsContract {
    window: u32,
}

const SECOND: SlotId = SlotId(1);

impl MedDsContract {
    fn load(&self, store: &mut SlotStore) -> Result<Option<MedDsState>> {
        let words = [store.read(HEAD)?, store.read(SECOND)?];
        if words.iter().all(|w| w.is_zero()) {
            return Ok(None);
        }
        Ok(Some(MedDsState::restore(words)?))
    }
}

impl Contract for MedDsContract {
    fn update(&mut self, store: &mut SlotStore, _t: i64, p: FixedQ64) -> Result<()> {
        let mut s = match self.load(store)? {
            Some(s) => s,
            None => MedDsState::new(self.window)?,
        };
        s.update_price(p)?;
        store.ledger_mut().charge_compute(2 * MED_UPDATE_OPS)?;
        let [a, b] = s.persist();
        store.write(HEAD, a)?;
        store.write(SECOND, b)?;
        Ok(())
    }

    fn query(&mut self, store: &mut SlotStore) -> Result<Option<FixedQ64>> {
        let s = self.load(store)?;
        store.ledger_mut().charge_compute(2 * MED_QUERY_OPS)?;
        match s {
            Some(s) => Ok(s.estimate()?),
            None => Ok(None),
        }
    }

    fn state(&self, store: &SlotStore) -> Vec<SlotWord> {
        vec![store.peek(HEAD), store.peek(SECOND)]
    }
}

/// Head slot plus a ring of checkpoint slots `1..=capacity`.
struct TwapContract {
    acc: TwapAccumulator,
    window_seconds: i64,
    updates: u64,
}

impl TwapContract {
    fn slot_of(&self, logical: usize) -> SlotId {
        let cap = self.acc.capacity() as u64;
        let global = self.updates - self.acc.len() as u64 + logical as u64;
        SlotId(1 + global % cap)
    }

    fn head_word(&self) -> SlotWord {
        let last = self.acc.latest().map_or(0, |c| c.cumulative.raw() as u128);
        word(1u128 << 127 | self.updates as u128, last)
    }
}

impl Contract for TwapContract {
    fn update(&mut self, store: &mut SlotStore, t: i64, p: FixedQ64) -> Result<()> {
        store.read(HEAD)?;
        self.acc.update(t, p)?;
        self.updates += 1;
        let cp = self.acc.latest().expect("just pushed");
        let slot = self.slot_of(self.acc.len() - 1);
        store.write(slot, word(1u128 << 127 | cp.timestamp as u64 as u128, cp.cumulative.raw() as u128))?;
        store.ledger_mut().charge_compute(TWAP_UPDATE_OPS)?;
        store.write(HEAD, self.head_word())?;
        Ok(())
    }

    fn query(&mut self, store: &mut SlotStore) -> Result<Option<FixedQ64>> {
        store.read(HEAD)?;
        store.ledger_mut().charge_compute(TWAP_QUERY_OPS)?;
        let Some(now) = self.acc.latest() else {
            return Ok(None);
        };
        // fixed-depth binary search for the window start, reading each
        // probed checkpoint and its successor
        let target = now.timestamp - self.window_seconds;
        let mut base = 0usize;
        let mut size = self.acc.len();
        while size > 1 {
            let half = size / 2;
            let mid = base + half;
            store.read(self.slot_of(mid))?;
            store.read(self.slot_of((mid + 1).min(self.acc.len() - 1)))?;
            if self.checkpoint_t(mid) <= target {
                base = mid;
            }
            size -= half;
        }
        store.read(self.slot_of(base))?;
        match self.acc.query(self.window_seconds) {
            Ok(v) => Ok(Some(v)),
            Err(BaselineError::InsufficientHistory) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

impl TwapContract {
    fn checkpoint_t(&self, logical: usize) -> i64 {
        // only timestamps are needed for the probe path
        self.acc.checkpoint(logical).map_or(i64::MAX, |c| c.timestamp)
    }
}

struct EmaContract {
    ema: EmaState,
}

impl Contract for EmaContract {
    fn update(&mut self, store: &mut SlotStore, _t: i64, p: FixedQ64) -> Result<()> {
        store.read(HEAD)?;
        let v = self.ema.update(p)?;
        store.ledger_mut().charge_compute(EMA_UPDATE_OPS)?;
        store.write(HEAD, word(1, v.raw() as u128))?;
        Ok(())
    }

    fn query(&mut self, store: &mut SlotStore) -> Result<Option<FixedQ64>> {
        store.read(HEAD)?;
        Ok(self.ema.value())
    }
}

/// Head slot plus one slot per buffered price.
struct TrueMedianContract {
    buffer: MedianBuffer,
    updates: u64,
}

impl Contract for TrueMedianContract {
    fn update(&mut self, store: &mut SlotStore, _t: i64, p: FixedQ64) -> Result<()> {
        store.read(HEAD)?;
        let slot = SlotId(1 + self.updates % self.buffer.window() as u64);
        self.buffer.push(p);
        self.updates += 1;
        store.write(slot, word(1, p.raw() as u128))?;
        store.write(HEAD, word(1, self.updates as u128))?;
        Ok(())
    }

    fn query(&mut self, store: &mut SlotStore) -> Result<Option<FixedQ64>> {
        store.read(HEAD)?;
        let n = self.buffer.len() as u64;
        for i in 0..n {
            store.read(SlotId(1 + i))?;
        }
        // selection costs about n log n comparisons
        let ops = n * (u64::BITS - n.leading_zeros()) as u64;
        store.ledger_mut().charge_compute(ops)?;
        match self.buffer.median() {
            Ok(v) => Ok(Some(v)),
            Err(BaselineError::EmptyWindow) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

fn contract(kind: OracleKind, series: &PriceSeries, opts: &ReplayOptions) -> Result<Box<dyn Contract>> {
    Ok(match kind {
        OracleKind::OrmerMed => {
            WindowState::new(opts.window)?;
            Box::new(MedContract { window: opts.window })
        }
        OracleKind::OrmerMedds => {
            MedDsState::new(opts.window)?;
            Box::new(MedDsContract { window: opts.window })
        }
        OracleKind::Twap => Box::new(TwapContract {
            acc: TwapAccumulator::new(opts.ring_capacity)?,
            window_seconds: opts.twap_seconds_for(series),
            updates: 0,
        }),
        OracleKind::Ema => Box::new(EmaContract {
            ema: EmaState::with_window(opts.window)?,
        }),
        OracleKind::TrueMedian => Box::new(TrueMedianContract {
            buffer: MedianBuffer::new(opts.window as usize)?,
            updates: 0,
        }),
    })
}

pub fn replay(series: &PriceSeries, kind: OracleKind, opts: &ReplayOptions) -> Result<ReplayOutput> {
    let mut c = contract(kind, series, opts)?;
    let mut store = SlotStore::new(opts.cost_table);
    let mut outputs = Vec::with_capacity(series.len());
    let mut emitted = Vec::new();
    for p in series.points() {
        store.ledger_mut().begin(OpKind::Update)?;
        c.update(&mut store, p.t, p.price)?;
        store.ledger_mut().end()?;
        store.ledger_mut().begin(OpKind::Query)?;
        let out = c.query(&mut store)?;
        store.ledger_mut().end()?;
        if let Some(v) = out {
            emitted.push(PricePoint::new(p.t, v));
        }
        outputs.push(out);
    }
    Ok(ReplayOutput {
        kind,
        window: opts.window,
        twap_window_seconds: (kind == OracleKind::Twap).then(|| opts.twap_seconds_for(series)),
        outputs,
        feed: PriceSeries::new(emitted)?,
        state: c.state(&store),
        ledger: store.ledger().clone(),
    })
}

/// Whether an attacked feed stays within `epsilon` of a clean one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityCheck {
    pub epsilon: f64,
    pub max_deviation: f64,
    /// Timestamp of the largest deviation.
    pub at: Option<i64>,
    pub compared: usize,
    pub pass: bool,
}

/// Compares the feeds at every timestamp both emit.
pub fn evaluate_security(clean: &PriceSeries, attacked: &PriceSeries, epsilon: f64) -> Result<SecurityCheck> {
    let mut worst: Option<(f64, i64)> = None;
    let mut compared = 0;
    let other = attacked.points();
    let mut j = 0;
    for p in clean.points() {
        while j < other.len() && other[j].t < p.t {
            j += 1;
        }
        if j < other.len() && other[j].t == p.t {
            compared += 1;
            let d = (other[j].price.to_f64() - p.price.to_f64()).abs();
            if worst.map_or(true, |(w, _)| d > w) {
                worst = Some((d, p.t));
            }
        }
    }
    let (max_deviation, at) = worst.ok_or(MetricsError::EmptyOverlap)?;
    Ok(SecurityCheck {
        epsilon,
        max_deviation,
        at: Some(at),
        compared,
        pass: max_deviation <= epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::attack::{inject_attack, AttackSpec, AttackTargets};
    use crate::harness::synth::{self, SynthKind};

    fn flat(n: i64, level: i64) -> PriceSeries {
        PriceSeries::from_pairs((0..n).map(|t| (t, FixedQ64::from_int(level)))).unwrap()
    }

    #[test]
    fn constant_feed_constant_output() {
        let s = flat(200, 100);
        for kind in OracleKind::ALL {
            let out = replay(&s, kind, &ReplayOptions::new(25)).unwrap();
            assert_eq!(out.outputs.len(), 200);
            let level = crate::fixedmath::tick_to_price(crate::fixedmath::price_to_tick(FixedQ64::from_int(100)).unwrap())
                .unwrap();
            for v in out.outputs.iter().skip(30).flatten() {
                let want = match kind {
                    OracleKind::OrmerMed | OracleKind::OrmerMedds => level,
                    _ => FixedQ64::from_int(100),
                };
                assert_eq!(*v, want, "{kind}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let s = synth::synth(SynthKind::Gbm, 600, 2).unwrap();
        for kind in OracleKind::ALL {
            let a = replay(&s, kind, &ReplayOptions::new(25)).unwrap();
            let b = replay(&s, kind, &ReplayOptions::new(25)).unwrap();
            assert_eq!(a.outputs, b.outputs);
            assert_eq!(a.ledger.records(), b.ledger.records());
            assert_eq!(a.state, b.state);
        }
    }

    #[test]
    fn median_contracts_hold_fixed_storage() {
        let s = synth::synth(SynthKind::Gbm, 1000, 3).unwrap();
        let med = replay(&s, OracleKind::OrmerMed, &ReplayOptions::new(25)).unwrap();
        assert_eq!(med.state.len(), 1);
        let medds = replay(&s, OracleKind::OrmerMedds, &ReplayOptions::new(25)).unwrap();
        assert_eq!(medds.state.len(), 2);
        for r in med.ledger.records().iter().filter(|r| r.op == OpKind::Update) {
            let writes = r.writes_zero_to_nonzero + r.writes_nonzero_to_nonzero + r.writes_to_zero;
            assert_eq!(writes, 1);
        }
        for r in medds.ledger.records().iter().filter(|r| r.op == OpKind::Update) {
            let writes = r.writes_zero_to_nonzero + r.writes_nonzero_to_nonzero + r.writes_to_zero;
            assert_eq!(writes, 2);
        }
    }

    #[test]
    fn med_query_reads_one_slot() {
        let s = flat(50, 100);
        let t = CostTable::default();
        let med = replay(&s, OracleKind::OrmerMed, &ReplayOptions::new(25)).unwrap();
        let q = med.query_cost().unwrap();
        assert_eq!((q.mean, q.stddev), ((t.tx_base + t.read_cold) as f64, 0.0));
    }

    #[test]
    fn twap_window_maps_to_seconds() {
        let s = PriceSeries::from_pairs((0..100).map(|i| (i * 12, FixedQ64::from_int(5)))).unwrap();
        assert_eq!(ReplayOptions::new(25).twap_seconds_for(&s), 300);
        let out = replay(&s, OracleKind::Twap, &ReplayOptions::new(25)).unwrap();
        assert_eq!(out.twap_window_seconds, Some(300));
        // the first 300 s of history cannot fill the window
        assert!(out.outputs[..25].iter().all(Option::is_none));
        assert!(out.outputs[25..].iter().all(Option::is_some));
    }

    #[test]
    fn security_examples() {
        let s = flat(100, 100);
        let clean = replay(&s, OracleKind::Twap, &ReplayOptions::new(25)).unwrap();
        let none = evaluate_security(&clean.feed, &clean.feed, 0.0).unwrap();
        assert!(none.pass);
        assert_eq!(none.max_deviation, 0.0);

        let spec = AttackSpec {
            beta: 1,
            window: 25,
            targets: AttackTargets::Indices(vec![50]),
            magnitude: FixedQ64::from_int(10),
        };
        let attacked = inject_attack(&s, &spec, 0).unwrap().series;
        let twap = replay(&attacked, OracleKind::Twap, &ReplayOptions::new(25)).unwrap();
        let check = evaluate_security(&clean.feed, &twap.feed, 10.0).unwrap();
        assert!(!check.pass);
        assert_eq!(check.max_deviation, 36.0);

        let med_clean = replay(&s, OracleKind::OrmerMed, &ReplayOptions::new(25)).unwrap();
        let med = replay(&attacked, OracleKind::OrmerMed, &ReplayOptions::new(25)).unwrap();
        let check = evaluate_security(&med_clean.feed, &med.feed, 10.0).unwrap();
        assert!(check.pass);
        assert!(check.max_deviation <= 1.0);

        let empty = PriceSeries::default();
        assert!(evaluate_security(&clean.feed, &empty, 1.0).is_err());
    }
}
