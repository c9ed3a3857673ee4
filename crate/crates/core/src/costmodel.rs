//! Modeled on-chain cost of oracle invocations.
//!
//! Every invocation opens a scope on a [`CostLedger`], reports its storage
//! accesses and closes the scope. Reads are cold on the first touch of a slot
//! within the invocation and warm afterwards; writes are priced by how they
//! change the slot, plus the cold surcharge when the slot was not touched
//! before. The total is a pure function of the access trace and the table.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::slotcodec::{SlotWord, WriteTransition};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("no invocation is open")]
    NoOpenInvocation,
    #[error("an invocation is already open")]
    InvocationAlreadyOpen,
    #[error("no recorded {0:?} invocations")]
    NoData(OpKind),
}

pub type Result<T> = std::result::Result<T, CostError>;

/// Gas units per event. Defaults follow public EVM storage pricing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostTable {
    pub read_cold: u64,
    pub read_warm: u64,
    pub write_zero_to_nonzero: u64,
    pub write_nonzero_to_nonzero: u64,
    pub write_to_zero: u64,
    pub tx_base: u64,
    pub arithmetic_unit: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            read_cold: 2100,
            read_warm: 100,
            write_zero_to_nonzero: 20_000,
            write_nonzero_to_nonzero: 2900,
            write_to_zero: 2900,
            tx_base: 21_000,
            arithmetic_unit: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Update,
    Query,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Access {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotId(pub u64);

/// Event counts and total cost of one invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub op: OpKind,
    pub reads_cold: u64,
    pub reads_warm: u64,
    /// First-touch writes, each charged one cold read on top of the write.
    pub writes_cold: u64,
    pub writes_zero_to_nonzero: u64,
    pub writes_nonzero_to_nonzero: u64,
    pub writes_to_zero: u64,
    pub compute_units: u64,
    pub total_gas: u64,
}

impl InvocationRecord {
    fn new(op: OpKind) -> Self {
        Self {
            op,
            reads_cold: 0,
            reads_warm: 0,
            writes_cold: 0,
            writes_zero_to_nonzero: 0,
            writes_nonzero_to_nonzero: 0,
            writes_to_zero: 0,
            compute_units: 0,
            total_gas: 0,
        }
    }

    /// Counts dotted with the table, plus the base fee.
    pub fn price(&self, t: &CostTable) -> u64 {
        t.tx_base
            + (self.reads_cold + self.writes_cold) * t.read_cold
            + self.reads_warm * t.read_warm
            + self.writes_zero_to_nonzero * t.write_zero_to_nonzero
            + self.writes_nonzero_to_nonzero * t.write_nonzero_to_nonzero
            + self.writes_to_zero * t.write_to_zero
            + self.compute_units * t.arithmetic_unit
    }
}

/// Mean and population standard deviation of invocation costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub count: usize,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Clone, Debug)]
struct OpenInvocation {
    record: InvocationRecord,
    touched: HashSet<SlotId>,
}

#[derive(Clone, Debug, Default)]
pub struct CostLedger {
    table: CostTable,
    records: Vec<InvocationRecord>,
    open: Option<OpenInvocation>,
}

impl CostLedger {
    pub fn new(table: CostTable) -> Self {
        Self {
            table,
            records: Vec::new(),
            open: None,
        }
    }

    pub fn table(&self) -> &CostTable {
        &self.table
    }

    pub fn records(&self) -> &[InvocationRecord] {
        &self.records
    }

    pub fn begin(&mut self, op: OpKind) -> Result<()> {
        if self.open.is_some() {
            return Err(CostError::InvocationAlreadyOpen);
        }
        self.open = Some(OpenInvocation {
            record: InvocationRecord::new(op),
            touched: HashSet::new(),
        });
        Ok(())
    }

    pub fn record_access(&mut self, slot: SlotId, access: Access, old: SlotWord, new: SlotWord) -> Result<()> {
        let open = self.open.as_mut().ok_or(CostError::NoOpenInvocation)?;
        let first_touch = open.touched.insert(slot);
        let r = &mut open.record;
        match access {
            Access::Read if first_touch => r.reads_cold += 1,
            Access::Read => r.reads_warm += 1,
            Access::Write => {
                if first_touch {
                    r.writes_cold += 1;
                }
                match WriteTransition::classify(old, new) {
                    WriteTransition::ZeroToNonzero => r.writes_zero_to_nonzero += 1,
                    WriteTransition::NonzeroToNonzero => r.writes_nonzero_to_nonzero += 1,
                    WriteTransition::ToZero => r.writes_to_zero += 1,
                }
            }
        }
        Ok(())
    }

    pub fn charge_compute(&mut self, units: u64) -> Result<()> {
        let open = self.open.as_mut().ok_or(CostError::NoOpenInvocation)?;
        open.record.compute_units += units;
        Ok(())
    }

    pub fn end(&mut self) -> Result<InvocationRecord> {
        let open = self.open.take().ok_or(CostError::NoOpenInvocation)?;
        let mut record = open.record;
        record.total_gas = record.price(&self.table);
        self.records.push(record);
        Ok(record)
    }

    pub fn invocation_cost(&self, op: OpKind) -> Result<CostSummary> {
        let costs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.op == op)
            .map(|r| r.total_gas as f64)
            .collect();
        if costs.is_empty() {
            return Err(CostError::NoData(op));
        }
        let n = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        Ok(CostSummary {
            count: costs.len(),
            mean,
            stddev: var.sqrt(),
        })
    }
}

/// Contract storage whose every access is charged to a ledger.
#[derive(Clone, Debug, Default)]
pub struct SlotStore {
    slots: HashMap<SlotId, SlotWord>,
    ledger: CostLedger,
}

impl SlotStore {
    pub fn new(table: CostTable) -> Self {
        Self {
            slots: HashMap::new(),
            ledger: CostLedger::new(table),
        }
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut CostLedger {
        &mut self.ledger
    }

    /// Current word without charging; for inspection only.
    pub fn peek(&self, slot: SlotId) -> SlotWord {
        self.slots.get(&slot).copied().unwrap_or(SlotWord::ZERO)
    }

    pub fn read(&mut self, slot: SlotId) -> Result<SlotWord> {
        let w = self.peek(slot);
        self.ledger.record_access(slot, Access::Read, w, w)?;
        Ok(w)
    }

    pub fn write(&mut self, slot: SlotId, new: SlotWord) -> Result<()> {
        let old = self.peek(slot);
        self.ledger.record_access(slot, Access::Write, old, new)?;
        if new.is_zero() {
            self.slots.remove(&slot);
        } else {
            self.slots.insert(slot, new);
        }
        Ok(())
    }

    /// Number of nonzero slots held.
    pub fn footprint(&self) -> usize {
        self.slots.len()
    }
}
