//! The 2 µs instruction engine.
//!
//! Sequences are generated offline (random access, queue, stack, buffer),
//! validated against the no-cloning and occupancy rules, and then executed
//! slot by slot against a [`MemoryArray`](crate::memarray::MemoryArray).

mod generator;
mod instruction;
mod policy;
mod run;

pub use generator::{
    apply_scrolling_window, generate_random_sequence, generate_sequence, generate_windowed_sequence,
    write_probability, DEFAULT_WINDOW_US,
};
pub use instruction::{emit_sequence, parse_sequence, Instruction, Op};
pub use policy::{
    buffer_policy, queue_general, queue_policy, random_buffer_arrivals, random_inputs, stack_general,
    stack_policy,
};
pub use run::{run_sequence, Outcome, RunOptions, Trace, TraceEntry};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::memarray::{CellIndex, CELLS};
use crate::CLOCK_US;

/// Logical occupancy as the controller sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    write_slot: Vec<Option<u32>>,
    filling: usize,
    window_us: Option<u32>,
}

impl ControllerState {
    pub fn new(window_us: Option<u32>) -> Self {
        Self { write_slot: vec![None; CELLS], filling: 0, window_us }
    }

    pub fn filling(&self) -> usize {
        self.filling
    }

    pub fn window_us(&self) -> Option<u32> {
        self.window_us
    }

    pub fn write_slot(&self, cell: CellIndex) -> Option<u32> {
        self.write_slot[cell.slot()]
    }

    pub fn is_occupied(&self, cell: CellIndex) -> bool {
        self.write_slot(cell).is_some()
    }

    pub fn empty_cells(&self) -> Vec<CellIndex> {
        CellIndex::all().filter(|&c| !self.is_occupied(c)).collect()
    }

    pub fn occupied_cells(&self) -> Vec<CellIndex> {
        CellIndex::all().filter(|&c| self.is_occupied(c)).collect()
    }

    /// Storage age of `cell` at `slot`, µs.
    pub fn age_us(&self, cell: CellIndex, slot: u32) -> Option<u32> {
        self.write_slot(cell).map(|w| slot.saturating_sub(w) * CLOCK_US)
    }

    /// Applies a legal instruction. Returns the violation and leaves the
    /// state unchanged otherwise.
    pub fn apply(&mut self, ins: &Instruction) -> Result<(), ViolationKind> {
        let entry = &mut self.write_slot[ins.cell.slot()];
        match (ins.op, *entry) {
            (Op::Write { .. }, None) => {
                *entry = Some(ins.slot);
                self.filling += 1;
            }
            (Op::Write { .. }, Some(since)) => return Err(ViolationKind::WriteOccupied { since }),
            (Op::Read { .. }, Some(_)) => {
                *entry = None;
                self.filling -= 1;
            }
            (Op::Read { .. }, None) => return Err(ViolationKind::ReadEmpty),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Read of a cell holding nothing: a read before any write, or a second
    /// read of the same excitation.
    ReadEmpty,
    WriteOccupied { since: u32 },
    CellOutOfRange { raw: i64 },
    SlotNotIncreasing { previous: u32 },
    FillingOutOfRange { filling: i64 },
    AgeExceeded { age_us: u32, window_us: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Position in the sequence.
    pub index: usize,
    pub slot: u32,
    pub cell: Option<CellIndex>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} slot {}", self.index, self.slot)?;
        if let Some(c) = self.cell {
            write!(f, " cell {c}")?;
        }
        match &self.kind {
            ViolationKind::ReadEmpty => write!(f, ": read of empty cell (read-before-write or repeated read)"),
            ViolationKind::WriteOccupied { since } => write!(f, ": write to cell occupied since slot {since}"),
            ViolationKind::CellOutOfRange { raw } => write!(f, ": cell {raw} outside 1..={CELLS}"),
            ViolationKind::SlotNotIncreasing { previous } => write!(f, ": slot not after previous slot {previous}"),
            ViolationKind::FillingOutOfRange { filling } => write!(f, ": filling {filling} outside 0..={CELLS}"),
            ViolationKind::AgeExceeded { age_us, window_us } => {
                write!(f, ": stored qubit aged {age_us} µs beyond the {window_us} µs window")
            }
        }
    }
}

/// Replays a sequence against an empty memory and collects every rule it
/// breaks. Illegal instructions are skipped so later ones are still checked.
/// With `window_us`, no stored qubit may be older than the window at any
/// instruction.
pub fn validate_sequence(seq: &[Instruction], window_us: Option<u32>) -> Result<(), Vec<Violation>> {
    let mut state = ControllerState::new(window_us);
    let mut out = Vec::new();
    let mut prev: Option<u32> = None;
    let mut age_flagged = [false; CELLS];
    for (index, ins) in seq.iter().enumerate() {
        let v = |kind| Violation { index, slot: ins.slot, cell: Some(ins.cell), kind };
        if let Some(p) = prev {
            if ins.slot <= p {
                out.push(v(ViolationKind::SlotNotIncreasing { previous: p }));
            }
        }
        prev = Some(prev.map_or(ins.slot, |p| p.max(ins.slot)));
        if let Some(window) = window_us {
            for c in state.occupied_cells() {
                let age = state.age_us(c, ins.slot).unwrap_or(0);
                if age > window && !age_flagged[c.slot()] {
                    age_flagged[c.slot()] = true;
                    out.push(Violation { index, slot: ins.slot, cell: Some(c), kind: ViolationKind::AgeExceeded { age_us: age, window_us: window } });
                }
            }
        }
        if !ins.is_write() {
            age_flagged[ins.cell.slot()] = false;
        }
        if let Err(kind) = state.apply(ins) {
            out.push(v(kind));
        }
        if state.filling() > CELLS {
            out.push(v(ViolationKind::FillingOutOfRange { filling: state.filling() as i64 }));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
