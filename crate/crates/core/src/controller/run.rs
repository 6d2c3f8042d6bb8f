use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{validate_sequence, ControllerState, Instruction, Op};
use crate::encoding::{apply_converter, CalibrationSet};
use crate::memarray::{MemoryArray, ReadOutcome, WriteOutcome, CELLS};
use crate::qstate::{fidelity_to_pure, polarization_to_density, Polarization};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Condition every write and read on success. Efficiencies then only
    /// enter the bookkeeping.
    pub postselect: bool,
    /// In lossy mode, whether a read of a cell whose write was lost is
    /// reported as `vacant` (the simulator knows) or `read_lost` (the
    /// detector just sees no click).
    pub omniscient: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { postselect: true, omniscient: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Stored,
    Lost,
    Retrieved { fidelity: f64, storage_us: u32 },
    ReadLost { storage_us: u32 },
    Vacant { storage_us: u32 },
}

impl Outcome {
    pub fn storage_us(&self) -> Option<u32> {
        match *self {
            Outcome::Retrieved { storage_us, .. } | Outcome::ReadLost { storage_us } | Outcome::Vacant { storage_us } => Some(storage_us),
            Outcome::Stored | Outcome::Lost => None,
        }
    }

    pub fn fidelity(&self) -> Option<f64> {
        match *self {
            Outcome::Retrieved { fidelity, .. } => Some(fidelity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    #[serde(flatten)]
    pub instruction: Instruction,
    /// Input state of the qubit written or read.
    pub input: Polarization,
    /// Logical filling after the instruction.
    pub filling: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn instructions(&self) -> Vec<Instruction> {
        self.entries.iter().map(|e| e.instruction).collect()
    }
}

/// Executes a validated sequence on `array`. Writes pass the shared input
/// converter, reads the per-cell output converter; fidelity is scored
/// against the written polarization.
pub fn run_sequence<R: Rng + ?Sized>(
    seq: &[Instruction],
    array: &mut MemoryArray,
    cal: &CalibrationSet,
    opts: RunOptions,
    rng: &mut R,
) -> Result<Trace> {
    validate_sequence(seq, None).map_err(Error::InvalidSequence)?;
    cal.validate()?;
    if array.filling() != 0 {
        return Err(Error::Protocol(format!("array must start empty, holds {}", array.filling())));
    }
    let mut state = ControllerState::new(None);
    let mut inputs: Vec<Option<Polarization>> = vec![None; CELLS];
    let mut entries = Vec::with_capacity(seq.len());
    for ins in seq {
        let t = ins.time_us() as f64;
        let (input, outcome) = match ins.op {
            Op::Write { pol } => {
                let rho = apply_converter(&polarization_to_density(pol), &cal.input, rng)?;
                inputs[ins.cell.slot()] = Some(pol);
                let outcome = if opts.postselect {
                    array.write_postselected(ins.cell, rho, t)?;
                    Outcome::Stored
                } else {
                    match array.write(ins.cell, rho, t, rng)? {
                        WriteOutcome::Stored => Outcome::Stored,
                        WriteOutcome::Lost => Outcome::Lost,
                    }
                };
                (pol, outcome)
            }
            Op::Read { .. } => {
                let pol = inputs[ins.cell.slot()].take().expect("validated");
                let storage_us = state.age_us(ins.cell, ins.slot).expect("validated");
                let rho = if !array.cell(ins.cell).occupied() {
                    array.access_cell(ins.cell);
                    None
                } else if opts.postselect {
                    Some(array.read_postselected(ins.cell, t)?)
                } else {
                    match array.read(ins.cell, t, rng)? {
                        ReadOutcome::Retrieved(rho) => Some(rho),
                        ReadOutcome::Lost => None,
                    }
                };
                let outcome = match rho {
                    Some(rho) => {
                        let out = apply_converter(&rho, cal.cell(ins.cell), rng)?;
                        Outcome::Retrieved { fidelity: fidelity_to_pure(&out, &pol.ket())?, storage_us }
                    }
                    None if opts.omniscient && !array_had(&entries, ins) => Outcome::Vacant { storage_us },
                    None => Outcome::ReadLost { storage_us },
                };
                (pol, outcome)
            }
        };
        state.apply(ins).expect("validated");
        entries.push(TraceEntry { instruction: *ins, input, filling: state.filling(), outcome });
    }
    Ok(Trace { entries })
}

/// Whether the write feeding this read was stored.
fn array_had(entries: &[TraceEntry], read: &Instruction) -> bool {
    entries
        .iter()
        .rev()
        .find(|e| e.instruction.cell == read.cell && e.instruction.is_write())
        .is_some_and(|e| e.outcome == Outcome::Stored)
}
