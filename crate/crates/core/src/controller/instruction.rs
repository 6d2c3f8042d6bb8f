use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::{Violation, ViolationKind};
use crate::memarray::CellIndex;
use crate::qstate::{PolLabel, Polarization};
use crate::{Error, Result, CLOCK_US};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Op {
    Write { pol: Polarization },
    Read { forced: bool },
}

/// One clock-cycle command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub slot: u32,
    pub cell: CellIndex,
    #[serde(flatten)]
    pub op: Op,
}

impl Instruction {
    pub fn write(slot: u32, cell: CellIndex, pol: impl Into<Polarization>) -> Self {
        Self { slot, cell, op: Op::Write { pol: pol.into() } }
    }

    pub fn read(slot: u32, cell: CellIndex) -> Self {
        Self { slot, cell, op: Op::Read { forced: false } }
    }

    pub fn forced_read(slot: u32, cell: CellIndex) -> Self {
        Self { slot, cell, op: Op::Read { forced: true } }
    }

    pub fn is_write(&self) -> bool {
        matches!(self.op, Op::Write { .. })
    }

    pub fn is_forced(&self) -> bool {
        matches!(self.op, Op::Read { forced: true })
    }

    pub fn time_us(&self) -> u32 {
        self.slot * CLOCK_US
    }
}

impl fmt::Display for Instruction {
    /// `slot op cell [pol]` with `op` ∈ {W, R, F}; F marks a forced read.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            Op::Write { pol } => {
                write!(f, "{} W {} ", self.slot, self.cell)?;
                match pol.label() {
                    Some(l) => f.write_str(l.symbol()),
                    None => write!(f, "{:?},{:?}", pol.theta(), pol.phi()),
                }
            }
            Op::Read { forced } => write!(f, "{} {} {}", self.slot, if forced { "F" } else { "R" }, self.cell),
        }
    }
}

/// Renders a sequence file, one instruction per line.
pub fn emit_sequence(seq: &[Instruction]) -> String {
    let mut out = String::new();
    for ins in seq {
        writeln!(out, "{ins}").expect("writing to a String");
    }
    out
}

/// Parses a sequence file. Blank lines and `#` comments are skipped.
/// Cell numbers outside `1..=72` are reported together as
/// [`Error::InvalidSequence`]; malformed lines as [`Error::Parse`].
pub fn parse_sequence(text: &str) -> Result<Vec<Instruction>> {
    let mut seq = Vec::new();
    let mut range_errors = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (slot, op, cell) = match fields.as_slice() {
            [s, o, c] | [s, o, c, _] => (*s, *o, *c),
            _ => return Err(perr(format!("expected `slot op cell [pol]`, got {line:?}"))),
        };
        let slot: u32 = slot.parse().map_err(|_| perr(format!("bad slot {slot:?}")))?;
        let raw_cell: i64 = cell.parse().map_err(|_| perr(format!("bad cell {cell:?}")))?;
        let cell = match usize::try_from(raw_cell).ok().and_then(|c| CellIndex::new(c).ok()) {
            Some(c) => c,
            None => {
                range_errors.push(Violation {
                    index: seq.len() + range_errors.len(),
                    slot,
                    cell: None,
                    kind: ViolationKind::CellOutOfRange { raw: raw_cell },
                });
                continue;
            }
        };
        let ins = match (op, fields.get(3)) {
            ("W", Some(p)) => Instruction::write(slot, cell, parse_pol(p).map_err(perr)?),
            ("W", None) => return Err(perr("write needs a polarization".into())),
            ("R", None) => Instruction::read(slot, cell),
            ("F", None) => Instruction::forced_read(slot, cell),
            ("R" | "F", Some(_)) => return Err(perr("reads take no polarization".into())),
            _ => return Err(perr(format!("unknown op {op:?}"))),
        };
        seq.push(ins);
    }
    if range_errors.is_empty() {
        Ok(seq)
    } else {
        Err(Error::InvalidSequence(range_errors))
    }
}

fn parse_pol(s: &str) -> std::result::Result<Polarization, String> {
    if let Some(l) = PolLabel::from_symbol(s) {
        return Ok(l.into());
    }
    let (t, p) = s.split_once(',').ok_or_else(|| format!("bad polarization {s:?}"))?;
    let t: f64 = t.parse().map_err(|_| format!("bad θ in {s:?}"))?;
    let p: f64 = p.parse().map_err(|_| format!("bad φ in {s:?}"))?;
    Polarization::new(t, p).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(i: usize) -> CellIndex {
        CellIndex::new(i).unwrap()
    }

    #[test]
    fn format_examples() {
        assert_eq!(Instruction::write(0, c(3), PolLabel::Plus).to_string(), "0 W 3 +");
        assert_eq!(Instruction::read(7, c(72)).to_string(), "7 R 72");
        assert_eq!(Instruction::forced_read(9, c(1)).to_string(), "9 F 1");
        let odd = Instruction::write(2, c(5), Polarization::new(0.1, 0.2).unwrap());
        assert_eq!(odd.to_string(), "2 W 5 0.1,0.2");
    }

    #[test]
    fn parse_with_comments() {
        let seq = parse_sequence("# header\n0 W 1 H\n\n1 R 1   # done\n").unwrap();
        assert_eq!(seq, vec![Instruction::write(0, c(1), PolLabel::H), Instruction::read(1, c(1))]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_sequence("0 W 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sequence("0 X 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_sequence("0 R 1 H"), Err(Error::Parse { .. })));
        assert!(matches!(parse_sequence("a R 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_sequence("0 W 1 2.0,0"), Err(Error::Parse { .. })));
        match parse_sequence("0 W 0 H\n1 R 73\n2 R -4") {
            Err(Error::InvalidSequence(v)) => {
                assert_eq!(v.len(), 3);
                assert!(v.iter().all(|x| matches!(x.kind, ViolationKind::CellOutOfRange { .. })));
            }
            other => panic!("{other:?}"),
        }
    }

    fn arb_instruction() -> impl Strategy<Value = Instruction> {
        (0u32..100_000, 1usize..=72, prop_oneof![
            (0usize..4).prop_map(|k| Op::Write { pol: PolLabel::ALL[k].into() }),
            (0.0..=std::f64::consts::FRAC_PI_2, 0.0..std::f64::consts::TAU)
                .prop_map(|(t, p)| Op::Write { pol: Polarization::new(t, p).unwrap() }),
            any::<bool>().prop_map(|forced| Op::Read { forced }),
        ])
            .prop_map(|(slot, cell, op)| Instruction { slot, cell: c(cell), op })
    }

    proptest! {
        #[test]
        fn emit_parse_round_trip(seq in prop::collection::vec(arb_instruction(), 0..50)) {
            let text = emit_sequence(&seq);
            prop_assert_eq!(parse_sequence(&text).unwrap(), seq.clone());
            prop_assert_eq!(emit_sequence(&parse_sequence(&text).unwrap()), text);
        }
    }
}
