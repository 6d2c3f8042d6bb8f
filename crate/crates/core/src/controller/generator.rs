//! Random-access sequence generation with optional scrolling-window
//! forced readout.

use rand::Rng;

use super::{ControllerState, Instruction};
use crate::memarray::{CellIndex, CELLS};
use crate::qstate::PolLabel;
use crate::{Error, Result, CLOCK_US};

/// Maximum storage age enforced by the scrolling window, µs.
pub const DEFAULT_WINDOW_US: u32 = 500;

/// Probability that the next operation is a write, given the filling number.
pub fn write_probability(filling: usize) -> Result<f64> {
    match filling {
        0 => Ok(1.0),
        CELLS => Ok(0.0),
        n if n < CELLS => Ok(0.65 - 0.3 * n as f64 / CELLS as f64),
        n => Err(Error::OutOfRange(format!("filling {n} outside 0..={CELLS}"))),
    }
}

/// Forced read for `slot`: the oldest stored qubit whose age would reach the
/// window at the next clock edge. Ties go to the lowest cell index.
pub fn apply_scrolling_window(state: &ControllerState, slot: u32) -> Option<Instruction> {
    let window = state.window_us()?;
    CellIndex::all()
        .filter_map(|c| state.write_slot(c).map(|w| (w, c)))
        .filter(|&(w, _)| (slot + 1).saturating_sub(w) * CLOCK_US >= window)
        .min()
        .map(|(_, c)| Instruction::forced_read(slot, c))
}

/// Random access sequence without a storage window.
pub fn generate_random_sequence<R: Rng + ?Sized>(n_ops: usize, rng: &mut R) -> Result<Vec<Instruction>> {
    generate_sequence(n_ops, None, rng)
}

/// Random access sequence with scrolling-window forced readout.
pub fn generate_windowed_sequence<R: Rng + ?Sized>(n_ops: usize, window_us: u32, rng: &mut R) -> Result<Vec<Instruction>> {
    generate_sequence(n_ops, Some(window_us), rng)
}

/// One instruction per slot starting at slot 0. Writes go to a uniformly
/// chosen empty cell with a uniformly chosen H/V/+/L input; reads to a
/// uniformly chosen occupied cell. A forced read preempts the slot.
pub fn generate_sequence<R: Rng + ?Sized>(n_ops: usize, window_us: Option<u32>, rng: &mut R) -> Result<Vec<Instruction>> {
    if n_ops == 0 {
        return Err(Error::OutOfRange("n_ops must be at least 1".into()));
    }
    let mut state = ControllerState::new(window_us);
    let mut seq = Vec::with_capacity(n_ops);
    for slot in 0..n_ops as u32 {
        let ins = match apply_scrolling_window(&state, slot) {
            Some(forced) => forced,
            None => {
                let n = state.filling();
                let write = match n {
                    0 => true,
                    CELLS => false,
                    _ => rng.random::<f64>() < write_probability(n)?,
                };
                if write {
                    let empty = state.empty_cells();
                    let cell = empty[rng.random_range(0..empty.len())];
                    let pol = PolLabel::ALL[rng.random_range(0..4)];
                    Instruction::write(slot, cell, pol)
                } else {
                    let occupied = state.occupied_cells();
                    Instruction::read(slot, occupied[rng.random_range(0..occupied.len())])
                }
            }
        };
        state.apply(&ins).expect("generator only emits legal instructions");
        seq.push(ins);
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{validate_sequence, Op};
    use crate::rng_from_seed;

    #[test]
    fn write_probability_law() {
        assert_eq!(write_probability(0).unwrap(), 1.0);
        assert_eq!(write_probability(72).unwrap(), 0.0);
        assert!((write_probability(36).unwrap() - 0.5).abs() < 1e-15);
        assert!((write_probability(1).unwrap() - (0.65 - 0.3 / 72.0)).abs() < 1e-15);
        assert!(write_probability(73).is_err());
    }

    #[test]
    fn single_op_is_a_write() {
        for seed in 0..20 {
            let seq = generate_random_sequence(1, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(seq.len(), 1);
            assert!(seq[0].is_write());
        }
        assert!(generate_random_sequence(0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn generated_sequences_validate() {
        for seed in 0..200 {
            let seq = generate_random_sequence(250, &mut rng_from_seed(seed)).unwrap();
            validate_sequence(&seq, None).unwrap();
            let seq = generate_windowed_sequence(1000, 500, &mut rng_from_seed(seed)).unwrap();
            validate_sequence(&seq, Some(500)).unwrap();
        }
    }

    #[test]
    fn writes_minus_reads_is_final_filling() {
        for seed in 0..50 {
            let seq = generate_random_sequence(144, &mut rng_from_seed(seed)).unwrap();
            let mut state = ControllerState::new(None);
            for ins in &seq {
                state.apply(ins).unwrap();
            }
            let writes = seq.iter().filter(|i| i.is_write()).count();
            assert_eq!(writes - (seq.len() - writes), state.filling());
        }
    }

    #[test]
    fn forced_read_deadline() {
        let mut state = ControllerState::new(Some(500));
        state.apply(&Instruction::write(0, CellIndex::new(7).unwrap(), PolLabel::H)).unwrap();
        assert_eq!(apply_scrolling_window(&state, 248), None);
        assert_eq!(apply_scrolling_window(&state, 249), Some(Instruction::forced_read(249, CellIndex::new(7).unwrap())));
        assert_eq!(apply_scrolling_window(&ControllerState::new(Some(500)), 10), None);
        assert_eq!(apply_scrolling_window(&ControllerState::new(None), 10_000), None);
    }

    #[test]
    fn oldest_expiring_qubit_goes_first() {
        let mut state = ControllerState::new(Some(500));
        state.apply(&Instruction::write(3, CellIndex::new(9).unwrap(), PolLabel::H)).unwrap();
        state.apply(&Instruction::write(4, CellIndex::new(2).unwrap(), PolLabel::H)).unwrap();
        let f = apply_scrolling_window(&state, 400).unwrap();
        assert_eq!(f.cell, CellIndex::new(9).unwrap());
    }

    #[test]
    fn window_caps_storage_time() {
        for seed in 0..50 {
            let seq = generate_windowed_sequence(1000, 500, &mut rng_from_seed(seed)).unwrap();
            let mut state = ControllerState::new(Some(500));
            for ins in &seq {
                if let Op::Read { .. } = ins.op {
                    assert!(state.age_us(ins.cell, ins.slot).unwrap() <= 498);
                }
                state.apply(ins).unwrap();
            }
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate_windowed_sequence(1000, 500, &mut rng_from_seed(42)).unwrap();
        let b = generate_windowed_sequence(1000, 500, &mut rng_from_seed(42)).unwrap();
        assert_eq!(a, b);
    }
}
