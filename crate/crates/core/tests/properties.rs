use proptest::prelude::*;

use raqm::controller::{
    generate_sequence, queue_general, random_inputs, run_sequence, stack_general, validate_sequence, ControllerState, Instruction, Op,
    Outcome, RunOptions, ViolationKind,
};
use raqm::encoding::CalibrationSet;
use raqm::memarray::{ArrayGeometry, CellIndex, MemoryArray, PhysicsParams};
use raqm::qstate::PolLabel;
use raqm::rng_from_seed;

fn arb_raw_sequence() -> impl Strategy<Value = Vec<Instruction>> {
    prop::collection::vec((1usize..=8, any::<bool>(), 0usize..4), 1..60).prop_map(|ops| {
        ops.into_iter()
            .enumerate()
            .map(|(slot, (cell, write, pol))| {
                let cell = CellIndex::new(cell).unwrap();
                if write {
                    Instruction::write(slot as u32, cell, PolLabel::ALL[pol])
                } else {
                    Instruction::read(slot as u32, cell)
                }
            })
            .collect()
    })
}

/// Reference validator: a plain occupancy set.
fn legal(seq: &[Instruction]) -> bool {
    let mut held = [false; 73];
    seq.iter().all(|i| {
        let c = i.cell.get();
        let ok = held[c] != i.is_write();
        held[c] = i.is_write();
        ok
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn validator_agrees_with_reference(seq in arb_raw_sequence()) {
        prop_assert_eq!(validate_sequence(&seq, None).is_ok(), legal(&seq));
    }

    #[test]
    fn no_cloning_and_consumption(seq in arb_raw_sequence()) {
        if let Err(v) = validate_sequence(&seq, None) {
            for x in v {
                let expected = matches!(x.kind, ViolationKind::ReadEmpty | ViolationKind::WriteOccupied { .. });
                prop_assert!(expected, "{:?}", x);
            }
        }
    }

    #[test]
    fn generated_runs_conserve_filling(seed in any::<u64>(), n in 1usize..300, windowed in any::<bool>()) {
        let mut rng = rng_from_seed(seed);
        let window = windowed.then_some(500);
        let seq = generate_sequence(n, window, &mut rng).unwrap();
        prop_assert!(validate_sequence(&seq, window).is_ok());
        let mut a = MemoryArray::new(ArrayGeometry::default(), PhysicsParams::default()).unwrap();
        let opts = RunOptions { postselect: false, omniscient: true };
        let tr = run_sequence(&seq, &mut a, &CalibrationSet::identity(), opts, &mut rng).unwrap();
        let mut state = ControllerState::new(window);
        let mut physical = 0i64;
        for e in &tr.entries {
            state.apply(&e.instruction).unwrap();
            prop_assert_eq!(e.filling, state.filling());
            prop_assert!(e.filling <= 72);
            match e.outcome {
                Outcome::Stored => physical += 1,
                Outcome::Retrieved { .. } | Outcome::ReadLost { .. } => physical -= 1,
                Outcome::Lost | Outcome::Vacant { .. } => {}
            }
        }
        prop_assert_eq!(physical, a.filling() as i64);
        for c in CellIndex::all() {
            if !state.is_occupied(c) {
                prop_assert!(!a.cell(c).occupied());
            }
        }
    }

    #[test]
    fn fifo_and_lifo(seed in any::<u64>(), n in 1usize..=72) {
        let mut rng = rng_from_seed(seed);
        let inputs = random_inputs(n, &mut rng);
        let q = queue_general(&inputs, &mut rng).unwrap();
        let out: Vec<usize> = q.iter().filter(|i| !i.is_write()).map(|i| i.cell.get()).collect();
        prop_assert_eq!(out, (1..=n).collect::<Vec<_>>());
        let s = stack_general(&inputs, &mut rng).unwrap();
        let mut stack = Vec::new();
        for i in &s {
            match i.op {
                Op::Write { .. } => stack.push(i.cell),
                Op::Read { .. } => prop_assert_eq!(stack.pop(), Some(i.cell)),
            }
        }
        prop_assert!(stack.is_empty());
    }

    #[test]
    fn seed_determinism(seed in any::<u64>()) {
        let a = generate_sequence(200, Some(500), &mut rng_from_seed(seed)).unwrap();
        let b = generate_sequence(200, Some(500), &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
