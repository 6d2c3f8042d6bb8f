//! Queue, stack and buffer control policies. The i-th input qubit always
//! goes to qubit cell i.

use std::collections::VecDeque;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::Instruction;
use crate::memarray::{CellIndex, CELLS};
use crate::qstate::{PolLabel, Polarization};
use crate::{Error, Result};

fn check_capacity(n: usize) -> Result<()> {
    if n > CELLS {
        return Err(Error::Capacity { requested: n, capacity: CELLS });
    }
    Ok(())
}

fn cell(i: usize) -> CellIndex {
    CellIndex::new(i + 1).expect("capacity checked")
}

/// Uniformly random H/V/+/L inputs.
pub fn random_inputs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Polarization> {
    (0..n).map(|_| PolLabel::ALL[rng.random_range(0..4)].into()).collect()
}

/// All enqueues back to back, then all dequeues in arrival order.
pub fn queue_policy(inputs: &[Polarization]) -> Result<Vec<Instruction>> {
    fill_then_drain(inputs, (0..inputs.len()).collect())
}

/// All pushes back to back, then all pops in reverse order.
pub fn stack_policy(inputs: &[Polarization]) -> Result<Vec<Instruction>> {
    fill_then_drain(inputs, (0..inputs.len()).rev().collect())
}

fn fill_then_drain(inputs: &[Polarization], order: Vec<usize>) -> Result<Vec<Instruction>> {
    check_capacity(inputs.len())?;
    let n = inputs.len() as u32;
    let writes = inputs.iter().enumerate().map(|(i, &p)| Instruction::write(i as u32, cell(i), p));
    let reads = order.into_iter().enumerate().map(|(k, i)| Instruction::read(n + k as u32, cell(i)));
    Ok(writes.chain(reads).collect())
}

/// Writes at the given arrival slots, then one contiguous block of reads in
/// `flush_order` (1-based arrival numbers) starting right after the last
/// arrival.
pub fn buffer_policy(arrivals: &[u32], flush_order: &[usize], inputs: &[Polarization]) -> Result<Vec<Instruction>> {
    let n = arrivals.len();
    check_capacity(n)?;
    if inputs.len() != n {
        return Err(Error::Config(format!("{} arrivals but {} input states", n, inputs.len())));
    }
    if arrivals.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("arrival slots must be strictly increasing".into()));
    }
    let mut seen = vec![false; n];
    for &k in flush_order {
        if k == 0 || k > n || std::mem::replace(&mut seen[k - 1], true) {
            return Err(Error::Config(format!("flush order is not a permutation of 1..={n}")));
        }
    }
    if flush_order.len() != n {
        return Err(Error::Config(format!("flush order is not a permutation of 1..={n}")));
    }
    let start = arrivals.last().map_or(0, |&s| s + 1);
    let writes = arrivals.iter().zip(inputs).enumerate().map(|(i, (&s, &p))| Instruction::write(s, cell(i), p));
    let reads = flush_order.iter().enumerate().map(|(k, &i)| Instruction::read(start + k as u32, cell(i - 1)));
    Ok(writes.chain(reads).collect())
}

/// `n` sorted arrival slots spread over `span` slots, first at 0 and last at
/// `span − 1`, plus a random flush permutation.
pub fn random_buffer_arrivals<R: Rng + ?Sized>(n: usize, span: u32, rng: &mut R) -> Result<(Vec<u32>, Vec<usize>)> {
    check_capacity(n)?;
    if n as u32 > span || (n >= 2 && span < 2) {
        return Err(Error::Config(format!("cannot fit {n} arrivals into {span} slots")));
    }
    let mut arrivals: Vec<u32> = match n {
        0 => Vec::new(),
        1 => vec![0],
        _ => {
            let inner = index::sample(rng, span as usize - 2, n - 2).into_iter().map(|s| s as u32 + 1);
            [0, span - 1].into_iter().chain(inner).collect()
        }
    };
    arrivals.sort_unstable();
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    Ok((arrivals, order))
}

/// Interleaved FIFO: each slot enqueues or dequeues with equal chance until
/// all inputs have passed through.
pub fn queue_general<R: Rng + ?Sized>(inputs: &[Polarization], rng: &mut R) -> Result<Vec<Instruction>> {
    interleaved(inputs, rng, |pending: &mut VecDeque<usize>| pending.pop_front())
}

/// Interleaved LIFO counterpart of [`queue_general`].
pub fn stack_general<R: Rng + ?Sized>(inputs: &[Polarization], rng: &mut R) -> Result<Vec<Instruction>> {
    interleaved(inputs, rng, |pending: &mut VecDeque<usize>| pending.pop_back())
}

fn interleaved<R: Rng + ?Sized>(
    inputs: &[Polarization],
    rng: &mut R,
    mut take: impl FnMut(&mut VecDeque<usize>) -> Option<usize>,
) -> Result<Vec<Instruction>> {
    check_capacity(inputs.len())?;
    let mut pending = VecDeque::new();
    let mut next = 0;
    let mut seq = Vec::with_capacity(2 * inputs.len());
    let mut slot = 0u32;
    while next < inputs.len() || !pending.is_empty() {
        let must_write = pending.is_empty();
        let must_read = next == inputs.len();
        let write = must_write || (!must_read && rng.random_bool(0.5));
        if write {
            seq.push(Instruction::write(slot, cell(next), inputs[next]));
            pending.push_back(next);
            next += 1;
        } else {
            let i = take(&mut pending).expect("non-empty");
            seq.push(Instruction::read(slot, cell(i)));
        }
        slot += 1;
    }
    Ok(seq)
}
