use serde::{Deserialize, Serialize};

use crate::controller::{Outcome, Trace};
use crate::memarray::{CellIndex, CELLS};
use crate::qstate::PolLabel;

/// Classical single-qubit bound.
pub const DEFAULT_THRESHOLD: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistBin {
    pub storage_us: u32,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolFidelity {
    pub pol: PolLabel,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation, 0 below two samples.
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowFidelity {
    pub index: usize,
    pub slot: u32,
    pub cell: CellIndex,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_instructions: usize,
    pub n_writes: usize,
    pub n_reads: usize,
    pub n_forced: usize,
    pub n_retrieved: usize,
    pub n_lost: usize,
    /// Forced reads over all instructions.
    pub forced_fraction: f64,
    /// Forced reads over reads.
    pub forced_read_fraction: f64,
    /// Filling after each instruction.
    pub filling: Vec<usize>,
    pub mean_filling: f64,
    pub access_counts: Vec<u32>,
    pub access_total: u32,
    pub visited_cells: usize,
    /// Average over all cells.
    pub mean_access_all: f64,
    /// Average over cells accessed at least once.
    pub mean_access_visited: f64,
    pub max_access: u32,
    /// Storage time of every read, in read order.
    pub storage_times_us: Vec<u32>,
    pub storage_histogram: Vec<HistBin>,
    pub mean_storage_us: f64,
    pub max_storage_us: u32,
    pub fidelity_by_pol: Vec<PolFidelity>,
    pub mean_fidelity: f64,
    pub threshold: f64,
    pub below_threshold: Vec<LowFidelity>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn compute_metrics(trace: &Trace, threshold: f64) -> MetricsReport {
    let mut access_counts = vec![0u32; CELLS];
    let mut filling = Vec::with_capacity(trace.entries.len());
    let (mut n_writes, mut n_reads, mut n_forced, mut n_lost) = (0, 0, 0, 0);
    let mut storage_times_us = Vec::new();
    let mut by_pol: [Vec<f64>; 4] = Default::default();
    let mut all_fid = Vec::new();
    let mut below_threshold = Vec::new();

    for (index, e) in trace.entries.iter().enumerate() {
        let ins = &e.instruction;
        access_counts[ins.cell.slot()] += 1;
        filling.push(e.filling);
        if ins.is_write() {
            n_writes += 1;
        } else {
            n_reads += 1;
            n_forced += ins.is_forced() as usize;
        }
        if let Some(t) = e.outcome.storage_us() {
            storage_times_us.push(t);
        }
        match e.outcome {
            Outcome::Retrieved { fidelity, .. } => {
                if let Some(l) = e.input.label() {
                    by_pol[PolLabel::ALL.iter().position(|&x| x == l).expect("label in ALL")].push(fidelity);
                }
                all_fid.push(fidelity);
                if fidelity < threshold {
                    below_threshold.push(LowFidelity { index, slot: ins.slot, cell: ins.cell, fidelity });
                }
            }
            Outcome::Lost | Outcome::ReadLost { .. } | Outcome::Vacant { .. } => n_lost += 1,
            Outcome::Stored => {}
        }
    }

    let mut sorted = storage_times_us.clone();
    sorted.sort_unstable();
    let mut storage_histogram: Vec<HistBin> = Vec::new();
    for t in sorted {
        match storage_histogram.last_mut() {
            Some(b) if b.storage_us == t => b.count += 1,
            _ => storage_histogram.push(HistBin { storage_us: t, count: 1 }),
        }
    }

    let n = trace.entries.len();
    let access_total: u32 = access_counts.iter().sum();
    let visited_cells = access_counts.iter().filter(|&&c| c > 0).count();
    let fidelity_by_pol = PolLabel::ALL
        .iter()
        .zip(&by_pol)
        .map(|(&pol, xs)| {
            let (mean, std) = mean_std(xs);
            PolFidelity { pol, n: xs.len(), mean, std }
        })
        .collect();

    MetricsReport {
        n_instructions: n,
        n_writes,
        n_reads,
        n_forced,
        n_retrieved: all_fid.len(),
        n_lost,
        forced_fraction: ratio(n_forced as f64, n as f64),
        forced_read_fraction: ratio(n_forced as f64, n_reads as f64),
        mean_filling: ratio(filling.iter().sum::<usize>() as f64, n as f64),
        filling,
        access_total,
        visited_cells,
        mean_access_all: access_total as f64 / CELLS as f64,
        mean_access_visited: ratio(access_total as f64, visited_cells as f64),
        max_access: access_counts.iter().copied().max().unwrap_or(0),
        access_counts,
        mean_storage_us: ratio(storage_times_us.iter().map(|&t| t as f64).sum(), storage_times_us.len() as f64),
        max_storage_us: storage_times_us.iter().copied().max().unwrap_or(0),
        storage_times_us,
        storage_histogram,
        fidelity_by_pol,
        mean_fidelity: mean_std(&all_fid).0,
        threshold,
        below_threshold,
    }
}

/// Fixed-width histogram of storage times, `(bin start µs, count)`.
pub fn binned_storage_histogram(report: &MetricsReport, width_us: u32) -> Vec<(u32, u32)> {
    let width = width_us.max(1);
    let mut bins: Vec<(u32, u32)> = Vec::new();
    for b in &report.storage_histogram {
        let start = b.storage_us / width * width;
        match bins.last_mut() {
            Some(last) if last.0 == start => last.1 += b.count,
            _ => bins.push((start, b.count)),
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{queue_policy, random_inputs, run_sequence, RunOptions};
    use crate::encoding::CalibrationSet;
    use crate::memarray::{ArrayGeometry, MemoryArray, PhysicsParams};
    use crate::rng_from_seed;

    #[test]
    fn empty_trace_is_all_zero() {
        let m = compute_metrics(&Trace::default(), DEFAULT_THRESHOLD);
        assert_eq!(m.n_instructions, 0);
        assert_eq!(m.access_total, 0);
        assert_eq!((m.mean_filling, m.mean_storage_us, m.mean_fidelity, m.forced_fraction), (0.0, 0.0, 0.0, 0.0));
        assert!(m.storage_histogram.is_empty() && m.below_threshold.is_empty());
        assert!(m.fidelity_by_pol.iter().all(|p| p.n == 0 && p.mean == 0.0));
    }

    #[test]
    fn queue_histogram_single_bin() {
        let mut rng = rng_from_seed(4);
        let seq = queue_policy(&random_inputs(72, &mut rng)).unwrap();
        let mut a = MemoryArray::new(ArrayGeometry::default(), PhysicsParams::default()).unwrap();
        let tr = run_sequence(&seq, &mut a, &CalibrationSet::identity(), RunOptions::default(), &mut rng).unwrap();
        let m = compute_metrics(&tr, DEFAULT_THRESHOLD);
        assert_eq!(m.storage_histogram, vec![HistBin { storage_us: 144, count: 72 }]);
        assert_eq!(binned_storage_histogram(&m, 20), vec![(140, 72)]);
        assert_eq!(m.access_counts, vec![2; 72]);
        assert_eq!(m.mean_access_all, 2.0);
        assert_eq!(m.mean_access_visited, 2.0);
        assert_eq!(m.filling.iter().max(), Some(&72));
        assert_eq!(m.fidelity_by_pol.iter().map(|p| p.n).sum::<usize>(), 72);
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
