//! Single-cell characterisation runs: neighbour crosstalk at fixed storage
//! time and per-cell fidelity against input state and storage time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{apply_converter, CalibrationSet};
use crate::memarray::{ArrayGeometry, CellIndex, MemoryArray, PhysicsParams};
use crate::qstate::{fidelity_to_pure, polarization_to_density, PolLabel};
use crate::{Error, Result};

/// Mean fidelity of `shots` write/read cycles on a fresh array, cycling
/// through the four inputs. `between` runs after the write.
#[allow(clippy::too_many_arguments)]
fn store_and_retrieve<R: Rng + ?Sized>(
    params: &PhysicsParams,
    cal: &CalibrationSet,
    cell: CellIndex,
    inputs: &[PolLabel],
    storage_us: f64,
    shots: usize,
    rng: &mut R,
    mut between: impl FnMut(&mut MemoryArray),
) -> Result<f64> {
    if shots == 0 || inputs.is_empty() {
        return Err(Error::OutOfRange("need at least one shot and one input".into()));
    }
    let template = MemoryArray::new(ArrayGeometry::default(), params.clone())?;
    let mut total = 0.0;
    for k in 0..shots {
        let pol = inputs[k % inputs.len()].polarization();
        let mut a = template.clone();
        let rho = apply_converter(&polarization_to_density(pol), &cal.input, rng)?;
        a.write_postselected(cell, rho, 0.0)?;
        between(&mut a);
        let out = apply_converter(&a.read_postselected(cell, storage_us)?, cal.cell(cell), rng)?;
        total += fidelity_to_pure(&out, &pol.ket())?;
    }
    Ok(total / shots as f64)
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::OutOfRange("fit needs at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::OutOfRange("fit needs distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub rounds: u32,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkProbe {
    pub cell: CellIndex,
    pub storage_us: f64,
    pub points: Vec<ProbePoint>,
    /// Fidelity change per round of neighbour operations.
    pub slope_per_round: f64,
    pub intercept: f64,
}

/// Stores a qubit in `cell`, drives every neighbouring ensemble once per
/// round, and reads at a fixed storage time.
pub fn crosstalk_probe<R: Rng + ?Sized>(
    params: &PhysicsParams,
    cal: &CalibrationSet,
    cell: CellIndex,
    storage_us: f64,
    max_rounds: u32,
    shots: usize,
    rng: &mut R,
) -> Result<CrosstalkProbe> {
    let neighbors = ArrayGeometry::default().neighbors(cell);
    let mut points = Vec::with_capacity(max_rounds as usize + 1);
    for rounds in 0..=max_rounds {
        let fidelity = store_and_retrieve(params, cal, cell, &PolLabel::ALL, storage_us, shots, rng, |a| {
            for _ in 0..rounds {
                for &e in &neighbors {
                    a.access_ensemble(e);
                }
            }
        })?;
        points.push(ProbePoint { rounds, fidelity });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.rounds as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.fidelity).collect();
    let (slope_per_round, intercept) = linear_fit(&xs, &ys)?;
    Ok(CrosstalkProbe { cell, storage_us, points, slope_per_round, intercept })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFidelity {
    pub cell: CellIndex,
    /// Per input state at the short storage time, in H, V, +, L order.
    pub by_pol: Vec<(PolLabel, f64)>,
    /// Four-state average against storage time, µs.
    pub vs_storage: Vec<(f64, f64)>,
}

pub const PROBE_CELLS: [usize; 6] = [1, 4, 20, 22, 34, 53];

pub fn single_cell_fidelity<R: Rng + ?Sized>(
    params: &PhysicsParams,
    cal: &CalibrationSet,
    cells: &[CellIndex],
    short_us: f64,
    storage_grid_us: &[f64],
    shots: usize,
    rng: &mut R,
) -> Result<Vec<CellFidelity>> {
    let mut out = Vec::with_capacity(cells.len());
    for &cell in cells {
        let mut by_pol = Vec::with_capacity(4);
        for l in PolLabel::ALL {
            by_pol.push((l, store_and_retrieve(params, cal, cell, &[l], short_us, shots, rng, |_| {})?));
        }
        let mut vs_storage = Vec::with_capacity(storage_grid_us.len());
        for &t in storage_grid_us {
            vs_storage.push((t, store_and_retrieve(params, cal, cell, &PolLabel::ALL, t, shots, rng, |_| {})?));
        }
        out.push(CellFidelity { cell, by_pol, vs_storage });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.9 - 0.01 * x).collect();
        let (s, b) = linear_fit(&xs, &ys).unwrap();
        assert!((s + 0.01).abs() < 1e-12 && (b - 0.9).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn crosstalk_free_array_is_flat() {
        let p = PhysicsParams { crosstalk_round_infidelity: 0.0, ..PhysicsParams::default() };
        let probe = crosstalk_probe(&p, &CalibrationSet::identity(), CellIndex::new(34).unwrap(), 55.0, 5, 8, &mut rng_from_seed(1)).unwrap();
        assert!(probe.slope_per_round.abs() < 1e-12);
    }

    #[test]
    fn one_percent_per_round() {
        let params = PhysicsParams::default();
        let cell = CellIndex::new(34).unwrap();
        let probe = crosstalk_probe(&params, &CalibrationSet::identity(), cell, 55.0, 10, 4, &mut rng_from_seed(2)).unwrap();
        // closed form for a pure input: F(r) = 1/2 + (1 − p_decay)(1 − p_op)^{6r}/2
        let a = MemoryArray::new(ArrayGeometry::default(), params.clone()).unwrap();
        let keep = (-55.0 / a.tau_fidelity(cell)).exp();
        let xs: Vec<f64> = (0..=10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|r| 0.5 + 0.5 * keep * (1.0 - params.crosstalk_per_op()).powf(6.0 * r)).collect();
        let (oracle, _) = linear_fit(&xs, &ys).unwrap();
        assert!((probe.slope_per_round - oracle).abs() < 1e-12, "{} vs {oracle}", probe.slope_per_round);
        assert!((probe.slope_per_round + 0.01).abs() < 0.002);
        for w in probe.points.windows(2) {
            assert!(w[1].fidelity < w[0].fidelity);
        }
    }

    #[test]
    fn noiseless_cells_are_perfect() {
        let cells: Vec<CellIndex> = PROBE_CELLS.iter().map(|&c| CellIndex::new(c).unwrap()).collect();
        let r = single_cell_fidelity(&PhysicsParams::noiseless(), &CalibrationSet::identity(), &cells, 15.0, &[100.0, 500.0], 4, &mut rng_from_seed(3)).unwrap();
        assert_eq!(r.len(), 6);
        for c in r {
            assert!(c.by_pol.iter().all(|&(_, f)| (f - 1.0).abs() < 1e-12));
            assert!(c.vs_storage.iter().all(|&(_, f)| (f - 1.0).abs() < 1e-12));
        }
    }
}
