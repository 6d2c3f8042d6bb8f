//! Heralded photon-pair source and the catch, freeze, reshuffle, release
//! protocol for idler photons.
//!
//! Pair states are two-qubit density matrices ordered signal ⊗ idler. The
//! memory array stores the whole pair and its channels act on the idler
//! only, so the signal half is never touched.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::encoding::{apply_converter, CalibrationSet};
use crate::memarray::{CellIndex, MemoryArray};
use crate::qstate::{estimate_bell_fidelity, fidelity_to_pure, psi_plus, werner_state, BellFidelity, DensityMatrix};
use crate::{Error, Result, CLOCK_US};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceParams {
    /// Herald probability per write-clean trial.
    pub p_exc: f64,
    pub cycle_us: f64,
    /// Overlap of the emitted pair with `|Ψ⁺⟩`.
    pub f_source: f64,
    /// Source idle time after each herald while the idler is caught.
    pub catch_dead_time_us: f64,
    pub max_trials: u64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self { p_exc: 0.011, cycle_us: 0.7, f_source: 0.94, catch_dead_time_us: 2.0, max_trials: 1_000_000 }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_exc > 0.0 && self.p_exc <= 1.0) {
            return Err(Error::Config(format!("p_exc {} outside (0, 1]", self.p_exc)));
        }
        if !(self.cycle_us > 0.0 && self.cycle_us.is_finite()) {
            return Err(Error::Config(format!("cycle {} µs must be positive", self.cycle_us)));
        }
        if !(self.f_source > 0.25 && self.f_source <= 1.0) {
            return Err(Error::Config(format!("f_source {} outside (1/4, 1]", self.f_source)));
        }
        if !(self.catch_dead_time_us >= 0.0 && self.catch_dead_time_us.is_finite()) {
            return Err(Error::Config("catch dead time must be non-negative".into()));
        }
        if self.max_trials == 0 {
            return Err(Error::Config("max_trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Mean waiting time for one herald, µs.
    pub fn mean_herald_time(&self) -> f64 {
        self.cycle_us / self.p_exc
    }

    pub fn pair_state(&self) -> Result<DensityMatrix> {
        werner_state(self.f_source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Herald {
    pub trials: u64,
}

impl Herald {
    pub fn time_us(&self, params: &SourceParams) -> f64 {
        self.trials as f64 * params.cycle_us
    }
}

/// Trials until the first herald, counting the successful one.
pub fn sample_herald<R: Rng + ?Sized>(params: &SourceParams, rng: &mut R) -> Result<Herald> {
    params.validate()?;
    let failures = Geometric::new(params.p_exc).map_err(|e| Error::Config(e.to_string()))?.sample(rng);
    let trials = failures.saturating_add(1);
    if trials > params.max_trials {
        return Err(Error::HeraldTimeout(params.max_trials));
    }
    Ok(Herald { trials })
}

/// Largest total trial count that still lets `k` heralds, each followed by
/// its dead time, finish by `t_us`. `None` if even the dead times overrun.
pub fn trial_budget(t_us: f64, k: u32, params: &SourceParams) -> Option<u64> {
    let slack = t_us - k as f64 * params.catch_dead_time_us;
    if slack < 0.0 {
        return None;
    }
    Some((slack / params.cycle_us + 1e-9).floor() as u64)
}

/// Exact probability that `k` heralds complete within `t_us`: the k-th
/// success of a Bernoulli(p) sequence within the trial budget.
pub fn prob_k_pairs_within(t_us: f64, k: u32, params: &SourceParams) -> Result<f64> {
    params.validate()?;
    if !(t_us > 0.0) || k == 0 {
        return Err(Error::OutOfRange("need T > 0 and k ≥ 1".into()));
    }
    let Some(n) = trial_budget(t_us, k, params) else { return Ok(0.0) };
    if n < k as u64 {
        return Ok(0.0);
    }
    Ok(1.0 - binomial_cdf(k as u64 - 1, n, params.p_exc))
}

/// `P(X ≤ j)` for `X ~ Binomial(n, p)`, summed in log space.
fn binomial_cdf(j: u64, n: u64, p: f64) -> f64 {
    if p >= 1.0 {
        return if j >= n { 1.0 } else { 0.0 };
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_choose = 0.0;
    let mut total = 0.0;
    for i in 0..=j.min(n) {
        if i > 0 {
            log_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        total += (log_choose + i as f64 * lp + (n - i) as f64 * lq).exp();
    }
    total.min(1.0)
}

/// Monte Carlo estimate of [`prob_k_pairs_within`].
pub fn prob_k_pairs_within_mc<R: Rng + ?Sized>(t_us: f64, k: u32, params: &SourceParams, samples: u64, rng: &mut R) -> Result<f64> {
    params.validate()?;
    if samples == 0 {
        return Err(Error::OutOfRange("samples must be at least 1".into()));
    }
    let geo = Geometric::new(params.p_exc).map_err(|e| Error::Config(e.to_string()))?;
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut t = 0.0;
        for _ in 0..k {
            t += (geo.sample(rng) + 1) as f64 * params.cycle_us + params.catch_dead_time_us;
        }
        if t <= t_us + 1e-9 {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPRRecord {
    pub pair_id: usize,
    pub herald_time_us: f64,
    pub trials: u64,
    pub cell: CellIndex,
    pub catch_slot: u32,
    pub release_slot: u32,
    /// Idler storage time, release minus catch.
    pub storage_us: u32,
    pub rho_final: DensityMatrix,
    pub fidelity: f64,
}

fn check_order(order: &[usize]) -> Result<()> {
    let mut seen = vec![false; order.len()];
    for &k in order {
        if k == 0 || k > order.len() || std::mem::replace(&mut seen[k - 1], true) {
            return Err(Error::Config(format!("release order {order:?} is not a permutation of 1..={}", order.len())));
        }
    }
    if order.is_empty() {
        return Err(Error::Config("release order is empty".into()));
    }
    Ok(())
}

/// Catches one idler per herald into the lowest free cells, then releases
/// them in `order` (1-based pair numbers) on consecutive clock slots right
/// after the last catch. Writes and reads are postselected.
pub fn catch_freeze_reshuffle_release<R: Rng + ?Sized>(
    order: &[usize],
    params: &SourceParams,
    array: &mut MemoryArray,
    cal: &CalibrationSet,
    rng: &mut R,
) -> Result<Vec<EPRRecord>> {
    check_order(order)?;
    params.validate()?;
    cal.validate()?;
    let free: Vec<CellIndex> = CellIndex::all().filter(|&c| !array.cell(c).occupied()).take(order.len()).collect();
    if free.len() < order.len() {
        return Err(Error::Capacity { requested: order.len(), capacity: free.len() });
    }
    let source = params.pair_state()?;

    let mut caught = Vec::with_capacity(order.len());
    let mut t = 0.0;
    let mut last_slot: Option<u32> = None;
    for &cell in &free {
        let h = sample_herald(params, rng)?;
        let herald = t + h.time_us(params);
        let edge = (herald / CLOCK_US as f64 - 1e-9).ceil().max(0.0) as u32;
        let slot = last_slot.map_or(edge, |s| edge.max(s + 1));
        let rho = apply_converter(&source, &cal.input, rng)?;
        array.write_postselected(cell, rho, (slot * CLOCK_US) as f64)?;
        caught.push((herald, h.trials, cell, slot));
        last_slot = Some(slot);
        t = herald + params.catch_dead_time_us;
    }

    let first_release = last_slot.expect("non-empty order") + 1;
    let mut records: Vec<Option<EPRRecord>> = vec![None; order.len()];
    for (k, &pair) in order.iter().enumerate() {
        let (herald, trials, cell, catch_slot) = caught[pair - 1];
        let release_slot = first_release + k as u32;
        let rho = array.read_postselected(cell, (release_slot * CLOCK_US) as f64)?;
        let rho_final = apply_converter(&rho, cal.cell(cell), rng)?;
        let fidelity = fidelity_to_pure(&rho_final, &psi_plus())?;
        records[pair - 1] = Some(EPRRecord {
            pair_id: pair,
            herald_time_us: herald,
            trials,
            cell,
            catch_slot,
            release_slot,
            storage_us: (release_slot - catch_slot) * CLOCK_US,
            rho_final,
            fidelity,
        });
    }
    Ok(records.into_iter().map(|r| r.expect("order is a permutation")).collect())
}

/// Fidelity estimate from sampled xx, yy and zz coincidences.
pub fn pair_fidelity_via_tomography<R: Rng + ?Sized>(record: &EPRRecord, shots_per_basis: u64, rng: &mut R) -> Result<BellFidelity> {
    estimate_bell_fidelity(&record.rho_final, shots_per_basis, rng)
}
