//! Per-ensemble physical parameters and the decay/crosstalk channels.

use serde::{Deserialize, Serialize};

use super::geometry::{Ensemble, CELLS, COLS, ENSEMBLES, ROWS};
use crate::qstate::{depolarize_last_qubit, DensityMatrix};
use crate::{Error, Result};

/// Mean combined write+read efficiency inside the atoms.
pub const MEAN_ATOMIC_EFFICIENCY: f64 = 0.055;
/// Mean coherence time of a micro-ensemble, µs.
pub const MEAN_COHERENCE_US: f64 = 500.0;
/// τ_F / τ_coherence. Puts the mean single-qubit fidelity after 500 µs at 0.92.
pub const DEFAULT_FIDELITY_DECAY_SCALE: f64 = 5.7356;

/// Functional form of storage-time decoherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayLaw {
    #[default]
    Exponential,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    /// Coherence time per micro-ensemble (row-major, 144 entries), µs.
    pub tau_coherence_us: Vec<f64>,
    /// Fidelity decay constant as a multiple of the coherence time.
    pub fidelity_decay_scale: f64,
    pub decay_law: DecayLaw,
    /// Combined write+read atomic efficiency per micro-ensemble (144 entries).
    pub eta_atoms: Vec<f64>,
    /// Infidelity from one round of operations on all six neighbours.
    pub crosstalk_round_infidelity: f64,
    pub access_time_us: f64,
    pub settle_time_ns: f64,
    pub gate_window_ns: f64,
    /// Fidelity of a fully decohered single qubit.
    pub fidelity_floor: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            tau_coherence_us: normalized_profile(0.12, MEAN_COHERENCE_US),
            fidelity_decay_scale: DEFAULT_FIDELITY_DECAY_SCALE,
            decay_law: DecayLaw::Exponential,
            eta_atoms: optical_depth_profile(),
            crosstalk_round_infidelity: 0.01,
            access_time_us: 1.0,
            settle_time_ns: 800.0,
            gate_window_ns: 200.0,
            fidelity_floor: 0.5,
        }
    }
}

/// Squared normalized distance from the array centre: 0 at the centre,
/// 1 at the corners.
fn radial2(e: Ensemble) -> f64 {
    let c = (ROWS as f64 - 1.0) / 2.0;
    let (dr, dc) = (e.row as f64 - c, e.col as f64 - c);
    (dr * dr + dc * dc) / (2.0 * c * c)
}

/// `1 + amp·(1 − 2ρ²)` rescaled to the requested mean.
fn normalized_profile(amp: f64, mean: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..ENSEMBLES)
        .map(|i| 1.0 + amp * (1.0 - 2.0 * radial2(Ensemble::from_index(i))))
        .collect();
    let m = raw.iter().sum::<f64>() / ENSEMBLES as f64;
    raw.into_iter().map(|x| x * mean / m).collect()
}

/// Efficiency proportional to optical depth falling from 5 at the centre to
/// 3 at the corners, normalized to the mean atomic efficiency.
fn optical_depth_profile() -> Vec<f64> {
    let od: Vec<f64> = (0..ENSEMBLES).map(|i| 5.0 - 2.0 * radial2(Ensemble::from_index(i))).collect();
    let m = od.iter().sum::<f64>() / ENSEMBLES as f64;
    od.into_iter().map(|x| x * MEAN_ATOMIC_EFFICIENCY / m).collect()
}

impl PhysicsParams {
    /// Lossless, decoherence-free, crosstalk-free array.
    pub fn noiseless() -> Self {
        Self {
            tau_coherence_us: vec![f64::INFINITY; ENSEMBLES],
            eta_atoms: vec![1.0; ENSEMBLES],
            crosstalk_round_infidelity: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.tau_coherence_us.len() != ENSEMBLES || self.eta_atoms.len() != ENSEMBLES {
            return bad(format!(
                "per-ensemble maps need {ENSEMBLES} entries (τ: {}, η: {})",
                self.tau_coherence_us.len(),
                self.eta_atoms.len()
            ));
        }
        if let Some(t) = self.tau_coherence_us.iter().find(|&&t| !(t > 0.0)) {
            return bad(format!("coherence time {t} must be positive"));
        }
        if let Some(e) = self.eta_atoms.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return bad(format!("efficiency {e} outside (0, 1]"));
        }
        if !(self.fidelity_decay_scale > 0.0) {
            return bad("fidelity_decay_scale must be positive".into());
        }
        if !(0.0..=0.1).contains(&self.crosstalk_round_infidelity) {
            return bad(format!("crosstalk_round_infidelity {} outside [0, 0.1]", self.crosstalk_round_infidelity));
        }
        for (name, v) in [
            ("access_time_us", self.access_time_us),
            ("settle_time_ns", self.settle_time_ns),
            ("gate_window_ns", self.gate_window_ns),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    /// Depolarizing probability contributed by one neighbour operation.
    pub fn crosstalk_per_op(&self) -> f64 {
        2.0 * self.crosstalk_round_infidelity / 6.0
    }

    pub fn ensemble_tau_fidelity(&self, e: Ensemble) -> f64 {
        self.tau_coherence_us[e.index()] * self.fidelity_decay_scale
    }

    /// Cell-level τ_F: mean over the two members.
    pub fn cell_tau_fidelity(&self, pair: [Ensemble; 2]) -> f64 {
        0.5 * (self.ensemble_tau_fidelity(pair[0]) + self.ensemble_tau_fidelity(pair[1]))
    }

    /// Cell-level combined atomic efficiency: mean over the two members.
    pub fn cell_eta_atoms(&self, pair: [Ensemble; 2]) -> f64 {
        0.5 * (self.eta_atoms[pair[0].index()] + self.eta_atoms[pair[1].index()])
    }

    /// Write and read each carry the square root of the combined efficiency.
    pub fn cell_eta_write_read(&self, pair: [Ensemble; 2]) -> (f64, f64) {
        let s = self.cell_eta_atoms(pair).sqrt();
        (s, s)
    }

    pub fn mean_eta_atoms(&self) -> f64 {
        self.eta_atoms.iter().sum::<f64>() / self.eta_atoms.len() as f64
    }

    /// Timing of one ensemble access: settle + gate must fit the access slot.
    pub fn timing_consistent(&self) -> bool {
        (self.settle_time_ns + self.gate_window_ns - self.access_time_us * 1e3).abs() < 1e-9
    }
}

/// Depolarizing probability after `dt` µs of storage.
pub fn decay_probability(dt_us: f64, tau_us: f64, law: DecayLaw) -> f64 {
    if dt_us <= 0.0 || tau_us.is_infinite() {
        return 0.0;
    }
    let x = dt_us / tau_us;
    match law {
        DecayLaw::Exponential => -(-x).exp_m1(),
        DecayLaw::Gaussian => -(-x * x).exp_m1(),
    }
}

/// Storage decoherence on the stored (last) qubit.
pub fn decohere_channel(rho: &DensityMatrix, dt_us: f64, tau_us: f64, law: DecayLaw) -> Result<DensityMatrix> {
    if dt_us < 0.0 {
        return Err(Error::OutOfRange(format!("negative storage time {dt_us}")));
    }
    depolarize_last_qubit(rho, decay_probability(dt_us, tau_us, law))
}

/// Crosstalk from `neighbor_ops` operations on neighbouring ensembles.
pub fn crosstalk_channel(rho: &DensityMatrix, neighbor_ops: u32, p_per_op: f64) -> Result<DensityMatrix> {
    let keep = (1.0 - p_per_op).powi(neighbor_ops as i32);
    depolarize_last_qubit(rho, 1.0 - keep)
}

/// Sanity bound: 72 cells of two ensembles each.
const _: () = assert!(CELLS * 2 == ROWS * COLS);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity_to_pure, polarization_to_density, Polarization};

    fn f_plus(rho: &DensityMatrix) -> f64 {
        fidelity_to_pure(rho, &Polarization::PLUS.ket()).unwrap()
    }

    #[test]
    fn defaults_are_valid_and_normalized() {
        let p = PhysicsParams::default();
        p.validate().unwrap();
        assert!((p.mean_eta_atoms() - 0.055).abs() < 1e-12);
        let mean_tau = p.tau_coherence_us.iter().sum::<f64>() / 144.0;
        assert!((mean_tau - 500.0).abs() < 1e-9);
        assert!(p.timing_consistent());
        // centre beats corner
        let centre = p.eta_atoms[Ensemble::new(5, 5).unwrap().index()];
        let corner = p.eta_atoms[0];
        assert!(centre > corner);
        assert!((centre / corner - 5.0 / 3.0).abs() < 0.05);
        PhysicsParams::noiseless().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_maps() {
        let mut p = PhysicsParams::default();
        p.eta_atoms[3] = 0.0;
        assert!(p.validate().is_err());
        let mut p = PhysicsParams::default();
        p.tau_coherence_us.pop();
        assert!(p.validate().is_err());
        let p = PhysicsParams { crosstalk_round_infidelity: 0.2, ..PhysicsParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn decay_examples() {
        let rho = polarization_to_density(Polarization::PLUS);
        let tau = 1000.0;
        assert_eq!(decohere_channel(&rho, 0.0, tau, DecayLaw::Exponential).unwrap(), rho);
        let f = f_plus(&decohere_channel(&rho, tau, tau, DecayLaw::Exponential).unwrap());
        assert!((f - (0.5 + 0.5 * (-1.0f64).exp())).abs() < 1e-12);
        assert!((f - 0.684).abs() < 1e-3);
        let far = decohere_channel(&rho, 1e9, tau, DecayLaw::Exponential).unwrap();
        assert!(far.distance(&DensityMatrix::maximally_mixed(2)) < 1e-12);
        assert!(decohere_channel(&rho, -1.0, tau, DecayLaw::Exponential).is_err());
        let g = f_plus(&decohere_channel(&rho, tau, tau, DecayLaw::Gaussian).unwrap());
        assert!((g - (0.5 + 0.5 * (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn decay_is_monotone() {
        let rho = polarization_to_density(Polarization::L);
        for law in [DecayLaw::Exponential, DecayLaw::Gaussian] {
            let mut prev = 1.0;
            for k in 0..100 {
                let f = fidelity_to_pure(&decohere_channel(&rho, 20.0 * k as f64, 2868.0, law).unwrap(), &Polarization::L.ket()).unwrap();
                assert!(f <= prev + 1e-15);
                prev = f;
            }
        }
    }

    #[test]
    fn crosstalk_examples() {
        let p = PhysicsParams::default().crosstalk_per_op();
        let rho = polarization_to_density(Polarization::H);
        assert_eq!(crosstalk_channel(&rho, 0, p).unwrap(), rho);
        let f6 = fidelity_to_pure(&crosstalk_channel(&rho, 6, p).unwrap(), &Polarization::H.ket()).unwrap();
        assert!((f6 - 0.99).abs() < 2e-4, "{f6}");
        let f18 = fidelity_to_pure(&crosstalk_channel(&rho, 18, p).unwrap(), &Polarization::H.ket()).unwrap();
        // 18-fold compounding of 1 − p/2 per op
        let oracle = 0.5 + 0.5 * (0..18).fold(1.0, |acc, _| acc * (1.0 - p));
        assert!((f18 - oracle).abs() < 1e-12);
        assert!((f18 - 0.9704).abs() < 1e-3);
    }

    #[test]
    fn default_cells_land_in_calibration_band() {
        // |+⟩ stored 500 µs with no crosstalk
        let p = PhysicsParams::default();
        let g = super::super::ArrayGeometry::default();
        for cell in super::super::CellIndex::all() {
            let tau = p.cell_tau_fidelity(g.pair(cell));
            let f = f_plus(&decohere_channel(&polarization_to_density(Polarization::PLUS), 500.0, tau, p.decay_law).unwrap());
            assert!((0.87..=0.93).contains(&f), "cell {cell}: {f}");
        }
    }
}
