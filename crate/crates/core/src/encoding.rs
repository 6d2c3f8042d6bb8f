//! Polarization → time-bin → path → time-bin → polarization conversion.
//!
//! Every amplitude and phase error along the chain is lumped into one
//! diagonal operator `diag(1, r·e^{i(Δφ + ξ)})` per direction, with `ξ` a
//! fresh Gaussian phase kick per photon. The channel is trace preserving:
//! losses are accounted for in the efficiency budget, not here.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::memarray::{CellIndex, CELLS};
use crate::qstate::{apply_last_qubit_operator, DensityMatrix, Polarization};
use crate::{Error, Result};
use num_complex::Complex64;

/// Time-bin separation of the interferometer, µs. Equals one
/// micro-ensemble access.
pub const ARM_DELAY_US: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterCalibration {
    /// V-arm over H-arm amplitude transmission.
    pub amp_imbalance: f64,
    /// Static relative phase, radians.
    pub phase_offset: f64,
    /// Shot-to-shot phase noise, radians.
    pub phase_jitter_sigma: f64,
    pub arm_delay_us: f64,
}

impl Default for ConverterCalibration {
    fn default() -> Self {
        Self::identity()
    }
}

impl ConverterCalibration {
    pub const fn identity() -> Self {
        Self { amp_imbalance: 1.0, phase_offset: 0.0, phase_jitter_sigma: 0.0, arm_delay_us: ARM_DELAY_US }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp_imbalance > 0.0 && self.amp_imbalance.is_finite()) {
            return Err(Error::Config(format!("amp_imbalance {} must be positive", self.amp_imbalance)));
        }
        if !(self.phase_jitter_sigma >= 0.0) || !self.phase_offset.is_finite() {
            return Err(Error::Config("phase parameters must be finite, jitter non-negative".into()));
        }
        if (self.arm_delay_us - ARM_DELAY_US).abs() > 1e-12 {
            return Err(Error::Config(format!("arm delay {} µs must equal the {ARM_DELAY_US} µs access time", self.arm_delay_us)));
        }
        Ok(())
    }

    /// Static correction that undoes this calibration's amplitude and phase.
    pub fn inverse(&self) -> Self {
        Self { amp_imbalance: 1.0 / self.amp_imbalance, phase_offset: -self.phase_offset, ..*self }
    }

    /// Serial composition of two converter stages.
    pub fn compose(&self, next: &ConverterCalibration) -> Self {
        Self {
            amp_imbalance: self.amp_imbalance * next.amp_imbalance,
            phase_offset: self.phase_offset + next.phase_offset,
            phase_jitter_sigma: self.phase_jitter_sigma.hypot(next.phase_jitter_sigma),
            arm_delay_us: self.arm_delay_us,
        }
    }

    /// Draws the per-shot operator. Always consumes one normal variate so
    /// the RNG stream does not depend on σ.
    pub fn sample_operator<R: Rng + ?Sized>(&self, rng: &mut R) -> [[Complex64; 2]; 2] {
        let xi: f64 = StandardNormal.sample(rng);
        let phase = self.phase_offset + self.phase_jitter_sigma * xi;
        let zero = Complex64::new(0.0, 0.0);
        [[Complex64::new(1.0, 0.0), zero], [zero, Complex64::from_polar(self.amp_imbalance, phase)]]
    }

    /// Fidelity with the input, averaged over the phase jitter, for a pure
    /// polarization input.
    pub fn mean_fidelity(&self, pol: Polarization) -> f64 {
        let x = pol.theta().cos().powi(2);
        let y = pol.theta().sin().powi(2) * self.amp_imbalance;
        let damping = (-0.5 * self.phase_jitter_sigma.powi(2)).exp();
        let norm = x + pol.theta().sin().powi(2) * self.amp_imbalance.powi(2);
        (x * x + y * y + 2.0 * x * y * self.phase_offset.cos() * damping) / norm
    }
}

/// One converter stage applied to the last qubit of `rho`.
pub fn apply_converter<R: Rng + ?Sized>(rho: &DensityMatrix, cal: &ConverterCalibration, rng: &mut R) -> Result<DensityMatrix> {
    apply_last_qubit_operator(rho, &cal.sample_operator(rng))
}

/// Input stage followed by output stage.
pub fn converter_channel<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    cal_in: &ConverterCalibration,
    cal_out: &ConverterCalibration,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let mid = apply_converter(rho, cal_in, rng)?;
    apply_converter(&mid, cal_out, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationQuality {
    Ideal,
    /// Hand-tuned per cell before a single-cell measurement.
    #[default]
    Careful,
    /// Quick pass over all cells before a long continuous run.
    Fast,
}

/// Spread of miscalibrations drawn by [`miscalibration_sampler`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiscalibrationSpread {
    /// σ of `ln r`.
    pub amp_log_sigma: f64,
    /// σ of the static phase offset, radians.
    pub offset_sigma: f64,
    /// Per-shot phase jitter assigned to each sampled cell, radians.
    pub jitter_sigma: f64,
}

impl MiscalibrationSpread {
    pub fn for_quality(q: CalibrationQuality) -> Self {
        match q {
            CalibrationQuality::Ideal => Self { amp_log_sigma: 0.0, offset_sigma: 0.0, jitter_sigma: 0.0 },
            CalibrationQuality::Careful => Self { amp_log_sigma: 0.03, offset_sigma: 0.08, jitter_sigma: 0.05 },
            CalibrationQuality::Fast => Self { amp_log_sigma: 0.15, offset_sigma: 0.65, jitter_sigma: 0.15 },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ConverterCalibration {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        ConverterCalibration {
            amp_imbalance: (self.amp_log_sigma * a).exp(),
            phase_offset: self.offset_sigma * b,
            phase_jitter_sigma: self.jitter_sigma,
            arm_delay_us: ARM_DELAY_US,
        }
    }
}

pub fn miscalibration_sampler<R: Rng + ?Sized>(quality: CalibrationQuality, rng: &mut R) -> ConverterCalibration {
    MiscalibrationSpread::for_quality(quality).sample(rng)
}

/// Calibration state of the whole device: one shared input converter and a
/// read-out calibration per qubit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub input: ConverterCalibration,
    pub cells: Vec<ConverterCalibration>,
}

impl CalibrationSet {
    pub fn identity() -> Self {
        Self { input: ConverterCalibration::identity(), cells: vec![ConverterCalibration::identity(); CELLS] }
    }

    pub fn sample<R: Rng + ?Sized>(input: MiscalibrationSpread, cells: MiscalibrationSpread, rng: &mut R) -> Self {
        let input = input.sample(rng);
        let cells = (0..CELLS).map(|_| cells.sample(rng)).collect();
        Self { input, cells }
    }

    /// The shared input converter is tuned once and never worse than
    /// careful; `q` sets the per-cell read-out quality.
    pub fn for_quality<R: Rng + ?Sized>(q: CalibrationQuality, rng: &mut R) -> Self {
        let input = match q {
            CalibrationQuality::Ideal => CalibrationQuality::Ideal,
            _ => CalibrationQuality::Careful,
        };
        Self::sample(MiscalibrationSpread::for_quality(input), MiscalibrationSpread::for_quality(q), rng)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != CELLS {
            return Err(Error::Config(format!("calibration table has {} cells, expected {CELLS}", self.cells.len())));
        }
        self.input.validate()?;
        self.cells.iter().try_for_each(|c| c.validate())
    }

    pub fn cell(&self, cell: CellIndex) -> &ConverterCalibration {
        &self.cells[cell.slot()]
    }

    /// End-to-end calibration seen by a qubit stored in `cell`.
    pub fn composed(&self, cell: CellIndex) -> ConverterCalibration {
        self.input.compose(self.cell(cell))
    }
}
