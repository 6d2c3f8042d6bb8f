//! The 12×12 micro-ensemble array: addressing geometry, per-cell physics,
//! and the stateful store/retrieve model driven by a controller.

mod geometry;
mod physics;

pub use geometry::{
    aod_frequency, switching_time, ArrayGeometry, CellIndex, Ensemble, CELLS, COLS, ENSEMBLES,
    FREQ_BASE_MHZ, FREQ_STEP_MHZ, ROWS,
};
pub use physics::{
    crosstalk_channel, decay_probability, decohere_channel, DecayLaw, PhysicsParams,
    DEFAULT_FIDELITY_DECAY_SCALE, MEAN_ATOMIC_EFFICIENCY, MEAN_COHERENCE_US,
};

use rand::Rng;
use serde::Serialize;

use crate::qstate::DensityMatrix;
use crate::{Error, Result};

/// An excitation held in a qubit cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoredQubit {
    pub rho: DensityMatrix,
    pub t_write_us: f64,
    pub neighbor_ops_since_write: u32,
}

/// Per-cell bookkeeping. Empty cells carry no state and no write time.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CellState {
    pub stored: Option<StoredQubit>,
}

impl CellState {
    pub fn occupied(&self) -> bool {
        self.stored.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteOutcome {
    Stored,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReadOutcome {
    Retrieved(DensityMatrix),
    Lost,
}

#[derive(Debug, Clone)]
struct CellPhysics {
    tau_fidelity_us: f64,
    eta_write: f64,
    eta_read: f64,
}

/// Mutable state of the whole array.
#[derive(Debug, Clone)]
pub struct MemoryArray {
    geometry: ArrayGeometry,
    params: PhysicsParams,
    cells: Vec<CellState>,
    physics: Vec<CellPhysics>,
    /// For each ensemble, the cells whose neighbourhood contains it.
    exposed: Vec<Vec<CellIndex>>,
    p_crosstalk: f64,
}

impl MemoryArray {
    pub fn new(geometry: ArrayGeometry, params: PhysicsParams) -> Result<Self> {
        params.validate()?;
        let physics = CellIndex::all()
            .map(|c| {
                let pair = geometry.pair(c);
                let (eta_write, eta_read) = params.cell_eta_write_read(pair);
                CellPhysics { tau_fidelity_us: params.cell_tau_fidelity(pair), eta_write, eta_read }
            })
            .collect();
        let mut exposed = vec![Vec::new(); ENSEMBLES];
        for c in CellIndex::all() {
            for e in geometry.neighbors(c) {
                exposed[e.index()].push(c);
            }
        }
        Ok(Self {
            p_crosstalk: params.crosstalk_per_op(),
            cells: vec![CellState::default(); CELLS],
            geometry,
            params,
            physics,
            exposed,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    pub fn cell(&self, cell: CellIndex) -> &CellState {
        &self.cells[cell.slot()]
    }

    pub fn filling(&self) -> usize {
        self.cells.iter().filter(|c| c.occupied()).count()
    }

    pub fn eta_write(&self, cell: CellIndex) -> f64 {
        self.physics[cell.slot()].eta_write
    }

    pub fn eta_read(&self, cell: CellIndex) -> f64 {
        self.physics[cell.slot()].eta_read
    }

    pub fn tau_fidelity(&self, cell: CellIndex) -> f64 {
        self.physics[cell.slot()].tau_fidelity_us
    }

    /// One access of a single micro-ensemble: every stored qubit whose
    /// neighbourhood contains it picks up one crosstalk operation.
    pub fn access_ensemble(&mut self, e: Ensemble) {
        for &c in &self.exposed[e.index()] {
            if let Some(q) = self.cells[c.slot()].stored.as_mut() {
                q.neighbor_ops_since_write += 1;
            }
        }
    }

    /// Drives both ensembles of `cell` without touching its own contents.
    pub fn access_cell(&mut self, cell: CellIndex) {
        for e in self.geometry.pair(cell) {
            self.access_ensemble(e);
        }
    }

    fn check_empty(&self, cell: CellIndex) -> Result<()> {
        if self.cell(cell).occupied() {
            return Err(Error::Protocol(format!("write to occupied cell {cell}")));
        }
        Ok(())
    }

    /// Lossy write: stored with probability η_write. Neighbours see the
    /// access either way.
    pub fn write<R: Rng + ?Sized>(&mut self, cell: CellIndex, rho: DensityMatrix, t_us: f64, rng: &mut R) -> Result<WriteOutcome> {
        self.check_empty(cell)?;
        let stored = rng.random::<f64>() < self.eta_write(cell);
        self.access_cell(cell);
        if stored {
            self.place(cell, rho, t_us);
            Ok(WriteOutcome::Stored)
        } else {
            Ok(WriteOutcome::Lost)
        }
    }

    /// Write conditioned on the excitation being stored.
    pub fn write_postselected(&mut self, cell: CellIndex, rho: DensityMatrix, t_us: f64) -> Result<()> {
        self.check_empty(cell)?;
        self.access_cell(cell);
        self.place(cell, rho, t_us);
        Ok(())
    }

    fn place(&mut self, cell: CellIndex, rho: DensityMatrix, t_us: f64) {
        self.cells[cell.slot()].stored = Some(StoredQubit { rho, t_write_us: t_us, neighbor_ops_since_write: 0 });
    }

    /// State that a read at `t_us` would emit, given a successful retrieval.
    /// Does not touch the cell.
    pub fn retrieved_state(&self, cell: CellIndex, t_us: f64) -> Result<DensityMatrix> {
        let q = self
            .cell(cell)
            .stored
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("read of empty cell {cell}")))?;
        let dt = t_us - q.t_write_us;
        if dt < 0.0 {
            return Err(Error::Protocol(format!("read of cell {cell} at {t_us} µs before its write at {} µs", q.t_write_us)));
        }
        let rho = crosstalk_channel(&q.rho, q.neighbor_ops_since_write, self.p_crosstalk)?;
        decohere_channel(&rho, dt, self.tau_fidelity(cell), self.params.decay_law)
    }

    fn take(&mut self, cell: CellIndex, t_us: f64) -> Result<DensityMatrix> {
        let rho = self.retrieved_state(cell, t_us)?;
        self.cells[cell.slot()].stored = None;
        self.access_cell(cell);
        Ok(rho)
    }

    /// Lossy read. The excitation is consumed whether or not a photon comes out.
    pub fn read<R: Rng + ?Sized>(&mut self, cell: CellIndex, t_us: f64, rng: &mut R) -> Result<ReadOutcome> {
        let rho = self.take(cell, t_us)?;
        if rng.random::<f64>() < self.eta_read(cell) {
            Ok(ReadOutcome::Retrieved(rho))
        } else {
            Ok(ReadOutcome::Lost)
        }
    }

    /// Read conditioned on the photon being retrieved.
    pub fn read_postselected(&mut self, cell: CellIndex, t_us: f64) -> Result<DensityMatrix> {
        self.take(cell, t_us)
    }
}
