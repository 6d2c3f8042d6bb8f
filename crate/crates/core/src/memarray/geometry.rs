//! Micro-ensemble grid, qubit-cell pairing and AOD addressing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ROWS: usize = 12;
pub const COLS: usize = 12;
pub const ENSEMBLES: usize = ROWS * COLS;
pub const CELLS: usize = ENSEMBLES / 2;

/// Lowest AOD drive frequency, MHz.
pub const FREQ_BASE_MHZ: f64 = 85.0;
/// Frequency step between adjacent rows/columns, MHz.
pub const FREQ_STEP_MHZ: f64 = 3.0;

/// One micro-ensemble on the 12×12 grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ensemble {
    pub row: u8,
    pub col: u8,
}

impl Ensemble {
    pub fn new(row: usize, col: usize) -> Result<Self> {
        if row >= ROWS || col >= COLS {
            return Err(Error::OutOfRange(format!("ensemble ({row},{col}) outside 12×12 grid")));
        }
        Ok(Self { row: row as u8, col: col as u8 })
    }

    pub fn index(self) -> usize {
        self.row as usize * COLS + self.col as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self { row: (i / COLS) as u8, col: (i % COLS) as u8 }
    }

    /// 4-connected grid neighbours.
    pub fn neighbors(self) -> impl Iterator<Item = Ensemble> {
        let (r, c) = (self.row as i32, self.col as i32);
        [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .filter(|&(r, c)| r >= 0 && c >= 0 && (r as usize) < ROWS && (c as usize) < COLS)
            .map(|(r, c)| Ensemble { row: r as u8, col: c as u8 })
    }

    fn is_adjacent(self, other: Ensemble) -> bool {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col) == 1
    }

    /// `(f_x, f_y)` in MHz: X selects the column, Y the row.
    pub fn aod_frequencies(self) -> (f64, f64) {
        (aod_frequency(self.col as usize), aod_frequency(self.row as usize))
    }
}

/// Drive frequency of grid line `j`, MHz.
pub fn aod_frequency(j: usize) -> f64 {
    FREQ_BASE_MHZ + FREQ_STEP_MHZ * j as f64
}

/// 1-based qubit-cell index, `1..=72`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CellIndex(u8);

impl CellIndex {
    pub fn new(i: usize) -> Result<Self> {
        if (1..=CELLS).contains(&i) {
            Ok(Self(i as u8))
        } else {
            Err(Error::OutOfRange(format!("qubit cell {i} outside 1..={CELLS}")))
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Zero-based position for indexing per-cell tables.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = CellIndex> {
        (1..=CELLS as u8).map(CellIndex)
    }
}

impl TryFrom<u8> for CellIndex {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v as usize)
    }
}

impl From<CellIndex> for u8 {
    fn from(c: CellIndex) -> u8 {
        c.0
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Assignment of the 72 qubit cells to adjacent micro-ensemble pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[Ensemble; 2]>", into = "Vec<[Ensemble; 2]>")]
pub struct ArrayGeometry {
    pairing: Vec<[Ensemble; 2]>,
    owner: Vec<CellIndex>,
}

impl Default for ArrayGeometry {
    /// Row-major horizontal pairing: cell `6r + k + 1` holds columns `2k`
    /// and `2k + 1` of row `r`.
    fn default() -> Self {
        let pairing = (0..CELLS)
            .map(|i| {
                let (r, k) = (i / (COLS / 2), i % (COLS / 2));
                [Ensemble { row: r as u8, col: 2 * k as u8 }, Ensemble { row: r as u8, col: 2 * k as u8 + 1 }]
            })
            .collect();
        Self::from_pairing(pairing).expect("default pairing is a valid tiling")
    }
}

impl TryFrom<Vec<[Ensemble; 2]>> for ArrayGeometry {
    type Error = Error;

    fn try_from(p: Vec<[Ensemble; 2]>) -> Result<Self> {
        Self::from_pairing(p)
    }
}

impl From<ArrayGeometry> for Vec<[Ensemble; 2]> {
    fn from(g: ArrayGeometry) -> Self {
        g.pairing
    }
}

impl ArrayGeometry {
    /// Entry `k` is the pair for cell `k + 1`. Pairs must be grid-adjacent and
    /// jointly cover all 144 ensembles exactly once.
    pub fn from_pairing(pairing: Vec<[Ensemble; 2]>) -> Result<Self> {
        if pairing.len() != CELLS {
            return Err(Error::Config(format!("pairing has {} cells, expected {CELLS}", pairing.len())));
        }
        let mut owner: Vec<Option<CellIndex>> = vec![None; ENSEMBLES];
        for (k, pair) in pairing.iter().enumerate() {
            let cell = CellIndex::new(k + 1)?;
            if !pair[0].is_adjacent(pair[1]) {
                return Err(Error::Config(format!("cell {cell}: {:?} and {:?} are not adjacent", pair[0], pair[1])));
            }
            for e in pair {
                if e.row as usize >= ROWS || e.col as usize >= COLS {
                    return Err(Error::Config(format!("cell {cell}: ensemble {e:?} off grid")));
                }
                if let Some(prev) = owner[e.index()].replace(cell) {
                    return Err(Error::Config(format!("ensemble {e:?} claimed by cells {prev} and {cell}")));
                }
            }
        }
        let owner = owner.into_iter().map(|o| o.expect("72 disjoint pairs cover 144 ensembles")).collect();
        Ok(Self { pairing, owner })
    }

    pub fn pair(&self, cell: CellIndex) -> [Ensemble; 2] {
        self.pairing[cell.slot()]
    }

    pub fn owner(&self, e: Ensemble) -> CellIndex {
        self.owner[e.index()]
    }

    /// Ensembles adjacent to either member of the pair, excluding the pair
    /// itself. Six for an interior horizontal pair.
    pub fn neighbors(&self, cell: CellIndex) -> Vec<Ensemble> {
        let pair = self.pair(cell);
        let mut out: Vec<Ensemble> = pair
            .iter()
            .flat_map(|e| e.neighbors())
            .filter(|n| !pair.contains(n))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// AOD switching time `w / v_s`, in seconds, for beam waist `w` (m) and
/// acoustic velocity `v_s` (m/s).
pub fn switching_time(beam_waist_m: f64, sound_speed_m_per_s: f64) -> Result<f64> {
    if !(beam_waist_m > 0.0) || !(sound_speed_m_per_s > 0.0) {
        return Err(Error::OutOfRange(format!(
            "switching time needs positive waist and sound speed (got {beam_waist_m}, {sound_speed_m_per_s})"
        )));
    }
    Ok(beam_waist_m / sound_speed_m_per_s)
}
