//! Named end-to-end runs, their JSON configuration, metrics, and the files
//! they write.

mod budget;
mod metrics;
mod probes;

pub use budget::{click_probability, end_to_end_efficiency, BudgetEntry, EfficiencyBudget};
pub use metrics::{binned_storage_histogram, compute_metrics, HistBin, LowFidelity, MetricsReport, PolFidelity, DEFAULT_THRESHOLD};
pub use probes::{crosstalk_probe, linear_fit, single_cell_fidelity, CellFidelity, CrosstalkProbe, ProbePoint, PROBE_CELLS};

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{
    buffer_policy, generate_random_sequence, generate_windowed_sequence, queue_general, queue_policy, random_buffer_arrivals,
    random_inputs, run_sequence, stack_general, stack_policy, validate_sequence, Instruction, RunOptions, Trace,
};
use crate::dlcz::{catch_freeze_reshuffle_release, EPRRecord, SourceParams};
use crate::encoding::{CalibrationQuality, CalibrationSet};
use crate::memarray::{ArrayGeometry, CellIndex, MemoryArray, PhysicsParams};
use crate::{rng_from_seed, Error, Result, SimRng, CLOCK_US};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Raqm250,
    Raqm1000,
    Queue72,
    Stack72,
    Buffer,
    QueueGeneral,
    StackGeneral,
    EprReshuffle,
    CrosstalkProbe,
    SingleCellFidelity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 10] = [
        ScenarioKind::Raqm250,
        ScenarioKind::Raqm1000,
        ScenarioKind::Queue72,
        ScenarioKind::Stack72,
        ScenarioKind::Buffer,
        ScenarioKind::QueueGeneral,
        ScenarioKind::StackGeneral,
        ScenarioKind::EprReshuffle,
        ScenarioKind::CrosstalkProbe,
        ScenarioKind::SingleCellFidelity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Raqm250 => "raqm250",
            ScenarioKind::Raqm1000 => "raqm1000",
            ScenarioKind::Queue72 => "queue72",
            ScenarioKind::Stack72 => "stack72",
            ScenarioKind::Buffer => "buffer",
            ScenarioKind::QueueGeneral => "queue_general",
            ScenarioKind::StackGeneral => "stack_general",
            ScenarioKind::EprReshuffle => "epr_reshuffle",
            ScenarioKind::CrosstalkProbe => "crosstalk_probe",
            ScenarioKind::SingleCellFidelity => "single_cell_fidelity",
        }
    }

    /// Runs that replay an instruction sequence on the array.
    pub fn is_sequence(self) -> bool {
        !matches!(self, ScenarioKind::EprReshuffle | ScenarioKind::CrosstalkProbe | ScenarioKind::SingleCellFidelity)
    }

    /// Single-cell runs are tuned by hand; long sequences only get a quick
    /// per-cell calibration.
    pub fn default_calibration(self) -> CalibrationQuality {
        if self.is_sequence() {
            CalibrationQuality::Fast
        } else {
            CalibrationQuality::Careful
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}; expected one of {}", Self::ALL.map(|k| k.name()).join(", "))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub cell: CellIndex,
    pub storage_us: f64,
    pub max_rounds: u32,
    pub shots: usize,
    pub cells: Vec<CellIndex>,
    pub short_storage_us: f64,
    pub storage_grid_us: Vec<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            cell: CellIndex::new(34).expect("in range"),
            storage_us: 55.0,
            max_rounds: 10,
            shots: 200,
            cells: PROBE_CELLS.iter().map(|&c| CellIndex::new(c).expect("in range")).collect(),
            short_storage_us: 15.0,
            storage_grid_us: vec![100.0, 200.0, 300.0, 400.0, 500.0],
        }
    }
}

/// Everything a run depends on besides kind and seed. Every field has a
/// default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub physics: PhysicsParams,
    pub geometry: Option<ArrayGeometry>,
    /// Overrides the per-kind calibration quality.
    pub calibration: Option<CalibrationQuality>,
    /// Explicit calibration table; takes precedence over `calibration`.
    pub calibration_table: Option<CalibrationSet>,
    pub source: SourceParams,
    pub release_order: Vec<usize>,
    pub threshold: f64,
    pub postselect: bool,
    pub omniscient: bool,
    pub window_us: u32,
    /// Overrides the instruction count of the random-access runs.
    pub n_ops: Option<usize>,
    /// Slots over which buffer arrivals are spread.
    pub buffer_span: u32,
    pub mean_photon_number: f64,
    pub budget: EfficiencyBudget,
    pub probe: ProbeConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            physics: PhysicsParams::default(),
            geometry: None,
            calibration: None,
            calibration_table: None,
            source: SourceParams::default(),
            release_order: vec![2, 4, 1, 3],
            threshold: DEFAULT_THRESHOLD,
            postselect: true,
            omniscient: false,
            window_us: crate::controller::DEFAULT_WINDOW_US,
            n_ops: None,
            buffer_span: 178,
            mean_photon_number: 0.5,
            budget: EfficiencyBudget::default(),
            probe: ProbeConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.source.validate()?;
        self.budget.validate()?;
        if let Some(t) = &self.calibration_table {
            t.validate()?;
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if !(self.mean_photon_number >= 0.0) {
            return Err(Error::Config("mean_photon_number must be non-negative".into()));
        }
        if self.window_us < CLOCK_US {
            return Err(Error::Config(format!("window {} µs shorter than one clock cycle", self.window_us)));
        }
        if self.probe.shots == 0 {
            return Err(Error::Config("probe shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(default)]
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self { kind, seed, config: ScenarioConfig::default() }
    }

    /// SHA-256 of the kind and resolved config, hex encoded. The seed is
    /// recorded separately.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(&(self.kind, &self.config)).expect("config serializes");
        Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Draws the calibration a run uses. Runs call this before anything else touches `rng`.
    pub fn calibration(&self, rng: &mut SimRng) -> CalibrationSet {
        match &self.config.calibration_table {
            Some(t) => t.clone(),
            None => CalibrationSet::for_quality(self.config.calibration.unwrap_or(self.kind.default_calibration()), rng),
        }
    }

    fn array(&self) -> Result<MemoryArray> {
        MemoryArray::new(self.config.geometry.clone().unwrap_or_default(), self.config.physics.clone())
    }

    /// The instruction sequence of a sequence scenario.
    pub fn sequence(&self, rng: &mut SimRng) -> Result<Vec<Instruction>> {
        let c = &self.config;
        Ok(match self.kind {
            ScenarioKind::Raqm250 => generate_random_sequence(c.n_ops.unwrap_or(250), rng)?,
            ScenarioKind::Raqm1000 => generate_windowed_sequence(c.n_ops.unwrap_or(1000), c.window_us, rng)?,
            ScenarioKind::Queue72 => queue_policy(&random_inputs(72, rng))?,
            ScenarioKind::Stack72 => stack_policy(&random_inputs(72, rng))?,
            ScenarioKind::Buffer => {
                let (arrivals, order) = random_buffer_arrivals(72, c.buffer_span, rng)?;
                buffer_policy(&arrivals, &order, &random_inputs(72, rng))?
            }
            ScenarioKind::QueueGeneral => {
                let inputs = random_inputs(72, rng);
                queue_general(&inputs, rng)?
            }
            ScenarioKind::StackGeneral => {
                let inputs = random_inputs(72, rng);
                stack_general(&inputs, rng)?
            }
            k => return Err(Error::Config(format!("{k} has no instruction sequence"))),
        })
    }

    fn window(&self) -> Option<u32> {
        (self.kind == ScenarioKind::Raqm1000).then_some(self.config.window_us)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    pub end_to_end: f64,
    pub mean_atomic: f64,
    pub mean_photon_number: f64,
    /// Detection probability of one retrieved weak coherent pulse.
    pub click_probability: f64,
}

/// Raw record of a run: the executed trace or the caught pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub config_hash: String,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_us: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epr: Option<Vec<EPRRecord>>,
}

impl TraceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Recomputes metrics from the stored trace, if any.
    pub fn metrics(&self) -> Option<MetricsReport> {
        self.trace.as_ref().map(|t| compute_metrics(t, self.threshold))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair_id: usize,
    pub cell: CellIndex,
    pub herald_time_us: f64,
    pub release_slot: u32,
    pub storage_us: u32,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub config_hash: String,
    pub efficiency: EfficiencySummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairSummary>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosstalk: Option<CrosstalkProbe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellFidelity>>,
}

impl ScenarioReport {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub trace: TraceFile,
    pub report: ScenarioReport,
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput> {
    let c = &s.config;
    c.validate()?;
    let mut rng = rng_from_seed(s.seed);
    let cal = s.calibration(&mut rng);
    let end_to_end = end_to_end_efficiency(&c.budget)?;
    let efficiency = EfficiencySummary {
        end_to_end,
        mean_atomic: c.physics.mean_eta_atoms(),
        mean_photon_number: c.mean_photon_number,
        click_probability: click_probability(c.mean_photon_number, end_to_end),
    };
    let config_hash = s.config_hash();
    let mut trace = TraceFile {
        kind: s.kind,
        seed: s.seed,
        config_hash: config_hash.clone(),
        threshold: c.threshold,
        window_us: s.window(),
        trace: None,
        epr: None,
    };
    let mut report = ScenarioReport { kind: s.kind, seed: s.seed, config_hash, efficiency, metrics: None, pairs: None, crosstalk: None, cells: None };

    match s.kind {
        k if k.is_sequence() => {
            let seq = s.sequence(&mut rng)?;
            validate_sequence(&seq, s.window()).map_err(Error::InvalidSequence)?;
            let mut array = s.array()?;
            let opts = RunOptions { postselect: c.postselect, omniscient: c.omniscient };
            let t = run_sequence(&seq, &mut array, &cal, opts, &mut rng)?;
            report.metrics = Some(compute_metrics(&t, c.threshold));
            trace.trace = Some(t);
        }
        ScenarioKind::EprReshuffle => {
            let mut array = s.array()?;
            let recs = catch_freeze_reshuffle_release(&c.release_order, &c.source, &mut array, &cal, &mut rng)?;
            report.pairs = Some(
                recs.iter()
                    .map(|r| PairSummary {
                        pair_id: r.pair_id,
                        cell: r.cell,
                        herald_time_us: r.herald_time_us,
                        release_slot: r.release_slot,
                        storage_us: r.storage_us,
                        fidelity: r.fidelity,
                    })
                    .collect(),
            );
            trace.epr = Some(recs);
        }
        ScenarioKind::CrosstalkProbe => {
            let p = &c.probe;
            report.crosstalk = Some(crosstalk_probe(&c.physics, &cal, p.cell, p.storage_us, p.max_rounds, p.shots, &mut rng)?);
        }
        ScenarioKind::SingleCellFidelity => {
            let p = &c.probe;
            report.cells = Some(single_cell_fidelity(&c.physics, &cal, &p.cells, p.short_storage_us, &p.storage_grid_us, p.shots, &mut rng)?);
        }
        _ => unreachable!("sequence kinds handled above"),
    }

    // every metric must survive a serialize/recount cycle of the raw trace
    if let Some(m) = &report.metrics {
        let replayed = TraceFile::from_json(&serde_json::to_string(&trace)?)?;
        if replayed.metrics().as_ref() != Some(m) {
            return Err(Error::Protocol("metrics differ after recount from the serialized trace".into()));
        }
    }
    Ok(ScenarioOutput { trace, report })
}

fn tsv(header: &str, trace: &TraceFile, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("# kind={} seed={} config_hash={}\n{header}\n", trace.kind, trace.seed, trace.config_hash);
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

/// Tabular plot data, one `(file name, contents)` per panel.
pub fn plot_tables(out: &ScenarioOutput) -> Vec<(String, String)> {
    let t = &out.trace;
    let r = &out.report;
    let mut files = Vec::new();
    if let (Some(m), Some(tr)) = (&r.metrics, &t.trace) {
        files.push((
            "filling.tsv".into(),
            tsv("slot\ttime_us\tfilling", t, tr.entries.iter().map(|e| format!("{}\t{}\t{}", e.instruction.slot, e.instruction.time_us(), e.filling))),
        ));
        files.push((
            "access_counts.tsv".into(),
            tsv("cell\taccesses", t, m.access_counts.iter().enumerate().map(|(i, n)| format!("{}\t{n}", i + 1))),
        ));
        files.push((
            "storage_histogram.tsv".into(),
            tsv("storage_us\tcount", t, m.storage_histogram.iter().map(|b| format!("{}\t{}", b.storage_us, b.count))),
        ));
        files.push((
            "storage_histogram_20us.tsv".into(),
            tsv("bin_start_us\tcount", t, binned_storage_histogram(m, 20).into_iter().map(|(s, n)| format!("{s}\t{n}"))),
        ));
        files.push((
            "fidelity.tsv".into(),
            tsv(
                "index\tslot\tcell\tinput\tstorage_us\tfidelity\tforced",
                t,
                tr.entries.iter().enumerate().filter_map(|(i, e)| {
                    let f = e.outcome.fidelity()?;
                    let input = e.input.label().map_or_else(|| format!("{:.6},{:.6}", e.input.theta(), e.input.phi()), |l| l.to_string());
                    Some(format!(
                        "{i}\t{}\t{}\t{input}\t{}\t{f:.6}\t{}",
                        e.instruction.slot,
                        e.instruction.cell,
                        e.outcome.storage_us().unwrap_or(0),
                        e.instruction.is_forced() as u8
                    ))
                }),
            ),
        ));
        files.push((
            "fidelity_by_pol.tsv".into(),
            tsv("input\tn\tmean\tstd", t, m.fidelity_by_pol.iter().map(|p| format!("{}\t{}\t{:.6}\t{:.6}", p.pol, p.n, p.mean, p.std))),
        ));
    }
    if let Some(pairs) = &r.pairs {
        files.push((
            "epr_pairs.tsv".into(),
            tsv(
                "pair\tcell\therald_us\trelease_slot\tstorage_us\tfidelity",
                t,
                pairs.iter().map(|p| format!("{}\t{}\t{:.1}\t{}\t{}\t{:.6}", p.pair_id, p.cell, p.herald_time_us, p.release_slot, p.storage_us, p.fidelity)),
            ),
        ));
    }
    if let Some(x) = &r.crosstalk {
        files.push(("crosstalk.tsv".into(), tsv("rounds\tfidelity", t, x.points.iter().map(|p| format!("{}\t{:.6}", p.rounds, p.fidelity)))));
    }
    if let Some(cells) = &r.cells {
        files.push((
            "cell_fidelity_by_pol.tsv".into(),
            tsv("cell\tinput\tfidelity", t, cells.iter().flat_map(|c| c.by_pol.iter().map(move |(l, f)| format!("{}\t{l}\t{f:.6}", c.cell)))),
        ));
        files.push((
            "cell_fidelity_vs_storage.tsv".into(),
            tsv("cell\tstorage_us\tfidelity", t, cells.iter().flat_map(|c| c.vs_storage.iter().map(move |(s, f)| format!("{}\t{s}\t{f:.6}", c.cell)))),
        ));
    }
    files
}

/// Writes `trace.json`, `metrics.json` and the plot tables into `dir`.
pub fn write_artifacts(out: &ScenarioOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![
        ("trace.json".to_string(), serde_json::to_string_pretty(&out.trace)? + "\n"),
        ("metrics.json".to_string(), out.report.to_json()? + "\n"),
    ];
    files.extend(plot_tables(out));
    let mut paths = Vec::with_capacity(files.len());
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body)?;
        paths.push(p);
    }
    Ok(paths)
}
