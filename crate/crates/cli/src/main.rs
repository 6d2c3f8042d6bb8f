//! `raqm` command-line runner.
//!
//! Exit status: 0 on success, 1 for configuration or input errors, 2 when a
//! sequence or run breaks a protocol invariant.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use raqm::controller::{emit_sequence, parse_sequence, validate_sequence};
use raqm::scenario::{run_scenario, write_artifacts, Scenario, ScenarioConfig, ScenarioKind, ScenarioOutput, TraceFile};
use raqm::{rng_from_seed, Error};

#[derive(Parser)]
#[command(name = "raqm", version, about = "Multiplexed quantum memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace, metrics and plot tables.
    Run {
        scenario: ScenarioKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON config; missing keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a sequence file against the occupancy and ordering rules.
    Validate {
        sequence: PathBuf,
        /// Also enforce a maximum storage age, µs.
        #[arg(long)]
        window: Option<u32>,
    },
    /// Recompute metrics from a trace file and print them as JSON.
    Metrics { trace: PathBuf },
    /// Run a scenario over a seed range, in parallel.
    Sweep {
        scenario: ScenarioKind,
        /// `A..B` (exclusive) or `A..=B`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write per-seed artifacts and `sweep.tsv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the instruction sequence a scenario would execute.
    Generate {
        scenario: ScenarioKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> io::Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn load_config(path: Option<&Path>) -> raqm::Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => ScenarioConfig::from_json(&fs::read_to_string(p)?),
    }
}

fn parse_seeds(s: &str) -> anyhow::Result<std::ops::Range<u64>> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        bail!("seed range {s:?} must look like A..B or A..=B");
    };
    let a: u64 = a.trim().parse().with_context(|| format!("bad seed {a:?}"))?;
    let b: u64 = b.trim().parse().with_context(|| format!("bad seed {b:?}"))?;
    let end = if inclusive { b + 1 } else { b };
    if end <= a {
        bail!("empty seed range {s:?}");
    }
    Ok(a..end)
}

fn summary_header(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::EprReshuffle => "seed\tpair\tstorage_us\tfidelity",
        ScenarioKind::CrosstalkProbe => "seed\tslope_per_round\tintercept",
        ScenarioKind::SingleCellFidelity => "seed\tcell\tmean_fidelity_short",
        _ => "seed\tmean_filling\tmean_storage_us\tmax_storage_us\tmean_fidelity\tforced_fraction\tmax_access\tbelow_threshold",
    }
}

fn summary_rows(out: &ScenarioOutput) -> String {
    let r = &out.report;
    let mut s = String::new();
    if let Some(m) = &r.metrics {
        let _ = writeln!(
            s,
            "{}\t{:.4}\t{:.4}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            r.seed,
            m.mean_filling,
            m.mean_storage_us,
            m.max_storage_us,
            m.mean_fidelity,
            m.forced_fraction,
            m.max_access,
            m.below_threshold.len()
        );
    }
    for p in r.pairs.iter().flatten() {
        let _ = writeln!(s, "{}\t{}\t{}\t{:.6}", r.seed, p.pair_id, p.storage_us, p.fidelity);
    }
    if let Some(x) = &r.crosstalk {
        let _ = writeln!(s, "{}\t{:.6}\t{:.6}", r.seed, x.slope_per_round, x.intercept);
    }
    for c in r.cells.iter().flatten() {
        let mean = c.by_pol.iter().map(|(_, f)| f).sum::<f64>() / c.by_pol.len() as f64;
        let _ = writeln!(s, "{}\t{}\t{:.6}", r.seed, c.cell, mean);
    }
    s
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { scenario, seed, config, out } => {
            let s = Scenario { kind: scenario, seed, config: load_config(config.as_deref())? };
            let result = run_scenario(&s)?;
            let mut listing = String::new();
            for p in write_artifacts(&result, &out)? {
                let _ = writeln!(listing, "{}", p.display());
            }
            emit(&listing)?;
        }
        Command::Validate { sequence, window } => {
            let seq = parse_sequence(&fs::read_to_string(&sequence)?)?;
            validate_sequence(&seq, window).map_err(Error::InvalidSequence)?;
            emit(&format!("ok: {} instructions\n", seq.len()))?;
        }
        Command::Metrics { trace } => {
            let t = TraceFile::from_json(&fs::read_to_string(&trace)?)?;
            let Some(m) = t.metrics() else {
                return Err(Error::Config(format!("{} holds no instruction trace", trace.display())).into());
            };
            emit(&(serde_json::to_string_pretty(&m)? + "\n"))?;
        }
        Command::Sweep { scenario, seeds, config, out } => {
            let seeds = parse_seeds(&seeds).map_err(|e| Error::Config(e.to_string()))?;
            let config = load_config(config.as_deref())?;
            let results: Vec<raqm::Result<String>> = seeds
                .into_par_iter()
                .map(|seed| {
                    let s = Scenario { kind: scenario, seed, config: config.clone() };
                    let result = run_scenario(&s)?;
                    if let Some(dir) = &out {
                        write_artifacts(&result, &dir.join(format!("seed_{seed}")))?;
                    }
                    Ok(summary_rows(&result))
                })
                .collect();
            let mut table = format!("{}\n", summary_header(scenario));
            for r in results {
                table.push_str(&r?);
            }
            if let Some(dir) = &out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("sweep.tsv"), &table)?;
            }
            emit(&table)?;
        }
        Command::Generate { scenario, seed, config } => {
            let s = Scenario { kind: scenario, seed, config: load_config(config.as_deref())? };
            // same stream position as a run: calibration is drawn first
            let mut rng = rng_from_seed(seed);
            let _ = s.calibration(&mut rng);
            emit(&emit_sequence(&s.sequence(&mut rng)?))?;
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidSequence(_) | Error::Protocol(_) | Error::Capacity { .. } | Error::HeraldTimeout(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::InvalidSequence(v)) = e.downcast_ref::<Error>() {
                for x in v {
                    eprintln!("  {x}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
