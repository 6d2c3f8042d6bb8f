use std::fs;
use std::path::PathBuf;

use raqm::scenario::{run_scenario, write_artifacts, Scenario, ScenarioKind, ScenarioReport, TraceFile};

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("raqm-artifacts-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

#[test]
fn replay_is_byte_identical() {
    for kind in [ScenarioKind::Raqm1000, ScenarioKind::EprReshuffle, ScenarioKind::SingleCellFidelity] {
        let mut s = Scenario::new(kind, 2024);
        s.config.probe.shots = 16;
        let (a, b) = (tmp(&format!("{kind}-a")), tmp(&format!("{kind}-b")));
        let pa = write_artifacts(&run_scenario(&s).unwrap(), &a).unwrap();
        let pb = write_artifacts(&run_scenario(&s).unwrap(), &b).unwrap();
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{x:?}");
        }
        let _ = fs::remove_dir_all(a);
        let _ = fs::remove_dir_all(b);
    }
}

#[test]
fn every_artifact_carries_seed_and_hash() {
    let s = Scenario::new(ScenarioKind::Raqm250, 99);
    let hash = s.config_hash();
    let dir = tmp("stamp");
    for p in write_artifacts(&run_scenario(&s).unwrap(), &dir).unwrap() {
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains(&hash), "{p:?}");
        assert!(text.contains("99"), "{p:?}");
    }
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn written_files_parse_back() {
    let s = Scenario::new(ScenarioKind::Buffer, 5);
    let out = run_scenario(&s).unwrap();
    let dir = tmp("parse");
    write_artifacts(&out, &dir).unwrap();
    let report = ScenarioReport::from_json(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report, out.report);
    let trace = TraceFile::from_json(&fs::read_to_string(dir.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace, out.trace);
    assert_eq!(trace.metrics(), out.report.metrics);
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn different_seeds_differ() {
    let a = run_scenario(&Scenario::new(ScenarioKind::Raqm250, 1)).unwrap();
    let b = run_scenario(&Scenario::new(ScenarioKind::Raqm250, 2)).unwrap();
    assert_ne!(a.trace.trace, b.trace.trace);
    assert_eq!(a.report.config_hash, b.report.config_hash);
}
