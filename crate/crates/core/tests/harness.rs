use std::fs;
use std::path::Path;

use pimi_core::harness::io::{archive_digest, read_csv, read_json, read_jsonl, write_json, write_jsonl, GroundRecord, InstanceTrials};
use pimi_core::harness::{run_experiment, summarize, BerRow, Checkpoint, ExperimentManifest, CHECKPOINT_FILE};
use pimi_core::metrics::{clock_cycles_per_step, CostModel, LandscapePoint};
use pimi_core::{Error, SpinState, TrialRecord};

fn bench_manifest(seed: u64) -> ExperimentManifest {
    ExperimentManifest::parse(&format!(
        r#"
schema_version = 1
family = "max-cut-bench"
seed = {seed}

[bench]
sizes = [8, 10]
instances = 4
trials = 16
steps_per_spin = 20
"#
    ))
    .unwrap()
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let p = e.unwrap().path();
        let dest = to.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_dir(&p, &dest);
        } else {
            fs::copy(&p, &dest).unwrap();
        }
    }
}

#[test]
fn bench_archive_has_landscapes_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&bench_manifest(3), dir.path(), 2).unwrap();
    assert_eq!(out.executed, vec!["generate", "oracle", "solve", "metrics"]);
    for kind in ["pimi", "conv-seq", "conv-par"] {
        for n in [8, 10] {
            let land: Vec<LandscapePoint> = read_csv(&dir.path().join(format!("landscapes/{kind}_n{n}.csv"))).unwrap();
            assert_eq!(land.len(), 20);
            assert!(land.windows(2).all(|w| w[1].p_mean >= w[0].p_mean));
        }
    }
    let report = summarize(dir.path()).unwrap();
    assert_eq!(report.bench.len(), 6);
    assert!(report.missing_ground.is_empty());
    let header = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("speedup"));
    for row in report.bench.iter().filter(|r| r.solver != "pimi") {
        let pimi = report.bench.iter().find(|r| r.n == row.n && r.solver == "pimi").unwrap();
        if let (Some(c), Some(p)) = (row.ccts_star, pimi.ccts_star) {
            assert_eq!(row.speedup, Some(c / p));
        }
    }
    assert!(dir.path().join("stamp.json").exists());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let m = bench_manifest(11);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&m, a.path(), 1).unwrap();
    run_experiment(&m, b.path(), 8).unwrap();
    assert_eq!(archive_digest(a.path()).unwrap(), archive_digest(b.path()).unwrap());
    let mut other = m.clone();
    other.seed = 12;
    match run_experiment(&other, a.path(), 1) {
        Err(e @ Error::Config(_)) => assert_eq!(e.exit_code(), 2),
        r => panic!("expected a config error, got {r:?}"),
    }
}

#[test]
fn stages_communicate_only_through_files() {
    let m = bench_manifest(5);
    let full = tempfile::tempdir().unwrap();
    run_experiment(&m, full.path(), 1).unwrap();
    let digest = archive_digest(full.path()).unwrap();

    // a fresh directory holding only the generate and oracle outputs resumes at solve
    let part = tempfile::tempdir().unwrap();
    copy_dir(&full.path().join("instances"), &part.path().join("instances"));
    copy_dir(&full.path().join("ground"), &part.path().join("ground"));
    write_json(
        &part.path().join(CHECKPOINT_FILE),
        &Checkpoint {
            manifest_sha256: m.hash().unwrap(),
            completed: vec!["generate".into(), "oracle".into()],
        },
    )
    .unwrap();
    let out = run_experiment(&m, part.path(), 3).unwrap();
    assert_eq!(out.skipped, vec!["generate", "oracle"]);
    assert_eq!(out.executed, vec!["solve", "metrics"]);
    assert_eq!(archive_digest(part.path()).unwrap(), digest);

    // a finished archive is left alone
    let again = run_experiment(&m, full.path(), 1).unwrap();
    assert!(again.executed.is_empty());
    assert_eq!(archive_digest(full.path()).unwrap(), digest);
}

#[test]
fn missing_ground_truths_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&bench_manifest(9), dir.path(), 1).unwrap();
    let gpath = dir.path().join("ground/n8.jsonl");
    let mut ground: Vec<GroundRecord> = read_jsonl(&gpath).unwrap();
    let dropped = ground.remove(2);
    write_jsonl(&gpath, &ground).unwrap();
    let report = summarize(dir.path()).unwrap();
    assert_eq!(report.missing_ground, vec![(8, dropped.instance.clone())]);
    for row in report.bench.iter().filter(|r| r.n == 8) {
        assert_eq!((row.instances, row.missing_ground), (3, 1));
    }
    assert!(report.text.contains(&format!("missing ground truth: n=8 {}", dropped.instance)));
}

fn record(hit: bool, steps: usize) -> TrialRecord {
    let e = if hit { -10.0 } else { -5.0 };
    TrialRecord {
        best_energy: e,
        best_step: 0,
        steps,
        improvements: vec![(0, e)],
        energy_trajectory: None,
        state_trajectory: None,
        final_spins: SpinState::uniform(4, 1),
        seed: 0,
    }
}

#[test]
fn log_space_spread_matches_hand_computation() {
    // three instances with p = 1/2, 1/4 and 1 at every budget
    let dir = tempfile::tempdir().unwrap();
    let hits = [(2, 4), (1, 4), (4, 4)];
    let rows: Vec<InstanceTrials> = hits
        .iter()
        .enumerate()
        .map(|(k, &(h, total))| InstanceTrials {
            instance: format!("i{k}"),
            n: 4,
            solver: "pimi".into(),
            records: (0..total).map(|t| record(t < h, 8)).collect(),
        })
        .collect();
    write_jsonl(&dir.path().join("trials/pimi_n4.jsonl"), &rows).unwrap();
    let ground: Vec<GroundRecord> = (0..3)
        .map(|k| GroundRecord {
            instance: format!("i{k}"),
            n: 4,
            best_energy: -10.0,
            method: pimi_core::oracle::OracleMethod::Exhaustive,
            effort: String::new(),
        })
        .collect();
    write_jsonl(&dir.path().join("ground/n4.jsonl"), &ground).unwrap();
    let report = summarize(dir.path()).unwrap();
    let row = &report.bench[0];

    // trials needed: ln(1e-3)/ln(1/2) = 9.97 -> 10, ln(1e-3)/ln(3/4) = 24.01 -> 25, and 1
    let logs = [10f64.log10(), 25f64.log10(), 0.0];
    let mean = logs.iter().sum::<f64>() / 3.0;
    let sd = (logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / 3.0).sqrt();
    assert!((row.ccts_logstd.unwrap() - sd).abs() < 1e-12);

    // pooled: p̄ = 7/12, ceil(ln 1e-3 / ln(5/12)) = 8 trials at the 4-step budget
    let c = clock_cycles_per_step(CostModel::Pimi, 4).unwrap();
    assert_eq!(row.t_star, Some(4));
    assert!((row.ccts_star.unwrap() - 8.0 * 4.0 * c).abs() < 1e-9);
    assert!((row.p_final.unwrap() - 7.0 / 12.0).abs() < 1e-15);
}

#[test]
fn mimo_manifest_gives_a_falling_ber_curve() {
    let m = ExperimentManifest::parse(
        r#"
schema_version = 1
family = "mimo-ber"
seed = 4

[mimo]
nt = 4
nr = 4
qam = 4
ebn0_db = [0.0, 6.0, 12.0]
scenarios = 2000
detectors = ["mmse", "pimi"]
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&m, dir.path(), 2).unwrap();
    let rows: Vec<BerRow> = read_csv(&dir.path().join("ber.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for det in ["mmse", "pimi"] {
        let curve: Vec<f64> = rows.iter().filter(|r| r.detector == det).map(|r| r.ber).collect();
        assert!(curve[0] > curve[1] && curve[1] > curve[2], "{det}: {curve:?}");
    }
    let report = summarize(dir.path()).unwrap();
    assert_eq!(report.ber, rows);
    assert!(report.text.contains("bit-error rate"));
}

#[test]
fn flip_rate_manifest_writes_series_and_summary() {
    let m = ExperimentManifest::parse(
        r#"
schema_version = 1
family = "flip-rate"
seed = 2

[flip_rate]
n = 16
trials = 8
steps_per_spin = 10
xi = [0.0, 0.9]
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&m, dir.path(), 1).unwrap();
    assert_eq!(out.executed, vec!["generate", "flip-rate", "metrics"]);
    let report = summarize(dir.path()).unwrap();
    assert_eq!(report.flip_rate.len(), 2);
    assert!(report.flip_rate.iter().all(|r| r.steps == 160));
    let cp: Checkpoint = read_json(&dir.path().join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(cp.completed.len(), 3);
}
