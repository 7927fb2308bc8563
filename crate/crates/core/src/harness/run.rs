//! Staged experiment runner. Each stage reads only the files earlier stages
//! wrote, and the checkpoint records which stages are complete.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{load_instances, read_json, write_atomic, write_csv, write_json, write_jsonl, GroundRecord, InstanceTrials};
use super::manifest::{BenchConfig, ExperimentFamily, ExperimentManifest, OracleChoice, SCHEMA_VERSION};
use super::report::summarize;
use crate::error::{Error, Result};
use crate::instances::{generate_set, instance_file_name, Family};
use crate::ising::{IsingInstance, TrialRecord};
use crate::metrics::{mean_defined, neighbor_triggered_flip_rate};
use crate::mimo::{ber_curve, Detector, IsingDetector, Qam, CorrectionSet};
use crate::oracle::{run_oracle, OracleMethod, MAX_EXHAUSTIVE_N};
use crate::schedule::{make_schedule, DefaultParams, Problem, Schedule, ScheduleKind, ScheduleParams};
use crate::seed::derive_seed;
use crate::solvers::{parallel_map, run_batch, run_trial, trial_inputs, trial_seed, SolverConfig, SolverKind};

/// Reproducibility stamp written next to every archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub schema_version: u32,
    pub family: ExperimentFamily,
    pub manifest_sha256: String,
    pub defaults_version: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub manifest_sha256: String,
    pub completed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub archive: PathBuf,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const STAMP_FILE: &str = "stamp.json";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn stages(family: ExperimentFamily) -> &'static [&'static str] {
    match family {
        ExperimentFamily::MaxCutBench | ExperimentFamily::SkBench => &["generate", "oracle", "solve", "metrics"],
        ExperimentFamily::MimoBer => &["ber", "metrics"],
        ExperimentFamily::FlipRate => &["generate", "flip-rate", "metrics"],
    }
}

/// Runs (or resumes) the experiment into `out`. A checkpoint from the same
/// manifest lets completed stages be skipped; one from another manifest is an error.
pub fn run_experiment(manifest: &ExperimentManifest, out: &Path, workers: usize) -> Result<RunOutcome> {
    manifest.validate()?;
    if workers == 0 {
        return Err(Error::config("worker count must be at least 1"));
    }
    let hash = manifest.hash()?;
    let cp_path = out.join(CHECKPOINT_FILE);
    let mut checkpoint = if cp_path.exists() {
        let cp: Checkpoint = read_json(&cp_path)?;
        if cp.manifest_sha256 != hash {
            return Err(Error::config(format!(
                "{} holds an archive of a different manifest",
                out.display()
            )));
        }
        cp
    } else {
        Checkpoint {
            manifest_sha256: hash.clone(),
            completed: Vec::new(),
        }
    };
    let defaults = DefaultParams::shipped();
    let mut canon = manifest.clone();
    canon.output_dir = None;
    write_atomic(&out.join(MANIFEST_FILE), canon.to_toml()?.as_bytes())?;
    write_json(
        &out.join(STAMP_FILE),
        &Stamp {
            schema_version: SCHEMA_VERSION,
            family: manifest.family,
            manifest_sha256: hash,
            defaults_version: defaults.version.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    )?;

    let mut outcome = RunOutcome {
        archive: out.to_path_buf(),
        executed: Vec::new(),
        skipped: Vec::new(),
    };
    for &stage in stages(manifest.family) {
        if checkpoint.completed.iter().any(|s| s == stage) {
            outcome.skipped.push(stage.to_string());
            continue;
        }
        run_stage(manifest, &defaults, stage, out, workers)?;
        checkpoint.completed.push(stage.to_string());
        write_json(&cp_path, &checkpoint)?;
        outcome.executed.push(stage.to_string());
    }
    Ok(outcome)
}

fn run_stage(m: &ExperimentManifest, defaults: &DefaultParams, stage: &str, out: &Path, workers: usize) -> Result<()> {
    match (m.family, stage) {
        (_, "metrics") => summarize(out).map(|_| ()),
        (ExperimentFamily::MaxCutBench | ExperimentFamily::SkBench, _) => {
            let b = m.bench()?;
            let family = bench_family(m.family);
            for &n in &b.sizes {
                match stage {
                    "generate" => stage_generate(b, family, n, m.seed, out)?,
                    "oracle" => stage_oracle(b, n, m.seed, out, workers)?,
                    "solve" => stage_solve(b, defaults, family, n, m.seed, out, workers)?,
                    _ => unreachable!("unknown stage {stage}"),
                }
            }
            Ok(())
        }
        (ExperimentFamily::MimoBer, "ber") => stage_ber(m, defaults, out, workers),
        (ExperimentFamily::FlipRate, "generate") => {
            let f = m.flip_rate()?;
            let inst = crate::instances::generate(&crate::instances::GeneratorSpec {
                family: f.family,
                n: f.n,
                seed: crate::instances::instance_seed(m.seed, f.family, f.n, f.instance_index),
                edge_prob: crate::instances::GeneratorSpec::DEFAULT_EDGE_PROB,
            })?;
            write_json(&out.join("instances").join(instance_file_name(f.family, f.n, f.instance_index)), &inst)
        }
        (ExperimentFamily::FlipRate, "flip-rate") => stage_flip_rate(m, defaults, out, workers),
        _ => unreachable!("unknown stage {stage}"),
    }
}

fn bench_family(f: ExperimentFamily) -> Family {
    match f {
        ExperimentFamily::SkBench => Family::SkOne,
        _ => Family::MaxCutEr,
    }
}

pub(crate) fn size_dir(n: usize) -> String {
    format!("n{n}")
}

fn stage_generate(b: &BenchConfig, family: Family, n: usize, seed: u64, out: &Path) -> Result<()> {
    let set = generate_set(family, n, b.instances, seed, b.edge_prob)?;
    let dir = out.join("instances").join(size_dir(n));
    for (k, inst) in set.iter().enumerate() {
        write_json(&dir.join(instance_file_name(family, n, k)), inst)?;
    }
    Ok(())
}

/// Oracle method for `choice` at size `n`.
pub fn oracle_method(choice: OracleChoice, n: usize) -> OracleMethod {
    match choice {
        OracleChoice::Auto if n <= MAX_EXHAUSTIVE_N => OracleMethod::Exhaustive,
        OracleChoice::Auto | OracleChoice::Sa => OracleMethod::SimAnneal,
        OracleChoice::Exhaustive => OracleMethod::Exhaustive,
        OracleChoice::Bls => OracleMethod::LocalSearch,
    }
}

/// Ground truths for a set of named instances.
pub fn ground_truths(
    instances: &[(String, IsingInstance)],
    method: OracleMethod,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<GroundRecord>> {
    parallel_map(instances.len(), workers, |k| {
        let (name, inst) = &instances[k];
        let r = run_oracle(inst, method, derive_seed(base_seed, &[k as u64]))?;
        Ok(GroundRecord {
            instance: name.clone(),
            n: inst.n(),
            best_energy: r.best_energy,
            method: r.method,
            effort: r.effort,
        })
    })
}

fn stage_oracle(b: &BenchConfig, n: usize, seed: u64, out: &Path, workers: usize) -> Result<()> {
    let instances = load_instances(&out.join("instances").join(size_dir(n)))?;
    let ground = ground_truths(&instances, oracle_method(b.oracle, n), derive_seed(seed, &[5, n as u64]), workers)?;
    write_jsonl(&out.join("ground").join(format!("{}.jsonl", size_dir(n))), &ground)
}

/// Benchmark schedule for `kind` from shipped defaults plus optional overrides.
pub fn bench_schedule(
    defaults: &DefaultParams,
    problem: Problem,
    kind: SolverKind,
    n: usize,
    t_steps: usize,
    overrides: Option<&ScheduleParams>,
) -> Result<Schedule> {
    let sk = if kind == SolverKind::Pimi {
        ScheduleKind::PimiBench
    } else {
        ScheduleKind::ConvBench
    };
    let base = defaults.bench(problem, sk, n)?;
    let params = overrides.map_or(base, |o| o.or(&base));
    make_schedule(sk, &params, t_steps)
}

/// Trial records of one solver over named instances, trajectories dropped.
pub fn solve_instances(
    instances: &[(String, IsingInstance)],
    config: &SolverConfig,
    sched: &Schedule,
    trials: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<InstanceTrials>> {
    let insts: Vec<IsingInstance> = instances.iter().map(|(_, i)| i.clone()).collect();
    let out = run_batch(&insts, config, sched, trials, base_seed, workers)?;
    Ok(instances
        .iter()
        .zip(out)
        .map(|((name, inst), recs)| InstanceTrials {
            instance: name.clone(),
            n: inst.n(),
            solver: config.kind.to_string(),
            records: recs.into_iter().map(TrialRecord::without_trajectories).collect(),
        })
        .collect())
}

fn stage_solve(
    b: &BenchConfig,
    defaults: &DefaultParams,
    family: Family,
    n: usize,
    seed: u64,
    out: &Path,
    workers: usize,
) -> Result<()> {
    let instances = load_instances(&out.join("instances").join(size_dir(n)))?;
    let arithmetic = b.arithmetic.as_ref().map(|a| a.build()).transpose()?.unwrap_or_default();
    for &kind in &b.solvers {
        let overrides = if kind == SolverKind::Pimi { b.pimi.as_ref() } else { b.conv.as_ref() };
        let sched = bench_schedule(defaults, family.problem(), kind, n, b.steps_per_spin * n, overrides)?;
        let config = SolverConfig::new(kind).with_arithmetic(arithmetic.clone());
        let rows = solve_instances(&instances, &config, &sched, b.trials, derive_seed(seed, &[6, n as u64]), workers)?;
        write_jsonl(&out.join("trials").join(format!("{kind}_{}.jsonl", size_dir(n))), &rows)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub ebn0_db: f64,
    pub ber: f64,
    pub scenario_count: usize,
    pub detector: String,
}

/// Builds a named detector: `mmse`, or a solver kind with the shipped MIMO schedule.
pub fn mimo_detector(
    name: &str,
    trials: usize,
    steps: usize,
    seq_steps: usize,
    defaults: &DefaultParams,
    pimi_overrides: Option<&ScheduleParams>,
) -> Result<Detector> {
    if name == "mmse" {
        return Ok(Detector::Mmse);
    }
    let kind: SolverKind = name.parse()?;
    if kind == SolverKind::Pimi {
        let params = pimi_overrides.map_or(defaults.mimo(), |o| o.or(&defaults.mimo()));
        let sched = make_schedule(ScheduleKind::PimiMimo, &params, steps)?;
        return Ok(Detector::Ising(IsingDetector::new(SolverConfig::new(kind), sched, trials)?));
    }
    let t = if kind.is_parallel() { steps } else { seq_steps };
    Ok(Detector::Ising(IsingDetector::with_defaults(kind, trials, t, defaults)?))
}

fn stage_ber(m: &ExperimentManifest, defaults: &DefaultParams, out: &Path, workers: usize) -> Result<()> {
    let c = m.mimo()?;
    let qam = Qam::new(c.qam)?;
    let spins = CorrectionSet::for_qam(qam).blocks() * 2 * c.nt;
    let seq_steps = c.seq_steps.unwrap_or(c.steps * spins);
    let mut rows = Vec::new();
    for name in &c.detectors {
        let mut det = mimo_detector(name, c.trials, c.steps, seq_steps, defaults, c.pimi.as_ref())?;
        if let Detector::Ising(d) = &mut det {
            d.unsliced_estimate = c.unsliced_estimate;
        }
        for p in ber_curve(c.nt, c.nr, c.qam, &c.ebn0_db, c.scenarios, &det, m.seed, workers)? {
            rows.push(BerRow {
                ebn0_db: p.ebn0_db,
                ber: p.ber,
                scenario_count: p.scenario_count,
                detector: name.clone(),
            });
        }
    }
    write_csv(&out.join("ber.csv"), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRateRow {
    pub xi: f64,
    pub step: usize,
    pub p_nt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRateSummaryRow {
    pub xi: f64,
    pub mean_p_nt: Option<f64>,
    pub defined_steps: usize,
    pub steps: usize,
}

/// `P_NT(t)` pooled over `trials` PIMI runs under `sched`.
pub fn flip_rate_series(
    inst: &IsingInstance,
    sched: &Schedule,
    trials: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<Option<f64>>> {
    let config = SolverConfig::new(SolverKind::Pimi).recording_states(true);
    let trajectories = parallel_map(trials, workers, |k| {
        let (init, noise) = trial_inputs(inst.n(), SolverKind::Pimi, config.noise_mode, trial_seed(base_seed, 0, k));
        let rec = run_trial(inst, &config, sched, &init, &noise)?;
        Ok(rec.state_trajectory.expect("states recorded"))
    })?;
    neighbor_triggered_flip_rate(&trajectories, inst)
}

fn stage_flip_rate(m: &ExperimentManifest, defaults: &DefaultParams, out: &Path, workers: usize) -> Result<()> {
    let f = m.flip_rate()?;
    let path = out.join("instances").join(instance_file_name(f.family, f.n, f.instance_index));
    let inst: IsingInstance = read_json(&path)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &xi in &f.xi {
        let sched = defaults
            .bench_schedule(f.family.problem(), ScheduleKind::PimiBench, f.n, f.steps_per_spin * f.n)?
            .with_xi(xi)?;
        let series = flip_rate_series(&inst, &sched, f.trials, derive_seed(m.seed, &[7]), workers)?;
        summary.push(FlipRateSummaryRow {
            xi,
            mean_p_nt: mean_defined(&series),
            defined_steps: series.iter().flatten().count(),
            steps: series.len(),
        });
        rows.extend(series.into_iter().enumerate().map(|(t, p)| FlipRateRow { xi, step: t + 1, p_nt: p }));
    }
    write_csv(&out.join("flip_rate.csv"), &rows)?;
    write_csv(&out.join("flip_rate_summary.csv"), &summary)
}
