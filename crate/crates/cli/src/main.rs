use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pimi_core::harness::io::{load_instances, read_json, read_jsonl, write_csv, write_json, write_jsonl, GroundRecord, InstanceTrials};
use pimi_core::harness::{
    bench_schedule, budget_grid, flip_rate_series, ground_truths, mimo_detector, oracle_method, run_experiment,
    solve_instances, summarize, BerRow, ExperimentManifest, FlipRateRow, FlipRateSummaryRow, OracleChoice,
};
use pimi_core::instances::{generate_set, instance_file_name, instance_seed, Family, GeneratorSpec};
use pimi_core::metrics::{ccts_landscape, mean_defined, parse_step_grid, CostModel};
use pimi_core::mimo::{ber_curve, CorrectionSet, Detector, Qam};
use pimi_core::quantize::{FixedPointFormat, TanhLut};
use pimi_core::schedule::{DefaultParams, ScheduleKind, ScheduleParams};
use pimi_core::seed::derive_seed;
use pimi_core::solvers::{Arithmetic, SolverConfig, SolverKind};
use pimi_core::{Error, IsingInstance, Result};

#[derive(Parser)]
#[command(name = "pimi-lab", version, about = "Probabilistic Ising machine laboratory")]
struct Cli {
    /// Worker threads for batch stages.
    #[arg(long, global = true, env = "PIMI_LAB_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate Max-Cut or SK-1 instances into a directory.
    Generate {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = GeneratorSpec::DEFAULT_EDGE_PROB)]
        edge_prob: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground-state energies for instance files.
    Oracle {
        #[arg(long)]
        instances: PathBuf,
        /// auto, exhaustive, sa or bls
        #[arg(long, default_value = "auto")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a solver over instance files and store trial records.
    Solve(SolveArgs),
    /// CCTS landscape from trial records and ground truths.
    Ccts {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        ground: PathBuf,
        /// start:stop:step in update steps; default is every N steps.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = pimi_core::metrics::DEFAULT_THRESHOLD_FRACTION)]
        threshold: f64,
        #[arg(long, default_value_t = pimi_core::metrics::DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bit-error rate of one detector over an Eb/N0 sweep.
    MimoBer(MimoArgs),
    /// Neighbor-triggered flip rate of PIMI at several inertia values.
    FlipRate(FlipArgs),
    /// Summarize an archive into report.csv and report.txt.
    Report {
        #[arg(long)]
        archive: PathBuf,
    },
    /// Execute a TOML experiment manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Archive directory; defaults to the manifest's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    solver: SolverKind,
    #[arg(long, default_value_t = 256)]
    trials: usize,
    /// Update steps per trial; default 100·N.
    #[arg(long)]
    steps: Option<usize>,
    /// Problem family for the shipped schedule defaults.
    #[arg(long, default_value = "maxcut")]
    problem: Family,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    beta_scale: Option<f64>,
    #[arg(long)]
    eta_scale: Option<f64>,
    #[arg(long)]
    eta_floor: Option<f64>,
    /// Fixed-point format as q<total>.<int>, e.g. q16.4.
    #[arg(long)]
    fixed_point: Option<String>,
    /// Levels of the tanh lookup table.
    #[arg(long)]
    lut: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MimoArgs {
    #[arg(long, default_value_t = 8)]
    nt: usize,
    #[arg(long, default_value_t = 8)]
    nr: usize,
    #[arg(long, default_value_t = 16)]
    qam: u32,
    /// start:step:stop in dB, a comma list, or a single value.
    #[arg(long, default_value = "0:2:24")]
    ebn0: String,
    #[arg(long, default_value_t = 10_000)]
    scenarios: usize,
    /// mmse, pimi, conv-seq or conv-par
    #[arg(long, default_value = "pimi")]
    detector: String,
    #[arg(long, default_value_t = 32)]
    trials: usize,
    /// Update steps; for conv-seq the default is 32 sweeps.
    #[arg(long)]
    steps: Option<usize>,
    /// Search the correction around the unsliced linear estimate.
    #[arg(long)]
    unsliced: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FlipArgs {
    /// Instance file; otherwise one is generated from --family/--n/--seed.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "sk1")]
    family: Family,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    steps_per_spin: usize,
    /// Comma-separated inertia values.
    #[arg(long, default_value = "0,0.9")]
    xi: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn workers(cli: Option<usize>) -> usize {
    cli.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn parse_floats(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("cannot parse number list {text:?}"));
    if text.contains(':') {
        let p: Vec<f64> = text
            .split(':')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, step, stop] = p.as_slice() else {
            return Err(bad());
        };
        if !(*step > 0.0) || stop < start {
            return Err(Error::config(format!("range {text:?} needs step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| start + step * k as f64).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn parse_oracle(s: &str) -> Result<OracleChoice> {
    Ok(match s {
        "auto" => OracleChoice::Auto,
        "exhaustive" => OracleChoice::Exhaustive,
        "sa" => OracleChoice::Sa,
        "bls" => OracleChoice::Bls,
        other => return Err(Error::config(format!("unknown oracle method {other:?}"))),
    })
}

fn arithmetic(fixed_point: Option<&str>, lut: Option<usize>) -> Result<Arithmetic> {
    let format = fixed_point
        .map(|s| s.parse::<FixedPointFormat>())
        .transpose()?;
    Ok(Arithmetic {
        format,
        tanh_lut: lut.map(TanhLut::new).transpose()?,
    })
}

fn single_size(instances: &[(String, IsingInstance)]) -> Result<usize> {
    let n = instances
        .first()
        .ok_or_else(|| Error::config("no instance files found"))?
        .1
        .n();
    if instances.iter().any(|(_, i)| i.n() != n) {
        return Err(Error::config("instance files must share one size"));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<()> {
    let workers = workers(cli.workers);
    let defaults = DefaultParams::shipped();
    match cli.cmd {
        Cmd::Generate {
            family,
            n,
            count,
            seed,
            edge_prob,
            out,
        } => {
            let set = generate_set(family, n, count, seed, edge_prob)?;
            for (k, inst) in set.iter().enumerate() {
                write_json(&out.join(instance_file_name(family, n, k)), inst)?;
            }
            println!("wrote {count} {family} instances (n = {n}) to {}", out.display());
        }
        Cmd::Oracle {
            instances,
            method,
            seed,
            out,
        } => {
            let insts = load_instances(&instances)?;
            let n = single_size(&insts)?;
            let method = oracle_method(parse_oracle(&method)?, n);
            let ground = ground_truths(&insts, method, seed, workers)?;
            for g in &ground {
                println!("{}\t{}\t{}", g.instance, g.best_energy, g.effort);
            }
            write_jsonl(&out, &ground)?;
        }
        Cmd::Solve(a) => {
            let insts = load_instances(&a.instances)?;
            let n = single_size(&insts)?;
            let overrides = ScheduleParams {
                xi: a.xi,
                beta_scale: a.beta_scale,
                eta_scale: a.eta_scale,
                eta_floor: a.eta_floor,
                ..Default::default()
            };
            let steps = a.steps.unwrap_or(100 * n);
            let sched = bench_schedule(&defaults, a.problem.problem(), a.solver, n, steps, Some(&overrides))?;
            let config = SolverConfig::new(a.solver).with_arithmetic(arithmetic(a.fixed_point.as_deref(), a.lut)?);
            let rows = solve_instances(&insts, &config, &sched, a.trials, a.seed, workers)?;
            for r in &rows {
                let best = r.records.iter().map(|t| t.best_energy).fold(f64::INFINITY, f64::min);
                println!("{}\tbest {}", r.instance, best);
            }
            write_jsonl(&a.out, &rows)?;
        }
        Cmd::Ccts {
            trials,
            ground,
            grid,
            threshold,
            epsilon,
            out,
        } => {
            let rows: Vec<InstanceTrials> = read_jsonl(&trials)?;
            let ground: Vec<GroundRecord> = read_jsonl(&ground)?;
            let first = rows.first().ok_or_else(|| Error::config("trial file is empty"))?;
            let (n, kind) = (first.n, first.solver.parse::<SolverKind>()?);
            let mut records = Vec::new();
            let mut energies = Vec::new();
            for r in rows {
                match ground.iter().find(|g| g.instance == r.instance) {
                    Some(g) => {
                        energies.push(g.best_energy);
                        records.push(r.records);
                    }
                    None => eprintln!("missing ground truth for {}", r.instance),
                }
            }
            if records.is_empty() {
                return Err(Error::config("no instance has a ground truth"));
            }
            let t_max = records.iter().flatten().map(|r| r.steps).min().unwrap_or(0);
            let grid = match grid {
                Some(g) => parse_step_grid(&g)?,
                None => budget_grid(t_max, n)?,
            };
            let land = ccts_landscape(&records, &energies, &grid, CostModel::from(kind), n, threshold, epsilon)?;
            if let Some(out) = out {
                write_csv(&out, &land.grid)?;
            }
            let (t, c) = land.solved()?;
            println!("{kind} n={n}: T* = {t}, CCTS* = {c:.1}");
        }
        Cmd::MimoBer(a) => {
            let qam = Qam::new(a.qam)?;
            let spins = CorrectionSet::for_qam(qam).blocks() * 2 * a.nt;
            let steps = a.steps.unwrap_or(if a.detector == "conv-seq" { 32 * spins } else { 32 });
            let mut det = mimo_detector(&a.detector, a.trials, steps, steps, &defaults, None)?;
            if let Detector::Ising(d) = &mut det {
                d.unsliced_estimate = a.unsliced;
            }
            let snrs = parse_floats(&a.ebn0)?;
            let points = ber_curve(a.nt, a.nr, a.qam, &snrs, a.scenarios, &det, a.seed, workers)?;
            let rows: Vec<BerRow> = points
                .iter()
                .map(|p| BerRow {
                    ebn0_db: p.ebn0_db,
                    ber: p.ber,
                    scenario_count: p.scenario_count,
                    detector: a.detector.clone(),
                })
                .collect();
            for r in &rows {
                println!("{:>6} dB  BER {:.6e}", r.ebn0_db, r.ber);
            }
            write_csv(&a.out, &rows)?;
        }
        Cmd::FlipRate(a) => {
            let inst: IsingInstance = match &a.instance {
                Some(p) => read_json(p)?,
                None => pimi_core::instances::generate(&GeneratorSpec {
                    family: a.family,
                    n: a.n,
                    seed: instance_seed(a.seed, a.family, a.n, 0),
                    edge_prob: GeneratorSpec::DEFAULT_EDGE_PROB,
                })?,
            };
            let n = inst.n();
            let mut rows = Vec::new();
            let mut summary = Vec::new();
            for xi in parse_floats(&a.xi)? {
                let sched = defaults
                    .bench_schedule(a.family.problem(), ScheduleKind::PimiBench, n, a.steps_per_spin * n)?
                    .with_xi(xi)?;
                let series = flip_rate_series(&inst, &sched, a.trials, derive_seed(a.seed, &[7]), workers)?;
                let mean = mean_defined(&series);
                println!("xi = {xi}: mean P_NT = {}", mean.map_or("undefined".into(), |m| format!("{m:.4}")));
                summary.push(FlipRateSummaryRow {
                    xi,
                    mean_p_nt: mean,
                    defined_steps: series.iter().flatten().count(),
                    steps: series.len(),
                });
                rows.extend(series.into_iter().enumerate().map(|(t, p)| FlipRateRow { xi, step: t + 1, p_nt: p }));
            }
            write_csv(&a.out, &rows)?;
            write_csv(&summary_path(&a.out), &summary)?;
        }
        Cmd::Report { archive } => {
            let r = summarize(&archive)?;
            print!("{}", r.text);
        }
        Cmd::Run { manifest, out } => {
            let m = ExperimentManifest::load(&manifest)?;
            let out = out
                .or_else(|| m.output_dir.clone())
                .ok_or_else(|| Error::config("no archive directory: pass --out or set output_dir"))?;
            let outcome = run_experiment(&m, &out, workers)?;
            for s in &outcome.skipped {
                println!("stage {s}: already complete");
            }
            for s in &outcome.executed {
                println!("stage {s}: done");
            }
            print!("{}", std::fs::read_to_string(out.join("report.txt")).map_err(|e| Error::io(out.join("report.txt"), e))?);
        }
    }
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "flip_rate".into());
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
