//! Archive summaries: per-size CCTS tables, BER per SNR, flip-rate means.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{natural_key, read_csv, read_jsonl, stem, write_atomic, write_csv, GroundRecord, InstanceTrials};
use super::manifest::{ExperimentManifest, SCHEMA_VERSION};
use super::run::{BerRow, FlipRateSummaryRow, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::ising::TrialRecord;
use crate::metrics::{
    ccts_landscape, log10_stats, per_instance_optimal_ccts, speedup, CctsLandscape, CostModel, DEFAULT_EPSILON,
    DEFAULT_THRESHOLD_FRACTION,
};
use crate::solvers::SolverKind;

/// One `(size, solver)` line of a benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub solver: String,
    pub instances: usize,
    pub missing_ground: usize,
    /// `p̄` at the largest budget.
    pub p_final: Option<f64>,
    pub p_logstd_final: Option<f64>,
    pub t_star: Option<usize>,
    pub ccts_star: Option<f64>,
    /// Std of `log10 CCTS*_j` over solved instances.
    pub ccts_logstd: Option<f64>,
    /// `CCTS*_solver / CCTS*_pimi` at the same size.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub bench: Vec<BenchRow>,
    pub landscapes: Vec<(usize, String, CctsLandscape)>,
    pub ber: Vec<BerRow>,
    pub flip_rate: Vec<FlipRateSummaryRow>,
    /// `(size, instance)` pairs without a ground truth.
    pub missing_ground: Vec<(usize, String)>,
    pub text: String,
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.bench.is_empty() && self.ber.is_empty() && self.flip_rate.is_empty()
    }
}

struct Settings {
    fraction: f64,
    epsilon: f64,
    stride_per_spin: usize,
}

fn settings(archive: &Path) -> Result<Settings> {
    let mut s = Settings {
        fraction: DEFAULT_THRESHOLD_FRACTION,
        epsilon: DEFAULT_EPSILON,
        stride_per_spin: 1,
    };
    let path = archive.join(MANIFEST_FILE);
    if path.exists() {
        let m = ExperimentManifest::load(&path)?;
        if let Some(b) = &m.bench {
            s.fraction = b.threshold_fraction;
            s.epsilon = b.epsilon;
            s.stride_per_spin = b.grid_stride_per_spin.unwrap_or(1);
        }
    }
    Ok(s)
}

/// Budgets `stride, 2·stride, …` up to and including `t_max`.
pub fn budget_grid(t_max: usize, stride: usize) -> Result<Vec<usize>> {
    if t_max < 2 {
        return Err(Error::config("step-budget grid needs at least two recorded steps"));
    }
    let stride = stride.clamp(1, t_max / 2);
    let mut grid: Vec<usize> = (stride..=t_max).step_by(stride).collect();
    if grid.last() != Some(&t_max) {
        grid.push(t_max);
    }
    Ok(grid)
}

/// Parses `<solver>_n<N>` trial-file stems.
fn parse_trials_stem(s: &str) -> Option<(SolverKind, usize)> {
    let (solver, n) = s.rsplit_once("_n")?;
    Some((solver.parse().ok()?, n.parse().ok()?))
}

fn cost_model(kind: SolverKind) -> CostModel {
    CostModel::from(kind)
}

/// Reads an archive and writes `landscapes/*.csv`, `report.csv` and `report.txt`.
pub fn summarize(archive: &Path) -> Result<Report> {
    if !archive.is_dir() {
        return Err(Error::config(format!("archive {} is not a directory", archive.display())));
    }
    let cfg = settings(archive)?;
    let mut report = Report::default();

    let trials_dir = archive.join("trials");
    let mut files: Vec<(SolverKind, usize, std::path::PathBuf)> = Vec::new();
    if trials_dir.is_dir() {
        for entry in std::fs::read_dir(&trials_dir).map_err(|e| Error::io(&trials_dir, e))? {
            let p = entry.map_err(|e| Error::io(&trials_dir, e))?.path();
            if p.extension().is_some_and(|x| x == "jsonl") {
                if let Some((kind, n)) = parse_trials_stem(&stem(&p)) {
                    files.push((kind, n, p));
                }
            }
        }
    }
    // sizes ascending, PIMI first so speedups can refer to it
    files.sort_by_key(|(k, n, _)| (*n, SolverKind::ALL.iter().position(|x| x == k)));

    let mut ground_cache: BTreeMap<usize, BTreeMap<String, f64>> = BTreeMap::new();
    let mut pimi_star: BTreeMap<usize, f64> = BTreeMap::new();
    for (kind, n, path) in &files {
        let ground = match ground_cache.get(n) {
            Some(g) => g.clone(),
            None => {
                let gpath = archive.join("ground").join(format!("n{n}.jsonl"));
                let g: BTreeMap<String, f64> = if gpath.exists() {
                    read_jsonl::<GroundRecord>(&gpath)?
                        .into_iter()
                        .map(|r| (r.instance, r.best_energy))
                        .collect()
                } else {
                    BTreeMap::new()
                };
                ground_cache.insert(*n, g.clone());
                g
            }
        };
        let rows: Vec<InstanceTrials> = read_jsonl(path)?;
        let mut records: Vec<Vec<TrialRecord>> = Vec::new();
        let mut energies = Vec::new();
        let mut missing = 0;
        for row in rows {
            match ground.get(&row.instance) {
                Some(&g) => {
                    energies.push(g);
                    records.push(row.records);
                }
                None => {
                    missing += 1;
                    report.missing_ground.push((*n, row.instance));
                }
            }
        }
        let mut row = BenchRow {
            n: *n,
            solver: kind.to_string(),
            instances: records.len(),
            missing_ground: missing,
            p_final: None,
            p_logstd_final: None,
            t_star: None,
            ccts_star: None,
            ccts_logstd: None,
            speedup: None,
        };
        if !records.is_empty() {
            let t_max = records.iter().flatten().map(|r| r.steps).min().unwrap_or(0);
            let grid = budget_grid(t_max, cfg.stride_per_spin * n)?;
            let model = cost_model(*kind);
            let land = ccts_landscape(&records, &energies, &grid, model, *n, cfg.fraction, cfg.epsilon)?;
            let last = land.grid.last().expect("non-empty grid");
            row.p_final = Some(last.p_mean);
            row.p_logstd_final = last.p_logstd;
            if let Some((t, c)) = land.optimum {
                row.t_star = Some(t);
                row.ccts_star = Some(c);
            }
            let per = per_instance_optimal_ccts(&records, &energies, &grid, model, *n, cfg.fraction, cfg.epsilon)?;
            row.ccts_logstd = log10_stats(&per).map(|(_, sd)| sd);
            if *kind == SolverKind::Pimi {
                if let Some(c) = row.ccts_star {
                    pimi_star.insert(*n, c);
                }
            } else if let (Some(c), Some(p)) = (row.ccts_star, pimi_star.get(n)) {
                row.speedup = Some(speedup(c, *p)?);
            }
            write_csv(
                &archive.join("landscapes").join(format!("{kind}_n{n}.csv")),
                &land.grid,
            )?;
            report.landscapes.push((*n, kind.to_string(), land));
        }
        report.bench.push(row);
    }

    let ber_path = archive.join("ber.csv");
    if ber_path.exists() {
        report.ber = read_csv(&ber_path)?;
    }
    let flip_path = archive.join("flip_rate_summary.csv");
    if flip_path.exists() {
        report.flip_rate = read_csv(&flip_path)?;
    }
    report.missing_ground.sort_by(|a, b| (a.0, natural_key(&a.1)).cmp(&(b.0, natural_key(&b.1))));
    report.missing_ground.dedup();
    report.text = render(&report);
    write_csv(&archive.join("report.csv"), &report.bench)?;
    write_atomic(&archive.join("report.txt"), report.text.as_bytes())?;
    Ok(report)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |x| format!("{x:.prec$}"))
}

fn render(r: &Report) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "report schema {SCHEMA_VERSION}");
    if r.is_empty() {
        let _ = writeln!(t, "empty archive");
        return t;
    }
    if !r.bench.is_empty() {
        let _ = writeln!(t, "\nbenchmark");
        let _ = writeln!(
            t,
            "{:>6} {:>9} {:>5} {:>8} {:>8} {:>7} {:>12} {:>8} {:>8}",
            "n", "solver", "inst", "p_final", "logstd", "T*", "CCTS*", "spread", "speedup"
        );
        for b in &r.bench {
            let _ = writeln!(
                t,
                "{:>6} {:>9} {:>5} {:>8} {:>8} {:>7} {:>12} {:>8} {:>8}",
                b.n,
                b.solver,
                b.instances,
                opt(b.p_final, 4),
                opt(b.p_logstd_final, 3),
                b.t_star.map_or("-".into(), |v| v.to_string()),
                opt(b.ccts_star, 1),
                opt(b.ccts_logstd, 3),
                opt(b.speedup, 2),
            );
        }
        for (n, name) in &r.missing_ground {
            let _ = writeln!(t, "missing ground truth: n={n} {name}");
        }
    }
    if !r.ber.is_empty() {
        let _ = writeln!(t, "\nbit-error rate");
        let _ = writeln!(t, "{:>9} {:>9} {:>12} {:>9}", "detector", "Eb/N0 dB", "BER", "scenarios");
        for b in &r.ber {
            let _ = writeln!(t, "{:>9} {:>9} {:>12.6e} {:>9}", b.detector, b.ebn0_db, b.ber, b.scenario_count);
        }
    }
    if !r.flip_rate.is_empty() {
        let _ = writeln!(t, "\nneighbor-triggered flip rate");
        let _ = writeln!(t, "{:>6} {:>10} {:>8}", "xi", "mean P_NT", "defined");
        for f in &r.flip_rate {
            let _ = writeln!(t, "{:>6} {:>10} {:>4}/{}", f.xi, opt(f.mean_p_nt, 4), f.defined_steps, f.steps);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        assert_eq!(budget_grid(100, 20).unwrap(), vec![20, 40, 60, 80, 100]);
        assert_eq!(budget_grid(50, 20).unwrap(), vec![20, 40, 50]);
        assert_eq!(budget_grid(3, 20).unwrap(), vec![1, 2, 3]);
        assert!(budget_grid(1, 1).is_err());
    }

    #[test]
    fn trial_stems() {
        assert_eq!(parse_trials_stem("conv-par_n20"), Some((SolverKind::ConvParallel, 20)));
        assert_eq!(parse_trials_stem("pimi_n7"), Some((SolverKind::Pimi, 7)));
        assert_eq!(parse_trials_stem("other"), None);
    }

    #[test]
    fn empty_archive_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let r = summarize(dir.path()).unwrap();
        assert!(r.is_empty());
        assert!(r.text.contains("empty archive"));
        assert!(summarize(&dir.path().join("nope")).is_err());
    }
}
