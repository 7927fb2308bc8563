//! Success probabilities, trials-to-solution, clock-cycle cost models, CCTS
//! landscapes and the neighbor-triggered flip rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingInstance, SpinState, TrialRecord};

/// Design clock of the 8×8 PIMI MIMO detector, in Hz.
pub const PIMI_MIMO_8X8_CLOCK_HZ: f64 = 274e6;
/// LTE (10 MHz, 15 kHz SCS) detection throughput requirement, instances per ms.
pub const LTE_REQUIRED_INSTANCES_PER_MS: f64 = 8400.0;
/// 5G NR (50 MHz, 15 kHz SCS) detection throughput requirement, instances per ms.
pub const NR_REQUIRED_INSTANCES_PER_MS: f64 = 35_640.0;

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// A trial succeeds when its best-so-far energy reaches the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub threshold_fraction: f64,
    pub ground_energy: f64,
}

impl SuccessCriterion {
    pub fn new(ground_energy: f64) -> Self {
        Self {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            ground_energy,
        }
    }

    pub fn with_fraction(mut self, fraction: f64) -> Self {
        self.threshold_fraction = fraction;
        self
    }

    /// `fraction·H_gs`, never below `H_gs` (so a non-negative ground energy
    /// still demands the ground state itself).
    pub fn threshold(&self) -> f64 {
        (self.threshold_fraction * self.ground_energy).max(self.ground_energy)
    }

    #[inline]
    fn hit(&self, e: f64) -> bool {
        // absorbs summation-order noise on non-integer couplings
        e <= self.threshold() + 1e-9 * self.threshold().abs().max(1.0)
    }
}

/// Fraction of trials whose best energy within the first `budget` steps (all
/// steps when `None`) reaches the criterion.
pub fn success_probability(
    records: &[TrialRecord],
    criterion: &SuccessCriterion,
    budget: Option<usize>,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::config("success probability needs at least one trial"));
    }
    let mut hits = 0usize;
    for r in records {
        let best = match budget {
            None => Some(r.best_energy),
            Some(b) if b > r.steps => {
                return Err(Error::config(format!(
                    "step budget {b} exceeds the {} recorded steps",
                    r.steps
                )))
            }
            Some(b) => r.best_within(b),
        };
        if best.is_some_and(|e| criterion.hit(e)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

fn check_probability(p: f64, epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("success probability {p} is outside [0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("epsilon {epsilon} is outside (0, 1)")));
    }
    Ok(())
}

/// `log ε / log(1 − p)` without rounding; `+∞` for `p = 0`, `1` for `p = 1`.
pub fn n_trials_real(p_bar: f64, epsilon: f64) -> Result<f64> {
    check_probability(p_bar, epsilon)?;
    if p_bar == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p_bar == 1.0 {
        return Ok(1.0);
    }
    Ok((epsilon.ln() / (1.0 - p_bar).ln()).max(1.0))
}

/// `ceil(log ε / log(1 − p))`; `+∞` for `p = 0`, `1` for `p = 1`.
///
/// Ratios within 1e-9 above an integer are snapped down first, so that
/// `p = 1 − ε` gives exactly one trial despite `1 − p` not being exact.
pub fn n_trials_required(p_bar: f64, epsilon: f64) -> Result<f64> {
    let x = n_trials_real(p_bar, epsilon)?;
    if x.is_infinite() {
        return Ok(x);
    }
    Ok((x - 1e-9).ceil().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostModel {
    Seq,
    Par,
    Pimi,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Seq => "seq",
            CostModel::Par => "par",
            CostModel::Pimi => "pimi",
        })
    }
}

impl FromStr for CostModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" => Ok(CostModel::Seq),
            "par" => Ok(CostModel::Par),
            "pimi" => Ok(CostModel::Pimi),
            other => Err(Error::config(format!("unknown cost model {other:?} (expected seq, par or pimi)"))),
        }
    }
}

impl From<crate::solvers::SolverKind> for CostModel {
    fn from(kind: crate::solvers::SolverKind) -> Self {
        use crate::solvers::SolverKind;
        match kind {
            SolverKind::ConvSequential => CostModel::Seq,
            SolverKind::ConvParallel => CostModel::Par,
            SolverKind::Pimi => CostModel::Pimi,
        }
    }
}

fn check_size(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::config(format!("cost models need N >= 2, got {n}")));
    }
    Ok(n as f64)
}

/// Clock cycles per sweep (all `N` spins updated once).
pub fn clock_cycles_per_sweep(model: CostModel, n: usize) -> Result<f64> {
    let nf = check_size(n)?;
    Ok(match model {
        CostModel::Seq => nf * nf.log2() + 8.0 * nf + 4.67,
        CostModel::Par => 1.1 * nf.log2() + 7.0,
        CostModel::Pimi => 1.1 * nf.log2() + 8.6,
    })
}

/// Clock cycles per update step: a single-spin update for `Seq`, a sweep otherwise.
pub fn clock_cycles_per_step(model: CostModel, n: usize) -> Result<f64> {
    let sweep = clock_cycles_per_sweep(model, n)?;
    Ok(match model {
        CostModel::Seq => sweep / n as f64,
        _ => sweep,
    })
}

/// `n_trials(p)·T·C_step(N)`; `+∞` when `p = 0`.
pub fn ccts(p_bar: f64, t_steps: usize, model: CostModel, n: usize, epsilon: f64) -> Result<f64> {
    let trials = n_trials_required(p_bar, epsilon)?;
    let cost = t_steps as f64 * clock_cycles_per_step(model, n)?;
    Ok(if trials.is_infinite() { f64::INFINITY } else { trials * cost })
}

pub fn speedup(ccts_conv: f64, ccts_pimi: f64) -> Result<f64> {
    if !(ccts_conv.is_finite() && ccts_pimi.is_finite() && ccts_conv > 0.0 && ccts_pimi > 0.0) {
        return Err(Error::Numeric(format!(
            "speedup needs finite positive CCTS values, got {ccts_conv} and {ccts_pimi}"
        )));
    }
    Ok(ccts_conv / ccts_pimi)
}

/// Seconds for `ccts` cycles at `f_clk_hz`.
pub fn wall_clock(ccts: f64, f_clk_hz: f64) -> Result<f64> {
    if !(f_clk_hz > 0.0) {
        return Err(Error::config(format!("clock frequency must be positive, got {f_clk_hz}")));
    }
    Ok(ccts / f_clk_hz)
}

/// Mean and population standard deviation of `log10 x` over the positive,
/// finite entries; `None` when there are none.
pub fn log10_stats(values: &[f64]) -> Option<(f64, f64)> {
    let logs: Vec<f64> = values
        .iter()
        .filter(|v| v.is_finite() && **v > 0.0)
        .map(|v| v.log10())
        .collect();
    if logs.is_empty() {
        return None;
    }
    let m = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / m;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / m;
    Some((mean, var.sqrt()))
}

/// Serializes `+∞` as JSON `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub t_steps: usize,
    pub p_mean: f64,
    /// Std of `log10 p_j` over instances with `p_j > 0`.
    pub p_logstd: Option<f64>,
    #[serde(with = "inf_as_null")]
    pub n_trials: f64,
    #[serde(with = "inf_as_null")]
    pub ccts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CctsLandscape {
    pub n: usize,
    pub model: CostModel,
    pub grid: Vec<LandscapePoint>,
    /// `(T*, CCTS*)`; `None` when every grid point is infinite.
    pub optimum: Option<(usize, f64)>,
}

impl CctsLandscape {
    /// The optimum, or [`Error::Unsolved`].
    pub fn solved(&self) -> Result<(usize, f64)> {
        self.optimum.ok_or(Error::Unsolved)
    }
}

/// Inclusive `start..=stop` with `step`, e.g. `10, 20, …, 2000`.
pub fn step_grid(start: usize, stop: usize, step: usize) -> Result<Vec<usize>> {
    if start == 0 || step == 0 || stop < start {
        return Err(Error::config(format!(
            "step grid {start}:{stop}:{step} needs 0 < start <= stop and step > 0"
        )));
    }
    Ok((start..=stop).step_by(step).collect())
}

/// Parses `"start:stop:step"`.
pub fn parse_step_grid(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::config(format!("step grid {text:?} must look like 10:2000:10")))?;
    match nums.as_slice() {
        [a, b, c] => step_grid(*a, *b, *c),
        _ => Err(Error::config(format!("step grid {text:?} must look like 10:2000:10"))),
    }
}

/// Evaluates CCTS on `(T, p̄(T), logstd)` inputs and picks the argmin, ties
/// toward the smaller `T`.
pub fn optimize_step_budget(
    points: &[(usize, f64, Option<f64>)],
    model: CostModel,
    n: usize,
    epsilon: f64,
) -> Result<CctsLandscape> {
    if points.len() < 2 {
        return Err(Error::config("step-budget optimization needs at least two grid points"));
    }
    let mut grid = Vec::with_capacity(points.len());
    for &(t_steps, p_mean, p_logstd) in points {
        grid.push(LandscapePoint {
            t_steps,
            p_mean,
            p_logstd,
            n_trials: n_trials_required(p_mean, epsilon)?,
            ccts: ccts(p_mean, t_steps, model, n, epsilon)?,
        });
    }
    let mut optimum: Option<(usize, f64)> = None;
    for pt in &grid {
        if !pt.ccts.is_finite() {
            continue;
        }
        let better = match optimum {
            None => true,
            Some((t, c)) => pt.ccts < c || (pt.ccts == c && pt.t_steps < t),
        };
        if better {
            optimum = Some((pt.t_steps, pt.ccts));
        }
    }
    Ok(CctsLandscape { n, model, grid, optimum })
}

/// Per-instance success probabilities `p_j(T)` for every grid budget.
/// `result[g][j]` is instance `j` at `grid[g]`.
pub fn success_table(
    records: &[Vec<TrialRecord>],
    ground: &[f64],
    grid: &[usize],
    fraction: f64,
) -> Result<Vec<Vec<f64>>> {
    if records.len() != ground.len() {
        return Err(Error::Dimension {
            what: "ground energies",
            expected: records.len(),
            got: ground.len(),
        });
    }
    grid.iter()
        .map(|&t| {
            records
                .iter()
                .zip(ground)
                .map(|(recs, &g)| {
                    success_probability(recs, &SuccessCriterion::new(g).with_fraction(fraction), Some(t))
                })
                .collect()
        })
        .collect()
}

/// CCTS landscape over `grid` from per-instance trial records. Success
/// probabilities are averaged over instances before conversion to trials.
pub fn ccts_landscape(
    records: &[Vec<TrialRecord>],
    ground: &[f64],
    grid: &[usize],
    model: CostModel,
    n: usize,
    fraction: f64,
    epsilon: f64,
) -> Result<CctsLandscape> {
    if records.is_empty() {
        return Err(Error::config("CCTS landscape needs at least one instance"));
    }
    let table = success_table(records, ground, grid, fraction)?;
    let points: Vec<(usize, f64, Option<f64>)> = grid
        .iter()
        .zip(&table)
        .map(|(&t, ps)| {
            let mean = ps.iter().sum::<f64>() / ps.len() as f64;
            (t, mean, log10_stats(ps).map(|(_, sd)| sd))
        })
        .collect();
    optimize_step_budget(&points, model, n, epsilon)
}

/// Per-instance optimum `CCTS*_j` (each instance's own landscape minimum),
/// `+∞` where the instance is never solved.
pub fn per_instance_optimal_ccts(
    records: &[Vec<TrialRecord>],
    ground: &[f64],
    grid: &[usize],
    model: CostModel,
    n: usize,
    fraction: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let table = success_table(records, ground, grid, fraction)?;
    (0..records.len())
        .map(|j| {
            let points: Vec<(usize, f64, Option<f64>)> =
                grid.iter().zip(&table).map(|(&t, ps)| (t, ps[j], None)).collect();
            if points.len() == 1 {
                return ccts(points[0].1, points[0].0, model, n, epsilon);
            }
            Ok(optimize_step_budget(&points, model, n, epsilon)?
                .optimum
                .map_or(f64::INFINITY, |(_, c)| c))
        })
        .collect()
}

/// `P_NT(t)` for `t = 1..len`: among `(trial, spin)` pairs where at least one
/// coupled neighbor flips between states `t−1` and `t`, the fraction where the
/// spin itself flips. Entry `t−1` of the output is step `t`; `None` marks
/// steps without any such pair.
pub fn neighbor_triggered_flip_rate(
    trajectories: &[Vec<SpinState>],
    inst: &IsingInstance,
) -> Result<Vec<Option<f64>>> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::config("flip rate needs at least one trajectory"))?;
    let len = first.len();
    if len < 2 {
        return Err(Error::config("flip rate needs trajectories of at least two states"));
    }
    let n = inst.n();
    for traj in trajectories {
        if traj.len() != len {
            return Err(Error::Dimension {
                what: "trajectory length",
                expected: len,
                got: traj.len(),
            });
        }
        if let Some(s) = traj.iter().find(|s| s.len() != n) {
            return Err(Error::Dimension {
                what: "spin state",
                expected: n,
                got: s.len(),
            });
        }
    }
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&k| k != i && inst.coupling(i, k) != 0.0).collect())
        .collect();
    let mut out = Vec::with_capacity(len - 1);
    let mut flipped = vec![false; n];
    for t in 1..len {
        let (mut events, mut co) = (0u64, 0u64);
        for traj in trajectories {
            let (a, b) = (traj[t - 1].as_slice(), traj[t].as_slice());
            for i in 0..n {
                flipped[i] = a[i] != b[i];
            }
            for i in 0..n {
                if neighbors[i].iter().any(|&k| flipped[k]) {
                    events += 1;
                    co += u64::from(flipped[i]);
                }
            }
        }
        out.push((events > 0).then(|| co as f64 / events as f64));
    }
    Ok(out)
}

/// Mean over the non-null entries.
pub fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
