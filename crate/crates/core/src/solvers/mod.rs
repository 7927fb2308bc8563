//! Conventional sequential and parallel PIM dynamics, PIMI, and the trial runner.

mod batch;
mod dynamics;
mod noise;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingInstance, SpinState, TrialRecord};
use crate::schedule::Schedule;
use crate::seed::{derive_seed, INIT_STREAM, NOISE_STREAM};

pub use batch::{parallel_map, run_batch};
pub use dynamics::{Arithmetic, Dynamics};
pub use noise::{NoiseDistribution, NoiseMode, NoiseSource, NoiseStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "conv-seq")]
    ConvSequential,
    #[serde(rename = "conv-par")]
    ConvParallel,
    #[serde(rename = "pimi")]
    Pimi,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Pimi, SolverKind::ConvSequential, SolverKind::ConvParallel];

    /// Noise law of the dynamics: uniform for the conventional rule, Gaussian for PIMI.
    pub fn noise_distribution(self) -> NoiseDistribution {
        match self {
            SolverKind::Pimi => NoiseDistribution::StdNormal,
            _ => NoiseDistribution::UniformPm1,
        }
    }

    pub fn is_parallel(self) -> bool {
        self != SolverKind::ConvSequential
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::ConvSequential => "conv-seq",
            SolverKind::ConvParallel => "conv-par",
            SolverKind::Pimi => "pimi",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv-seq" => Ok(SolverKind::ConvSequential),
            "conv-par" => Ok(SolverKind::ConvParallel),
            "pimi" => Ok(SolverKind::Pimi),
            other => Err(Error::config(format!(
                "unknown solver kind {other:?} (expected pimi, conv-seq or conv-par)"
            ))),
        }
    }
}

/// Everything about a solver run except the schedule and the randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub arithmetic: Arithmetic,
    pub noise_mode: NoiseMode,
    pub record_energies: bool,
    pub record_states: bool,
}

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            arithmetic: Arithmetic::full(),
            noise_mode: NoiseMode::OnTheFly,
            record_energies: false,
            record_states: false,
        }
    }

    pub fn with_arithmetic(mut self, arithmetic: Arithmetic) -> Self {
        self.arithmetic = arithmetic;
        self
    }

    pub fn with_noise_mode(mut self, mode: NoiseMode) -> Self {
        self.noise_mode = mode;
        self
    }

    pub fn recording_energies(mut self, on: bool) -> Self {
        self.record_energies = on;
        self
    }

    pub fn recording_states(mut self, on: bool) -> Self {
        self.record_states = on;
        self
    }
}

fn single_step(
    inst: &IsingInstance,
    kind: SolverKind,
    s: &SpinState,
    t: usize,
    sched: &Schedule,
    noise: &mut NoiseStream,
) -> Result<SpinState> {
    if s.len() != inst.n() {
        return Err(Error::Dimension {
            what: "spin state",
            expected: inst.n(),
            got: s.len(),
        });
    }
    let mut next = s.clone();
    Dynamics::new(inst, Arithmetic::full()).step(kind, &mut next, t, sched, noise);
    Ok(next)
}

/// Single-spin update of spin `t mod N` in full precision.
pub fn step_conv_sequential(
    inst: &IsingInstance,
    s: &SpinState,
    t: usize,
    sched: &Schedule,
    noise: &mut NoiseStream,
) -> Result<SpinState> {
    single_step(inst, SolverKind::ConvSequential, s, t, sched, noise)
}

/// Synchronous conventional update of all spins in full precision.
pub fn step_conv_parallel(
    inst: &IsingInstance,
    s: &SpinState,
    t: usize,
    sched: &Schedule,
    noise: &mut NoiseStream,
) -> Result<SpinState> {
    single_step(inst, SolverKind::ConvParallel, s, t, sched, noise)
}

/// Synchronous PIMI update of all spins in full precision.
pub fn step_pimi(
    inst: &IsingInstance,
    s: &SpinState,
    t: usize,
    sched: &Schedule,
    noise: &mut NoiseStream,
) -> Result<SpinState> {
    single_step(inst, SolverKind::Pimi, s, t, sched, noise)
}

struct Recorder {
    best_energy: f64,
    best_step: usize,
    improvements: Vec<(usize, f64)>,
    energies: Option<Vec<f64>>,
}

impl Recorder {
    fn new(record: bool, t_steps: usize) -> Self {
        Self {
            best_energy: f64::INFINITY,
            best_step: 0,
            improvements: Vec::new(),
            energies: record.then(|| Vec::with_capacity(t_steps)),
        }
    }

    fn push(&mut self, step: usize, e: f64) {
        if let Some(v) = &mut self.energies {
            v.push(e);
        }
        if e < self.best_energy {
            self.best_energy = e;
            self.best_step = step;
            self.improvements.push((step, e));
        }
    }
}

/// Runs one trial of `sched.t_steps()` update steps from `init`.
///
/// Step `k` of the energy trajectory holds the energy of the state produced by
/// update step `k`. The state trajectory, when recorded, starts with `init` and
/// has `t_steps + 1` entries.
pub fn run_trial(
    inst: &IsingInstance,
    config: &SolverConfig,
    sched: &Schedule,
    init: &SpinState,
    noise: &NoiseSource,
) -> Result<TrialRecord> {
    let n = inst.n();
    if init.len() != n {
        return Err(Error::Dimension {
            what: "initial spin state",
            expected: n,
            got: init.len(),
        });
    }
    let t_steps = sched.t_steps();
    if t_steps == 0 {
        return Err(Error::config("a trial needs at least one update step"));
    }
    let mut dynamics = Dynamics::new(inst, config.arithmetic.clone());
    let mut stream = noise.stream();
    let mut s = init.clone();
    let mut rec = Recorder::new(config.record_energies, t_steps);
    let mut states = config.record_states.then(|| {
        let mut v = Vec::with_capacity(t_steps + 1);
        v.push(s.clone());
        v
    });

    match config.kind {
        SolverKind::ConvSequential => {
            let mut e = dynamics.energy(&s);
            for t in 0..t_steps {
                let (i, old, field) = dynamics.step_sequential(&mut s, t, sched, &mut stream);
                if s.get(i) != old {
                    e += 2.0 * f64::from(old) * field;
                }
                rec.push(t, e);
                if let Some(v) = &mut states {
                    v.push(s.clone());
                }
            }
        }
        kind => {
            let xi = if kind == SolverKind::Pimi { sched.xi() } else { 0.0 };
            for t in 0..t_steps {
                let before = dynamics.step_parallel(&mut s, t, sched, &mut stream, xi);
                if t > 0 {
                    rec.push(t - 1, before);
                }
                if let Some(v) = &mut states {
                    v.push(s.clone());
                }
            }
            let last = dynamics.energy(&s);
            rec.push(t_steps - 1, last);
        }
    }

    if !rec.best_energy.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite energy {} in trial on {}",
            rec.best_energy,
            inst.label()
        )));
    }
    Ok(TrialRecord {
        best_energy: rec.best_energy,
        best_step: rec.best_step,
        steps: t_steps,
        improvements: rec.improvements,
        energy_trajectory: rec.energies,
        state_trajectory: states,
        final_spins: s,
        seed: noise.seed,
    })
}

/// Random initial state and noise source of trial `seed`, both derived from it.
pub fn trial_inputs(n: usize, kind: SolverKind, mode: NoiseMode, seed: u64) -> (SpinState, NoiseSource) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[INIT_STREAM]));
    let init = SpinState::random(n, &mut rng);
    let noise =
        NoiseSource::new(derive_seed(seed, &[NOISE_STREAM]), kind.noise_distribution()).with_mode(mode);
    (init, noise)
}

/// Per-trial seed for trial `trial` on instance `instance` of a batch.
pub fn trial_seed(base_seed: u64, instance: usize, trial: usize) -> u64 {
    derive_seed(base_seed, &[instance as u64, trial as u64])
}

/// One trial with the batch seeding convention; the record carries `seed`.
pub fn run_seeded_trial(
    inst: &IsingInstance,
    config: &SolverConfig,
    sched: &Schedule,
    seed: u64,
) -> Result<TrialRecord> {
    let (init, noise) = trial_inputs(inst.n(), config.kind, config.noise_mode, seed);
    let mut rec = run_trial(inst, config, sched, &init, &noise)?;
    rec.seed = seed;
    Ok(rec)
}
