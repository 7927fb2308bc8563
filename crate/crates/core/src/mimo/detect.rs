//! Ising-backed detection, reconstruction and bit-error accounting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::channel::{mmse_detect, to_real, unstack_vector, MimoScenario};
use super::dimimo::{build_dimimo, CorrectionSet};
use crate::error::{Error, Result};
use crate::schedule::{make_schedule, DefaultParams, Schedule, ScheduleKind};
use crate::seed::derive_seed;
use crate::solvers::{parallel_map, run_trial, trial_inputs, SolverConfig, SolverKind};

/// Solver settings for the Ising stage of the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingDetector {
    pub config: SolverConfig,
    pub schedule: Schedule,
    pub trials: usize,
    /// `None` picks the set from the constellation.
    pub correction: Option<CorrectionSet>,
    /// Build the residual from the unsliced linear estimate instead of the sliced one.
    pub unsliced_estimate: bool,
}

impl IsingDetector {
    /// Shipped MIMO schedule for `kind`: the γ-ramp with `ξ = 2` for PIMI,
    /// the decaying-noise schedule otherwise.
    pub fn with_defaults(kind: SolverKind, trials: usize, steps: usize, defaults: &DefaultParams) -> Result<Self> {
        let schedule = match kind {
            SolverKind::Pimi => make_schedule(ScheduleKind::PimiMimo, &defaults.mimo(), steps)?,
            _ => make_schedule(ScheduleKind::ConvMimo, &Default::default(), steps)?,
        };
        Self::new(SolverConfig::new(kind), schedule, trials)
    }

    pub fn new(config: SolverConfig, schedule: Schedule, trials: usize) -> Result<Self> {
        if trials == 0 {
            return Err(Error::config("detector needs at least one trial"));
        }
        Ok(Self {
            config,
            schedule,
            trials,
            correction: None,
            unsliced_estimate: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Mmse,
    Ising(IsingDetector),
}

impl Detector {
    pub fn name(&self) -> String {
        match self {
            Detector::Mmse => "mmse".into(),
            Detector::Ising(d) => d.config.kind.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    /// Quadratic-form energy of the selected state (Ising detectors only).
    pub best_energy: Option<f64>,
    pub best_trial: Option<usize>,
}

/// Runs `detector` on one scenario. Ising trials start from independent random
/// states; the lowest-energy final state wins, ties to the earliest trial.
pub fn detect(scenario: &MimoScenario, detector: &Detector, seed: u64) -> Result<Detection> {
    let est = mmse_detect(scenario)?;
    let qam = scenario.qam;
    let d = match detector {
        Detector::Mmse => {
            return Ok(Detection {
                bits: est.bits(qam),
                symbols: est.symbols,
                best_energy: None,
                best_trial: None,
            })
        }
        Detector::Ising(d) => d,
    };
    let x_m = if d.unsliced_estimate { &est.z_real } else { &est.x_sliced };
    let set = d.correction.unwrap_or_else(|| CorrectionSet::for_qam(qam));
    let problem = build_dimimo(&to_real(scenario), x_m, set)?;
    let inst = problem.to_instance("dimimo")?;
    let mut best: Option<(f64, usize, crate::ising::SpinState)> = None;
    for trial in 0..d.trials {
        let (init, noise) = trial_inputs(
            inst.n(),
            d.config.kind,
            d.config.noise_mode,
            derive_seed(seed, &[trial as u64]),
        );
        let rec = run_trial(&inst, &d.config, &d.schedule, &init, &noise)?;
        let e = problem.energy(&rec.final_spins);
        if best.as_ref().is_none_or(|(b, _, _)| e < *b) {
            best = Some((e, trial, rec.final_spins));
        }
    }
    let (e, trial, s) = best.expect("at least one trial");
    let symbols: Vec<Complex64> = unstack_vector(&problem.reconstruct(&s))
        .into_iter()
        .map(|z| qam.slice(z))
        .collect();
    Ok(Detection {
        bits: symbols.iter().flat_map(|&z| qam.decode(z)).collect(),
        symbols,
        best_energy: Some(e),
        best_trial: Some(trial),
    })
}

/// Fraction of differing bits.
pub fn bit_error_fraction(truth: &[u8], detected: &[u8]) -> Result<f64> {
    if truth.len() != detected.len() || truth.is_empty() {
        return Err(Error::Dimension {
            what: "bit vectors",
            expected: truth.len(),
            got: detected.len(),
        });
    }
    let wrong = truth.iter().zip(detected).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Seed of scenario `index` in a BER batch. Independent of `Eb/N0`, so a sweep
/// reuses channels, symbols and unit noise across SNR points.
pub fn scenario_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, &[3, index as u64])
}

/// Seed of the detector's trials on scenario `index`.
pub fn detector_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, &[4, index as u64])
}

/// Mean per-scenario bit-error fraction.
pub fn ber(scenarios: &[MimoScenario], detector: &Detector, base_seed: u64, workers: usize) -> Result<f64> {
    if scenarios.is_empty() {
        return Err(Error::config("BER needs at least one scenario"));
    }
    let errs = parallel_map(scenarios.len(), workers, |k| {
        let det = detect(&scenarios[k], detector, detector_seed(base_seed, k))?;
        bit_error_fraction(&scenarios[k].bits_true, &det.bits)
    })?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub ber: f64,
    pub scenario_count: usize,
}

/// BER over `count` generated scenarios at each `Eb/N0`.
#[allow(clippy::too_many_arguments)]
pub fn ber_curve(
    nt: usize,
    nr: usize,
    qam_order: u32,
    ebn0_db: &[f64],
    count: usize,
    detector: &Detector,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<BerPoint>> {
    ebn0_db
        .iter()
        .map(|&snr| {
            let scenarios = parallel_map(count, workers, |k| {
                super::channel::gen_scenario(nt, nr, qam_order, snr, scenario_seed(base_seed, k))
            })?;
            Ok(BerPoint {
                ebn0_db: snr,
                ber: ber(&scenarios, detector, base_seed, workers)?,
                scenario_count: count,
            })
        })
        .collect()
}
