//! Annealing schedules `β(t)`, `η(t)` and the constant inertia `ξ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    PimiBench,
    ConvBench,
    PimiMimo,
    ConvMimo,
    Custom,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::PimiBench => "pimi-bench",
            ScheduleKind::ConvBench => "conv-bench",
            ScheduleKind::PimiMimo => "pimi-mimo",
            ScheduleKind::ConvMimo => "conv-mimo",
            ScheduleKind::Custom => "custom",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pimi-bench" => ScheduleKind::PimiBench,
            "conv-bench" => ScheduleKind::ConvBench,
            "pimi-mimo" => ScheduleKind::PimiMimo,
            "conv-mimo" => ScheduleKind::ConvMimo,
            "custom" => ScheduleKind::Custom,
            other => return Err(Error::config(format!("unknown schedule {other:?}"))),
        })
    }
}

/// Named schedule parameters; which ones are required depends on the kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub beta_scale: Option<f64>,
    pub beta_init: Option<f64>,
    pub delta_beta: Option<f64>,
    pub xi: Option<f64>,
    pub eta_scale: Option<f64>,
    pub eta_floor: Option<f64>,
    pub gamma_init: Option<f64>,
    pub gamma_final: Option<f64>,
}

impl ScheduleParams {
    /// Fills unset fields from `other`.
    pub fn or(self, other: &ScheduleParams) -> ScheduleParams {
        ScheduleParams {
            beta_scale: self.beta_scale.or(other.beta_scale),
            beta_init: self.beta_init.or(other.beta_init),
            delta_beta: self.delta_beta.or(other.delta_beta),
            xi: self.xi.or(other.xi),
            eta_scale: self.eta_scale.or(other.eta_scale),
            eta_floor: self.eta_floor.or(other.eta_floor),
            gamma_init: self.gamma_init.or(other.gamma_init),
            gamma_final: self.gamma_final.or(other.gamma_final),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    PimiBench {
        beta_scale: f64,
        beta_init: f64,
        delta_beta: f64,
    },
    ConvBench {
        beta_scale: f64,
        eta_scale: f64,
        eta_floor: f64,
    },
    PimiMimo {
        beta_scale: f64,
        gamma_init: f64,
        gamma_final: f64,
    },
    ConvMimo,
    Custom {
        beta: Vec<f64>,
        eta: Vec<f64>,
    },
}

/// Per-step `β(t)`, `η(t)` with constant `ξ` over `t_steps` update steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    profile: Profile,
    xi: f64,
    t_steps: usize,
}

fn required(name: &str, v: Option<f64>, kind: ScheduleKind) -> Result<f64> {
    let v = v.ok_or_else(|| Error::config(format!("{kind} schedule needs parameter {name}")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::config(format!(
            "{kind} schedule parameter {name} must be finite and non-negative, got {v}"
        )));
    }
    Ok(v)
}

fn optional(name: &str, v: Option<f64>, default: f64, kind: ScheduleKind) -> Result<f64> {
    required(name, Some(v.unwrap_or(default)), kind)
}

/// Builds a schedule of the given shape.
///
/// * `PimiBench`: `β = β_scale·tanh(β_init + Δβ·t)`, `η = √(β/5)`, `ξ` from params.
/// * `ConvBench`: `β = β_scale` (default 0.2), `η = max(η_scale/√(t+1), η_floor)`, `ξ = 0`.
/// * `PimiMimo`: `β = β_scale` (default 1), `η = √(1/(5γ(t)))` with `γ` linear from
///   `γ_init` to `γ_final`, `ξ` default 2.
/// * `ConvMimo`: `β = 1`, `η = 1/√((t+1)/5)`, `ξ = 0`.
pub fn make_schedule(kind: ScheduleKind, params: &ScheduleParams, t_steps: usize) -> Result<Schedule> {
    if t_steps == 0 {
        return Err(Error::config("schedule needs at least one update step"));
    }
    let (profile, xi) = match kind {
        ScheduleKind::PimiBench => (
            Profile::PimiBench {
                beta_scale: required("beta_scale", params.beta_scale, kind)?,
                beta_init: required("beta_init", params.beta_init, kind)?,
                delta_beta: required("delta_beta", params.delta_beta, kind)?,
            },
            required("xi", params.xi, kind)?,
        ),
        ScheduleKind::ConvBench => (
            Profile::ConvBench {
                beta_scale: optional("beta_scale", params.beta_scale, 0.2, kind)?,
                eta_scale: required("eta_scale", params.eta_scale, kind)?,
                eta_floor: required("eta_floor", params.eta_floor, kind)?,
            },
            0.0,
        ),
        ScheduleKind::PimiMimo => {
            let gamma_init = required("gamma_init", params.gamma_init, kind)?;
            let gamma_final = required("gamma_final", params.gamma_final, kind)?;
            if gamma_init == 0.0 || gamma_final == 0.0 {
                return Err(Error::config("pimi-mimo gamma values must be positive"));
            }
            (
                Profile::PimiMimo {
                    beta_scale: optional("beta_scale", params.beta_scale, 1.0, kind)?,
                    gamma_init,
                    gamma_final,
                },
                optional("xi", params.xi, 2.0, kind)?,
            )
        }
        ScheduleKind::ConvMimo => (Profile::ConvMimo, 0.0),
        ScheduleKind::Custom => {
            return Err(Error::config(
                "custom schedules are built from explicit tables with Schedule::custom",
            ))
        }
    };
    Ok(Schedule {
        profile,
        xi,
        t_steps,
    })
}

impl Schedule {
    /// Table-driven schedule; `beta` and `eta` must both have `t_steps` entries.
    pub fn custom(beta: Vec<f64>, eta: Vec<f64>, xi: f64) -> Result<Self> {
        if beta.is_empty() || beta.len() != eta.len() {
            return Err(Error::config(
                "custom schedule needs equal-length, non-empty beta and eta tables",
            ));
        }
        if eta.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("custom schedule values must be finite with eta >= 0"));
        }
        if !(xi >= 0.0) {
            return Err(Error::config("xi must be non-negative"));
        }
        Ok(Self {
            t_steps: beta.len(),
            profile: Profile::Custom { beta, eta },
            xi,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        match self.profile {
            Profile::PimiBench { .. } => ScheduleKind::PimiBench,
            Profile::ConvBench { .. } => ScheduleKind::ConvBench,
            Profile::PimiMimo { .. } => ScheduleKind::PimiMimo,
            Profile::ConvMimo => ScheduleKind::ConvMimo,
            Profile::Custom { .. } => ScheduleKind::Custom,
        }
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Same shape with a different inertia.
    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::config("xi must be finite and non-negative"));
        }
        self.xi = xi;
        Ok(self)
    }

    /// Same shape over a different number of steps. Custom tables cannot be resized.
    pub fn with_steps(mut self, t_steps: usize) -> Result<Self> {
        if t_steps == 0 {
            return Err(Error::config("schedule needs at least one update step"));
        }
        if matches!(self.profile, Profile::Custom { .. }) && t_steps != self.t_steps {
            return Err(Error::config("custom schedule tables have a fixed length"));
        }
        self.t_steps = t_steps;
        Ok(self)
    }

    pub fn beta(&self, t: usize) -> f64 {
        match &self.profile {
            Profile::PimiBench {
                beta_scale,
                beta_init,
                delta_beta,
            } => beta_scale * (beta_init + delta_beta * t as f64).tanh(),
            Profile::ConvBench { beta_scale, .. } | Profile::PimiMimo { beta_scale, .. } => *beta_scale,
            Profile::ConvMimo => 1.0,
            Profile::Custom { beta, .. } => beta[t.min(beta.len() - 1)],
        }
    }

    pub fn eta(&self, t: usize) -> f64 {
        match &self.profile {
            Profile::PimiBench { .. } => (self.beta(t) / 5.0).sqrt(),
            Profile::ConvBench {
                eta_scale,
                eta_floor,
                ..
            } => (eta_scale / ((t + 1) as f64).sqrt()).max(*eta_floor),
            Profile::PimiMimo {
                gamma_init,
                gamma_final,
                ..
            } => {
                let frac = if self.t_steps > 1 {
                    t.min(self.t_steps - 1) as f64 / (self.t_steps - 1) as f64
                } else {
                    0.0
                };
                let gamma = gamma_init + (gamma_final - gamma_init) * frac;
                (1.0 / (5.0 * gamma)).sqrt()
            }
            Profile::ConvMimo => 1.0 / ((t + 1) as f64 / 5.0).sqrt(),
            Profile::Custom { eta, .. } => eta[t.min(eta.len() - 1)],
        }
    }
}

/// Problem family used to pick shipped defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    #[serde(rename = "maxcut")]
    MaxCut,
    #[serde(rename = "sk1")]
    Sk1,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::MaxCut => "maxcut",
            Problem::Sk1 => "sk1",
        })
    }
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxcut" => Ok(Problem::MaxCut),
            "sk1" => Ok(Problem::Sk1),
            other => Err(Error::config(format!("unknown problem family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchBucket {
    problem: Problem,
    n_max: usize,
    pimi: ScheduleParams,
    conv: ScheduleParams,
}

/// Tuned defaults shipped with the crate, versioned.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultParams {
    pub version: String,
    bench: Vec<BenchBucket>,
    mimo: ScheduleParams,
}

const DEFAULTS_TOML: &str = include_str!("../params/defaults.toml");

impl DefaultParams {
    pub fn shipped() -> Self {
        toml::from_str(DEFAULTS_TOML).expect("shipped defaults.toml is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("defaults file: {e}")))
    }

    /// Defaults for a benchmark schedule at size `n`: the first bucket with `n <= n_max`,
    /// falling back to the largest bucket.
    pub fn bench(&self, problem: Problem, kind: ScheduleKind, n: usize) -> Result<ScheduleParams> {
        let mut buckets: Vec<&BenchBucket> =
            self.bench.iter().filter(|b| b.problem == problem).collect();
        buckets.sort_by_key(|b| b.n_max);
        let bucket = buckets
            .iter()
            .find(|b| n <= b.n_max)
            .or(buckets.last())
            .ok_or_else(|| Error::config(format!("no defaults for {problem}")))?;
        match kind {
            ScheduleKind::PimiBench => Ok(bucket.pimi),
            ScheduleKind::ConvBench => Ok(bucket.conv),
            other => Err(Error::config(format!("{other} is not a benchmark schedule"))),
        }
    }

    pub fn mimo(&self) -> ScheduleParams {
        self.mimo
    }

    /// Shorthand for a complete benchmark schedule from defaults.
    pub fn bench_schedule(
        &self,
        problem: Problem,
        kind: ScheduleKind,
        n: usize,
        t_steps: usize,
    ) -> Result<Schedule> {
        make_schedule(kind, &self.bench(problem, kind, n)?, t_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pimi_params() -> ScheduleParams {
        ScheduleParams {
            beta_scale: Some(4.0),
            beta_init: Some(0.1),
            delta_beta: Some(0.01),
            xi: Some(0.7),
            ..Default::default()
        }
    }

    #[test]
    fn conv_mimo_eta_at_four() {
        let s = make_schedule(ScheduleKind::ConvMimo, &ScheduleParams::default(), 10).unwrap();
        assert!((s.eta(4) - 1.0).abs() < 1e-15);
        assert_eq!(s.beta(7), 1.0);
        assert_eq!(s.xi(), 0.0);
    }

    #[test]
    fn pimi_bench_beta_non_decreasing() {
        let s = make_schedule(ScheduleKind::PimiBench, &pimi_params(), 500).unwrap();
        for t in 1..500 {
            assert!(s.beta(t) >= s.beta(t - 1));
            assert!(s.eta(t) >= 0.0);
            assert!((s.eta(t) - (s.beta(t) / 5.0).sqrt()).abs() < 1e-15);
        }
        assert_eq!(s.xi(), 0.7);
    }

    #[test]
    fn pimi_mimo_constant_when_gamma_flat() {
        let p = ScheduleParams {
            gamma_init: Some(0.3),
            gamma_final: Some(0.3),
            ..Default::default()
        };
        let s = make_schedule(ScheduleKind::PimiMimo, &p, 32).unwrap();
        let e0 = s.eta(0);
        assert!((0..32).all(|t| (s.eta(t) - e0).abs() < 1e-15));
        assert_eq!(s.xi(), 2.0);
        assert_eq!(s.beta(3), 1.0);
    }

    #[test]
    fn pimi_mimo_ramp_endpoints() {
        let p = ScheduleParams {
            gamma_init: Some(0.05),
            gamma_final: Some(2.0),
            ..Default::default()
        };
        let s = make_schedule(ScheduleKind::PimiMimo, &p, 17).unwrap();
        assert!((s.eta(0) - (1.0f64 / 0.25).sqrt()).abs() < 1e-12);
        assert!((s.eta(16) - (1.0f64 / 10.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn conv_bench_floor_and_constant_beta() {
        let p = ScheduleParams {
            eta_scale: Some(2.0),
            eta_floor: Some(0.1),
            ..Default::default()
        };
        let s = make_schedule(ScheduleKind::ConvBench, &p, 1000).unwrap();
        assert_eq!(s.beta(0), 0.2);
        assert_eq!(s.beta(999), 0.2);
        assert_eq!(s.eta(0), 2.0);
        assert_eq!(s.eta(999), 0.1);
        assert_eq!(s.xi(), 0.0);
    }

    #[test]
    fn rejects_missing_or_negative() {
        assert!(make_schedule(ScheduleKind::PimiBench, &ScheduleParams::default(), 5).is_err());
        let mut p = pimi_params();
        p.delta_beta = Some(-1.0);
        assert!(make_schedule(ScheduleKind::PimiBench, &p, 5).is_err());
        assert!(make_schedule(ScheduleKind::ConvMimo, &ScheduleParams::default(), 0).is_err());
        assert!(Schedule::custom(vec![1.0], vec![-0.5], 0.0).is_err());
        assert!(Schedule::custom(vec![1.0, 2.0], vec![0.5], 0.0).is_err());
    }

    #[test]
    fn shipped_defaults_cover_both_problems() {
        let d = DefaultParams::shipped();
        for problem in [Problem::MaxCut, Problem::Sk1] {
            for n in [10, 20, 50, 100, 200, 400] {
                for kind in [ScheduleKind::PimiBench, ScheduleKind::ConvBench] {
                    d.bench_schedule(problem, kind, n, 100).unwrap();
                }
            }
        }
        make_schedule(ScheduleKind::PimiMimo, &d.mimo(), 32).unwrap();
        let maxcut = d.bench(Problem::MaxCut, ScheduleKind::PimiBench, 20).unwrap();
        let sk = d.bench(Problem::Sk1, ScheduleKind::PimiBench, 20).unwrap();
        assert_eq!(maxcut.xi, Some(0.7));
        assert_eq!(sk.xi, Some(0.5));
    }
}
