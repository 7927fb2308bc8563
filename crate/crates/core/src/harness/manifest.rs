//! Experiment manifests: one TOML file fixes every output byte.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::sha256_hex;
use crate::error::{Error, Result};
use crate::instances::Family;
use crate::quantize::{FixedPointFormat, TanhLut};
use crate::schedule::{DefaultParams, ScheduleParams};
use crate::solvers::{Arithmetic, SolverKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentFamily {
    MaxCutBench,
    SkBench,
    MimoBer,
    FlipRate,
}

impl fmt::Display for ExperimentFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentFamily::MaxCutBench => "max-cut-bench",
            ExperimentFamily::SkBench => "sk-bench",
            ExperimentFamily::MimoBer => "mimo-ber",
            ExperimentFamily::FlipRate => "flip-rate",
        })
    }
}

/// Which ground-truth oracle a benchmark uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleChoice {
    /// Exhaustive up to the enumeration limit, simulated annealing above it.
    #[default]
    Auto,
    Exhaustive,
    Sa,
    Bls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArithmeticConfig {
    pub total_bits: u32,
    pub int_bits: u32,
    #[serde(default)]
    pub lut_levels: Option<usize>,
}

impl ArithmeticConfig {
    pub fn build(&self) -> Result<Arithmetic> {
        Ok(Arithmetic {
            format: Some(FixedPointFormat::new(self.total_bits, self.int_bits)?),
            tanh_lut: self.lut_levels.map(TanhLut::new).transpose()?,
        })
    }
}

fn default_steps_per_spin() -> usize {
    100
}
fn default_solvers() -> Vec<SolverKind> {
    SolverKind::ALL.to_vec()
}
fn default_edge_prob() -> f64 {
    0.5
}
fn default_fraction() -> f64 {
    crate::metrics::DEFAULT_THRESHOLD_FRACTION
}
fn default_epsilon() -> f64 {
    crate::metrics::DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub instances: usize,
    pub trials: usize,
    /// Each trial runs `steps_per_spin · N` update steps.
    #[serde(default = "default_steps_per_spin")]
    pub steps_per_spin: usize,
    /// Step-budget grid spacing in units of `N` steps (default 1).
    #[serde(default)]
    pub grid_stride_per_spin: Option<usize>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    #[serde(default)]
    pub oracle: OracleChoice,
    #[serde(default = "default_fraction")]
    pub threshold_fraction: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub arithmetic: Option<ArithmeticConfig>,
    /// Overrides on top of the shipped PIMI defaults.
    #[serde(default)]
    pub pimi: Option<ScheduleParams>,
    /// Overrides on top of the shipped conventional defaults.
    #[serde(default)]
    pub conv: Option<ScheduleParams>,
}

fn default_detectors() -> Vec<String> {
    vec!["mmse".into(), "pimi".into(), "conv-par".into()]
}
fn default_mimo_trials() -> usize {
    32
}
fn default_mimo_steps() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimoConfig {
    pub nt: usize,
    pub nr: usize,
    pub qam: u32,
    pub ebn0_db: Vec<f64>,
    pub scenarios: usize,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<String>,
    #[serde(default = "default_mimo_trials")]
    pub trials: usize,
    /// Steps for the parallel detectors.
    #[serde(default = "default_mimo_steps")]
    pub steps: usize,
    /// Steps for the sequential detector; defaults to `steps · K` (same spin updates).
    #[serde(default)]
    pub seq_steps: Option<usize>,
    #[serde(default)]
    pub unsliced_estimate: bool,
    #[serde(default)]
    pub pimi: Option<ScheduleParams>,
}

fn default_flip_family() -> Family {
    Family::SkOne
}
fn default_flip_n() -> usize {
    50
}
fn default_flip_trials() -> usize {
    64
}
fn default_xis() -> Vec<f64> {
    vec![0.0, 0.9]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipRateConfig {
    #[serde(default = "default_flip_family")]
    pub family: Family,
    #[serde(default = "default_flip_n")]
    pub n: usize,
    #[serde(default)]
    pub instance_index: usize,
    #[serde(default = "default_flip_trials")]
    pub trials: usize,
    #[serde(default = "default_steps_per_spin")]
    pub steps_per_spin: usize,
    #[serde(default = "default_xis")]
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub family: ExperimentFamily,
    pub seed: u64,
    /// Where the archive goes when the caller does not say; not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// When set, must equal the shipped defaults version.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mimo: Option<MimoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_rate: Option<FlipRateConfig>,
}

impl ExperimentManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::config(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("manifest: {e}")))
    }

    /// SHA-256 of the canonical form, ignoring `output_dir`.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output_dir = None;
        let json = serde_json::to_vec(&canon).map_err(|e| Error::config(format!("manifest: {e}")))?;
        Ok(sha256_hex(&json))
    }

    pub fn bench(&self) -> Result<&BenchConfig> {
        self.bench
            .as_ref()
            .ok_or_else(|| Error::config(format!("{} manifest needs a [bench] table", self.family)))
    }

    pub fn mimo(&self) -> Result<&MimoConfig> {
        self.mimo
            .as_ref()
            .ok_or_else(|| Error::config("mimo-ber manifest needs a [mimo] table"))
    }

    pub fn flip_rate(&self) -> Result<&FlipRateConfig> {
        self.flip_rate
            .as_ref()
            .ok_or_else(|| Error::config("flip-rate manifest needs a [flip_rate] table"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "manifest schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if let Some(v) = &self.defaults_version {
            let shipped = DefaultParams::shipped().version;
            if *v != shipped {
                return Err(Error::config(format!(
                    "manifest pins defaults version {v:?} but {shipped:?} is shipped"
                )));
            }
        }
        match self.family {
            ExperimentFamily::MaxCutBench | ExperimentFamily::SkBench => {
                let b = self.bench()?;
                if b.sizes.is_empty() || b.sizes.iter().any(|&n| n < 2) {
                    return Err(Error::config("bench sizes must be non-empty and >= 2"));
                }
                if b.instances == 0 || b.trials == 0 || b.steps_per_spin == 0 {
                    return Err(Error::config("bench instances, trials and steps_per_spin must be positive"));
                }
                if b.solvers.is_empty() {
                    return Err(Error::config("bench needs at least one solver"));
                }
                if b.grid_stride_per_spin == Some(0) {
                    return Err(Error::config("grid_stride_per_spin must be positive"));
                }
                if let Some(a) = &b.arithmetic {
                    a.build()?;
                }
            }
            ExperimentFamily::MimoBer => {
                let m = self.mimo()?;
                crate::mimo::Qam::new(m.qam)?;
                if m.nt == 0 || m.nr == 0 || m.scenarios == 0 || m.trials == 0 || m.steps == 0 {
                    return Err(Error::config("mimo nt, nr, scenarios, trials and steps must be positive"));
                }
                if m.ebn0_db.is_empty() {
                    return Err(Error::config("mimo needs at least one Eb/N0 point"));
                }
                for d in &m.detectors {
                    if d != "mmse" {
                        d.parse::<SolverKind>()?;
                    }
                }
            }
            ExperimentFamily::FlipRate => {
                let f = self.flip_rate()?;
                if f.n < 2 || f.trials == 0 || f.steps_per_spin == 0 || f.xi.is_empty() {
                    return Err(Error::config("flip_rate needs n >= 2, trials, steps and at least one xi"));
                }
                if f.xi.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(Error::config("flip_rate xi values must be finite and non-negative"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"
schema_version = 1
family = "max-cut-bench"
seed = 7

[bench]
sizes = [10, 20]
instances = 20
trials = 256
"#;

    #[test]
    fn parses_with_defaults() {
        let m = ExperimentManifest::parse(BENCH).unwrap();
        let b = m.bench().unwrap();
        assert_eq!(b.steps_per_spin, 100);
        assert_eq!(b.solvers.len(), 3);
        assert_eq!(b.oracle, OracleChoice::Auto);
        let again = ExperimentManifest::parse(&m.to_toml().unwrap()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let m = ExperimentManifest::parse(BENCH).unwrap();
        let mut moved = m.clone();
        moved.output_dir = Some("elsewhere".into());
        assert_eq!(m.hash().unwrap(), moved.hash().unwrap());
        let mut reseeded = m.clone();
        reseeded.seed = 8;
        assert_ne!(m.hash().unwrap(), reseeded.hash().unwrap());
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(ExperimentManifest::parse(&BENCH.replace("schema_version = 1", "schema_version = 9")).is_err());
        assert!(ExperimentManifest::parse(&BENCH.replace("trials = 256", "trials = 0")).is_err());
        assert!(ExperimentManifest::parse(&BENCH.replace("seed = 7", "seed = 7\nbogus = 1")).is_err());
        assert!(ExperimentManifest::parse(&BENCH.replace("max-cut-bench", "mimo-ber")).is_err());
        assert!(ExperimentManifest::parse(&format!("defaults_version = \"0\"\n{BENCH}")).is_err());
    }
}
