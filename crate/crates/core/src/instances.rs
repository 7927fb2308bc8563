//! Erdős–Rényi Max-Cut and SK-1 benchmark generators.
//!
//! Couplings are drawn over the upper triangle in row-major order from a
//! ChaCha8 stream, so an instance depends only on its [`GeneratorSpec`].
//! The solver normalization (`2/√N` for Max-Cut, `1/√N` for SK-1) is stored as
//! the instance's field scale; `J` keeps its integer entries.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingInstance;
use crate::schedule::Problem;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "maxcut")]
    MaxCutEr,
    #[serde(rename = "sk1")]
    SkOne,
}

impl Family {
    pub fn problem(self) -> Problem {
        match self {
            Family::MaxCutEr => Problem::MaxCut,
            Family::SkOne => Problem::Sk1,
        }
    }

    /// Solver-side normalization for size `n`.
    pub fn field_scale(self, n: usize) -> f64 {
        match self {
            Family::MaxCutEr => 2.0 / (n as f64).sqrt(),
            Family::SkOne => 1.0 / (n as f64).sqrt(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::MaxCutEr => "maxcut",
            Family::SkOne => "sk1",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxcut" => Ok(Family::MaxCutEr),
            "sk1" => Ok(Family::SkOne),
            other => Err(Error::config(format!("unknown family {other:?} (expected maxcut or sk1)"))),
        }
    }
}

impl From<Problem> for Family {
    fn from(p: Problem) -> Self {
        match p {
            Problem::MaxCut => Family::MaxCutEr,
            Problem::Sk1 => Family::SkOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    /// Edge probability, Max-Cut only.
    pub edge_prob: f64,
}

impl GeneratorSpec {
    pub const DEFAULT_EDGE_PROB: f64 = 0.5;

    pub fn maxcut(n: usize, seed: u64) -> Self {
        Self {
            family: Family::MaxCutEr,
            n,
            seed,
            edge_prob: Self::DEFAULT_EDGE_PROB,
        }
    }

    pub fn sk1(n: usize, seed: u64) -> Self {
        Self {
            family: Family::SkOne,
            ..Self::maxcut(n, seed)
        }
    }

    pub fn with_edge_prob(mut self, p: f64) -> Self {
        self.edge_prob = p;
        self
    }

    fn check(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(Error::config(format!(
                "generator spec is for {}, not {family}",
                self.family
            )));
        }
        if self.n < 2 {
            return Err(Error::config(format!("{family} instances need n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

fn symmetric_from_upper(n: usize, mut entry: impl FnMut() -> f64) -> Vec<f64> {
    let mut j = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let v = entry();
            j[i * n + k] = v;
            j[k * n + i] = v;
        }
    }
    j
}

/// Erdős–Rényi Max-Cut instance `J = -A`, `h = 0`, plus its edge count.
///
/// `edge_prob` must lie in `(0, 1]`; `1` yields the complete graph.
pub fn gen_maxcut(spec: &GeneratorSpec) -> Result<(IsingInstance, u64)> {
    spec.check(Family::MaxCutEr)?;
    let p = spec.edge_prob;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::config(format!("edge probability must lie in (0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges = 0u64;
    let j = symmetric_from_upper(spec.n, || {
        if rng.random_bool(p) {
            edges += 1;
            -1.0
        } else {
            0.0
        }
    });
    let label = format!("maxcut n={} p={} seed={}", spec.n, p, spec.seed);
    let inst = IsingInstance::new(spec.n, j, vec![0.0; spec.n], label)?
        .with_field_scale(Family::MaxCutEr.field_scale(spec.n));
    Ok((inst, edges))
}

/// SK-1 instance with i.i.d. `±1` couplings, `h = 0`.
pub fn gen_sk1(spec: &GeneratorSpec) -> Result<IsingInstance> {
    spec.check(Family::SkOne)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let j = symmetric_from_upper(spec.n, || if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let label = format!("sk1 n={} seed={}", spec.n, spec.seed);
    Ok(IsingInstance::new(spec.n, j, vec![0.0; spec.n], label)?
        .with_field_scale(Family::SkOne.field_scale(spec.n)))
}

pub fn generate(spec: &GeneratorSpec) -> Result<IsingInstance> {
    match spec.family {
        Family::MaxCutEr => gen_maxcut(spec).map(|(inst, _)| inst),
        Family::SkOne => gen_sk1(spec),
    }
}

/// Seed of instance `index` in a generated set.
pub fn instance_seed(base_seed: u64, family: Family, n: usize, index: usize) -> u64 {
    let tag = match family {
        Family::MaxCutEr => 1,
        Family::SkOne => 2,
    };
    derive_seed(base_seed, &[tag, n as u64, index as u64])
}

/// `count` instances of one family and size, each with its own derived seed.
pub fn generate_set(
    family: Family,
    n: usize,
    count: usize,
    base_seed: u64,
    edge_prob: f64,
) -> Result<Vec<IsingInstance>> {
    (0..count)
        .map(|k| {
            let spec = GeneratorSpec {
                family,
                n,
                seed: instance_seed(base_seed, family, n, k),
                edge_prob,
            };
            generate(&spec)
        })
        .collect()
}

/// `<family>_n<N>_i<k>.json`
pub fn instance_file_name(family: Family, n: usize, index: usize) -> String {
    format!("{family}_n{n}_i{index}.json")
}
