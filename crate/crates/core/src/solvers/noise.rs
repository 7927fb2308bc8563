use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    /// `U(-1, 1)`
    UniformPm1,
    /// `N(0, 1)`
    StdNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    OnTheFly,
    /// A table of this many samples drawn once and then read cyclically.
    Pregenerated(usize),
}

/// Seeded description of a noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
    pub distribution: NoiseDistribution,
    pub mode: NoiseMode,
}

impl NoiseSource {
    pub fn new(seed: u64, distribution: NoiseDistribution) -> Self {
        Self {
            seed,
            distribution,
            mode: NoiseMode::OnTheFly,
        }
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn stream(&self) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let table = match self.mode {
            NoiseMode::OnTheFly => None,
            NoiseMode::Pregenerated(len) => {
                let len = len.max(1);
                Some(
                    (0..len)
                        .map(|_| draw(&mut rng, self.distribution))
                        .collect::<Vec<_>>(),
                )
            }
        };
        NoiseStream {
            rng,
            distribution: self.distribution,
            table,
            cursor: 0,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, distribution: NoiseDistribution) -> f64 {
    match distribution {
        NoiseDistribution::UniformPm1 => rng.random_range(-1.0..=1.0),
        NoiseDistribution::StdNormal => rng.sample(StandardNormal),
    }
}

/// A live stream of noise samples.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    distribution: NoiseDistribution,
    table: Option<Vec<f64>>,
    cursor: usize,
}

impl NoiseStream {
    pub fn distribution(&self) -> NoiseDistribution {
        self.distribution
    }

    #[inline]
    pub fn sample(&mut self) -> f64 {
        match &self.table {
            Some(table) => {
                let v = table[self.cursor];
                self.cursor = (self.cursor + 1) % table.len();
                v
            }
            None => draw(&mut self.rng, self.distribution),
        }
    }
}
