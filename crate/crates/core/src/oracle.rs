//! Ground-truth energies: exhaustive enumeration for small `N`, and
//! multi-restart simulated annealing and breakout local search otherwise.
//!
//! Oracles always work on the raw couplings; the solver field scale is ignored.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{energy_unchecked, IsingInstance, SpinState};
use crate::seed::derive_seed;

/// Largest size accepted by [`exhaustive`].
pub const MAX_EXHAUSTIVE_N: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleMethod {
    #[serde(rename = "exhaustive")]
    Exhaustive,
    #[serde(rename = "sa")]
    SimAnneal,
    #[serde(rename = "bls")]
    LocalSearch,
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleMethod::Exhaustive => "exhaustive",
            OracleMethod::SimAnneal => "sa",
            OracleMethod::LocalSearch => "bls",
        })
    }
}

impl FromStr for OracleMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(OracleMethod::Exhaustive),
            "sa" => Ok(OracleMethod::SimAnneal),
            "bls" => Ok(OracleMethod::LocalSearch),
            other => Err(Error::config(format!(
                "unknown oracle method {other:?} (expected exhaustive, sa or bls)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_energy: f64,
    pub best_state: SpinState,
    pub method: OracleMethod,
    /// Human-readable effort summary, e.g. `"10 restarts x 1240 stages x 120 flips"`.
    pub effort: String,
}

/// Incrementally maintained raw fields `u_i = Σ_j J_ij s_j` and energy.
struct FlipState<'a> {
    inst: &'a IsingInstance,
    s: Vec<i8>,
    u: Vec<f64>,
    energy: f64,
}

impl<'a> FlipState<'a> {
    fn new(inst: &'a IsingInstance, s: Vec<i8>) -> Self {
        let u = (0..inst.n())
            .map(|i| {
                inst.row(i)
                    .iter()
                    .zip(&s)
                    .map(|(j, &v)| j * f64::from(v))
                    .sum()
            })
            .collect();
        let energy = energy_unchecked(inst, &s);
        Self { inst, s, u, energy }
    }

    /// Energy change of flipping spin `i`: `2 s_i (u_i + h_i)`.
    #[inline]
    fn delta(&self, i: usize) -> f64 {
        2.0 * f64::from(self.s[i]) * (self.u[i] + self.inst.bias()[i])
    }

    #[inline]
    fn flip(&mut self, i: usize) {
        self.energy += self.delta(i);
        let change = -2.0 * f64::from(self.s[i]);
        self.s[i] = -self.s[i];
        for (u, j) in self.u.iter_mut().zip(self.inst.row(i)) {
            *u += j * change;
        }
    }
}

/// Certified minimum by Gray-code enumeration; fixes `s_0 = +1` when `h = 0`.
pub fn exhaustive(inst: &IsingInstance) -> Result<OracleResult> {
    let n = inst.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::config(format!(
            "exhaustive search supports N <= {MAX_EXHAUSTIVE_N}, got {n}; use the sa or bls oracle"
        )));
    }
    let offset = usize::from(!inst.has_bias());
    let free = n - offset;
    let mut st = FlipState::new(inst, vec![1; n]);
    let mut best = st.energy;
    let mut best_code = 0u64;
    for g in 1..(1u64 << free) {
        let k = g.trailing_zeros() as usize;
        st.flip(k + offset);
        if st.energy < best {
            best = st.energy;
            best_code = g ^ (g >> 1);
        }
    }
    let mut s = vec![1i8; n];
    for k in 0..free {
        if best_code >> k & 1 == 1 {
            s[k + offset] = -1;
        }
    }
    let best_state = SpinState::new(s)?;
    Ok(OracleResult {
        best_energy: energy_unchecked(inst, best_state.as_slice()),
        best_state,
        method: OracleMethod::Exhaustive,
        effort: format!("2^{free} states"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub restarts: usize,
    pub flips_per_temp: usize,
    pub t_init: f64,
    pub t_final: f64,
    pub alpha: f64,
}

impl SaParams {
    /// Effort ladder: `10N` flips per temperature below `N = 70`, then
    /// 10k / 20k / 50k flips up to 100 / 150 / beyond; 10 restarts.
    pub fn for_size(n: usize) -> Self {
        let flips_per_temp = match n {
            0..70 => 10 * n,
            70..=100 => 10_000,
            101..=150 => 20_000,
            _ => 50_000,
        };
        Self {
            restarts: 10,
            flips_per_temp,
            t_init: 5.0,
            t_final: 0.01,
            alpha: 0.995,
        }
    }

    /// Temperatures `t_init·alpha^k` that are still `>= t_final`.
    pub fn stages(&self) -> usize {
        let mut t = self.t_init;
        let mut count = 0;
        while t >= self.t_final {
            count += 1;
            t *= self.alpha;
        }
        count
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::config("oracle needs at least one restart"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.t_final > 0.0) || !(self.t_init >= self.t_final) {
            return Err(Error::config(
                "annealing needs 0 < alpha < 1 and t_init >= t_final > 0",
            ));
        }
        Ok(())
    }
}

fn random_spins(n: usize, rng: &mut ChaCha8Rng) -> Vec<i8> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
}

fn finish(
    inst: &IsingInstance,
    best: Vec<i8>,
    method: OracleMethod,
    effort: String,
) -> Result<OracleResult> {
    let best_state = SpinState::new(best)?;
    Ok(OracleResult {
        best_energy: energy_unchecked(inst, best_state.as_slice()),
        best_state,
        method,
        effort,
    })
}

/// Metropolis single-flip annealing with geometric cooling; best over restarts.
pub fn sim_anneal_oracle(inst: &IsingInstance, params: &SaParams, seed: u64) -> Result<OracleResult> {
    params.validate()?;
    let n = inst.n();
    let stages = params.stages();
    let mut best: Option<(f64, Vec<i8>)> = None;
    for r in 0..params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
        let mut st = FlipState::new(inst, random_spins(n, &mut rng));
        let mut local_best = (st.energy, st.s.clone());
        let mut t = params.t_init;
        for _ in 0..stages {
            for _ in 0..params.flips_per_temp {
                let i = rng.random_range(0..n);
                let d = st.delta(i);
                if d <= 0.0 || rng.random::<f64>() < (-d / t).exp() {
                    st.flip(i);
                    if st.energy < local_best.0 {
                        local_best = (st.energy, st.s.clone());
                    }
                }
            }
            t *= params.alpha;
        }
        if best.as_ref().is_none_or(|(e, _)| local_best.0 < *e) {
            best = Some(local_best);
        }
    }
    let (_, state) = best.expect("restarts >= 1");
    finish(
        inst,
        state,
        OracleMethod::SimAnneal,
        format!(
            "{} restarts x {stages} stages x {} flips",
            params.restarts, params.flips_per_temp
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlsParams {
    pub restarts: usize,
    pub cycles: usize,
}

impl BlsParams {
    /// 100 restarts x 500 cycles up to `N = 150`, 200 x 1000 above.
    pub fn for_size(n: usize) -> Self {
        if n <= 150 {
            Self {
                restarts: 100,
                cycles: 500,
            }
        } else {
            Self {
                restarts: 200,
                cycles: 1000,
            }
        }
    }
}

/// Best-improvement single-flip descent to a local minimum.
fn descend(st: &mut FlipState) {
    loop {
        let mut pick = None;
        let mut most = 0.0;
        for i in 0..st.s.len() {
            let d = st.delta(i);
            if d < most {
                most = d;
                pick = Some(i);
            }
        }
        match pick {
            Some(i) => st.flip(i),
            None => return,
        }
    }
}

/// Breakout local search. One cycle is a best-improvement descent followed by a
/// kick of `k ~ U[2, max(2, N/10)]` distinct random flips.
pub fn local_search_oracle(inst: &IsingInstance, params: &BlsParams, seed: u64) -> Result<OracleResult> {
    if params.restarts == 0 || params.cycles == 0 {
        return Err(Error::config("local search needs at least one restart and one cycle"));
    }
    let n = inst.n();
    let kick_max = (n / 10).max(2).min(n);
    let kick_min = 2.min(n);
    let mut best: Option<(f64, Vec<i8>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    for r in 0..params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
        let mut st = FlipState::new(inst, random_spins(n, &mut rng));
        for _ in 0..params.cycles {
            descend(&mut st);
            if best.as_ref().is_none_or(|(e, _)| st.energy < *e) {
                best = Some((st.energy, st.s.clone()));
            }
            let k = rng.random_range(kick_min..=kick_max);
            // partial Fisher-Yates picks k distinct spins
            for a in 0..k {
                let b = rng.random_range(a..n);
                idx.swap(a, b);
                st.flip(idx[a]);
            }
        }
    }
    let (_, state) = best.expect("restarts >= 1");
    finish(
        inst,
        state,
        OracleMethod::LocalSearch,
        format!("{} restarts x {} cycles", params.restarts, params.cycles),
    )
}

/// Runs `method` with its default effort for the instance size.
pub fn run_oracle(inst: &IsingInstance, method: OracleMethod, seed: u64) -> Result<OracleResult> {
    match method {
        OracleMethod::Exhaustive => exhaustive(inst),
        OracleMethod::SimAnneal => sim_anneal_oracle(inst, &SaParams::for_size(inst.n()), seed),
        OracleMethod::LocalSearch => local_search_oracle(inst, &BlsParams::for_size(inst.n()), seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_maxcut, gen_sk1, GeneratorSpec};
    use crate::ising::tests::{k3_maxcut, random_instance};
    use crate::ising::energy;

    fn brute_force(inst: &IsingInstance) -> f64 {
        (0..1u64 << inst.n())
            .map(|b| energy(inst, &SpinState::from_bits(b, inst.n())).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn exhaustive_small_cases() {
        assert_eq!(exhaustive(&k3_maxcut()).unwrap().best_energy, -1.0);
        let two = IsingInstance::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0; 2], "p").unwrap();
        let r = exhaustive(&two).unwrap();
        assert_eq!(r.best_energy, -1.0);
        assert_eq!(r.best_state.as_slice(), &[1, 1]);
        let one = IsingInstance::new(1, vec![0.0], vec![-2.0], "one").unwrap();
        assert_eq!(exhaustive(&one).unwrap().best_energy, -2.0);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        for seed in 0..12 {
            let inst = random_instance(9, seed, seed % 3 == 0);
            let r = exhaustive(&inst).unwrap();
            assert!((r.best_energy - brute_force(&inst)).abs() < 1e-12);
            assert_eq!(r.best_energy, energy(&inst, &r.best_state).unwrap());
        }
    }

    #[test]
    fn exhaustive_rejects_large() {
        let inst = random_instance(25, 0, false);
        assert!(matches!(exhaustive(&inst), Err(Error::Config(_))));
    }

    #[test]
    fn sa_stage_count() {
        assert_eq!(SaParams::for_size(12).stages(), 1240);
        assert_eq!(SaParams::for_size(12).flips_per_temp, 120);
        assert_eq!(SaParams::for_size(200).flips_per_temp, 50_000);
    }

    #[test]
    fn heuristics_match_exhaustive_on_small_sk() {
        for seed in 0..6 {
            let inst = gen_sk1(&GeneratorSpec::sk1(12, seed)).unwrap();
            let gs = exhaustive(&inst).unwrap().best_energy;
            assert_eq!(run_oracle(&inst, OracleMethod::SimAnneal, seed).unwrap().best_energy, gs);
            assert_eq!(run_oracle(&inst, OracleMethod::LocalSearch, seed).unwrap().best_energy, gs);
        }
    }

    #[test]
    fn bls_matches_exhaustive_on_maxcut20() {
        for seed in 0..4 {
            let (inst, _) = gen_maxcut(&GeneratorSpec::maxcut(20, seed)).unwrap();
            let gs = exhaustive(&inst).unwrap().best_energy;
            let r = local_search_oracle(&inst, &BlsParams { restarts: 10, cycles: 100 }, seed).unwrap();
            assert_eq!(r.best_energy, gs);
        }
    }

    #[test]
    fn more_restarts_never_worse() {
        let inst = random_instance(30, 3, true);
        let mut sa = SaParams::for_size(30);
        sa.flips_per_temp = 5;
        let mut last = f64::INFINITY;
        for restarts in 1..5 {
            sa.restarts = restarts;
            let e = sim_anneal_oracle(&inst, &sa, 1).unwrap().best_energy;
            assert!(e <= last);
            last = e;
        }
        let mut last = f64::INFINITY;
        for restarts in 1..5 {
            let e = local_search_oracle(&inst, &BlsParams { restarts, cycles: 3 }, 1)
                .unwrap()
                .best_energy;
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn k3_local_search_from_any_start() {
        for seed in 0..10 {
            let r = local_search_oracle(&k3_maxcut(), &BlsParams { restarts: 1, cycles: 1 }, seed).unwrap();
            assert_eq!(r.best_energy, -1.0);
        }
    }

    #[test]
    fn field_scale_is_ignored() {
        let inst = random_instance(10, 5, true);
        let scaled = inst.clone().with_field_scale(0.1);
        assert_eq!(exhaustive(&inst).unwrap(), exhaustive(&scaled).unwrap());
        assert_eq!(
            run_oracle(&inst, OracleMethod::SimAnneal, 2).unwrap(),
            run_oracle(&scaled, OracleMethod::SimAnneal, 2).unwrap()
        );
    }
}
