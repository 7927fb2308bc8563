//! Ising instances, spin configurations and exact full-precision evaluation.
//!
//! The Hamiltonian uses the single-count convention
//! `H(s) = -Σ_{i<j} J_ij s_i s_j - Σ_i h_i s_i` with a dense symmetric `J`
//! (both triangles stored, zero diagonal). Solver-side normalization lives in
//! [`IsingInstance::field_scale`] and never touches the stored couplings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense Ising problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct IsingInstance {
    n: usize,
    j: Vec<f64>,
    h: Vec<f64>,
    label: String,
    field_scale: f64,
}

impl IsingInstance {
    /// Builds an instance from a row-major `n × n` coupling matrix.
    pub fn new(n: usize, j: Vec<f64>, h: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("n must be at least 1".into()));
        }
        if j.len() != n * n {
            return Err(Error::Dimension {
                what: "coupling matrix entries",
                expected: n * n,
                got: j.len(),
            });
        }
        if h.len() != n {
            return Err(Error::Dimension {
                what: "bias vector",
                expected: n,
                got: h.len(),
            });
        }
        for i in 0..n {
            if j[i * n + i] != 0.0 {
                return Err(Error::InvalidInstance(format!("J[{i}][{i}] is nonzero")));
            }
            for k in (i + 1)..n {
                if j[i * n + k] != j[k * n + i] {
                    return Err(Error::InvalidInstance(format!(
                        "J is not symmetric at ({i}, {k})"
                    )));
                }
            }
        }
        if j.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite coefficient".into()));
        }
        Ok(Self {
            n,
            j,
            h,
            label: label.into(),
            field_scale: 1.0,
        })
    }

    /// Builds an instance from nested rows.
    pub fn from_rows(rows: &[Vec<f64>], h: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let n = rows.len();
        let mut j = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            j.extend_from_slice(row);
        }
        Self::new(n, j, h, label)
    }

    /// Sets the scalar applied to the accumulated interaction term by the solvers.
    pub fn with_field_scale(mut self, scale: f64) -> Self {
        self.field_scale = scale;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn field_scale(&self) -> f64 {
        self.field_scale
    }

    pub fn coupling(&self, i: usize, k: usize) -> f64 {
        self.j[i * self.n + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.j[i * self.n..(i + 1) * self.n]
    }

    /// Row-major coupling matrix.
    pub fn couplings(&self) -> &[f64] {
        &self.j
    }

    pub fn bias(&self) -> &[f64] {
        &self.h
    }

    pub fn has_bias(&self) -> bool {
        self.h.iter().any(|&v| v != 0.0)
    }

    /// `-Σ_{i<j} J_ij`, the edge count of an unweighted Max-Cut mapping `J = -A`.
    pub fn negative_coupling_sum(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            for k in (i + 1)..n {
                total -= self.j[i * n + k];
            }
        }
        total
    }

    fn check(&self, s: &SpinState) -> Result<()> {
        if s.len() != self.n {
            return Err(Error::Dimension {
                what: "spin state",
                expected: self.n,
                got: s.len(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    j: Vec<Vec<f64>>,
    h: Vec<f64>,
    #[serde(default)]
    label: String,
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit")]
    field_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit(v: &f64) -> bool {
    *v == 1.0
}

impl TryFrom<InstanceFile> for IsingInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.j.len() != f.n {
            return Err(Error::Dimension {
                what: "coupling rows",
                expected: f.n,
                got: f.j.len(),
            });
        }
        if !(f.field_scale.is_finite() && f.field_scale > 0.0) {
            return Err(Error::InvalidInstance("field_scale must be positive".into()));
        }
        Ok(Self::from_rows(&f.j, f.h, f.label)?.with_field_scale(f.field_scale))
    }
}

impl From<IsingInstance> for InstanceFile {
    fn from(inst: IsingInstance) -> Self {
        let n = inst.n;
        InstanceFile {
            n,
            j: inst.j.chunks(n).map(<[f64]>::to_vec).collect(),
            h: inst.h,
            label: inst.label,
            field_scale: inst.field_scale,
        }
    }
}

/// A configuration of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinState(Vec<i8>);

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        Self::try_from(spins)
    }

    pub fn uniform(n: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1, "spin must be ±1");
        SpinState(vec![value; n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        SpinState((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    /// Spins from the low `n` bits of `bits`: bit set → +1.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        SpinState((0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: i8) {
        debug_assert!(value == 1 || value == -1);
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        SpinState(self.0.iter().map(|&v| -v).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|&v| f64::from(v))
    }
}

impl TryFrom<Vec<i8>> for SpinState {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        if let Some(pos) = v.iter().position(|&x| x != 1 && x != -1) {
            return Err(Error::InvalidInstance(format!(
                "spin {pos} is {}, expected ±1",
                v[pos]
            )));
        }
        Ok(SpinState(v))
    }
}

impl From<SpinState> for Vec<i8> {
    fn from(s: SpinState) -> Self {
        s.0
    }
}

/// Sign with the fixed tie-break `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Outcome of one independent trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub best_energy: f64,
    /// Step index (0-based) whose resulting state first attained `best_energy`.
    pub best_step: usize,
    /// Number of update steps executed.
    pub steps: usize,
    /// Best-so-far history: `(step, energy)` each time the running minimum strictly improved.
    pub improvements: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_trajectory: Option<Vec<f64>>,
    /// States `s(0), …, s(steps)` when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_trajectory: Option<Vec<SpinState>>,
    pub final_spins: SpinState,
    pub seed: u64,
}

impl TrialRecord {
    /// Best energy among the first `budget` steps, `None` when `budget` is 0.
    pub fn best_within(&self, budget: usize) -> Option<f64> {
        self.improvements
            .iter()
            .take_while(|(step, _)| *step < budget)
            .last()
            .map(|&(_, e)| e)
    }

    /// Drops the bulky per-step vectors.
    pub fn without_trajectories(mut self) -> Self {
        self.energy_trajectory = None;
        self.state_trajectory = None;
        self
    }
}

/// Full-precision energy `-Σ_{i<j} J_ij s_i s_j - Σ h_i s_i` on the raw couplings.
pub fn energy(inst: &IsingInstance, s: &SpinState) -> Result<f64> {
    inst.check(s)?;
    Ok(energy_unchecked(inst, s.as_slice()))
}

pub(crate) fn energy_unchecked(inst: &IsingInstance, s: &[i8]) -> f64 {
    let n = inst.n;
    let mut pair = 0.0;
    let mut bias = 0.0;
    for i in 0..n {
        let row = &inst.j[i * n..(i + 1) * n];
        let si = f64::from(s[i]);
        let mut acc = 0.0;
        for k in (i + 1)..n {
            acc += row[k] * f64::from(s[k]);
        }
        pair += si * acc;
        bias += inst.h[i] * si;
    }
    -pair - bias
}

/// Raw local fields `I_i = Σ_j J_ij s_j + h_i` (no solver normalization).
pub fn local_fields(inst: &IsingInstance, s: &SpinState) -> Result<Vec<f64>> {
    inst.check(s)?;
    let n = inst.n;
    Ok((0..n)
        .map(|i| {
            inst.row(i)
                .iter()
                .zip(s.as_slice())
                .map(|(&jik, &sk)| jik * f64::from(sk))
                .sum::<f64>()
                + inst.h[i]
        })
        .collect())
}

/// Cut size of the partition `s` for an unweighted Max-Cut mapping `J = -A, h = 0`.
pub fn cut_value(inst: &IsingInstance, s: &SpinState, edge_count: u64) -> Result<u64> {
    let e = energy(inst, s)?;
    let twice = edge_count as f64 - e;
    let cut = twice / 2.0;
    if cut.fract() != 0.0 || cut < 0.0 || cut > edge_count as f64 {
        return Err(Error::InvalidInstance(format!(
            "(|E| - H)/2 = {cut} is not a valid cut; instance is not an unweighted Max-Cut mapping"
        )));
    }
    Ok(cut as u64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn k3_maxcut() -> IsingInstance {
        IsingInstance::from_rows(
            &[
                vec![0.0, -1.0, -1.0],
                vec![-1.0, 0.0, -1.0],
                vec![-1.0, -1.0, 0.0],
            ],
            vec![0.0; 3],
            "k3",
        )
        .unwrap()
    }

    pub fn random_instance(n: usize, seed: u64, with_bias: bool) -> IsingInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        let h = (0..n)
            .map(|_| if with_bias { rng.random_range(-1.0..1.0) } else { 0.0 })
            .collect();
        IsingInstance::new(n, j, h, "random").unwrap()
    }

    fn spins(v: &[i8]) -> SpinState {
        SpinState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn k3_energy_and_exhaustive_minimum() {
        let k3 = k3_maxcut();
        assert_eq!(energy(&k3, &spins(&[1, 1, -1])).unwrap(), -1.0);
        let min = (0..8u64)
            .map(|b| energy(&k3, &SpinState::from_bits(b, 3)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, -1.0);
    }

    #[test]
    fn single_spin_bias() {
        let inst = IsingInstance::new(1, vec![0.0], vec![2.5], "one").unwrap();
        assert_eq!(energy(&inst, &spins(&[1])).unwrap(), -2.5);
    }

    #[test]
    fn global_flip_symmetry_without_bias() {
        let inst = random_instance(9, 3, false);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = SpinState::random(9, &mut rng);
            assert_eq!(
                energy(&inst, &s).unwrap(),
                energy(&inst, &s.negated()).unwrap()
            );
        }
    }

    #[test]
    fn k3_fields() {
        let f = local_fields(&k3_maxcut(), &SpinState::uniform(3, 1)).unwrap();
        assert_eq!(f, vec![-2.0, -2.0, -2.0]);
    }

    #[test]
    fn bias_only_fields() {
        let h = vec![0.5, -1.25, 3.0];
        let inst = IsingInstance::new(3, vec![0.0; 9], h.clone(), "bias").unwrap();
        let s = spins(&[1, -1, -1]);
        assert_eq!(local_fields(&inst, &s).unwrap(), h);
    }

    #[test]
    fn fields_match_double_loop() {
        let inst = random_instance(6, 11, true);
        let s = spins(&[1, -1, -1, 1, 1, -1]);
        let mut expected = vec![0.0; 6];
        for (i, e) in expected.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..6 {
                acc += inst.coupling(i, k) * f64::from(s.get(k));
            }
            *e = acc + inst.bias()[i];
        }
        assert_eq!(local_fields(&inst, &s).unwrap(), expected);
    }

    #[test]
    fn cut_values() {
        let k3 = k3_maxcut();
        assert_eq!(cut_value(&k3, &spins(&[1, 1, -1]), 3).unwrap(), 2);
        assert_eq!(cut_value(&k3, &SpinState::uniform(3, -1), 3).unwrap(), 0);
        let p3 = IsingInstance::from_rows(
            &[
                vec![0.0, -1.0, 0.0],
                vec![-1.0, 0.0, -1.0],
                vec![0.0, -1.0, 0.0],
            ],
            vec![0.0; 3],
            "p3",
        )
        .unwrap();
        assert_eq!(cut_value(&p3, &spins(&[1, -1, 1]), 2).unwrap(), 2);
        // wrong edge count gives a half-integer cut
        assert!(cut_value(&p3, &spins(&[1, -1, 1]), 3).is_err());
    }

    #[test]
    fn dimension_errors() {
        let k3 = k3_maxcut();
        assert!(matches!(
            energy(&k3, &SpinState::uniform(2, 1)),
            Err(Error::Dimension { .. })
        ));
        assert!(local_fields(&k3, &SpinState::uniform(4, 1)).is_err());
        assert!(IsingInstance::new(2, vec![0.0, 1.0, 2.0, 0.0], vec![0.0; 2], "x").is_err());
        assert!(IsingInstance::new(2, vec![1.0, 0.0, 0.0, 0.0], vec![0.0; 2], "x").is_err());
        assert!(SpinState::new(vec![1, 0, -1]).is_err());
    }

    #[test]
    fn instance_json_roundtrip() {
        let inst = random_instance(4, 9, true).with_field_scale(0.5);
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.contains("\"j\":[["));
        let back: IsingInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
        let bad = r#"{"n":2,"j":[[0,1],[2,0]],"h":[0,0],"label":"x"}"#;
        assert!(serde_json::from_str::<IsingInstance>(bad).is_err());
    }

    #[test]
    fn best_within_budget() {
        let rec = TrialRecord {
            best_energy: -5.0,
            best_step: 7,
            steps: 10,
            improvements: vec![(0, -1.0), (3, -4.0), (7, -5.0)],
            energy_trajectory: None,
            state_trajectory: None,
            final_spins: SpinState::uniform(2, 1),
            seed: 0,
        };
        assert_eq!(rec.best_within(0), None);
        assert_eq!(rec.best_within(1), Some(-1.0));
        assert_eq!(rec.best_within(4), Some(-4.0));
        assert_eq!(rec.best_within(100), Some(-5.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn flip_changes_energy_by_field(n in 2usize..=32, seed in any::<u64>(), k_raw in any::<usize>()) {
                let inst = random_instance(n, seed, true);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
                let s = SpinState::random(n, &mut rng);
                let k = k_raw % n;
                let fields = local_fields(&inst, &s).unwrap();
                let before = energy(&inst, &s).unwrap();
                let mut t = s.clone();
                t.flip(k);
                let after = energy(&inst, &t).unwrap();
                let predicted = 2.0 * f64::from(s.get(k)) * fields[k];
                prop_assert!((after - before - predicted).abs() <= 1e-9 * (1.0 + predicted.abs()));
            }

            #[test]
            fn quadratic_form_matches_pair_sum(n in 1usize..=256, seed in any::<u64>()) {
                let inst = random_instance(n, seed, true);
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
                let s = SpinState::random(n, &mut rng);
                let sv: Vec<f64> = s.iter().collect();
                let mut quad = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        quad += sv[i] * inst.coupling(i, k) * sv[k];
                    }
                }
                let lin: f64 = inst.bias().iter().zip(&sv).map(|(h, x)| h * x).sum();
                let full = -lin - 0.5 * quad;
                let pairwise = energy(&inst, &s).unwrap();
                prop_assert!((full - pairwise).abs() <= 1e-12 * pairwise.abs().max(1.0));
            }
        }
    }
}
