//! Perturbation Ising model around a linear estimate: the search runs over the
//! integer correction `d = T s` with `x = x_m + d`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::channel::RealModel;
use super::constellation::Qam;
use crate::error::{Error, Result};
use crate::ising::{IsingInstance, SpinState};

/// Per-coordinate correction alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrectionSet {
    /// `{-2, 0, 2}` with `T = [I, I]`.
    #[serde(rename = "d3")]
    Three,
    /// `{-4, -2, 0, 2, 4}` with `T = [2I, I, I]`.
    #[serde(rename = "d5")]
    Five,
}

impl CorrectionSet {
    /// Three-level set for 4/16-QAM, five-level for 64-QAM.
    pub fn for_qam(qam: Qam) -> Self {
        if qam.order() >= 64 {
            CorrectionSet::Five
        } else {
            CorrectionSet::Three
        }
    }

    pub fn from_values(values: &[i32]) -> Result<Self> {
        let mut v = values.to_vec();
        v.sort_unstable();
        v.dedup();
        match v.as_slice() {
            [-2, 0, 2] => Ok(CorrectionSet::Three),
            [-4, -2, 0, 2, 4] => Ok(CorrectionSet::Five),
            _ => Err(Error::config(format!("unsupported correction set {values:?}"))),
        }
    }

    pub fn values(self) -> &'static [i32] {
        match self {
            CorrectionSet::Three => &[-2, 0, 2],
            CorrectionSet::Five => &[-4, -2, 0, 2, 4],
        }
    }

    /// Spin blocks per real dimension.
    pub fn blocks(self) -> usize {
        match self {
            CorrectionSet::Three => 2,
            CorrectionSet::Five => 3,
        }
    }

    fn weights(self) -> &'static [f64] {
        match self {
            CorrectionSet::Three => &[1.0, 1.0],
            CorrectionSet::Five => &[2.0, 1.0, 1.0],
        }
    }

    /// `T` for `dim` real dimensions, `dim × blocks·dim`.
    pub fn transform(self, dim: usize) -> DMatrix<f64> {
        let w = self.weights();
        DMatrix::from_fn(dim, w.len() * dim, |r, c| if c % dim == r { w[c / dim] } else { 0.0 })
    }
}

impl fmt::Display for CorrectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionSet::Three => "d3",
            CorrectionSet::Five => "d5",
        })
    }
}

impl FromStr for CorrectionSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d3" => Ok(CorrectionSet::Three),
            "d5" => Ok(CorrectionSet::Five),
            other => Err(Error::config(format!("unknown correction set {other:?} (expected d3 or d5)"))),
        }
    }
}

/// `min_s  -hᵀs - sᵀJs` with `J = -zeroDiag(TᵀHᵀHT)`, `h = 2(y - H x_m)ᵀHT`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiMimoProblem {
    pub j: DMatrix<f64>,
    pub h: DVector<f64>,
    pub t_matrix: DMatrix<f64>,
    pub x_m: DVector<f64>,
    pub residual: DVector<f64>,
    pub correction_set: CorrectionSet,
}

pub fn build_dimimo(model: &RealModel, x_m: &DVector<f64>, set: CorrectionSet) -> Result<DiMimoProblem> {
    let dim = model.h_real.ncols();
    if x_m.len() != dim {
        return Err(Error::Dimension {
            what: "MIMO estimate",
            expected: dim,
            got: x_m.len(),
        });
    }
    let t_matrix = set.transform(dim);
    let ht = &model.h_real * &t_matrix;
    let mut j = -(ht.transpose() * &ht);
    j.fill_diagonal(0.0);
    // exact symmetry regardless of summation order
    let k = j.nrows();
    for a in 0..k {
        for b in (a + 1)..k {
            let v = 0.5 * (j[(a, b)] + j[(b, a)]);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    let residual = &model.y_real - &model.h_real * x_m;
    let h = (ht.transpose() * &residual) * 2.0;
    Ok(DiMimoProblem {
        j,
        h,
        t_matrix,
        x_m: x_m.clone(),
        residual,
        correction_set: set,
    })
}

fn spin_vector(s: &SpinState) -> DVector<f64> {
    DVector::from_iterator(s.len(), s.iter())
}

impl DiMimoProblem {
    pub fn n_spins(&self) -> usize {
        self.h.len()
    }

    /// `-hᵀs - sᵀJs`.
    pub fn energy(&self, s: &SpinState) -> f64 {
        let v = spin_vector(s);
        -self.h.dot(&v) - v.dot(&(&self.j * &v))
    }

    pub fn correction(&self, s: &SpinState) -> DVector<f64> {
        &self.t_matrix * spin_vector(s)
    }

    /// `x_m + T s`.
    pub fn reconstruct(&self, s: &SpinState) -> DVector<f64> {
        &self.x_m + self.correction(s)
    }

    /// Solver instance with the same energy: pair couplings `2J`, bias `h`, unit field scale.
    pub fn to_instance(&self, label: impl Into<String>) -> Result<IsingInstance> {
        let k = self.n_spins();
        let j: Vec<f64> = (0..k * k).map(|idx| 2.0 * self.j[(idx / k, idx % k)]).collect();
        IsingInstance::new(k, j, self.h.iter().copied().collect(), label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::energy;
    use crate::mimo::channel::{gen_scenario, mmse_detect, to_real};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transform_shapes() {
        let t = CorrectionSet::Three.transform(4);
        assert_eq!(t.shape(), (4, 8));
        assert_eq!(t[(1, 1)], 1.0);
        assert_eq!(t[(1, 5)], 1.0);
        assert_eq!(t.row(1).sum(), 2.0);
        let t5 = CorrectionSet::Five.transform(3);
        assert_eq!(t5.shape(), (3, 9));
        assert_eq!((t5[(2, 2)], t5[(2, 5)], t5[(2, 8)]), (2.0, 1.0, 1.0));
        assert_eq!(CorrectionSet::from_values(&[2, 0, -2]).unwrap(), CorrectionSet::Three);
        assert!(CorrectionSet::from_values(&[-1, 0, 1]).is_err());
    }

    #[test]
    fn eight_by_eight_uses_32_spins() {
        let s = gen_scenario(8, 8, 16, 10.0, 1).unwrap();
        let est = mmse_detect(&s).unwrap();
        let p = build_dimimo(&to_real(&s), &est.x_sliced, CorrectionSet::for_qam(s.qam)).unwrap();
        assert_eq!(p.n_spins(), 32);
        assert_eq!(p.j, p.j.transpose());
        assert!(p.j.diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn paired_opposite_spins_give_no_correction() {
        let s = gen_scenario(2, 2, 4, 4.0, 3).unwrap();
        let est = mmse_detect(&s).unwrap();
        let p = build_dimimo(&to_real(&s), &est.x_sliced, CorrectionSet::Three).unwrap();
        let half: Vec<i8> = vec![1, -1, -1, 1];
        let spins: Vec<i8> = half.iter().copied().chain(half.iter().map(|v| -v)).collect();
        let s0 = SpinState::new(spins).unwrap();
        assert_eq!(p.reconstruct(&s0), est.x_sliced);
    }

    #[test]
    fn solver_instance_energy_matches_quadratic_form() {
        let s = gen_scenario(3, 4, 64, 8.0, 4).unwrap();
        let est = mmse_detect(&s).unwrap();
        let p = build_dimimo(&to_real(&s), &est.z_real, CorrectionSet::Five).unwrap();
        let inst = p.to_instance("t").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let st = SpinState::random(p.n_spins(), &mut rng);
            let a = p.energy(&st);
            let b = energy(&inst, &st).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
