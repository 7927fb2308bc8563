//! Rayleigh-fading uplink scenarios, the real stacked model and the linear MMSE baseline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::constellation::Qam;
use crate::error::{Error, Result};

/// One channel use: `y = H x + n`, complex, `H` stored row-major (`nr × nt`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoScenario {
    pub nt: usize,
    pub nr: usize,
    #[serde(rename = "qam_order")]
    pub qam: Qam,
    pub h_cplx: Vec<Complex64>,
    pub x_true: Vec<Complex64>,
    pub bits_true: Vec<u8>,
    /// `+∞` (serialized as `null`) means noiseless.
    #[serde(with = "ebn0_serde")]
    pub ebn0_db: f64,
    /// Complex noise variance `σ²`.
    pub noise_var: f64,
    pub noise: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

mod ebn0_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Linear `Eb/N0` from decibels.
pub fn ebn0_linear(ebn0_db: f64) -> f64 {
    10f64.powf(ebn0_db / 10.0)
}

impl MimoScenario {
    pub fn channel(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.nr, self.nt, &self.h_cplx)
    }

    /// Symbol SNR `b·Eb/N0` (linear).
    pub fn es_n0(&self) -> f64 {
        self.qam.bits_per_symbol() as f64 * ebn0_linear(self.ebn0_db)
    }

    pub fn bits_per_scenario(&self) -> usize {
        self.nt * self.qam.bits_per_symbol()
    }
}

/// Draws `H̃ ~ CN(0,1)`, uniform Gray-coded symbols and AWGN scaled to the
/// empirical received power. The stream order is `H_R`, `H_I` (row-major), the
/// information bits, then `w_R`, `w_I`.
pub fn gen_scenario(nt: usize, nr: usize, qam_order: u32, ebn0_db: f64, seed: u64) -> Result<MimoScenario> {
    let qam = Qam::new(qam_order)?;
    if nt == 0 || nr == 0 {
        return Err(Error::config("MIMO antenna counts must be at least 1"));
    }
    if ebn0_db.is_nan() || ebn0_db == f64::NEG_INFINITY {
        return Err(Error::config(format!("Eb/N0 must be a number or +inf, got {ebn0_db}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normals = |count: usize| -> Vec<f64> { (0..count).map(|_| rng.sample(StandardNormal)).collect() };
    let h_r = normals(nr * nt);
    let h_i = normals(nr * nt);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let h_cplx: Vec<Complex64> = h_r
        .iter()
        .zip(&h_i)
        .map(|(&r, &i)| Complex64::new(r * scale, i * scale))
        .collect();

    let b = qam.bits_per_symbol();
    let bits_true: Vec<u8> = (0..nt * b).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let x_true: Vec<Complex64> = bits_true.chunks(b).map(|c| qam.encode(c)).collect();

    let w_r: Vec<f64> = (0..nr).map(|_| rng.sample(StandardNormal)).collect();
    let w_i: Vec<f64> = (0..nr).map(|_| rng.sample(StandardNormal)).collect();

    let clean: Vec<Complex64> = (0..nr)
        .map(|r| (0..nt).map(|c| h_cplx[r * nt + c] * x_true[c]).sum())
        .collect();
    let e_y = clean.iter().map(|v| v.norm_sqr()).sum::<f64>() / nr as f64;
    let noise_var = if ebn0_db == f64::INFINITY {
        0.0
    } else {
        e_y / (b as f64 * ebn0_linear(ebn0_db))
    };
    let amp = (noise_var / 2.0).sqrt();
    let noise: Vec<Complex64> = (0..nr).map(|r| Complex64::new(amp * w_r[r], amp * w_i[r])).collect();
    let y = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
    Ok(MimoScenario {
        nt,
        nr,
        qam,
        h_cplx,
        x_true,
        bits_true,
        ebn0_db,
        noise_var,
        noise,
        y,
    })
}

/// Real stacked model `H = [[Re, -Im], [Im, Re]]`, `y = [Re; Im]`, `x = [Re; Im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealModel {
    pub h_real: DMatrix<f64>,
    pub y_real: DVector<f64>,
    pub x_real: DVector<f64>,
}

pub fn stack_vector(v: &[Complex64]) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn unstack_vector(v: &DVector<f64>) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|i| Complex64::new(v[i], v[i + n])).collect()
}

pub fn stack_matrix(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = h.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, k| {
        let z = h[(i % r, k % c)];
        match (i < r, k < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub fn to_real(scenario: &MimoScenario) -> RealModel {
    RealModel {
        h_real: stack_matrix(&scenario.channel()),
        y_real: stack_vector(&scenario.y),
        x_real: stack_vector(&scenario.x_true),
    }
}

/// Complex channel, received vector and symbols recovered from the stacked model.
pub fn from_real(model: &RealModel) -> (DMatrix<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let (r2, c2) = model.h_real.shape();
    let (r, c) = (r2 / 2, c2 / 2);
    let h = DMatrix::from_fn(r, c, |i, k| Complex64::new(model.h_real[(i, k)], model.h_real[(i + r, k)]));
    (h, unstack_vector(&model.y_real), unstack_vector(&model.x_real))
}

/// `(HᵀH + λI)⁻¹Hᵀ` on the stacked channel; `λ = 0` gives the pseudo-inverse.
pub fn mmse_filter(h_real: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Numeric(format!("MMSE regularizer must be finite and >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return h_real
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numeric(format!("pseudo-inverse failed: {e}")));
    }
    let ht = h_real.transpose();
    let gram = &ht * h_real + DMatrix::identity(h_real.ncols(), h_real.ncols()) * lambda;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("regularized Gram matrix is not positive definite".into()))?;
    Ok(chol.solve(&ht))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseEstimate {
    /// Hard-sliced complex symbols.
    pub symbols: Vec<Complex64>,
    /// Unsliced estimate `z = W y` in stacked real form.
    pub z_real: DVector<f64>,
    /// Sliced estimate in stacked real form.
    pub x_sliced: DVector<f64>,
}

impl MmseEstimate {
    pub fn bits(&self, qam: Qam) -> Vec<u8> {
        self.symbols.iter().flat_map(|&s| qam.decode(s)).collect()
    }
}

pub fn mmse_detect(scenario: &MimoScenario) -> Result<MmseEstimate> {
    let model = to_real(scenario);
    let es_n0 = scenario.es_n0();
    let lambda = if es_n0.is_infinite() { 0.0 } else { 1.0 / es_n0 };
    let w = mmse_filter(&model.h_real, lambda)?;
    let z_real = w * &model.y_real;
    let symbols: Vec<Complex64> = unstack_vector(&z_real).into_iter().map(|z| scenario.qam.slice(z)).collect();
    Ok(MmseEstimate {
        x_sliced: stack_vector(&symbols),
        symbols,
        z_real,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_map_of_scalar_channel() {
        let h = DMatrix::from_element(1, 1, Complex64::new(1.0, 2.0));
        let hr = stack_matrix(&h);
        assert_eq!(hr, DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 1.0]));
        let real_only = DMatrix::from_fn(2, 3, |i, k| Complex64::new((i + k) as f64, 0.0));
        let r = stack_matrix(&real_only);
        assert!(r.view((0, 3), (2, 3)).iter().all(|&v| v == 0.0));
        assert!(r.view((2, 0), (2, 3)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stacking_round_trips_and_preserves_norm() {
        let s = gen_scenario(3, 5, 16, 7.0, 11).unwrap();
        let m = to_real(&s);
        let (h, y, x) = from_real(&m);
        assert_eq!(h, s.channel());
        assert_eq!(y, s.y);
        assert_eq!(x, s.x_true);
        let cn: f64 = s.y.iter().map(|v| v.norm_sqr()).sum();
        assert!((m.y_real.norm_squared() - cn).abs() <= 1e-12 * cn);
        // stacked product equals the complex product
        let hx = &m.h_real * &m.x_real;
        let clean: Vec<Complex64> = s.y.iter().zip(&s.noise).map(|(y, n)| y - n).collect();
        let want = stack_vector(&clean);
        assert!((hx - want).amax() < 1e-12);
    }

    #[test]
    fn noiseless_sentinel() {
        let s = gen_scenario(4, 4, 4, f64::INFINITY, 2).unwrap();
        assert_eq!(s.noise_var, 0.0);
        let h = s.channel();
        let x = DVector::from_vec(s.x_true.clone());
        let y = h * x;
        assert_eq!(y.as_slice(), s.y.as_slice());
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"ebn0_db\":null"));
        let back: MimoScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scenario_invariants() {
        for seed in 0..20 {
            let s = gen_scenario(2, 3, 64, 5.0, seed).unwrap();
            assert!(s.x_true.iter().all(|&x| s.qam.contains(x)));
            assert_eq!(s.bits_true.len(), 12);
            let h = s.channel();
            let y = h * DVector::from_vec(s.x_true.clone()) + DVector::from_vec(s.noise.clone());
            assert!(y.iter().zip(&s.y).all(|(a, b)| (a - b).norm() == 0.0));
        }
        assert!(gen_scenario(2, 2, 8, 0.0, 0).is_err());
        assert!(gen_scenario(0, 2, 4, 0.0, 0).is_err());
        assert_eq!(ebn0_linear(10.0), 10.0);
    }

    #[test]
    fn noise_power_tracks_received_power() {
        // σ² = E_y / (b·Eb/N0) with b = 2 at 3 dB: mean |n|² ≈ E_y / 3.99
        let mut ratio = 0.0;
        let count = 2000;
        for seed in 0..count {
            let s = gen_scenario(4, 4, 4, 3.0, seed).unwrap();
            let clean: f64 = s.y.iter().zip(&s.noise).map(|(y, n)| (y - n).norm_sqr()).sum::<f64>() / 4.0;
            assert!((s.noise_var - clean / (2.0 * ebn0_linear(3.0))).abs() < 1e-12 * clean.max(1.0));
            ratio += s.noise.iter().map(|n| n.norm_sqr()).sum::<f64>() / 4.0 / s.noise_var;
        }
        assert!((ratio / count as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn scalar_mmse_shrinks_by_half() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let w = mmse_filter(&h, 1.0).unwrap();
        let z = w * DVector::from_vec(vec![1.0, 0.0]);
        assert!((z[0] - 0.5).abs() < 1e-15);
        assert!(z[1].abs() < 1e-15);
    }

    #[test]
    fn mmse_approaches_pseudo_inverse() {
        for seed in 0..10 {
            let s = gen_scenario(4, 6, 16, 0.0, seed).unwrap();
            let h = to_real(&s).h_real;
            let svd = h.clone().svd(false, false);
            let cond = svd.singular_values.max() / svd.singular_values.min();
            if cond > 100.0 {
                continue;
            }
            let w = mmse_filter(&h, 1e-12).unwrap();
            let p = mmse_filter(&h, 0.0).unwrap();
            let diff = (w - p).svd(false, false).singular_values.max();
            assert!(diff < 1e-6, "{diff}");
        }
    }

    #[test]
    fn noiseless_orthogonal_channel_is_recovered() {
        let mut s = gen_scenario(2, 2, 16, f64::INFINITY, 5).unwrap();
        s.h_cplx = vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0, 0.0),
        ];
        s.y = vec![s.x_true[0] * Complex64::i(), s.x_true[1] * 2.0];
        let est = mmse_detect(&s).unwrap();
        assert_eq!(est.symbols, s.x_true);
        assert_eq!(est.bits(s.qam), s.bits_true);
    }
}
