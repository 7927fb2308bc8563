//! Square Gray-coded QAM over odd-integer coordinates.
//!
//! Each axis is a PAM alphabet `{-(L-1), …, -1, 1, …, L-1}` with `L = √M`.
//! Level index `k` (0 at the most negative point) carries the Gray word
//! `k ^ (k >> 1)`; a symbol's bits are the in-phase word then the quadrature
//! word, each most significant bit first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Qam {
    order: u32,
    side: u32,
}

impl TryFrom<u32> for Qam {
    type Error = Error;
    fn try_from(order: u32) -> Result<Self> {
        Qam::new(order)
    }
}

impl From<Qam> for u32 {
    fn from(q: Qam) -> u32 {
        q.order
    }
}

impl Qam {
    pub fn new(order: u32) -> Result<Self> {
        let side = match order {
            4 => 2,
            16 => 4,
            64 => 8,
            other => return Err(Error::config(format!("unsupported QAM order {other} (expected 4, 16 or 64)"))),
        };
        Ok(Self { order, side })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Points per axis.
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn bits_per_axis(&self) -> usize {
        self.side.trailing_zeros() as usize
    }

    /// Largest coordinate magnitude, `L - 1`.
    pub fn max_coord(&self) -> f64 {
        f64::from(self.side - 1)
    }

    pub fn level(&self, k: u32) -> f64 {
        f64::from(2 * k) - self.max_coord()
    }

    /// Nearest axis level index, ties toward the smaller coordinate.
    pub fn level_index(&self, x: f64) -> u32 {
        let u = (x + self.max_coord()) / 2.0;
        let k = (u - 0.5).ceil();
        k.clamp(0.0, f64::from(self.side - 1)) as u32
    }

    pub fn slice_axis(&self, x: f64) -> f64 {
        self.level(self.level_index(x))
    }

    pub fn slice(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.slice_axis(z.re), self.slice_axis(z.im))
    }

    /// Symbol for `bits_per_symbol` bits.
    pub fn encode(&self, bits: &[u8]) -> Complex64 {
        let w = self.bits_per_axis();
        debug_assert_eq!(bits.len(), 2 * w);
        let re = self.level(gray_to_index(word(&bits[..w])));
        let im = self.level(gray_to_index(word(&bits[w..])));
        Complex64::new(re, im)
    }

    /// Bits of the nearest constellation point.
    pub fn decode(&self, z: Complex64) -> Vec<u8> {
        let w = self.bits_per_axis();
        let mut out = Vec::with_capacity(2 * w);
        for k in [self.level_index(z.re), self.level_index(z.im)] {
            let g = k ^ (k >> 1);
            out.extend((0..w).rev().map(|b| ((g >> b) & 1) as u8));
        }
        out
    }

    /// All `M` points in bit-word order.
    pub fn points(&self) -> Vec<Complex64> {
        let b = self.bits_per_symbol();
        (0..self.order)
            .map(|v| {
                let bits: Vec<u8> = (0..b).rev().map(|i| ((v >> i) & 1) as u8).collect();
                self.encode(&bits)
            })
            .collect()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.slice(z) == z
    }

    /// Mean symbol energy `2(M-1)/3`.
    pub fn mean_energy(&self) -> f64 {
        2.0 * f64::from(self.order - 1) / 3.0
    }
}

fn word(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b & 1))
}

fn gray_to_index(mut g: u32) -> u32 {
    let mut k = 0;
    while g != 0 {
        k ^= g;
        g >>= 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_other_orders() {
        for m in [0, 2, 8, 32, 256] {
            assert!(Qam::new(m).is_err());
        }
        assert_eq!(Qam::new(16).unwrap().bits_per_symbol(), 4);
    }

    #[test]
    fn four_qam_map() {
        let q = Qam::new(4).unwrap();
        assert_eq!(q.encode(&[0, 0]), Complex64::new(-1.0, -1.0));
        assert_eq!(q.encode(&[1, 0]), Complex64::new(1.0, -1.0));
        assert_eq!(q.encode(&[0, 1]), Complex64::new(-1.0, 1.0));
        assert_eq!(q.mean_energy(), 2.0);
    }

    #[test]
    fn pam4_axis_is_gray() {
        let q = Qam::new(16).unwrap();
        let words: Vec<Vec<u8>> = (0..4)
            .map(|k| q.decode(Complex64::new(q.level(k), -3.0))[..2].to_vec())
            .collect();
        assert_eq!(words, vec![vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 0]]);
    }

    #[test]
    fn ties_go_to_the_smaller_point() {
        let q = Qam::new(16).unwrap();
        assert_eq!(q.slice_axis(0.0), -1.0);
        assert_eq!(q.slice_axis(2.0), 1.0);
        assert_eq!(q.slice_axis(-2.0), -3.0);
        assert_eq!(q.slice_axis(2.0000001), 3.0);
        assert_eq!(q.slice_axis(40.0), 3.0);
        assert_eq!(q.slice_axis(-40.0), -3.0);
    }

    #[test]
    fn energy_matches_points() {
        for m in [4, 16, 64] {
            let q = Qam::new(m).unwrap();
            let pts = q.points();
            let e: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((e - q.mean_energy()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn slicing_is_idempotent(re in -20.0f64..20.0, im in -20.0f64..20.0, m in prop::sample::select(vec![4u32, 16, 64])) {
            let q = Qam::new(m).unwrap();
            let z = q.slice(Complex64::new(re, im));
            prop_assert_eq!(q.slice(z), z);
            prop_assert!(q.contains(z));
            // nearest point along each axis
            for p in q.points() {
                prop_assert!((p.re - re).abs() >= (z.re - re).abs() - 1e-12);
                prop_assert!((p.im - im).abs() >= (z.im - im).abs() - 1e-12);
            }
        }
    }
}
