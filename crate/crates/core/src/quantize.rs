//! Fixed-point emulation (truncate toward zero, saturate on overflow) and the
//! piecewise-constant `tanh` lookup table used by the quantized solver path.
//!
//! Quantized values are carried as `f64` lying exactly on the format's grid,
//! which is exact for every format up to 53 total bits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed fixed-point format with `int_bits` integer bits (sign included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FixedPointFormat {
    total_bits: u32,
    int_bits: u32,
}

impl FixedPointFormat {
    /// 4-bit format with 2 integer bits, used for the Max-Cut and SK-1 datapath.
    pub const Q4_2: Self = Self {
        total_bits: 4,
        int_bits: 2,
    };
    /// 16-bit format with 4 integer bits, used for MIMO detection.
    pub const Q16_4: Self = Self {
        total_bits: 16,
        int_bits: 4,
    };

    pub fn new(total_bits: u32, int_bits: u32) -> Result<Self> {
        if !(1 <= int_bits && int_bits <= total_bits && total_bits <= 64) {
            return Err(Error::config(format!(
                "fixed-point format needs 1 <= int_bits ({int_bits}) <= total_bits ({total_bits}) <= 64"
            )));
        }
        Ok(Self {
            total_bits,
            int_bits,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.total_bits - self.int_bits
    }

    /// Grid spacing `2^-frac_bits`.
    pub fn step(&self) -> f64 {
        (-(self.frac_bits() as f64)).exp2()
    }

    pub fn min_value(&self) -> f64 {
        -((self.int_bits - 1) as f64).exp2()
    }

    pub fn max_value(&self) -> f64 {
        ((self.int_bits - 1) as f64).exp2() - self.step()
    }

    /// Truncates toward zero onto the grid, then saturates to the representable range.
    #[inline]
    pub fn quantize(&self, x: f64) -> f64 {
        if x.is_nan() {
            return 0.0;
        }
        let step = self.step();
        let q = (x / step).trunc() * step;
        // `+ 0.0` folds -0.0 into the single zero code
        q.clamp(self.min_value(), self.max_value()) + 0.0
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}.{}", self.total_bits, self.int_bits)
    }
}

impl FromStr for FixedPointFormat {
    type Err = Error;

    /// Parses `"q<total>.<int>"`, e.g. `q16.4`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s
            .strip_prefix('q')
            .or_else(|| s.strip_prefix('Q'))
            .ok_or_else(|| Error::config(format!("fixed-point format {s:?} must look like q16.4")))?;
        let (total, int) = body
            .split_once('.')
            .ok_or_else(|| Error::config(format!("fixed-point format {s:?} must look like q16.4")))?;
        let parse = |v: &str| {
            v.parse::<u32>()
                .map_err(|_| Error::config(format!("bad bit count {v:?} in {s:?}")))
        };
        Self::new(parse(total)?, parse(int)?)
    }
}

impl TryFrom<String> for FixedPointFormat {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FixedPointFormat> for String {
    fn from(f: FixedPointFormat) -> Self {
        f.to_string()
    }
}

/// Free-function form of [`FixedPointFormat::quantize`].
pub fn quantize(x: f64, fmt: FixedPointFormat) -> f64 {
    fmt.quantize(x)
}

/// `L`-level piecewise-constant approximation of `tanh` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhLut {
    output_levels: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl TanhLut {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::config(format!("tanh LUT needs at least 2 levels, got {levels}")));
        }
        let l = levels as f64;
        let output_levels = (0..levels)
            .map(|k| (2.0 * k as f64 - (l - 1.0)) / (l - 1.0))
            .collect();
        let breakpoints = (0..=levels).map(|k| (2.0 * k as f64 - l) / l).collect();
        Ok(Self {
            output_levels,
            breakpoints,
        })
    }

    pub fn levels(&self) -> usize {
        self.output_levels.len()
    }

    pub fn output_levels(&self) -> &[f64] {
        &self.output_levels
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Saturates outside `[-1, 1]`; otherwise returns the level of the half-open
    /// bin `[b_k, b_{k+1})` holding `x`, with the last bin closed at `+1`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = if x.is_nan() { 0.0 } else { x };
        if x < -1.0 {
            return -1.0;
        }
        if x > 1.0 {
            return 1.0;
        }
        let last = self.levels() - 1;
        let guess = ((x + 1.0) * self.levels() as f64 / 2.0).floor();
        let mut k = (guess.max(0.0) as usize).min(last);
        // the closed-form guess can land one bin off near a breakpoint
        while k > 0 && x < self.breakpoints[k] {
            k -= 1;
        }
        while k < last && x >= self.breakpoints[k + 1] {
            k += 1;
        }
        self.output_levels[k]
    }
}

pub fn lut_tanh(x: f64, lut: &TanhLut) -> f64 {
    lut.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_examples() {
        let f = FixedPointFormat::Q4_2;
        assert_eq!(quantize(0.3, f), 0.25);
        assert_eq!(quantize(-0.3, f), -0.25);
        assert_eq!(quantize(5.0, f), 1.75);
        assert_eq!(quantize(-5.0, f), -2.0);
        assert_eq!(quantize(-0.2, f), 0.0);
        assert_eq!(f.max_value(), 1.75);
        assert_eq!(FixedPointFormat::Q16_4.step(), 1.0 / 4096.0);
        assert_eq!(FixedPointFormat::Q16_4.max_value(), 8.0 - 1.0 / 4096.0);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("q16.4".parse::<FixedPointFormat>().unwrap(), FixedPointFormat::Q16_4);
        assert_eq!(FixedPointFormat::Q4_2.to_string(), "q4.2");
        assert!("q4.5".parse::<FixedPointFormat>().is_err());
        assert!("16.4".parse::<FixedPointFormat>().is_err());
        assert!("q65.4".parse::<FixedPointFormat>().is_err());
        assert!(FixedPointFormat::new(8, 0).is_err());
    }

    #[test]
    fn lut_examples() {
        let l4 = TanhLut::new(4).unwrap();
        assert!((lut_tanh(0.25, &l4) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(lut_tanh(3.0, &l4), 1.0);
        assert_eq!(lut_tanh(1.0, &l4), 1.0);
        assert_eq!(lut_tanh(-1.0, &l4), -1.0);
        assert_eq!(lut_tanh(0.0, &l4), l4.output_levels()[2]);
        let l2 = TanhLut::new(2).unwrap();
        assert_eq!(lut_tanh(-0.1, &l2), -1.0);
        assert_eq!(lut_tanh(0.0, &l2), 1.0);
        assert!(TanhLut::new(1).is_err());
    }

    #[test]
    fn lut_structure() {
        for levels in 2..12 {
            let lut = TanhLut::new(levels).unwrap();
            assert_eq!(lut.output_levels()[0], -1.0);
            assert_eq!(*lut.output_levels().last().unwrap(), 1.0);
            assert_eq!(lut.breakpoints().len(), levels + 1);
            assert!(lut.breakpoints().windows(2).all(|w| w[0] < w[1]));
            assert_eq!(lut.breakpoints()[0], -1.0);
            assert_eq!(*lut.breakpoints().last().unwrap(), 1.0);
        }
    }

    proptest! {
        #[test]
        fn quantize_idempotent(x in -100.0f64..100.0, total in 2u32..=32, int_raw in 1u32..=32) {
            let int = int_raw.min(total);
            let f = FixedPointFormat::new(total, int).unwrap();
            let q = f.quantize(x);
            prop_assert_eq!(f.quantize(q), q);
        }

        #[test]
        fn quantize_and_lut_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0, levels in 2usize..16) {
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            for f in [FixedPointFormat::Q4_2, FixedPointFormat::Q16_4] {
                prop_assert!(f.quantize(x) <= f.quantize(y));
            }
            let lut = TanhLut::new(levels).unwrap();
            prop_assert!(lut.eval(x) <= lut.eval(y));
        }

        #[test]
        fn lut_odd_for_even_levels(half in 1usize..8, x in -1.0f64..1.0) {
            let lut = TanhLut::new(2 * half).unwrap();
            prop_assume!(!lut.breakpoints().contains(&x) && !lut.breakpoints().contains(&-x));
            prop_assert_eq!(lut.eval(-x), -lut.eval(x));
        }
    }

    #[test]
    fn lut4_error_bound() {
        let lut = TanhLut::new(4).unwrap();
        for k in 0..=20_000 {
            let x = -1.0 + 2.0 * k as f64 / 20_000.0;
            assert!((lut.eval(x) - x.tanh()).abs() <= 1.0);
        }
    }
}
