use crate::ising::{sign, IsingInstance, SpinState};
use crate::quantize::{FixedPointFormat, TanhLut};
use crate::schedule::Schedule;

use super::noise::NoiseStream;
use super::SolverKind;

/// Numeric model of the update datapath.
///
/// With a `format`, every intermediate is quantized: each product `J_ij·s_j`,
/// the accumulated (normalized) field, `β·I`, the activation output, `ξ·s_i`,
/// the scaled noise sample and the final sum. Accumulation itself is wide.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Arithmetic {
    pub format: Option<FixedPointFormat>,
    pub tanh_lut: Option<TanhLut>,
}

impl Arithmetic {
    pub fn full() -> Self {
        Self::default()
    }

    pub fn quantized(format: FixedPointFormat, lut: TanhLut) -> Self {
        Self {
            format: Some(format),
            tanh_lut: Some(lut),
        }
    }

    pub fn is_quantized(&self) -> bool {
        self.format.is_some()
    }

    #[inline]
    fn q(&self, x: f64) -> f64 {
        match self.format {
            Some(f) => f.quantize(x),
            None => x,
        }
    }

    #[inline]
    fn activation(&self, x: f64) -> f64 {
        match &self.tanh_lut {
            Some(lut) => lut.eval(x),
            None => x.tanh(),
        }
    }

    /// `sign[act(β·I) + ξ·s + η·z]` under this arithmetic.
    #[inline]
    pub fn decide(&self, field: f64, spin: i8, beta: f64, xi: f64, eta: f64, z: f64) -> i8 {
        let s = f64::from(spin);
        if self.format.is_none() {
            return sign(self.activation(beta * field) + xi * s + eta * z);
        }
        let act = self.q(self.activation(self.q(beta * field)));
        let inertia = self.q(xi * s);
        let noise = self.q(eta * z);
        sign(self.q(act + inertia + noise))
    }
}

/// Reusable update engine for one instance; owns scratch buffers.
pub struct Dynamics<'a> {
    inst: &'a IsingInstance,
    arith: Arithmetic,
    /// Quantized couplings, present only when they differ from the raw ones
    /// or their products with ±1 would not be representable.
    quant_j: Option<Vec<f64>>,
    bias: Vec<f64>,
    spins: Vec<f64>,
    raw: Vec<f64>,
    field: Vec<f64>,
}

impl<'a> Dynamics<'a> {
    pub fn new(inst: &'a IsingInstance, arith: Arithmetic) -> Self {
        let n = inst.n();
        let (quant_j, bias) = match arith.format {
            Some(f) => {
                let exact = inst
                    .couplings()
                    .iter()
                    .all(|&v| f.quantize(v) == v && f.quantize(-v) == -v);
                let quant_j =
                    (!exact).then(|| inst.couplings().iter().map(|&v| f.quantize(v)).collect());
                (quant_j, inst.bias().iter().map(|&v| f.quantize(v)).collect())
            }
            None => (None, inst.bias().to_vec()),
        };
        Self {
            inst,
            arith,
            quant_j,
            bias,
            spins: vec![0.0; n],
            raw: vec![0.0; n],
            field: vec![0.0; n],
        }
    }

    pub fn arithmetic(&self) -> &Arithmetic {
        &self.arith
    }

    fn load(&mut self, s: &SpinState) {
        for (dst, &v) in self.spins.iter_mut().zip(s.as_slice()) {
            *dst = f64::from(v);
        }
    }

    /// Raw `Σ_j J_ij s_j` and the solver field for row `i` from the loaded spins.
    #[inline]
    fn row_field(&self, i: usize) -> (f64, f64) {
        let raw: f64 = self
            .inst
            .row(i)
            .iter()
            .zip(&self.spins)
            .map(|(j, s)| j * s)
            .sum();
        let scale = self.inst.field_scale();
        let field = match self.arith.format {
            None => scale * raw + self.bias[i],
            Some(f) => {
                let acc = match &self.quant_j {
                    None => raw,
                    Some(qj) => {
                        let n = self.inst.n();
                        qj[i * n..(i + 1) * n]
                            .iter()
                            .zip(&self.spins)
                            .map(|(j, s)| f.quantize(j * s))
                            .sum()
                    }
                };
                f.quantize(f.quantize(scale * acc) + self.bias[i])
            }
        };
        (raw, field)
    }

    /// Full-precision energy of the loaded spins from the raw fields.
    fn energy_from_raw(&self) -> f64 {
        let h = self.inst.bias();
        let mut pair = 0.0;
        let mut lin = 0.0;
        for i in 0..self.spins.len() {
            pair += self.spins[i] * self.raw[i];
            lin += h[i] * self.spins[i];
        }
        -0.5 * pair - lin
    }

    /// Synchronous update of every spin from the pre-step state. Returns the
    /// full-precision energy of that pre-step state.
    pub fn step_parallel(
        &mut self,
        s: &mut SpinState,
        t: usize,
        sched: &Schedule,
        noise: &mut NoiseStream,
        xi: f64,
    ) -> f64 {
        self.load(s);
        for i in 0..self.spins.len() {
            let (raw, field) = self.row_field(i);
            self.raw[i] = raw;
            self.field[i] = field;
        }
        let energy = self.energy_from_raw();
        let (beta, eta) = (sched.beta(t), sched.eta(t));
        for i in 0..self.spins.len() {
            let z = noise.sample();
            let next = self.arith.decide(self.field[i], s.get(i), beta, xi, eta, z);
            s.set(i, next);
        }
        energy
    }

    /// Updates spin `t mod N` reading the live state. Returns the spin index,
    /// its previous value and its raw field `Σ_j J_ij s_j + h_i` before the update.
    pub fn step_sequential(
        &mut self,
        s: &mut SpinState,
        t: usize,
        sched: &Schedule,
        noise: &mut NoiseStream,
    ) -> (usize, i8, f64) {
        let i = t % self.spins.len();
        self.load(s);
        let (raw, field) = self.row_field(i);
        let z = noise.sample();
        let old = s.get(i);
        let next = self
            .arith
            .decide(field, old, sched.beta(t), 0.0, sched.eta(t), z);
        s.set(i, next);
        (i, old, raw + self.inst.bias()[i])
    }

    /// One update step of the given dynamics.
    pub fn step(
        &mut self,
        kind: SolverKind,
        s: &mut SpinState,
        t: usize,
        sched: &Schedule,
        noise: &mut NoiseStream,
    ) {
        match kind {
            SolverKind::ConvSequential => {
                self.step_sequential(s, t, sched, noise);
            }
            SolverKind::ConvParallel => {
                self.step_parallel(s, t, sched, noise, 0.0);
            }
            SolverKind::Pimi => {
                self.step_parallel(s, t, sched, noise, sched.xi());
            }
        }
    }

    pub(crate) fn energy(&mut self, s: &SpinState) -> f64 {
        self.load(s);
        for i in 0..self.spins.len() {
            self.raw[i] = self.row_field(i).0;
        }
        self.energy_from_raw()
    }
}
