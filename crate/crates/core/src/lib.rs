//! Probabilistic Ising machine laboratory: conventional and inertial p-bit
//! dynamics, fixed-point emulation, benchmark instances, ground-truth oracles,
//! clock-cycles-to-solution analytics and DI-MIMO detection.

pub mod error;
pub mod harness;
pub mod instances;
pub mod ising;
pub mod metrics;
pub mod mimo;
pub mod oracle;
pub mod quantize;
pub mod schedule;
pub mod seed;
pub mod solvers;

pub use error::{Error, Result};
pub use ising::{cut_value, energy, local_fields, sign, IsingInstance, SpinState, TrialRecord};
pub use quantize::{lut_tanh, quantize, FixedPointFormat, TanhLut};
pub use schedule::{make_schedule, DefaultParams, Problem, Schedule, ScheduleKind, ScheduleParams};
