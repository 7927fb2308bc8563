//! Uplink MIMO detection: scenarios, the MMSE baseline, the perturbation Ising
//! mapping and Monte-Carlo bit-error rates.

mod channel;
mod constellation;
mod detect;
mod dimimo;

pub use channel::{
    ebn0_linear, from_real, gen_scenario, mmse_detect, mmse_filter, stack_matrix, stack_vector, to_real,
    unstack_vector, MimoScenario, MmseEstimate, RealModel,
};
pub use constellation::Qam;
pub use detect::{
    ber, ber_curve, bit_error_fraction, detect, detector_seed, scenario_seed, BerPoint, Detection, Detector,
    IsingDetector,
};
pub use dimimo::{build_dimimo, CorrectionSet, DiMimoProblem};
