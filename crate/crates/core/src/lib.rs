//! Gaussian simulation of joint quadrature measurements with a beam splitter,
//! a parametric amplifier, or an SU(1,1) interferometer.
//!
//! * [`gaussian`]: covariance-matrix engine.
//! * [`oracle`]: operator-level transfer maps and closed-form SNRs.
//! * [`schemes`]: the three measurement schemes, dark-fringe search and SNRs.
//! * [`calibration`]: one-parameter fit of the internal efficiency.
//! * [`spectra`]: Monte-Carlo photocurrents, Welch spectra and post-detection
//!   combination.
//! * [`verify`]: the invariant and acceptance checks behind `su11 verify`.

pub mod calibration;
pub mod conventions;
pub mod error;
pub mod gaussian;
pub mod oracle;
pub mod schemes;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
pub use gaussian::{Circuit, Element, GaussianState, OpaParams, QuadratureAngle};
pub use schemes::{
    build_scheme, HomodyneChannel, LossBudget, ModulationTone, PortName, SchemeInstance, SchemeKind, SchemeParams,
};
