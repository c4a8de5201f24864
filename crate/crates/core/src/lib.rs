//! Curtain and Flag sequence sets with peak-curtain ambiguity functions.
//!
//! The crate covers the whole pipeline: chirp-based curtain construction,
//! ambiguity function evaluation, weighted sidelobe design of transmit and
//! receive Peak sequences by accelerated majorization-minimization, and a
//! two-step delay-Doppler estimator exercised through a simulated channel.

pub mod ambiguity;
pub mod apmm;
pub mod channel;
pub mod curtain;
pub mod error;
pub mod estimator;
pub mod fft;
pub mod metrics;
pub mod objective;
pub mod seqcore;

pub use ambiguity::{af_grid, af_line, af_point, AfCase, AfGrid, LineSpec};

pub use curtain::{CurtainSet, CurtainSpec, SetKind};
pub use error::{CurtainViolation, Error, Result};
pub use objective::{DesignConfig, FlagDesign};
pub use num_complex::Complex64;

pub use seqcore::{CaseKind, ChirpParams, ComplexSeq, Zone};
