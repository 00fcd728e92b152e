//! Detection of tampered physiological feature data with a one-class SVM
//! over a quantum fidelity kernel, plus a classical dot-product baseline.
//!
//! The pipeline: features are z-scored and reduced by PCA to `2 × qubits`
//! dimensions, encoded into a rotation circuit simulated on a dense
//! statevector, and compared pairwise through state fidelity. Per-class
//! one-class models trained on a clean reference then flag suspect samples.

pub mod attacks;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod ocsvm;
pub mod preprocess;
pub mod qkernel;
pub mod qsim;
pub mod seed;

pub use error::{Error, Result};
