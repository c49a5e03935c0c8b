//! Online quantum state tomography with matrix-exponentiated gradient (MEG)
//! updates, a photon-counting simulator to drive it, and an ensemble
//! benchmark harness.

pub mod bench;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod meg;
pub mod photon;
pub mod report;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
