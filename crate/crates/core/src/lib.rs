//! Syndrome-likelihood analysis of postselected fault-tolerant computation
//! with concatenated four-qubit error-detecting codes.

pub mod bellprep;
pub mod decode;
pub mod error_models;
pub mod gates;
pub mod indfit;
pub mod likelihood;
pub mod run;
pub mod scalar;
pub mod symplectic;
