pub mod error;
pub mod fft;
pub mod grid;
pub mod fields;
pub mod gauge;
pub mod linalg;
pub mod pauli;
pub mod spectral;
pub mod sweep;
pub mod cli;
