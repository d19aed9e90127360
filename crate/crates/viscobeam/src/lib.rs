//! Viscoacoustic wave propagation with memory.
//!
//! The medium is a sound-speed field `c(x)` together with a memory kernel
//! `G(x, t)` that feeds stress history back into the leading-order spatial
//! operator. This crate covers the forward and inverse toolchain around that
//! model:
//!
//! - direct time-domain simulation with exterior sources and receivers
//!   ([`fdtd`]),
//! - Hamiltonian ray tracing, travel times and lens data ([`rays`]),
//! - Gaussian-beam quasimodes with complex quadratic phase, transport
//!   amplitude ladders and Volterra amplitude corrections ([`beams`]),
//! - a semiclassical wave-packet probe classifying propagating wavefronts
//!   ([`probe`]),
//! - time-parametrized geodesic X-ray transforms and regularized inversion,
//!   including recovery of the kernel's zeroth and first time derivatives at
//!   `t = 0` ([`xray`]),
//! - exact extended-Maxwell-model parameter identification from moment data
//!   ([`emm`]).

pub mod beams;
pub mod cli;
pub mod emm;
pub mod error;
pub mod fdtd;
pub mod media;
pub mod probe;
pub mod rays;
pub mod util;
pub mod volterra;
pub mod xray;

pub use error::{Error, Result};
