//! Gaussian-beam quasimodes and geometrical-optics solutions.
//!
//! A beam rides a null bicharacteristic: its complex quadratic phase comes
//! from a matrix Riccati solve, its amplitude ladder from transport equations
//! along the ray (with memory damping `-G(x,0)|∇φ|²/(2∂_tφ)`), and its
//! stationary corrections from Volterra equations. For simple sound speeds a
//! real-phase geometrical-optics construction is available instead.

pub mod eikonal;
pub mod go;
pub mod quasimode;
pub mod residual;
pub mod riccati;
pub mod transport;

pub use quasimode::{
    assemble_quasimode, beam_summary, build_beam, stationary_phase_value, BeamQuasimode,
    QuasimodeParts,
};
pub use residual::{pu_at, residual_norm, SpaceTimeGrid};
pub use riccati::{constant_speed_closed_form, min_im_eigenvalue, solve_riccati, standard_h0, RiccatiPath};
pub use transport::{correction_profile, AmplitudeLadder, BeamPhase, TransportConvention};
