//! Secure integrated sensing and communication beamforming.
//!
//! A base station with a transmit/receive ULA serves one downlink user while
//! sensing a target whose angle is known only through a discrete prior,
//! smoothed into a Gaussian mixture. The target may eavesdrop. This crate
//! provides:
//!
//! * the array/channel model and mixture prior ([`array`]);
//! * posterior Cramer-Rao bound evaluation: exact, quadrature upper bound and
//!   a closed-form small-sigma approximation ([`pcrb`]);
//! * a dense primal-dual interior-point solver for small semidefinite
//!   programs with PSD blocks and nonnegative scalars ([`sdp`]);
//! * the artificial-noise beamforming design: an inner SDP per eavesdropper
//!   SINR cap gamma, rank-one recovery with duality certificates, and the
//!   outer one-dimensional gamma search ([`beam`]);
//! * metrics and validation: SINRs, secrecy rates, beampatterns, KKT reports
//!   and a Monte-Carlo MAP estimation oracle ([`eval`]).

pub mod array;
pub mod beam;
pub mod error;
pub mod eval;
pub mod pcrb;
pub mod quad;
pub mod scenario;
pub mod sdp;

pub use array::{ArrayConfig, ChannelParams, LocationPrior};
pub use beam::BeamformingSolution;
pub use pcrb::{FimComponents, QbarMatrix};
pub use scenario::ScenarioConfig;
pub use sdp::{SdpProblem, SdpSolution, SdpStatus};
