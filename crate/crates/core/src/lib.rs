//! Pseudospectral simulation of the renormalized stochastic sine-Gordon
//! model on the torus T² = [0, 2π)².
//!
//! Fields are stored as Fourier coefficients in the basis
//! `e_n(x) = (2π)⁻¹ e^{i n·x}` (see [`fourier`]). The crate covers the
//! Gaussian reference measures and exact linear flows ([`gaussian`]), the
//! renormalized imaginary chaos ([`chaos`]), the truncated Gibbs measure and
//! partition-function estimators ([`gibbs`]), and the nonlinear dynamics
//! with their invariance diagnostics ([`dynamics`]).

pub mod chaos;
pub mod dynamics;
pub mod error;
pub mod fourier;
pub mod gaussian;
pub mod gibbs;
pub mod grid;
pub mod io;
pub mod rng;
pub mod stats;

pub use chaos::{compute_gamma_n, compute_sigma_n, make_chaos, ChaosField, RenormConstants};
pub use error::{Error, Result};
pub use fourier::{
    apply_cutoff_projector, forward_transform, inverse_transform, neg_sobolev_sup_norm, sobolev_norm,
    truncated_green, FourierField,
};
pub use gaussian::{build_linear_tables, evolve_linear, sample_mu, sample_pair_mu1, LinearModel, LinearStepTables, PhaseState};
pub use grid::{CutoffProfile, GridSpec, SpectralGrid};
pub use rng::RngStream;
