//! Pseudospectral laboratory for the one-dimensional Klein-Gordon equation
//! `u_tt − u_xx + u = F(u, ∂u)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral`]: periodic grids, transforms, Fourier multipliers and the
//!   free propagators `e^{±itΛ}` with `Λ = (1 − ∂ₓ²)^{1/2}`.
//! * [`dyadic`]: Littlewood-Paley cutoffs, projections `P_k`, physical
//!   localizers `Q_j` and frequency-interaction sets.
//! * [`norms`]: the `Z_α` norm, Sobolev and weighted norms.
//! * [`phases`]: two- and three-wave phase functions and their audits.
//! * [`pseudoproduct`]: bilinear and trilinear Fourier multiplier operators
//!   and the normal-form symbol families.
//! * [`evolution`]: the first-order complex form `(∂_t − iΛ)U = N(U)`,
//!   exponential integration, profiles and audits along trajectories.
//! * [`experiments`]: decay fits, `Z_α` tracking and lifespan scans.
//! * [`config`] and [`cli`]: configuration files and the command-line surface.
//!
//! Data-parallel loops go through [`exec::Exec`]; disabling the default
//! `parallel` feature runs everything sequentially with identical results.

pub mod cli;
pub mod config;
pub mod dyadic;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod experiments;
pub mod fit;
pub mod norms;
pub mod phases;
pub mod pseudoproduct;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
pub use spectral::{make_grid, Field, Grid, Sign, Spectrum};
