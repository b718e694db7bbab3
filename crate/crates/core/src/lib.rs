//! Stationary fluid-structure equilibria of a viscous channel flow past an
//! elastic beam.
//!
//! The library solves the coupled system in a partitioned way: the
//! incompressible Navier-Stokes equations are pulled back to a fixed
//! reference channel through a vertical-shear diffeomorphism, the vertical
//! lift force per cross-section is extracted from the fluid stress, a
//! fourth-order beam equation turns the lift into a new displacement, and a
//! contraction iteration drives the displacement-to-displacement map to its
//! fixed point. Verification operations check the embedding constants, the
//! symmetric zero-lift configuration and the scaling laws of the solution
//! with the inflow magnitude.

pub mod beam;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod error;
pub mod fluid;
pub mod geometry;
pub mod io;
pub mod lift;
pub mod util;

pub use error::{Error, Result};
