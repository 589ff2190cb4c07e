//! Macroscopic pedestrian-flow simulation by discrete-time measure
//! push-forward.
//!
//! A crowd is represented by a nonnegative density on a uniform grid over
//! the unit square. Each time step builds a velocity field from the current
//! density (a desired component toward a target plus a nonlocal interaction
//! component averaged over a finite neighborhood), then pushes the density
//! forward through the piecewise-translation motion map using exact cell
//! overlap areas. The scheme is conservative, positivity-preserving and
//! boundedness-preserving under the CFL condition, and mass never enters
//! obstacles or leaves the domain.
//!
//! Modules:
//! - [`grid`]: geometry, obstacle masking, density and velocity fields;
//! - [`velocity`] / [`potential`]: desired and interaction velocity models;
//! - [`pushforward`] / [`engine`]: the transport scheme and the run loop;
//! - [`oracle`]: independent references (exact translation, fine quadrature
//!   push-forward, particle cloud);
//! - [`diagnostics`]: localization error, invariant reports, refinement
//!   studies;
//! - [`scenario`] / [`io`]: configuration files, snapshots, manifests.

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod potential;
pub mod pushforward;
pub mod scenario;
pub mod vec2;
pub mod velocity;

pub use error::{Error, Result};
pub use grid::{CellVelocityField, DensityField, Grid, Norms, Rect};
pub use scenario::Scenario;
pub use vec2::Vec2;
