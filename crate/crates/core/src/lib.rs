//! A miniature component framework for block-structured PDE simulations.
//!
//! Components ("thorns") register variable groups, parameters and schedule
//! items with the [`flesh`]; a [`driver`] owns the grid storage, decomposes it
//! across simulated ranks and exchanges ghost zones; [`mol`] integrates the
//! semi-discrete [`physics`] in time; [`io`] writes annotated datasets and
//! checkpoints; [`bench`] holds the benchmark kernels and cost models.

pub mod bench;
pub mod driver;
pub mod flesh;
pub mod grid;
pub mod io;
pub mod mol;
pub mod physics;
pub mod registry;
pub mod thorns;
