//! Sparse simulation of two-dimensional partitioned quantum cellular automata.
//!
//! The crate is layered bottom-up: [`lattice`] holds configurations and
//! superpositions, [`engine`] applies a 2x2 block rule over alternating
//! partitions, [`universal`] builds the four-state universal rule, [`tiles`]
//! and [`circuit`] compile quantum circuits into barrier layouts for it, and
//! [`intrinsic`] checks simulation relations between automata. [`oracle`] is
//! a dense state-vector reference used to validate everything above.

pub mod circuit;
pub mod engine;
pub mod error;
pub mod intrinsic;
pub mod lattice;
pub mod oracle;
pub mod render;
pub mod route;
pub mod tiles;
pub mod universal;

pub use error::{Error, Result};
pub use lattice::{Alphabet, Amp, BasisConfiguration, Bounds, CellState, Position, Superposition};
