use thiserror::Error;

use crate::lattice::Position;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("alphabet size {0} is out of range")]
    BadAlphabet(usize),

    #[error("cell state {state} is outside an alphabet of size {size}")]
    StateOutOfRange { state: u16, size: usize },

    #[error("two clauses claim source block {0}")]
    ConflictingClauses(String),

    #[error("alphabet of size {0} is too large for a dense unitarity check")]
    AlphabetTooLarge(usize),

    #[error("rotation closure maps block {block} to two images ({first} / {second})")]
    ClosureConflict {
        block: String,
        first: String,
        second: String,
    },

    #[error("stamp collides with an occupied cell at {0}")]
    Collision(Position),

    #[error("amplitude {weight:.3e} leaked off the exit ports: {detail}")]
    Leakage { weight: f64, detail: String },

    #[error("signal mass at an exit port at step {step}, expected only at step {expected}")]
    Desync { step: usize, expected: usize },

    #[error("supercell side {0} does not align with the 2x2 block partition")]
    Alignment(usize),

    #[error("decoded state at i={i} is {deviation:.3e} away from a product with fixed garbage")]
    GarbageEntangled { i: usize, deviation: f64 },

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("invalid coding: {0}")]
    Coding(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
