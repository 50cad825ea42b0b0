pub mod config;
pub mod cspace;
pub mod error;
pub mod graphs;
pub mod linalg;
pub mod magnus;
pub mod model;
pub mod objectives;
pub mod ops;
pub mod par;
pub mod pauli;
pub mod quadrature;
pub mod rng;
pub mod search;
pub mod simlab;
pub mod toggling;

pub use error::{Error, Result};
