pub mod boundary;
pub mod domain;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod nodes;
pub mod numerics;
pub mod quadrature;
pub mod reference;
pub mod variation;

pub use error::{Error, Result};
