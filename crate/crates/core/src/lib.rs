//! Position-aware convolutional-recurrent relevance matching (PACRR) for
//! re-ranking ad-hoc retrieval results.
//!
//! Pipeline: [`corpus`] ingests text and judgments, [`simmat`] turns a
//! query–document pair into fixed-size similarity matrices, [`model`] scores
//! them with convolutions, two pooling stages and a recurrent cell built on
//! [`neural`], [`training`] fits the weights with a pairwise hinge loss, and
//! [`eval`] measures the resulting rankings.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod neural;
pub mod scorer;
pub mod simmat;
pub mod synth;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
