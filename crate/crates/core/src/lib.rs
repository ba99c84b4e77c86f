//! Loosely annotated image modelling with imagined annotations.
//!
//! Missing keywords of training images are filled in with real-valued counts
//! derived from keyword co-occurrence similarity, then PLSA-words is trained
//! on the enriched counts and used to annotate unseen images from their blobs.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod imagination;
pub mod metrics;
pub mod pipeline;
pub mod plsa;

pub use error::{Error, Result};
