//! Flip-graph search for matrix multiplication schemes, and the meta flip
//! graph that moves schemes between formats.

pub mod algebra;
pub mod error;
pub mod lift;
pub mod meta;
pub mod moves;
pub mod scheme;
pub mod search;

pub use error::{Error, Result};
