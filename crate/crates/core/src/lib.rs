//! Numerical laboratory for the Donaldson functional on the Bolza surface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cache;
pub mod error;
pub mod differentials;
pub mod geometry;
pub mod solver;

pub use error::{GclabError, Result};
