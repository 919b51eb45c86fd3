//! Smell embeddings learned from perfume note compositions.
//!
//! The crate covers the whole pipeline: ingesting perfume records
//! ([`corpus`]), training CBOW note embeddings ([`trainer`]), querying
//! embedding tables ([`store`]), comparing neighbor rankings with
//! rank-biased overlap ([`rbo`]), the rank statistics used to judge the
//! comparisons ([`stats`]), the experiment drivers ([`experiments`]) and
//! regression maps from word-embedding space into smell space
//! ([`mapping`]). The [`cli`] module backs the `scentspace` binary.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod mapping;
pub mod rbo;
pub mod seed;
pub mod stats;
pub mod store;
pub mod trainer;

pub use error::{Error, Result};
