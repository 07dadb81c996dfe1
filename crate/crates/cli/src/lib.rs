//! Batch pipeline behind the `levytopic` binary.

pub mod cache;
pub mod config;
pub mod error;
pub mod output;
pub mod recovery;
pub mod run;
pub mod sources;
pub mod svg;
