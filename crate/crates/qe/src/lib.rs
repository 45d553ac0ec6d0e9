//! File formats, parallel feature extraction and the `qe` command line on
//! top of [`qe_core`].

pub mod cli;
pub mod extract;
pub mod formats;

pub use qe_core;
