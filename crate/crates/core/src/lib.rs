//! Uncertainty-feature pipeline for sentence-level machine translation
//! quality estimation.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! pipeline; file formats, parallel drivers and the command line live in the
//! `qe` companion crate.
//!
//! - [`glassbox`]: forced decoding, greedy translation and MC-dropout sampling
//!   behind the [`glassbox::GlassBox`] trait, with a desk-scale
//!   [`glassbox::ToyLexicalModel`].
//! - [`noise`]: delete/insert-mask "post-editing" of the source and a unigram
//!   masked-LM stub that fills the masks.
//! - [`similarity`]: exact-match Meteor core.
//! - [`features`]: the 21 uncertainty features and their z-score normalizer.
//! - [`head`]: linear regression/classification head over
//!   `[embedding ; normalized features]`.
//! - [`eval`]: Pearson and Matthews correlation.
//! - [`ensemble`]: greedy forward ensembling of prediction sets.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod glassbox;
pub mod head;
pub mod noise;
pub mod seed;
pub mod similarity;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::{CedClass, Dataset, LangPair, Label, QeSample, Task, TokenSeq};
