#![cfg_attr(not(feature = "std"), no_std)]

//! Core algorithms for length-controlled generation experiments: prompt
//! variants with a `{target_words}` placeholder, two-phase response parsing,
//! deterministic Treebank-style word counting, and length-fidelity metrics
//! with paired significance testing.
//!
//! Everything here is pure computation over strings and numbers. The crate
//! is `no_std`-compatible (alloc required); builds without `std` must enable
//! the `libm` feature to provide float math.

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("lenfid-core requires either the `std` or the `libm` feature");

pub mod metrics;
pub mod parse;
pub mod prompt;
pub mod wordcount;

mod float;
mod text;
