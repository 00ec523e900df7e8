//! Exact and Monte Carlo analysis of first-hitting times of finite absorbing
//! Markov chains through conditionally-strong quasi-stationary times.
//!
//! The pipeline is:
//!
//! 1. [`chain`]: load and validate a chain, restrict it to the transient set
//!    `A`, and evolve distributions exactly.
//! 2. [`spectral`]: Perron triple `(λ, μ*, γ)`, the local chain, the time
//!    shift of an initial law and its separation table.
//! 3. [`csqst`]: control functions, the tracking-process recursion and the
//!    minimal conditionally-strong quasi-stationary time.
//! 4. [`hitting`]: the representation formula for `P(τ_G > t)`, exit
//!    decomposition, metastability time-scales and the exponential bound.
//! 5. [`montecarlo`] and [`rim`]: simulation-based validators and the
//!    solvable ring model.
//! 6. [`report`]: the JSON/CSV documents behind the `hitlab` CLI.

pub mod chain;
pub mod csqst;
pub mod error;
pub mod fixtures;
pub mod hitting;
pub mod linalg;
pub mod montecarlo;
pub mod report;
pub mod rim;
pub mod spectral;

pub use chain::{ChainSpec, Distribution, MarkovChain, SubChain};
pub use error::{Error, Result};
pub use spectral::{LocalChain, SeparationTable, SpectralTriple};
