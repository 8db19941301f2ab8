//! Calculus of configurations of finite probability spaces.
//!
//! The crate works with exact rational distributions for every structural
//! check (marginals, commutativity, measure preservation) and switches to
//! `f64` only for analytic functionals such as entropy and divergence.
//!
//! It builds without the standard library (`--no-default-features`), using
//! `alloc` for collections and `libm` for transcendental functions.
//!
//! # Example
//!
//! ```
//! use tropic_core::space::ProbabilitySpace;
//!
//! let u6 = ProbabilitySpace::uniform(6);
//! assert!((u6.entropy() - 6f64.ln()).abs() < 1e-12);
//! ```
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod aep;
pub mod config;
pub mod error;
pub mod fan;
pub mod infoopt;
pub mod iso;
pub mod lp;
pub mod math;
pub mod metric;
pub mod rational;
pub mod sample;
pub mod shape;
pub mod space;
pub mod tropical;
pub mod types;
pub mod vertices;

pub use error::{Error, Result};
pub use rational::Rational;
