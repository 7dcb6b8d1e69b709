//! Learning error-correction code constructions.
//!
//! A constructor proposes a code (a generator matrix, a polar information
//! set or a nested reliability sequence), an [`evaluator`] measures its
//! block error rate by Monte-Carlo simulation, and the constructor uses the
//! measurement to propose a better code.
//!
//! Constructors: [`genetic`] (polar information sets), [`rl::pg`]
//! (standard-form generator matrices) and [`rl::a2c`] (nested polar
//! sequences).

pub mod baselines;
pub mod block;
pub mod channel;
pub mod error;
pub mod evaluator;
pub mod genetic;
pub mod gf2;
pub mod neural;
pub mod polar;
pub mod rl;
pub mod rng;

pub use block::LinearCode;
pub use channel::{ChannelSpec, LlrFrame, SnrConvention};
pub use error::{Error, Result};
pub use evaluator::{BlerEstimate, CodeConstruction, DecoderSpec, EvalBudget, Evaluator};
pub use gf2::{BitMatrix, BitVector};
pub use polar::PolarCode;
