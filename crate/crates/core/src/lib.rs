//! Reduced-rank minimum-BER detection for multiuser MIMO uplinks.
//!
//! The crate contains the adaptive joint-iterative-optimization MBER
//! receiver ([`jio_mber`]), its automatic rank selection
//! ([`rank_selection`]), the full-rank and conventional reduced-rank
//! comparison receivers ([`baselines`]), a time-varying Rayleigh channel
//! simulator ([`channel`]), per-symbol operation-count formulas
//! ([`complexity`]) and a Monte-Carlo BER harness ([`harness`]).

pub mod baselines;
pub mod channel;
pub mod complexity;
pub mod config;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod jio_mber;
pub mod linalg;
pub mod rank_selection;
pub mod receiver;
pub mod symbol;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, C64};
pub use symbol::Symbol;
