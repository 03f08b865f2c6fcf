//! Near-field terahertz ISAC simulation toolkit.
//!
//! Models spherical-wavefront uniform linear arrays, wideband beam squint,
//! delay-phase (true-time-delay plus phase-shifter) beam trajectory control,
//! wavenumber-domain and MUSIC localization, and squint-assisted resource
//! allocation for integrated sensing and communication. All quantities are SI.

// Negated comparisons such as `!(x > 0.0)` are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod codebook;
pub mod delay_phase;
pub mod error;
pub mod isac;
pub mod music;
pub mod sim;
pub mod squint;
pub mod wavenumber;

pub use error::{Error, Result};
