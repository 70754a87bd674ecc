//! Synthesis and validation of evader controllers for reach-avoid
//! pursuit-evasion games via density-function SOS programs.

// `!(a > b)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod conic;
pub mod manifest;
pub mod plot;
pub mod poly;
pub mod semialg;
pub mod soscomp;
pub mod certificate;
pub mod sim;
pub mod synth;
pub mod verify;
