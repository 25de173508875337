//! Numerics for the upper tail of the KPZ equation with narrow-wedge data:
//! the Laplace transform of `Z(2t,0) e^{t/12}` as a Fredholm determinant,
//! fractional moments and their leading-term decomposition, bound envelopes
//! and rate functions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod fredholm;
pub mod kernel;
pub mod ldp;
pub mod moments;
pub mod quadrature;
pub mod specfun;
pub mod validation;
pub mod verify;

pub use error::{KpzError, Result};
