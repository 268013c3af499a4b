//! Numerical analysis of the dimensionless predator-prey model with hunting
//! cooperation and a strong Allee effect in the prey,
//!
//! ```text
//! u' = r u (1 - u)(u - a) - (1 + c v) u v
//! v' = m v (p u (1 + c v) - 1)
//! ```
//!
//! together with its reaction-diffusion and two-delay extensions.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod config;
pub mod delay;
pub mod equilibria;
mod error;
pub mod harness;
pub mod model;
pub mod normal_form;
pub mod ode;
pub mod output;
pub mod pde;
pub mod phase;
pub mod roots;
pub mod svg;
pub mod turing;

pub use error::{Error, Result};
pub use model::{CooperationRegime, DelayParams, DiffusionParams, ModelParams, RawParams, State};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    items.iter().map(f).collect()
}
