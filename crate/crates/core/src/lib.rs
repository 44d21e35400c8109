//! Cabin air-conditioning energy management for electric vehicles.
//!
//! The crate models the heat loads on a vehicle cabin and the AC plant
//! that removes them, and compares three ways of commanding the cooling
//! capacity over a drive: a rule-based bang-bang controller, a
//! full-information dynamic-programming benchmark, and a receding-horizon
//! controller that predicts vehicle speed with a Markov chain.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod control;
pub mod dp;
pub mod error;
pub mod interp;
pub mod io;
pub mod markov;
pub mod model;
pub mod ode;
pub mod plant;
pub mod sim;
pub mod sweep;
pub mod synthetic;
pub mod thermal;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use model::CabinPlant;
