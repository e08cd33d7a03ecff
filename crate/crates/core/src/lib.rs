//! Symbolic-dynamics toolkit for one-sided shifts of finite type.
//!
//! Modules follow the data flow: [`sft`] and [`markov`] define the shift and its
//! measures, [`point`] the orbits and the metric, [`potential`] the weighted
//! Birkhoff sums, [`pressure`] partition functions and Legendre spectra,
//! [`entropy`] finite-depth entropy estimators, [`chaos`] pair classification,
//! [`transfer`] the explicit block maps and [`moran`] the Moran-set engine.
//! [`checks`] bundles the invariant suites run by `sftlab check`.

pub mod chaos;
pub mod checks;
pub mod entropy;
pub mod error;
pub mod interval;
pub mod markov;
pub mod point;
pub mod potential;
pub mod pressure;
pub mod sft;
pub mod sums;
pub mod moran;
pub mod transfer;

pub use error::{Error, Result};
pub use interval::Interval;
pub use markov::MarkovMeasure;
pub use point::Point;
pub use potential::Potential;
pub use sft::{Sft, Word};
