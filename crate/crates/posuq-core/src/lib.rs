//! Algorithmic core for ToA-based positioning with uncertainty assessment.
//!
//! Everything here is pure computation over value data: scenario geometry,
//! ToA synthesis, OTDoA multilateration, per-BS Gaussian-process distance
//! regression, random-forest / KNN position regression, the three
//! uncertainty estimators, and the evaluation statistics. IO, file formats
//! and the CLI live in the companion `posuq` crate.
//!
//! The crate is `no_std` (with `alloc`); float math goes through `libm`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;
#[cfg(all(feature = "std", not(test)))]
extern crate std;

pub mod eval;
pub mod geo;
pub mod gp;
pub mod linalg;
pub mod otdoa;
pub mod radiosim;
pub mod rf;
pub mod rng;
pub mod scenario;
pub mod uncertainty;

pub use geo::{Point2, Point3, SPEED_OF_LIGHT};
pub use scenario::{Deployment, LosModel, ScenarioConfig};
