//! Simulation and auditing toolkit for spurious-correlation distribution shifts.
//!
//! The crate has two halves. The simulation half ([`synthgen`], [`trainer`],
//! [`conditions`], [`cmnist`]) samples Gaussian domains whose spurious block is
//! moved by a linear shift `Z_e -> M Z_e`, trains domain-general and full
//! logistic classifiers, and evaluates when the domain-general one wins out of
//! distribution. The audit half ([`ingest`], [`aline`]) takes accuracy tables of
//! real models and decides whether an ID/OOD split shows accuracy on the line
//! (probit-scale correlation), which signals a misspecified benchmark.

pub mod aline;
pub mod analytic;
pub mod cmnist;
pub mod conditions;
pub mod config;
pub mod error;
pub mod experiments;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod special;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{
    BoundParams, Dataset, DomainSpec, FeatureMask, LinearClassifier, ShiftSpec,
};
