//! Allocation-only core of the ICU readmission risk pipeline.
//!
//! Everything in this crate is pure computation over in-memory data: cohort
//! modelling and synthetic generation, fit-on-train preprocessing, stratified
//! resampling with SMOTE, hybrid RFECV/LASSO feature selection, the model
//! families (second-order GBDT, random forest, logistic regression, kNN,
//! Gaussian naive Bayes, a one-hidden-layer MLP), evaluation with bootstrap
//! intervals, exact tree SHAP, ablation and cohort statistics.
//!
//! File formats, the CLI and thread pools live in the `panc-risk` crate.
//! Parallel work is expressed through the [`par::Executor`] trait so that the
//! caller decides the schedule while results stay order-deterministic.
#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod cohort;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod math;
pub mod models;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod rng;
pub mod select;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
