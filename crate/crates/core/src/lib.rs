//! Synthetic survival cohorts: a flexible parametric (spline) proportional hazards
//! model for the outcome, sequential conditional models for the covariates, and
//! utility scoring of the synthetic data against the original.
//!
//! Typical flow: [`survival_model::fit`] on the original cohort,
//! [`fcs::fit_synthesizer`] + [`fcs::generate`] for covariates,
//! [`simulate::simulate_cohort`] for times and status, then
//! [`utility::compare_report`].

pub mod error;
pub mod fcs;
pub mod glm;
pub mod optim;
pub mod simulate;
pub mod spline;
pub mod survival_model;
pub mod tabular;
pub mod utility;

pub use error::{Error, Result};
pub use fcs::{
    default_plan, fit_synthesizer, generate, ConditionalModel, FittedSynthesizer, MethodRegistry, SynthesisPlan,
};
pub use simulate::{simulate_cohort, StudyWindow, SyntheticOutcome};
pub use survival_model::{fit, FitOptions, RoystonParmarModel};
pub use tabular::{load_dataset, write_dataset, ColumnSpec, Dataset, Kind, Role};

pub type KnotSet64 = spline::KnotSet<f64>;
pub type KnotSet32 = spline::KnotSet<f32>;
pub type SplineCoefficients64 = spline::SplineCoefficients<f64>;
pub type SplineCoefficients32 = spline::SplineCoefficients<f32>;
