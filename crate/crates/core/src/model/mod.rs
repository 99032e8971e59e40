//! Statistical model objects: baseline hazard ratios, the auxiliary-covariate
//! distribution, missingness-probability models and parameter packing.
//!
//! All types are immutable after construction; every operation is a pure
//! function of its inputs and safe to call from concurrent evaluators.

mod baseline;
mod missingness;
mod nu;
mod params;

pub use baseline::{BaselineForm, BaselineRatioSpec};
pub use missingness::{MissInputs, MissKind, MissTerm, MissingnessModel};
pub use nu::NuModel;
pub use params::{Block, ParameterLayout, ParameterVector};
