//! Log-likelihoods and estimating functions for the four estimators, with
//! analytic first and second derivatives.
//!
//! Evaluation is deterministic: events are processed in sorted order (stratum,
//! time descending), so values do not depend on record layout beyond the
//! documented tie convention (all tied events share the same risk set).

mod bernoulli;
mod cca;
mod engine;
mod gr;
mod lstar_q;
mod lstar_y;
mod mixture;

pub use cca::{loglik_cca, CcaLikelihood};
pub use gr::{gr_system, GrEvaluation, GrSystem};
pub use lstar_q::{
    loglik_lstar_q1, loglik_lstar_q2, loglik_lstar_q_direct, Lq1Likelihood, Lq2Likelihood,
};
pub use lstar_y::{loglik_lstar_y, LyLikelihood};

pub(crate) use engine::{EvalMode, EvalOutput};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Value, gradient, Hessian and per-subject score contributions of one
/// objective at one parameter point. The gradient equals the column sums of
/// `per_subject_scores` by construction (censored subjects own zero rows),
/// and the Hessian is symmetric by construction.
#[derive(Debug, Clone)]
pub struct ObjectiveEvaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// `n x dim`: subject `i`'s contribution to the score.
    pub per_subject_scores: DMatrix<f64>,
}

impl ObjectiveEvaluation {
    pub(crate) fn from_output(out: EvalOutput) -> Result<Self> {
        let gradient = out
            .gradient
            .ok_or_else(|| Error::Numerical("evaluation did not produce a gradient".into()))?;
        let hessian = out
            .hessian
            .ok_or_else(|| Error::Numerical("evaluation did not produce a Hessian".into()))?;
        let per_subject_scores = out
            .scores
            .ok_or_else(|| Error::Numerical("evaluation did not produce score rows".into()))?;
        Ok(Self { value: out.value, gradient, hessian, per_subject_scores })
    }
}
