//! Newton-Raphson maximization, estimating-equation root finding, sandwich
//! covariance and Wald inference.

mod newton;
mod sandwich;

pub use newton::{maximize, solve_gr};
pub use sandwich::{p_value, sandwich_covariance, wald_interval};

use crate::error::Result;
use crate::likelihood::ObjectiveEvaluation;
use crate::model::{ParameterLayout, ParameterVector};
use nalgebra::DMatrix;

/// A twice-differentiable objective to maximize.
pub trait Objective: Sync {
    fn layout(&self) -> &ParameterLayout;

    /// Normalization constant for the convergence test (number of subjects
    /// for data likelihoods).
    fn n_units(&self) -> usize {
        1
    }

    /// Objective value only; used during step halving.
    fn value(&self, theta: &[f64]) -> Result<f64>;

    /// Value, gradient, Hessian and per-subject scores.
    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEvaluation>;
}

/// Numeric knobs for `maximize` and `solve_gr`.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence: sup-norm of the gradient (or residual) divided by
    /// `n_units`.
    pub gradient_tolerance: f64,
    /// Secondary convergence requirement: the next proposed Newton step must
    /// be small relative to the current parameters. Separates genuine optima
    /// from monotone-likelihood drift where the gradient merely flattens.
    pub step_tolerance: f64,
    pub step_halving_max: usize,
    pub initial_values: Option<ParameterVector>,
    /// Ridge added to the (negated) Hessian when factorization fails.
    pub ridge_on_singular: f64,
    /// Any parameter whose magnitude exceeds this aborts the fit as diverged.
    pub divergence_guard: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-5,
            step_halving_max: 30,
            initial_values: None,
            ridge_on_singular: 1e-8,
            divergence_guard: 50.0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0)
            || !(self.step_tolerance > 0.0)
            || !(self.divergence_guard > 0.0)
            || self.ridge_on_singular < 0.0
        {
            return Err(crate::error::Error::Config(
                "fit tolerances must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_initial(mut self, init: ParameterVector) -> Self {
        self.initial_values = Some(init);
        self
    }
}

/// Point estimates with sandwich covariance and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimate: ParameterVector,
    pub covariance: DMatrix<f64>,
    pub standard_errors: Vec<f64>,
    /// Absent for the estimating-equation solver.
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm_at_exit: f64,
    pub message: Option<String>,
}

impl FitResult {
    /// 95% Wald interval for parameter `index`.
    pub fn wald(&self, index: usize, level: f64) -> Result<(f64, f64)> {
        wald_interval(self.estimate.values()[index], self.standard_errors[index], level)
    }
}
