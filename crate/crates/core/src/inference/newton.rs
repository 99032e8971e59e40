//! Damped Newton iterations for maximization and root finding.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inference::sandwich::sandwich_covariance;
use crate::inference::{FitOptions, FitResult, Objective};
use crate::likelihood::GrSystem;
use crate::model::ParameterVector;

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn relative_step(step: &DVector<f64>, theta: &[f64]) -> f64 {
    step.iter()
        .zip(theta)
        .map(|(d, t)| d.abs() / (1.0 + t.abs()))
        .fold(0.0f64, f64::max)
}

/// Solves `A d = b` with `A = -hessian`, escalating a ridge on the diagonal
/// until the Cholesky factorization succeeds. The returned flag records
/// whether the raw factorization failed: a singular information matrix at
/// the exit point marks a non-identified or monotone-likelihood fit.
fn newton_direction(
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    base_ridge: f64,
) -> Result<(DVector<f64>, bool)> {
    let dim = gradient.len();
    if dim == 0 {
        return Ok((DVector::zeros(0), false));
    }
    let a = -hessian;
    if let Some(chol) = Cholesky::new(a.clone()) {
        let d = chol.solve(gradient);
        if d.iter().all(|v| v.is_finite()) {
            return Ok((d, false));
        }
    }
    let mut ridge = base_ridge.max(f64::EPSILON);
    for _ in 0..16 {
        let mut ar = a.clone();
        for i in 0..dim {
            ar[(i, i)] += ridge;
        }
        if let Some(chol) = Cholesky::new(ar) {
            let d = chol.solve(gradient);
            if d.iter().all(|v| v.is_finite()) {
                return Ok((d, true));
            }
        }
        ridge *= 10.0;
    }
    Err(Error::Numerical("Newton direction solve failed beyond ridge rescue".into()))
}

fn initial_point(layout_dim: usize, options: &FitOptions) -> Result<Vec<f64>> {
    match &options.initial_values {
        Some(pv) => {
            if pv.values().len() != layout_dim {
                return Err(Error::Config(format!(
                    "initial values have dimension {}, objective has {layout_dim}",
                    pv.values().len()
                )));
            }
            Ok(pv.values().to_vec())
        }
        None => Ok(vec![0.0; layout_dim]),
    }
}

/// Newton-Raphson ascent with step halving.
///
/// A step that fails to increase the objective is halved up to
/// `step_halving_max` times; a singular Hessian receives an escalating ridge;
/// a parameter crossing the divergence guard aborts with `converged = false`
/// (monotone-likelihood detection) rather than panicking.
pub fn maximize(objective: &dyn Objective, options: &FitOptions) -> Result<FitResult> {
    options.validate()?;
    let layout = objective.layout().clone();
    let mut theta = initial_point(layout.dim(), options)?;
    let n = objective.n_units().max(1) as f64;

    let mut eval = objective.evaluate(&theta)?;
    if !eval.value.is_finite() {
        return Err(Error::Fit("objective is not finite at the initial point".into()));
    }

    let mut iterations = 0usize;
    let mut converged = false;
    let mut message: Option<String> = None;

    loop {
        let (direction, used_ridge) =
            newton_direction(&eval.hessian, &eval.gradient, options.ridge_on_singular)?;
        let gnorm = sup_norm(&eval.gradient) / n;
        if gnorm < options.gradient_tolerance
            && relative_step(&direction, &theta) < options.step_tolerance
        {
            if used_ridge {
                message = Some(
                    "observed information singular at the exit point; \
                     monotone likelihood or non-identified parameter"
                        .into(),
                );
            } else {
                converged = true;
            }
            break;
        }
        if iterations >= options.max_iterations {
            message = Some("maximum iterations reached".into());
            break;
        }
        iterations += 1;

        let mut lambda = 1.0f64;
        let mut accepted = false;
        let mut candidate = theta.clone();
        for _ in 0..=options.step_halving_max {
            for (c, (t, d)) in candidate.iter_mut().zip(theta.iter().zip(direction.iter())) {
                *c = t + lambda * d;
            }
            match objective.value(&candidate) {
                Ok(v) if v.is_finite() && v > eval.value => {
                    accepted = true;
                    break;
                }
                _ => lambda *= 0.5,
            }
        }
        if !accepted {
            converged = gnorm < options.gradient_tolerance;
            message = Some("step halving exhausted without improvement".into());
            break;
        }
        theta.copy_from_slice(&candidate);
        eval = objective.evaluate(&theta)?;
        if theta.iter().any(|v| v.abs() > options.divergence_guard) {
            message = Some(format!(
                "a parameter exceeded the divergence guard {}; monotone likelihood or separation",
                options.divergence_guard
            ));
            break;
        }
    }

    let gradient_norm_at_exit = sup_norm(&eval.gradient) / n;
    let (covariance, standard_errors, cov_note) =
        covariance_or_nan(&eval.hessian, &eval.per_subject_scores);
    if let Some(note) = cov_note {
        message = Some(match message {
            Some(m) => format!("{m}; {note}"),
            None => note,
        });
    }
    Ok(FitResult {
        estimate: ParameterVector::from_values(layout, theta)?,
        covariance,
        standard_errors,
        log_likelihood: Some(eval.value),
        iterations,
        converged,
        gradient_norm_at_exit,
        message,
    })
}

/// Damped Newton root finding on the stacked estimating equations.
pub fn solve_gr(system: &GrSystem, options: &FitOptions) -> Result<FitResult> {
    options.validate()?;
    let layout = system.layout().clone();
    let mut theta = initial_point(layout.dim(), options)?;
    let n = system.n_units().max(1) as f64;

    let mut eval = system.evaluate(&theta)?;
    if eval.residual.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("estimating equations not finite at the initial point".into()));
    }

    let mut iterations = 0usize;
    let mut converged = false;
    let mut message: Option<String> = None;

    loop {
        let direction = solve_root_step(&eval.jacobian, &eval.residual, options.ridge_on_singular)?;
        let rnorm = sup_norm(&eval.residual) / n;
        if rnorm < options.gradient_tolerance
            && relative_step(&direction, &theta) < options.step_tolerance
        {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            message = Some("maximum iterations reached".into());
            break;
        }
        iterations += 1;

        let current_norm = sup_norm(&eval.residual);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        let mut candidate = theta.clone();
        for _ in 0..=options.step_halving_max {
            for (c, (t, d)) in candidate.iter_mut().zip(theta.iter().zip(direction.iter())) {
                *c = t + lambda * d;
            }
            match system.residual(&candidate) {
                Ok(r) if r.iter().all(|v| v.is_finite()) && sup_norm(&r) < current_norm => {
                    accepted = true;
                    break;
                }
                _ => lambda *= 0.5,
            }
        }
        if !accepted {
            converged = rnorm < options.gradient_tolerance;
            message = Some("step halving exhausted without residual decrease".into());
            break;
        }
        theta.copy_from_slice(&candidate);
        eval = system.evaluate(&theta)?;
        if theta.iter().any(|v| v.abs() > options.divergence_guard) {
            message = Some(format!(
                "a parameter exceeded the divergence guard {}; monotone likelihood or separation",
                options.divergence_guard
            ));
            break;
        }
    }

    let gradient_norm_at_exit = sup_norm(&eval.residual) / n;
    let (covariance, standard_errors, cov_note) =
        covariance_or_nan(&eval.jacobian, &eval.per_subject_scores);
    if let Some(note) = cov_note {
        message = Some(match message {
            Some(m) => format!("{m}; {note}"),
            None => note,
        });
    }
    Ok(FitResult {
        estimate: ParameterVector::from_values(layout, theta)?,
        covariance,
        standard_errors,
        log_likelihood: None,
        iterations,
        converged,
        gradient_norm_at_exit,
        message,
    })
}

/// Newton step for root finding: solves `J d = -r` by LU, with a ridge that
/// pushes the Jacobian away from singularity (J is negative-definite-like, so
/// the ridge is subtracted).
fn solve_root_step(
    jacobian: &DMatrix<f64>,
    residual: &DVector<f64>,
    base_ridge: f64,
) -> Result<DVector<f64>> {
    let dim = residual.len();
    if dim == 0 {
        return Ok(DVector::zeros(0));
    }
    let rhs = -residual;
    if let Some(d) = jacobian.clone().lu().solve(&rhs) {
        if d.iter().all(|v| v.is_finite()) {
            return Ok(d);
        }
    }
    let mut ridge = base_ridge.max(f64::EPSILON);
    for _ in 0..16 {
        let mut jr = jacobian.clone();
        for i in 0..dim {
            jr[(i, i)] -= ridge;
        }
        if let Some(d) = jr.lu().solve(&rhs) {
            if d.iter().all(|v| v.is_finite()) {
                return Ok(d);
            }
        }
        ridge *= 10.0;
    }
    Err(Error::Numerical("root-finding step solve failed beyond ridge rescue".into()))
}

/// Sandwich covariance with graceful degradation: on failure the covariance
/// is NaN-filled and a diagnostic note is returned instead of an error, so a
/// non-identified fit still reports its point estimates.
fn covariance_or_nan(
    hessian: &DMatrix<f64>,
    scores: &DMatrix<f64>,
) -> (DMatrix<f64>, Vec<f64>, Option<String>) {
    let dim = hessian.nrows();
    match sandwich_covariance(hessian, scores) {
        Ok(cov) => {
            let se = (0..dim).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
            (cov, se, None)
        }
        Err(e) => (
            DMatrix::from_element(dim, dim, f64::NAN),
            vec![f64::NAN; dim],
            Some(format!("covariance unavailable: {e}")),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::ObjectiveEvaluation;
    use crate::model::{Block, ParameterLayout};
    use approx::assert_relative_eq;

    /// Concave quadratic -(theta - 3)^2.
    struct Quadratic {
        layout: ParameterLayout,
    }

    impl Quadratic {
        fn new() -> Self {
            Self { layout: ParameterLayout::new([(Block::Beta(1), 1)]).unwrap() }
        }
    }

    impl Objective for Quadratic {
        fn layout(&self) -> &ParameterLayout {
            &self.layout
        }

        fn value(&self, theta: &[f64]) -> Result<f64> {
            Ok(-(theta[0] - 3.0).powi(2))
        }

        fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEvaluation> {
            let g = DVector::from_vec(vec![-2.0 * (theta[0] - 3.0)]);
            let h = DMatrix::from_vec(1, 1, vec![-2.0]);
            let s = DMatrix::from_vec(1, 1, vec![g[0]]);
            Ok(ObjectiveEvaluation { value: self.value(theta)?, gradient: g, hessian: h, per_subject_scores: s })
        }
    }

    #[test]
    fn quadratic_converges_in_one_iteration() {
        let obj = Quadratic::new();
        let fit = maximize(&obj, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations, 1);
        assert_relative_eq!(fit.estimate.values()[0], 3.0, max_relative = 1e-12);
    }

    /// Monotone objective log(expit(theta)): optimum at +infinity.
    struct Monotone {
        layout: ParameterLayout,
    }

    impl Objective for Monotone {
        fn layout(&self) -> &ParameterLayout {
            &self.layout
        }

        fn value(&self, theta: &[f64]) -> Result<f64> {
            Ok(crate::math::log_expit(theta[0]))
        }

        fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEvaluation> {
            let p = crate::math::expit(theta[0]);
            let g = DVector::from_vec(vec![1.0 - p]);
            let h = DMatrix::from_vec(1, 1, vec![-p * (1.0 - p)]);
            let s = DMatrix::from_vec(1, 1, vec![g[0]]);
            Ok(ObjectiveEvaluation { value: self.value(theta)?, gradient: g, hessian: h, per_subject_scores: s })
        }
    }

    #[test]
    fn monotone_likelihood_is_flagged() {
        let obj = Monotone { layout: ParameterLayout::new([(Block::Beta(1), 1)]).unwrap() };
        let fit = maximize(&obj, &FitOptions::default()).unwrap();
        assert!(!fit.converged);
        let msg = fit.message.as_deref().unwrap_or("");
        assert!(
            msg.contains("monotone") || msg.contains("divergence guard"),
            "message: {msg}"
        );
        // The estimate drifted far from any finite optimum.
        assert!(fit.estimate.values()[0] > 20.0);
    }
}
