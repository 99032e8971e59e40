//! Bernoulli log-likelihood of the subtype-observation indicator among events.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::engine::{EvalMode, EvalOutput};
use crate::math::{expit, log_expit, log_one_minus_expit};
use crate::model::{MissInputs, MissingnessModel};
use nalgebra::{DMatrix, DVector};

/// `sum over events of O_i log pi_i + (1 - O_i) log(1 - pi_i)` with the
/// logistic score and information; dimension equals the model's gamma length.
pub(crate) fn eval_bernoulli_o(
    data: &Dataset,
    miss: &MissingnessModel,
    gamma: &[f64],
    mode: EvalMode,
) -> Result<EvalOutput> {
    let g = miss.gamma_len();
    if gamma.len() != g {
        return Err(Error::Domain(format!(
            "gamma has length {}, model has {g} terms",
            gamma.len()
        )));
    }
    let n = data.len();
    let mut out = EvalOutput::new(g, n, mode);
    let mut z = vec![0.0f64; g];
    let mut score = DVector::zeros(g);
    let mut hterm = DMatrix::zeros(g, g);
    for (i, rec) in data.records().iter().enumerate() {
        if !rec.event {
            continue;
        }
        let inputs = MissInputs { t: rec.time, x: &rec.covariates, q: rec.aux, y: rec.subtype };
        miss.features(&inputs, &mut z)?;
        let lp: f64 = gamma.iter().zip(&z).map(|(c, f)| c * f).sum();
        let value = if rec.subtype_observed { log_expit(lp) } else { log_one_minus_expit(lp) };
        if mode.wants_gradient() {
            let pi = expit(lp);
            let resid = if rec.subtype_observed { 1.0 - pi } else { -pi };
            for (a, f) in z.iter().enumerate() {
                score[a] = resid * f;
            }
            if mode.wants_hessian() {
                let w = pi * (1.0 - pi);
                hterm.fill(0.0);
                for a in 0..g {
                    for b in 0..g {
                        hterm[(a, b)] = -w * z[a] * z[b];
                    }
                }
            }
        }
        out.add_term(
            i,
            value,
            mode.wants_gradient().then_some(&score),
            mode.wants_hessian().then_some(&hterm),
        );
    }
    Ok(out)
}
