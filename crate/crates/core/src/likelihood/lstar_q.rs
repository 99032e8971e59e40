//! Partial likelihood with auxiliary case covariates.
//!
//! Conditioning on the occurrence of an event (but not its subtype) and on the
//! auxiliary value factors the likelihood into a missingness part that only
//! involves gamma and an informative part that involves (beta, eta, psi):
//!
//! * `Lq1`: Bernoulli likelihood of the observation indicator — diagnostic
//!   only, never used for hazard estimation;
//! * `Lq2`: the informative factor maximized for (beta, eta, psi). It never
//!   reads a missingness model, which is what makes the fit robust to a
//!   misspecified observation process.

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::inference::Objective;
use crate::likelihood::bernoulli::eval_bernoulli_o;
use crate::likelihood::engine::{EvalMode, EvalOutput};
use crate::likelihood::mixture::{eval_mixture, MixtureFactor};
use crate::likelihood::ObjectiveEvaluation;
use crate::math::{log_expit, log_one_minus_expit};
use crate::model::{
    BaselineRatioSpec, Block, MissInputs, MissKind, MissingnessModel, NuModel, ParameterLayout,
    ParameterVector,
};

pub(crate) struct NuFactor<'a> {
    pub nu: &'a NuModel,
}

impl MixtureFactor for NuFactor<'_> {
    fn block(&self) -> Block {
        Block::Psi
    }

    fn coef_len(&self) -> usize {
        self.nu.psi_len()
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if self.nu.num_levels() > 1 && !data.every_event_has_aux() {
            return Err(Error::Data("an event record is missing its auxiliary value".into()));
        }
        if let Some(levels) = data.aux_levels() {
            if self.nu.num_levels() > 1 && levels > self.nu.num_levels() {
                return Err(Error::Data(format!(
                    "auxiliary values use {levels} levels, model has {}",
                    self.nu.num_levels()
                )));
            }
        }
        Ok(())
    }

    fn observed(
        &self,
        rec: &SubjectRecord,
        coefs: &[f64],
        mode: EvalMode,
        grad: &mut [f64],
        hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64> {
        let y = rec.subtype.expect("observed event");
        self.missing(rec, y, coefs, mode, grad, hess)
    }

    fn missing(
        &self,
        rec: &SubjectRecord,
        k: usize,
        coefs: &[f64],
        mode: EvalMode,
        grad: &mut [f64],
        hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64> {
        if self.nu.num_levels() == 1 {
            return Ok(0.0);
        }
        let q = rec
            .aux
            .ok_or_else(|| Error::Data("an event record is missing its auxiliary value".into()))?;
        let lf = self.nu.log_nu_unchecked(k, q, coefs);
        if mode.wants_gradient() {
            self.nu.log_nu_grad_unchecked(k, q, coefs, grad);
        }
        if mode.wants_hessian() {
            self.nu.log_nu_hess_unchecked(k, coefs, hess);
        }
        Ok(lf)
    }
}

/// The informative factor: observed-subtype events contribute
/// `log nu_{y_i}(q_i) + log alpha_{y_i}(t_i) + beta_{y_i}' x_i - log D_i`,
/// missing-subtype events marginalize the numerator over subtypes.
pub struct Lq2Likelihood<'a> {
    data: &'a Dataset,
    spec: &'a BaselineRatioSpec,
    nu: &'a NuModel,
    layout: ParameterLayout,
}

impl<'a> Lq2Likelihood<'a> {
    pub fn new(data: &'a Dataset, spec: &'a BaselineRatioSpec, nu: &'a NuModel) -> Result<Self> {
        if nu.num_subtypes() != data.num_subtypes() {
            return Err(Error::Config("auxiliary model subtype count differs from dataset".into()));
        }
        let k = data.num_subtypes();
        let p = data.p();
        let mut blocks: Vec<(Block, usize)> = (1..=k).map(|m| (Block::Beta(m), p)).collect();
        blocks.push((Block::Eta, spec.eta_len()));
        blocks.push((Block::Psi, nu.psi_len()));
        let layout = ParameterLayout::new(blocks)?;
        Ok(Self { data, spec, nu, layout })
    }

    pub(crate) fn eval_mode(&self, theta: &[f64], mode: EvalMode) -> Result<EvalOutput> {
        eval_mixture(self.data, self.spec, &NuFactor { nu: self.nu }, &self.layout, theta, mode)
    }
}

impl Objective for Lq2Likelihood<'_> {
    fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    fn n_units(&self) -> usize {
        self.data.len()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.eval_mode(theta, EvalMode::Value)?.value)
    }

    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEvaluation> {
        ObjectiveEvaluation::from_output(self.eval_mode(theta, EvalMode::Full)?)
    }
}

/// Informative-factor log-likelihood; `theta` must carry beta, eta and psi
/// blocks matching the dataset, spec and auxiliary model.
pub fn loglik_lstar_q2(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    nu: &NuModel,
    theta: &ParameterVector,
) -> Result<ObjectiveEvaluation> {
    let obj = Lq2Likelihood::new(data, spec, nu)?;
    if theta.layout() != obj.layout() {
        // Re-pack by name so callers may order blocks freely.
        let mut values = vec![0.0; obj.layout().dim()];
        for (block, range) in obj.layout().blocks() {
            let src = theta
                .block(block)
                .ok_or_else(|| Error::Config(format!("theta lacks the {block} block")))?;
            if src.len() != range.len() {
                return Err(Error::Config(format!("theta block {block} has the wrong length")));
            }
            values[range].copy_from_slice(src);
        }
        return obj.evaluate(&values);
    }
    obj.evaluate(theta.values())
}

/// Diagnostic missingness factor: Bernoulli likelihood of the observation
/// indicator among events, evaluated at `(t_i, x_i, q_i)`.
pub struct Lq1Likelihood<'a> {
    data: &'a Dataset,
    miss: &'a MissingnessModel,
    layout: ParameterLayout,
}

impl<'a> Lq1Likelihood<'a> {
    pub fn new(data: &'a Dataset, miss: &'a MissingnessModel) -> Result<Self> {
        if !matches!(miss.kind(), MissKind::LogisticOfQ | MissKind::LogisticOfTxq) {
            return Err(Error::Config(
                "the missingness factor conditions on (t, x, q); use a q-compatible model".into(),
            ));
        }
        if miss.depends_on_aux() && !data.every_event_has_aux() {
            return Err(Error::Data("an event record is missing its auxiliary value".into()));
        }
        let layout = ParameterLayout::new([(Block::Gamma, miss.gamma_len())])?;
        Ok(Self { data, miss, layout })
    }

    pub(crate) fn eval_mode(&self, gamma: &[f64], mode: EvalMode) -> Result<EvalOutput> {
        eval_bernoulli_o(self.data, self.miss, gamma, mode)
    }
}

impl Objective for Lq1Likelihood<'_> {
    fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    fn n_units(&self) -> usize {
        self.data.len()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.eval_mode(theta, EvalMode::Value)?.value)
    }

    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEvaluation> {
        ObjectiveEvaluation::from_output(self.eval_mode(theta, EvalMode::Full)?)
    }
}

pub fn loglik_lstar_q1(
    data: &Dataset,
    miss: &MissingnessModel,
    gamma: &[f64],
) -> Result<ObjectiveEvaluation> {
    Lq1Likelihood::new(data, miss)?.evaluate(gamma)
}

/// The full auxiliary-conditioned partial log-likelihood computed directly
/// from its definition (one pass per event over the whole risk set, no shared
/// accumulation). Exists as the independent route for the factorization
/// identity `log Lq1 + log Lq2 = log Lq`; value only.
pub fn loglik_lstar_q_direct(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    nu: &NuModel,
    miss: &MissingnessModel,
    beta: &[f64],
    eta: &[f64],
    psi: &[f64],
    gamma: &[f64],
) -> Result<f64> {
    let k = data.num_subtypes();
    let p = data.p();
    if beta.len() != k * p {
        return Err(Error::Domain("beta must have K*p entries".into()));
    }
    let records = data.records();
    let mut total = 0.0f64;
    for rec in records.iter().filter(|r| r.event) {
        let t = rec.time;
        let stratum = rec.stratum;
        let q = rec
            .aux
            .ok_or_else(|| Error::Data("an event record is missing its auxiliary value".into()))?;
        let inputs = MissInputs { t, x: &rec.covariates, q: Some(q), y: rec.subtype };
        let lp = miss.linear_predictor(gamma, &inputs)?;

        let mut denom = 0.0f64;
        for other in records.iter().filter(|r| r.stratum == stratum && r.time >= t) {
            for m in 1..=k {
                let alpha = spec.alpha_eval(m, t, eta, stratum)?;
                let bx: f64 = beta[(m - 1) * p..m * p]
                    .iter()
                    .zip(&other.covariates)
                    .map(|(b, x)| b * x)
                    .sum();
                denom += alpha * bx.exp();
            }
        }

        let numer = if rec.subtype_observed {
            let y = rec.subtype.expect("observed");
            let alpha = spec.alpha_eval(y, t, eta, stratum)?;
            let bx: f64 =
                beta[(y - 1) * p..y * p].iter().zip(&rec.covariates).map(|(b, x)| b * x).sum();
            log_expit(lp)
                + nu.nu_eval(y, q, &rec.covariates, t, psi)?.ln()
                + alpha.ln()
                + bx
        } else {
            let mut s = 0.0f64;
            for m in 1..=k {
                let alpha = spec.alpha_eval(m, t, eta, stratum)?;
                let bx: f64 = beta[(m - 1) * p..m * p]
                    .iter()
                    .zip(&rec.covariates)
                    .map(|(b, x)| b * x)
                    .sum();
                s += nu.nu_eval(m, q, &rec.covariates, t, psi)? * alpha * bx.exp();
            }
            log_one_minus_expit(lp) + s.ln()
        };
        total += numer - denom.ln();
    }
    Ok(total)
}
