//! Joint likelihood for subtype-dependent (NMAR) missingness.
//!
//! The observation probability `pi(t, x, y)` depends on the possibly
//! unobserved subtype, so the likelihood does not factor and gamma must be
//! estimated jointly with (beta, eta): observed-subtype events contribute
//! `log pi(t_i, x_i, y_i)`, missing-subtype events marginalize
//! `pibar(t_i, x_i, k)` over candidate subtypes inside the numerator.

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::inference::Objective;
use crate::likelihood::engine::{EvalMode, EvalOutput};
use crate::likelihood::mixture::{eval_mixture, MixtureFactor};
use crate::likelihood::ObjectiveEvaluation;
use crate::math::{expit, log_expit, log_one_minus_expit};
use crate::model::{
    BaselineRatioSpec, Block, MissInputs, MissKind, MissingnessModel, ParameterLayout,
};

pub(crate) struct PiFactor<'a> {
    pub miss: &'a MissingnessModel,
}

impl PiFactor<'_> {
    fn log_factor(
        &self,
        rec: &SubjectRecord,
        k: usize,
        observed: bool,
        coefs: &[f64],
        mode: EvalMode,
        grad: &mut [f64],
        hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64> {
        let g = coefs.len();
        let inputs = MissInputs { t: rec.time, x: &rec.covariates, q: None, y: Some(k) };
        let mut z = vec![0.0f64; g];
        self.miss.features(&inputs, &mut z)?;
        let lp: f64 = coefs.iter().zip(&z).map(|(c, f)| c * f).sum();
        let value = if observed { log_expit(lp) } else { log_one_minus_expit(lp) };
        if mode.wants_gradient() {
            let pi = expit(lp);
            let scale = if observed { 1.0 - pi } else { -pi };
            for (a, f) in z.iter().enumerate() {
                grad[a] = scale * f;
            }
            if mode.wants_hessian() {
                let w = pi * (1.0 - pi);
                for a in 0..g {
                    for b in 0..g {
                        hess.push((a, b, -w * z[a] * z[b]));
                    }
                }
            }
        }
        Ok(value)
    }
}

impl MixtureFactor for PiFactor<'_> {
    fn block(&self) -> Block {
        Block::Gamma
    }

    fn coef_len(&self) -> usize {
        self.miss.gamma_len()
    }

    fn validate(&self, _data: &Dataset) -> Result<()> {
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
        self.log_factor(rec, y, true, coefs, mode, grad, hess)
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
        self.log_factor(rec, k, false, coefs, mode, grad, hess)
    }
}

pub struct LyLikelihood<'a> {
    data: &'a Dataset,
    spec: &'a BaselineRatioSpec,
    miss: &'a MissingnessModel,
    layout: ParameterLayout,
}

impl<'a> LyLikelihood<'a> {
    pub fn new(
        data: &'a Dataset,
        spec: &'a BaselineRatioSpec,
        miss: &'a MissingnessModel,
    ) -> Result<Self> {
        if miss.kind() != MissKind::LogisticOfTxy {
            return Err(Error::Config(
                "the NMAR likelihood requires a missingness model in (t, x, y); \
                 models reading the auxiliary value are not allowed"
                    .into(),
            ));
        }
        let k = data.num_subtypes();
        let p = data.p();
        let mut blocks: Vec<(Block, usize)> = (1..=k).map(|m| (Block::Beta(m), p)).collect();
        blocks.push((Block::Eta, spec.eta_len()));
        blocks.push((Block::Gamma, miss.gamma_len()));
        let layout = ParameterLayout::new(blocks)?;
        Ok(Self { data, spec, miss, layout })
    }

    pub(crate) fn eval_mode(&self, theta: &[f64], mode: EvalMode) -> Result<EvalOutput> {
        eval_mixture(self.data, self.spec, &PiFactor { miss: self.miss }, &self.layout, theta, mode)
    }
}

impl Objective for LyLikelihood<'_> {
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

/// NMAR log-likelihood with joint derivatives in (beta, eta, gamma). `beta`
/// is the flattened `K * p` coefficient vector.
pub fn loglik_lstar_y(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    miss: &MissingnessModel,
    beta: &[f64],
    eta: &[f64],
    gamma: &[f64],
) -> Result<ObjectiveEvaluation> {
    let obj = LyLikelihood::new(data, spec, miss)?;
    let mut theta = Vec::with_capacity(obj.layout().dim());
    theta.extend_from_slice(beta);
    theta.extend_from_slice(eta);
    theta.extend_from_slice(gamma);
    obj.evaluate(&theta)
}
