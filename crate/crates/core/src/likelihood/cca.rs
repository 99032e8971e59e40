//! Complete-case cause-specific Cox partial likelihood.
//!
//! Events with observed subtype contribute
//! `beta_{y_i}' x_i - log sum_{j in risk set} exp(beta_{y_i}' x_j)`;
//! the baseline ratio `alpha_{y_i}(t_i)` appears in both the numerator and
//! the denominator of the hazard ratio and cancels exactly, so the value
//! carries no information about eta. Missing-subtype events are retained in
//! risk sets (they are censored at their event time); `Dataset::
//! drop_missing_subtype_rows` implements the full-removal sensitivity mode.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::Objective;
use crate::likelihood::engine::{EvalMode, EvalOutput, RiskSums};
use crate::likelihood::ObjectiveEvaluation;
use crate::model::{BaselineRatioSpec, Block, ParameterLayout};
use nalgebra::{DMatrix, DVector};

pub struct CcaLikelihood<'a> {
    data: &'a Dataset,
    layout: ParameterLayout,
}

impl<'a> CcaLikelihood<'a> {
    pub fn new(data: &'a Dataset) -> Result<Self> {
        if data.n_observed_subtype() == 0 {
            return Err(Error::Fit("no usable events".into()));
        }
        let k = data.num_subtypes();
        let p = data.p();
        let layout = ParameterLayout::new((1..=k).map(|m| (Block::Beta(m), p)))?;
        Ok(Self { data, layout })
    }

    pub(crate) fn eval_mode(&self, theta: &[f64], mode: EvalMode) -> Result<EvalOutput> {
        let data = self.data;
        let n = data.len();
        let k = data.num_subtypes();
        let p = data.p();
        let dim = self.layout.dim();
        if theta.len() != dim {
            return Err(Error::Domain(format!(
                "theta has length {}, layout requires {dim}",
                theta.len()
            )));
        }
        let beta_ranges: Vec<std::ops::Range<usize>> =
            (1..=k).map(|m| self.layout.beta(m)).collect::<Result<_>>()?;
        let records = data.records();
        let mut lrr = vec![0.0f64; n * k];
        for (j, rec) in records.iter().enumerate() {
            for m in 0..k {
                let beta_m = &theta[beta_ranges[m].clone()];
                lrr[j * k + m] =
                    beta_m.iter().zip(&rec.covariates).map(|(b, x)| b * x).sum::<f64>();
            }
        }

        let mut out = EvalOutput::new(dim, n, mode);
        let mut sums: Vec<RiskSums> =
            (0..k).map(|_| RiskSums::new(p, mode.wants_hessian())).collect();
        let mut r1 = vec![0.0f64; p];
        let mut r2 = vec![0.0f64; p * p];
        let mut score = DVector::zeros(dim);
        let mut hterm = DMatrix::zeros(dim, dim);

        for stratum in 0..data.num_strata() {
            for s in sums.iter_mut() {
                s.reset();
            }
            let order = data.stratum_order(stratum);
            let mut i = 0usize;
            while i < order.len() {
                let t = records[order[i]].time;
                let mut j = i;
                while j < order.len() && records[order[j]].time == t {
                    let idx = order[j];
                    for m in 0..k {
                        sums[m].add(lrr[idx * k + m], &records[idx].covariates);
                    }
                    j += 1;
                }
                for &idx in &order[i..j] {
                    let rec = &records[idx];
                    if !rec.subtype_observed {
                        continue;
                    }
                    let y = rec.subtype.expect("validated") - 1;
                    let term = lrr[idx * k + y] - sums[y].log_s0();
                    if mode.wants_gradient() {
                        sums[y].mean(&mut r1);
                        score.fill(0.0);
                        for a in 0..p {
                            score[beta_ranges[y].start + a] = rec.covariates[a] - r1[a];
                        }
                    }
                    if mode.wants_hessian() {
                        sums[y].second_moment(&mut r2);
                        hterm.fill(0.0);
                        for a in 0..p {
                            for b in 0..p {
                                hterm[(beta_ranges[y].start + a, beta_ranges[y].start + b)] =
                                    -(r2[a * p + b] - r1[a] * r1[b]);
                            }
                        }
                    }
                    out.add_term(
                        idx,
                        term,
                        mode.wants_gradient().then_some(&score),
                        mode.wants_hessian().then_some(&hterm),
                    );
                }
                i = j;
            }
        }
        Ok(out)
    }
}

impl Objective for CcaLikelihood<'_> {
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

/// Complete-case partial log-likelihood with derivatives over the beta
/// blocks. `beta` is the flattened `K * p` coefficient vector; `eta` is
/// accepted for interface parity but cancels from every term.
pub fn loglik_cca(
    data: &Dataset,
    _spec: &BaselineRatioSpec,
    beta: &[f64],
    _eta: &[f64],
) -> Result<ObjectiveEvaluation> {
    CcaLikelihood::new(data)?.evaluate(beta)
}
