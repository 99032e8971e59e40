//! Logistic models for the probability of observing the subtype.
//!
//! A model is a list of named terms; the coefficient vector gamma aligns with
//! the term list. The kind restricts which inputs the terms may read:
//!
//! * `LogisticOfQ`      — auxiliary category only (plus intercept);
//! * `LogisticOfTxq`    — time thresholds, covariates, auxiliary category;
//! * `LogisticOfTxy`    — time thresholds, covariates, subtype indicators
//!   (never the auxiliary variable).
//!
//! An empty term list is allowed and gives the constant `pi = expit(0) = 1/2`;
//! constant observation probabilities cancel from every partial likelihood, so
//! this is the natural configuration when there is nothing to model.

use crate::error::{Error, Result};
use crate::math::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissKind {
    LogisticOfQ,
    LogisticOfTxq,
    LogisticOfTxy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MissTerm {
    Intercept,
    /// Indicator `I{Q = level}`, `level >= 1` (level 0 is the reference).
    AuxCategory(usize),
    /// Covariate by column index.
    Covariate(usize),
    /// Indicator `I{t > threshold}`.
    TimeAbove(f64),
    /// Indicator `I{Y = k}`, `k >= 2` (subtype 1 is the reference).
    SubtypeIs(usize),
}

impl MissTerm {
    pub fn name(&self) -> String {
        match self {
            MissTerm::Intercept => "gamma.intercept".into(),
            MissTerm::AuxCategory(l) => format!("gamma.q{l}"),
            MissTerm::Covariate(j) => format!("gamma.x{j}"),
            MissTerm::TimeAbove(c) => format!("gamma.t>{c}"),
            MissTerm::SubtypeIs(k) => format!("gamma.y{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessModel {
    kind: MissKind,
    terms: Vec<MissTerm>,
}

/// Inputs a missingness model may read. Fields irrelevant to the model kind
/// are ignored.
#[derive(Debug, Clone, Copy)]
pub struct MissInputs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub q: Option<usize>,
    pub y: Option<usize>,
}

impl MissingnessModel {
    pub fn new(kind: MissKind, terms: Vec<MissTerm>) -> Result<Self> {
        for term in &terms {
            let ok = match (kind, term) {
                (_, MissTerm::Intercept) => true,
                (MissKind::LogisticOfQ, MissTerm::AuxCategory(_)) => true,
                (MissKind::LogisticOfQ, _) => false,
                (MissKind::LogisticOfTxq, MissTerm::SubtypeIs(_)) => false,
                (MissKind::LogisticOfTxq, _) => true,
                (MissKind::LogisticOfTxy, MissTerm::AuxCategory(_)) => false,
                (MissKind::LogisticOfTxy, _) => true,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "term {term:?} is not allowed in a {kind:?} model"
                )));
            }
            match term {
                MissTerm::AuxCategory(0) => {
                    return Err(Error::Config("aux level 0 is the reference category".into()))
                }
                MissTerm::SubtypeIs(k) if *k < 2 => {
                    return Err(Error::Config("subtype 1 is the reference category".into()))
                }
                _ => {}
            }
        }
        Ok(Self { kind, terms })
    }

    pub fn kind(&self) -> MissKind {
        self.kind
    }

    pub fn terms(&self) -> &[MissTerm] {
        &self.terms
    }

    pub fn gamma_len(&self) -> usize {
        self.terms.len()
    }

    /// True when the model reads neither the auxiliary variable nor the
    /// subtype, i.e. it is a function of (t, x) only.
    pub fn depends_on_t_x_only(&self) -> bool {
        self.terms
            .iter()
            .all(|t| !matches!(t, MissTerm::AuxCategory(_) | MissTerm::SubtypeIs(_)))
    }

    pub fn depends_on_aux(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, MissTerm::AuxCategory(_)))
    }

    pub fn depends_on_subtype(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, MissTerm::SubtypeIs(_)))
    }

    /// Largest time threshold set: the distinct `TimeAbove` cut points.
    pub fn time_thresholds(&self) -> Vec<f64> {
        let mut cs: Vec<f64> = self
            .terms
            .iter()
            .filter_map(|t| match t {
                MissTerm::TimeAbove(c) => Some(*c),
                _ => None,
            })
            .collect();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        cs
    }

    /// Feature value of one term.
    fn feature(&self, term: &MissTerm, inputs: &MissInputs) -> Result<f64> {
        Ok(match term {
            MissTerm::Intercept => 1.0,
            MissTerm::AuxCategory(l) => {
                let q = inputs.q.ok_or_else(|| {
                    Error::Data("missingness model needs the auxiliary value".into())
                })?;
                if q == *l {
                    1.0
                } else {
                    0.0
                }
            }
            MissTerm::Covariate(j) => *inputs.x.get(*j).ok_or_else(|| {
                Error::Domain(format!("covariate index {j} out of range"))
            })?,
            MissTerm::TimeAbove(c) => {
                if inputs.t > *c {
                    1.0
                } else {
                    0.0
                }
            }
            MissTerm::SubtypeIs(k) => {
                let y = inputs
                    .y
                    .ok_or_else(|| Error::Data("missingness model needs the subtype".into()))?;
                if y == *k {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Fills `z` with the feature vector (length `gamma_len`).
    pub fn features(&self, inputs: &MissInputs, z: &mut [f64]) -> Result<()> {
        debug_assert_eq!(z.len(), self.terms.len());
        for (slot, term) in z.iter_mut().zip(&self.terms) {
            *slot = self.feature(term, inputs)?;
        }
        Ok(())
    }

    /// Linear predictor `gamma' z`.
    pub fn linear_predictor(&self, gamma: &[f64], inputs: &MissInputs) -> Result<f64> {
        if gamma.len() != self.terms.len() {
            return Err(Error::Domain(format!(
                "gamma has length {}, model has {} terms",
                gamma.len(),
                self.terms.len()
            )));
        }
        let mut lp = 0.0;
        for (coef, term) in gamma.iter().zip(&self.terms) {
            lp += coef * self.feature(term, inputs)?;
        }
        if !lp.is_finite() {
            return Err(Error::Domain("non-finite linear predictor".into()));
        }
        Ok(lp)
    }

    /// `P(O=1 | inputs)`, clamped into the open unit interval.
    pub fn pi_eval(&self, gamma: &[f64], inputs: &MissInputs) -> Result<f64> {
        let lp = self.linear_predictor(gamma, inputs)?;
        Ok(expit(lp).clamp(1e-15, 1.0 - 1e-15))
    }

    pub fn param_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::expit;
    use approx::assert_relative_eq;

    fn inputs<'a>(t: f64, x: &'a [f64], q: Option<usize>, y: Option<usize>) -> MissInputs<'a> {
        MissInputs { t, x, q, y }
    }

    #[test]
    fn logistic_of_q_at_zero() {
        let m = MissingnessModel::new(
            MissKind::LogisticOfQ,
            vec![MissTerm::Intercept, MissTerm::AuxCategory(1)],
        )
        .unwrap();
        let p = m.pi_eval(&[0.0, 1.7], &inputs(3.0, &[], Some(0), None)).unwrap();
        assert_relative_eq!(p, 0.5);
    }

    #[test]
    fn txq_paper_form() {
        // expit(gamma_q * q + 0.5 x - 0.01 I{t > 50}) at q=1, x=0, t=60.
        let gq = 1.3;
        let m = MissingnessModel::new(
            MissKind::LogisticOfTxq,
            vec![MissTerm::AuxCategory(1), MissTerm::Covariate(0), MissTerm::TimeAbove(50.0)],
        )
        .unwrap();
        let p = m.pi_eval(&[gq, 0.5, -0.01], &inputs(60.0, &[0.0], Some(1), None)).unwrap();
        assert_relative_eq!(p, expit(gq - 0.01), max_relative = 1e-14);
    }

    #[test]
    fn txy_paper_form() {
        // expit(gamma_y I{y=2} - 0.01 I{t>50} + 0.5 x) at y=2, t=60, x=1.
        let gy = 0.9;
        let m = MissingnessModel::new(
            MissKind::LogisticOfTxy,
            vec![MissTerm::SubtypeIs(2), MissTerm::TimeAbove(50.0), MissTerm::Covariate(0)],
        )
        .unwrap();
        let p = m.pi_eval(&[gy, -0.01, 0.5], &inputs(60.0, &[1.0], None, Some(2))).unwrap();
        assert_relative_eq!(p, expit(gy - 0.01 + 0.5), max_relative = 1e-14);
    }

    #[test]
    fn kind_restrictions() {
        assert!(MissingnessModel::new(MissKind::LogisticOfQ, vec![MissTerm::Covariate(0)]).is_err());
        assert!(
            MissingnessModel::new(MissKind::LogisticOfTxq, vec![MissTerm::SubtypeIs(2)]).is_err()
        );
        assert!(
            MissingnessModel::new(MissKind::LogisticOfTxy, vec![MissTerm::AuxCategory(1)]).is_err()
        );
        assert!(MissingnessModel::new(MissKind::LogisticOfQ, vec![MissTerm::AuxCategory(0)]).is_err());
    }

    #[test]
    fn probability_in_open_interval_and_monotone() {
        let m = MissingnessModel::new(
            MissKind::LogisticOfTxq,
            vec![MissTerm::Intercept, MissTerm::Covariate(0)],
        )
        .unwrap();
        let mut prev = 0.0;
        for i in 0..60 {
            let x = -15.0 + i as f64 * 0.5;
            let p = m.pi_eval(&[0.2, 1.0], &inputs(1.0, &[x], Some(0), None)).unwrap();
            assert!(p > 0.0 && p < 1.0);
            assert!(p >= prev, "monotone in the covariate direction");
            prev = p;
        }
        // Negative coefficient reverses the direction.
        let hi = m.pi_eval(&[0.2, -1.0], &inputs(1.0, &[-3.0], None, None)).unwrap();
        let lo = m.pi_eval(&[0.2, -1.0], &inputs(1.0, &[3.0], None, None)).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn empty_model_is_constant_half() {
        let m = MissingnessModel::new(MissKind::LogisticOfTxq, vec![]).unwrap();
        let p = m.pi_eval(&[], &inputs(1.0, &[], None, None)).unwrap();
        assert_relative_eq!(p, 0.5);
        assert!(m.depends_on_t_x_only());
    }
}
