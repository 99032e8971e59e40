//! Distribution of the auxiliary case covariate given the subtype.
//!
//! v1 restricts the auxiliary variable to a single categorical variable whose
//! distribution depends on the subtype only: a multinomial logit per subtype,
//! `nu_k(q) = P(Q=q | Y=k)`. Dependence on covariates or time is an extension
//! point; `nu_eval` keeps both in its signature.

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

#[derive(Debug, Clone, PartialEq)]
pub struct NuModel {
    num_subtypes: usize,
    num_levels: usize,
}

impl NuModel {
    /// Categorical-by-subtype model with `num_levels` auxiliary categories.
    /// `num_levels = 1` is the degenerate no-auxiliary model (`nu == 1`,
    /// empty psi block).
    pub fn categorical(num_subtypes: usize, num_levels: usize) -> Result<Self> {
        if num_subtypes == 0 {
            return Err(Error::Domain("need at least one subtype".into()));
        }
        if num_levels == 0 {
            return Err(Error::Domain("need at least one auxiliary level".into()));
        }
        Ok(Self { num_subtypes, num_levels })
    }

    /// Binary auxiliary variable: one logit per subtype,
    /// `P(Q=1 | Y=k) = expit(psi_k)`.
    pub fn binary(num_subtypes: usize) -> Result<Self> {
        Self::categorical(num_subtypes, 2)
    }

    /// Degenerate model with no auxiliary information (`nu == 1`).
    pub fn degenerate(num_subtypes: usize) -> Result<Self> {
        Self::categorical(num_subtypes, 1)
    }

    pub fn num_subtypes(&self) -> usize {
        self.num_subtypes
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn psi_len(&self) -> usize {
        self.num_subtypes * (self.num_levels - 1)
    }

    fn row(&self, k: usize) -> usize {
        (k - 1) * (self.num_levels - 1)
    }

    fn check(&self, k: usize, q: usize, psi: &[f64]) -> Result<()> {
        if k == 0 || k > self.num_subtypes {
            return Err(Error::Domain(format!(
                "subtype {k} out of range 1..={}",
                self.num_subtypes
            )));
        }
        if q >= self.num_levels {
            return Err(Error::Domain(format!(
                "auxiliary level {q} out of range 0..{}",
                self.num_levels
            )));
        }
        if psi.len() != self.psi_len() {
            return Err(Error::Domain(format!(
                "psi has length {}, model requires {}",
                psi.len(),
                self.psi_len()
            )));
        }
        Ok(())
    }

    /// `log nu_k(q)`; arguments assumed valid.
    pub(crate) fn log_nu_unchecked(&self, k: usize, q: usize, psi: &[f64]) -> f64 {
        if self.num_levels == 1 {
            return 0.0;
        }
        let row = self.row(k);
        let coefs = &psi[row..row + self.num_levels - 1];
        let mut terms = Vec::with_capacity(self.num_levels);
        terms.push(0.0);
        terms.extend_from_slice(coefs);
        let norm = log_sum_exp(&terms).expect("non-empty");
        let num = if q == 0 { 0.0 } else { coefs[q - 1] };
        num - norm
    }

    /// Gradient of `log nu_k(q)` with respect to psi, scattered into `grad`
    /// (full psi length, caller zeroes).
    pub(crate) fn log_nu_grad_unchecked(&self, k: usize, q: usize, psi: &[f64], grad: &mut [f64]) {
        if self.num_levels == 1 {
            return;
        }
        let row = self.row(k);
        for l in 1..self.num_levels {
            let p_l = self.log_nu_unchecked(k, l, psi).exp();
            grad[row + l - 1] = if q == l { 1.0 - p_l } else { -p_l };
        }
    }

    /// Hessian of `log nu_k(q)` with respect to psi as sparse triplets
    /// (independent of `q`): `-(diag(p) - p p')` on subtype `k`'s row block.
    pub(crate) fn log_nu_hess_unchecked(
        &self,
        k: usize,
        psi: &[f64],
        out: &mut Vec<(usize, usize, f64)>,
    ) {
        out.clear();
        if self.num_levels == 1 {
            return;
        }
        let row = self.row(k);
        let probs: Vec<f64> =
            (1..self.num_levels).map(|l| self.log_nu_unchecked(k, l, psi).exp()).collect();
        for a in 0..self.num_levels - 1 {
            for b in 0..self.num_levels - 1 {
                let d = if a == b { probs[a] } else { 0.0 };
                out.push((row + a, row + b, -(d - probs[a] * probs[b])));
            }
        }
    }

    /// `P(Q=q | Y=k, X=x, T=t)`. The covariate and time arguments are ignored
    /// in the categorical-by-subtype model but kept for forward compatibility.
    pub fn nu_eval(&self, k: usize, q: usize, _x: &[f64], _t: f64, psi: &[f64]) -> Result<f64> {
        self.check(k, q, psi)?;
        Ok(self.log_nu_unchecked(k, q, psi).exp())
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.psi_len());
        for k in 1..=self.num_subtypes {
            for q in 1..self.num_levels {
                if self.num_levels == 2 {
                    names.push(format!("psi{k}"));
                } else {
                    names.push(format!("psi{k}.q{q}"));
                }
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logit;
    use approx::assert_relative_eq;

    #[test]
    fn binary_zero_logit_gives_half() {
        let nu = NuModel::binary(2).unwrap();
        assert_relative_eq!(nu.nu_eval(1, 1, &[], 0.0, &[0.0, 0.3]).unwrap(), 0.5);
    }

    #[test]
    fn binary_matches_target_probabilities() {
        let nu = NuModel::binary(2).unwrap();
        let psi = [logit(0.25).unwrap(), logit(0.5).unwrap()];
        assert_relative_eq!(nu.nu_eval(1, 1, &[], 0.0, &psi).unwrap(), 0.25, max_relative = 1e-12);
        assert_relative_eq!(nu.nu_eval(2, 1, &[], 0.0, &psi).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn sums_to_one_over_support() {
        let nu = NuModel::categorical(2, 4).unwrap();
        let psi = [0.3, -1.2, 0.8, 2.0, -0.5, 0.1];
        for k in 1..=2 {
            let total: f64 = (0..4).map(|q| nu.nu_eval(k, q, &[], 0.0, &psi).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "k={k} total={total}");
            for q in 0..4 {
                let p = nu.nu_eval(k, q, &[], 0.0, &psi).unwrap();
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn degenerate_model_is_constant_one() {
        let nu = NuModel::degenerate(3).unwrap();
        assert_eq!(nu.psi_len(), 0);
        assert_eq!(nu.nu_eval(2, 0, &[], 1.0, &[]).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_level_is_domain_error() {
        let nu = NuModel::binary(2).unwrap();
        assert!(nu.nu_eval(1, 2, &[], 0.0, &[0.0, 0.0]).is_err());
        assert!(nu.nu_eval(0, 0, &[], 0.0, &[0.0, 0.0]).is_err());
    }
}
