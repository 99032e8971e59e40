//! Baseline hazard ratio functions `alpha_k(t)`.
//!
//! Subtype 1 is the reference: `alpha_1(t) = 1` for every `t` and stratum.
//! Two parametric families are supported for `k >= 2`:
//!
//! * power law: `alpha_k(t) = eta_{k,1} * t^{eta_{k,2}}`, parameters stored on
//!   the natural scale `(scale, shape)`;
//! * piecewise constant on intervals defined by sorted cut points, levels
//!   stored on the log scale so positivity never needs a projection.
//!
//! With `num_strata > 1` every stratum owns an independent parameter copy.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineForm {
    PowerLaw,
    /// Cut points are sorted, strictly increasing and finite; they split
    /// `(0, inf)` into left-closed right-open intervals.
    PiecewiseConstant { cuts: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRatioSpec {
    form: BaselineForm,
    num_subtypes: usize,
    num_strata: usize,
}

impl BaselineRatioSpec {
    pub fn power_law(num_subtypes: usize) -> Result<Self> {
        Self::new(BaselineForm::PowerLaw, num_subtypes, 1)
    }

    pub fn piecewise(num_subtypes: usize, cuts: Vec<f64>) -> Result<Self> {
        Self::new(BaselineForm::PiecewiseConstant { cuts }, num_subtypes, 1)
    }

    pub fn new(form: BaselineForm, num_subtypes: usize, num_strata: usize) -> Result<Self> {
        if num_subtypes == 0 {
            return Err(Error::Domain("need at least one subtype".into()));
        }
        if num_strata == 0 {
            return Err(Error::Domain("need at least one stratum".into()));
        }
        if let BaselineForm::PiecewiseConstant { cuts } = &form {
            if cuts.iter().any(|c| !c.is_finite() || *c <= 0.0) {
                return Err(Error::Domain("cut points must be finite and positive".into()));
            }
            if cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain("cut points must be strictly increasing".into()));
            }
        }
        Ok(Self { form, num_subtypes, num_strata })
    }

    pub fn with_strata(mut self, num_strata: usize) -> Result<Self> {
        if num_strata == 0 {
            return Err(Error::Domain("need at least one stratum".into()));
        }
        self.num_strata = num_strata;
        Ok(self)
    }

    pub fn form(&self) -> &BaselineForm {
        &self.form
    }

    pub fn num_subtypes(&self) -> usize {
        self.num_subtypes
    }

    pub fn num_strata(&self) -> usize {
        self.num_strata
    }

    /// Free parameters per non-reference subtype within one stratum.
    pub fn params_per_subtype(&self) -> usize {
        match &self.form {
            BaselineForm::PowerLaw => 2,
            BaselineForm::PiecewiseConstant { cuts } => cuts.len() + 1,
        }
    }

    /// Total length of the eta block.
    pub fn eta_len(&self) -> usize {
        self.num_strata * (self.num_subtypes - 1) * self.params_per_subtype()
    }

    /// Offset of subtype `k`'s parameters (`k >= 2`) for `stratum` within eta.
    fn block_start(&self, k: usize, stratum: usize) -> usize {
        (stratum * (self.num_subtypes - 1) + (k - 2)) * self.params_per_subtype()
    }

    fn check_args(&self, k: usize, t: f64, stratum: usize, eta: &[f64]) -> Result<()> {
        if k == 0 || k > self.num_subtypes {
            return Err(Error::Domain(format!(
                "subtype {k} out of range 1..={}",
                self.num_subtypes
            )));
        }
        if stratum >= self.num_strata {
            return Err(Error::Domain(format!(
                "stratum {stratum} out of range for {} strata",
                self.num_strata
            )));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("time must be positive and finite, got {t}")));
        }
        if eta.len() != self.eta_len() {
            return Err(Error::Domain(format!(
                "eta has length {}, spec requires {}",
                eta.len(),
                self.eta_len()
            )));
        }
        Ok(())
    }

    /// `log alpha_k(t)`; zero for the reference subtype.
    ///
    /// Internal fast path: arguments are assumed valid (see `alpha_eval` for
    /// the checked entry point). A non-positive power-law scale yields NaN,
    /// which callers treat as a non-finite objective value.
    pub(crate) fn log_alpha_unchecked(&self, k: usize, t: f64, eta: &[f64], stratum: usize) -> f64 {
        if k == 1 {
            return 0.0;
        }
        let start = self.block_start(k, stratum);
        match &self.form {
            BaselineForm::PowerLaw => {
                let scale = eta[start];
                let shape = eta[start + 1];
                scale.ln() + shape * t.ln()
            }
            BaselineForm::PiecewiseConstant { cuts } => {
                let idx = cuts.partition_point(|c| *c <= t);
                eta[start + idx]
            }
        }
    }

    /// Writes `d log alpha_k(t) / d eta` into `grad` (length `eta_len`,
    /// zeroed by the caller); returns the indices that were touched.
    pub(crate) fn log_alpha_grad_unchecked(
        &self,
        k: usize,
        t: f64,
        eta: &[f64],
        stratum: usize,
        grad: &mut [f64],
    ) {
        if k == 1 {
            return;
        }
        let start = self.block_start(k, stratum);
        match &self.form {
            BaselineForm::PowerLaw => {
                grad[start] = 1.0 / eta[start];
                grad[start + 1] = t.ln();
            }
            BaselineForm::PiecewiseConstant { cuts } => {
                let idx = cuts.partition_point(|c| *c <= t);
                grad[start + idx] = 1.0;
            }
        }
    }

    /// Second derivative of `log alpha_k(t)` with respect to eta. Only the
    /// power-law scale has curvature; the result is reported as a sparse list
    /// of `(row, col, value)` triplets into the eta block.
    pub(crate) fn log_alpha_hess_unchecked(
        &self,
        k: usize,
        _t: f64,
        eta: &[f64],
        stratum: usize,
        out: &mut Vec<(usize, usize, f64)>,
    ) {
        out.clear();
        if k == 1 {
            return;
        }
        let start = self.block_start(k, stratum);
        if let BaselineForm::PowerLaw = self.form {
            let scale = eta[start];
            out.push((start, start, -1.0 / (scale * scale)));
        }
    }

    /// `alpha_k(t)` with full argument checking; exactly 1 for `k = 1`.
    pub fn alpha_eval(&self, k: usize, t: f64, eta: &[f64], stratum: usize) -> Result<f64> {
        self.check_args(k, t, stratum, eta)?;
        if k == 1 {
            return Ok(1.0);
        }
        let v = self.log_alpha_unchecked(k, t, eta, stratum).exp();
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!(
                "alpha_{k}({t}) evaluated to {v}; eta invalid for this form"
            )));
        }
        Ok(v)
    }

    /// `alpha_k(t) * exp(beta_k' x)`, the baseline-free factor of the
    /// subtype-`k` hazard.
    pub fn relative_hazard(
        &self,
        k: usize,
        t: f64,
        x: &[f64],
        beta_k: &[f64],
        eta: &[f64],
        stratum: usize,
    ) -> Result<f64> {
        if x.len() != beta_k.len() {
            return Err(Error::Domain(format!(
                "covariate length {} does not match beta length {}",
                x.len(),
                beta_k.len()
            )));
        }
        let alpha = self.alpha_eval(k, t, eta, stratum)?;
        let lin: f64 = x.iter().zip(beta_k).map(|(a, b)| a * b).sum();
        Ok(alpha * lin.exp())
    }

    /// Descriptive names of the eta entries, e.g. `eta2.scale` or
    /// `eta2.level0`, with an `@s<stratum>` suffix when stratified.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.eta_len());
        for s in 0..self.num_strata {
            for k in 2..=self.num_subtypes {
                let suffix = if self.num_strata > 1 { format!("@s{s}") } else { String::new() };
                match &self.form {
                    BaselineForm::PowerLaw => {
                        names.push(format!("eta{k}.scale{suffix}"));
                        names.push(format!("eta{k}.shape{suffix}"));
                    }
                    BaselineForm::PiecewiseConstant { cuts } => {
                        for j in 0..=cuts.len() {
                            names.push(format!("eta{k}.level{j}{suffix}"));
                        }
                    }
                }
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_law_direct_evaluation() {
        let spec = BaselineRatioSpec::power_law(2).unwrap();
        let eta = [0.037, 1.0];
        assert_relative_eq!(spec.alpha_eval(2, 10.0, &eta, 0).unwrap(), 0.37, max_relative = 1e-12);
    }

    #[test]
    fn reference_subtype_is_one_for_any_spec() {
        let power = BaselineRatioSpec::power_law(3).unwrap();
        let pw = BaselineRatioSpec::piecewise(2, vec![1.0, 5.0]).unwrap();
        let eta_p = [0.5, 2.0, 1.5, -1.0];
        let eta_w = [0.3, -0.2, 0.9];
        let mut t = 1e-6;
        for _ in 0..1000 {
            assert_eq!(power.alpha_eval(1, t, &eta_p, 0).unwrap(), 1.0);
            assert_eq!(pw.alpha_eval(1, t, &eta_w, 0).unwrap(), 1.0);
            t *= 1.04;
        }
    }

    #[test]
    fn piecewise_interval_membership() {
        let spec = BaselineRatioSpec::piecewise(2, vec![50.0]).unwrap();
        let eta = [0.5f64.ln(), 2.0f64.ln()];
        assert_relative_eq!(spec.alpha_eval(2, 49.9, &eta, 0).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(spec.alpha_eval(2, 50.0, &eta, 0).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn piecewise_right_continuous_at_cuts() {
        let cuts = vec![2.0, 7.0, 31.0];
        let spec = BaselineRatioSpec::piecewise(2, cuts.clone()).unwrap();
        let eta = [0.1, -0.4, 0.9, 1.3];
        for (j, c) in cuts.iter().enumerate() {
            let at = spec.alpha_eval(2, *c, &eta, 0).unwrap();
            assert_relative_eq!(at, eta[j + 1].exp(), max_relative = 1e-14);
            // Just below the cut we must still be on the previous level.
            let below = spec.alpha_eval(2, c - 1e-9, &eta, 0).unwrap();
            assert_relative_eq!(below, eta[j].exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let spec = BaselineRatioSpec::power_law(2).unwrap();
        let eta = [0.5, 1.0];
        assert!(spec.alpha_eval(0, 1.0, &eta, 0).is_err());
        assert!(spec.alpha_eval(3, 1.0, &eta, 0).is_err());
        assert!(spec.alpha_eval(2, 0.0, &eta, 0).is_err());
        assert!(spec.alpha_eval(2, -1.0, &eta, 0).is_err());
        assert!(spec.alpha_eval(2, 1.0, &eta, 1).is_err());
        assert!(spec.alpha_eval(2, 1.0, &eta[..1], 0).is_err());
    }

    #[test]
    fn relative_hazard_matches_hand_arithmetic() {
        let spec = BaselineRatioSpec::power_law(2).unwrap();
        let eta = [0.037, 1.0];
        // k=2, t=10, x=(1), beta=(0.916): 0.37 * e^0.916
        let v = spec.relative_hazard(2, 10.0, &[1.0], &[0.916], &eta, 0).unwrap();
        assert_relative_eq!(v, 0.37 * 0.916f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(v, 0.9247, max_relative = 5e-4);
        // k=1, beta=0: alpha_1 * exp(0) = 1.
        let one = spec.relative_hazard(1, 3.0, &[2.5], &[0.0], &eta, 0).unwrap();
        assert_eq!(one, 1.0);
        // Zero covariates reduce to alpha_eval.
        let a = spec.relative_hazard(2, 10.0, &[0.0], &[0.916], &eta, 0).unwrap();
        assert_relative_eq!(a, spec.alpha_eval(2, 10.0, &eta, 0).unwrap(), max_relative = 1e-15);
        // Dimension mismatch.
        assert!(spec.relative_hazard(2, 10.0, &[1.0, 2.0], &[0.916], &eta, 0).is_err());
    }

    #[test]
    fn stratified_copies_are_independent() {
        let spec = BaselineRatioSpec::power_law(2).unwrap().with_strata(2).unwrap();
        assert_eq!(spec.eta_len(), 4);
        let eta = [0.5, 0.0, 2.0, 1.0];
        assert_relative_eq!(spec.alpha_eval(2, 3.0, &eta, 0).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(spec.alpha_eval(2, 3.0, &eta, 1).unwrap(), 6.0, max_relative = 1e-12);
    }
}
