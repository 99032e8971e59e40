//! Shared risk-set sweep machinery.
//!
//! Every partial likelihood here has denominators of the form
//! `sum_j in risk set  w_j * exp(beta_m' x_j)` for one or more subtypes `m`.
//! Sweeping subjects in decreasing time order lets the sums grow cumulatively;
//! `RiskSums` keeps them in a shifted representation (streaming max) so the
//! accumulation never overflows regardless of the linear predictors.

use nalgebra::{DMatrix, DVector};


/// What an evaluation must produce. `Value` is enough for step halving,
/// `Gradient` adds per-subject score rows, `Full` adds the Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EvalMode {
    Value,
    Gradient,
    Full,
}

impl EvalMode {
    pub fn wants_gradient(self) -> bool {
        !matches!(self, EvalMode::Value)
    }

    pub fn wants_hessian(self) -> bool {
        matches!(self, EvalMode::Full)
    }
}

/// Internal evaluation output; optional pieces follow the mode.
#[derive(Debug, Clone)]
pub(crate) struct EvalOutput {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
    pub scores: Option<DMatrix<f64>>,
}

impl EvalOutput {
    pub fn new(dim: usize, n: usize, mode: EvalMode) -> Self {
        Self {
            value: 0.0,
            gradient: mode.wants_gradient().then(|| DVector::zeros(dim)),
            hessian: mode.wants_hessian().then(|| DMatrix::zeros(dim, dim)),
            scores: mode.wants_gradient().then(|| DMatrix::zeros(n, dim)),
        }
    }

    /// Adds one event term: score row for subject `i`, gradient, Hessian.
    pub fn add_term(
        &mut self,
        i: usize,
        value: f64,
        score: Option<&DVector<f64>>,
        hess: Option<&DMatrix<f64>>,
    ) {
        self.value += value;
        if let (Some(g), Some(s)) = (self.gradient.as_mut(), score) {
            *g += s;
            self.scores.as_mut().expect("scores follow gradient").row_mut(i).copy_from(&s.transpose());
        }
        if let (Some(h), Some(dh)) = (self.hessian.as_mut(), hess) {
            *h += dh;
        }
    }
}

/// Cumulative risk-set sums for one subtype (and weight class):
/// `s0 = sum w`, `s1 = sum w x`, `s2 = sum w x x'` with `w = exp(logw - shift)`
/// and `shift` maintained as the running maximum of `logw`.
#[derive(Debug, Clone)]
pub(crate) struct RiskSums {
    p: usize,
    with_s2: bool,
    shift: f64,
    s0: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl RiskSums {
    pub fn new(p: usize, with_s2: bool) -> Self {
        Self {
            p,
            with_s2,
            shift: f64::NEG_INFINITY,
            s0: 0.0,
            s1: vec![0.0; p],
            s2: vec![0.0; if with_s2 { p * p } else { 0 }],
        }
    }

    pub fn reset(&mut self) {
        self.shift = f64::NEG_INFINITY;
        self.s0 = 0.0;
        self.s1.iter_mut().for_each(|v| *v = 0.0);
        self.s2.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn add(&mut self, logw: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.p);
        if logw == f64::NEG_INFINITY {
            return;
        }
        if logw > self.shift {
            // Rescale existing sums to the new shift.
            let scale = if self.shift == f64::NEG_INFINITY { 0.0 } else { (self.shift - logw).exp() };
            self.s0 *= scale;
            self.s1.iter_mut().for_each(|v| *v *= scale);
            self.s2.iter_mut().for_each(|v| *v *= scale);
            self.shift = logw;
        }
        let w = (logw - self.shift).exp();
        self.s0 += w;
        for a in 0..self.p {
            self.s1[a] += w * x[a];
        }
        if self.with_s2 {
            for a in 0..self.p {
                let wxa = w * x[a];
                for b in 0..self.p {
                    self.s2[a * self.p + b] += wxa * x[b];
                }
            }
        }
    }

    /// `log(sum w)`; negative infinity while empty.
    pub fn log_s0(&self) -> f64 {
        if self.s0 == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.s0.ln()
        }
    }

    /// Weighted mean `s1 / s0` written into `out`.
    pub fn mean(&self, out: &mut [f64]) {
        debug_assert!(self.s0 > 0.0);
        for a in 0..self.p {
            out[a] = self.s1[a] / self.s0;
        }
    }

    /// `s2 / s0` written into `out` (row-major `p * p`).
    pub fn second_moment(&self, out: &mut [f64]) {
        debug_assert!(self.with_s2 && self.s0 > 0.0);
        for v in 0..self.p * self.p {
            out[v] = self.s2[v] / self.s0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shifted_sums_match_naive() {
        let mut sums = RiskSums::new(2, true);
        let entries = [
            (0.5, [1.0, 2.0]),
            (-3.0, [-1.0, 0.5]),
            (2.0, [0.0, 1.0]),
            (1.0, [2.0, -2.0]),
        ];
        for (lw, x) in &entries {
            sums.add(*lw, x);
        }
        let naive_s0: f64 = entries.iter().map(|(lw, _)| lw.exp()).sum();
        assert_relative_eq!(sums.log_s0(), naive_s0.ln(), max_relative = 1e-14);
        let mut mean = [0.0; 2];
        sums.mean(&mut mean);
        for a in 0..2 {
            let naive: f64 = entries.iter().map(|(lw, x)| lw.exp() * x[a]).sum::<f64>() / naive_s0;
            assert_relative_eq!(mean[a], naive, max_relative = 1e-14);
        }
    }

    #[test]
    fn survives_extreme_exponents() {
        let mut sums = RiskSums::new(1, false);
        sums.add(-900.0, &[1.0]);
        sums.add(800.0, &[2.0]);
        sums.add(799.0, &[3.0]);
        let expected = 800.0 + (1.0 + (-1.0f64).exp()).ln();
        assert_relative_eq!(sums.log_s0(), expected, max_relative = 1e-14);
        let mut mean = [0.0; 1];
        sums.mean(&mut mean);
        let w2 = (-1.0f64).exp();
        assert_relative_eq!(mean[0], (2.0 + 3.0 * w2) / (1.0 + w2), max_relative = 1e-12);
    }
}
