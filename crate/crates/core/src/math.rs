//! Scalar numeric primitives shared across the likelihood code.

use crate::error::{Error, Result};

/// Logistic function, exact symmetry `expit(-z) = 1 - expit(z)`.
pub fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Inverse of `expit`; requires `p` in (0, 1).
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("logit requires p in (0,1), got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// log(expit(z)) without underflow for large negative z.
pub fn log_expit(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// log(1 - expit(z)) = log_expit(-z).
pub fn log_one_minus_expit(z: f64) -> f64 {
    log_expit(-z)
}

/// Overflow-safe log(sum(exp(values))).
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty vector".into()));
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // All -inf (empty sum) or some +inf/NaN: propagate.
        return Ok(m);
    }
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Ok(m + sum.ln())
}

/// Two-term log-sum-exp.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expit_center() {
        assert_eq!(expit(0.0), 0.5);
    }

    #[test]
    fn expit_symmetry_machine_precision() {
        for z in [-30.0, -7.5, -1.0, -0.1, 0.3, 2.0, 12.0, 30.0] {
            let lhs = expit(-z);
            let rhs = 1.0 - expit(z);
            assert!((lhs - rhs).abs() <= f64::EPSILON, "z={z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn expit_monotone() {
        let mut prev = expit(-40.0);
        let mut z = -40.0;
        while z <= 40.0 {
            let cur = expit(z);
            assert!(cur >= prev);
            prev = cur;
            z += 0.37;
        }
    }

    #[test]
    fn logit_round_trip() {
        for p in [0.25, 0.5, 0.8] {
            assert_relative_eq!(expit(logit(p).unwrap()), p, max_relative = 1e-14);
        }
        assert!(logit(0.0).is_err());
        assert!(logit(1.0).is_err());
    }

    #[test]
    fn lse_single_element_identity() {
        assert_eq!(log_sum_exp(&[3.25]).unwrap(), 3.25);
        assert_eq!(log_sum_exp(&[-701.0]).unwrap(), -701.0);
    }

    #[test]
    fn lse_shift_invariance() {
        let v = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert_relative_eq!(v, 1000.0 + 2f64.ln(), max_relative = 1e-15);
        let w = log_sum_exp(&[700.0, -700.0]).unwrap();
        assert_relative_eq!(w, 700.0, max_relative = 1e-15);
    }

    #[test]
    fn lse_empty_is_domain_error() {
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn log_expit_stable() {
        assert_relative_eq!(log_expit(-800.0), -800.0, max_relative = 1e-12);
        assert_relative_eq!(log_expit(0.0), 0.5f64.ln(), max_relative = 1e-15);
        assert!(log_one_minus_expit(800.0) < -700.0);
    }
}
