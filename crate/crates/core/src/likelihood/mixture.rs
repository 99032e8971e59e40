//! Generic evaluator for the event-conditioned partial likelihoods.
//!
//! Both the auxiliary-covariate likelihood and the NMAR likelihood have the
//! same shape: an observed-subtype event contributes
//!
//! ```text
//! log f(i, y_i) + log alpha_{y_i}(t_i) + beta_{y_i}' x_i - log D_i
//! ```
//!
//! and a missing-subtype event contributes
//!
//! ```text
//! log sum_k f(i, k) * alpha_k(t_i) * exp(beta_k' x_i) - log D_i ,
//! ```
//!
//! with the shared denominator
//! `D_i = sum_{j in risk set} sum_m alpha_m(t_i) exp(beta_m' x_j)`.
//! They differ only in the per-subtype factor `f` and in which parameter
//! block that factor differentiates into (`psi` for the auxiliary model,
//! `gamma` for the missingness model). The `MixtureFactor` trait captures
//! exactly that difference.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::likelihood::engine::{EvalMode, EvalOutput, RiskSums};
use crate::math::log_sum_exp;
use crate::model::{BaselineRatioSpec, Block, ParameterLayout};

pub(crate) trait MixtureFactor: Sync {
    /// Parameter block the factor differentiates into.
    fn block(&self) -> Block;
    fn coef_len(&self) -> usize;

    /// Pre-evaluation dataset validation.
    fn validate(&self, data: &Dataset) -> Result<()>;

    /// Log factor for an observed-subtype event. `grad` has `coef_len`
    /// entries (zeroed by the caller); `hess` receives block-local triplets.
    fn observed(
        &self,
        rec: &SubjectRecord,
        coefs: &[f64],
        mode: EvalMode,
        grad: &mut [f64],
        hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64>;

    /// Log factor for a missing-subtype event under candidate subtype `k`.
    fn missing(
        &self,
        rec: &SubjectRecord,
        k: usize,
        coefs: &[f64],
        mode: EvalMode,
        grad: &mut [f64],
        hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64>;
}

/// A factor that is identically one: reduces the evaluator to the no-extra-
/// information partial likelihood (used by the estimating-equation method
/// for its baseline-ratio score).
pub(crate) struct UnitFactor;

impl MixtureFactor for UnitFactor {
    fn block(&self) -> Block {
        Block::Psi
    }

    fn coef_len(&self) -> usize {
        0
    }

    fn validate(&self, _data: &Dataset) -> Result<()> {
        Ok(())
    }

    fn observed(
        &self,
        _rec: &SubjectRecord,
        _coefs: &[f64],
        _mode: EvalMode,
        _grad: &mut [f64],
        _hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64> {
        Ok(0.0)
    }

    fn missing(
        &self,
        _rec: &SubjectRecord,
        _k: usize,
        _coefs: &[f64],
        _mode: EvalMode,
        _grad: &mut [f64],
        _hess: &mut Vec<(usize, usize, f64)>,
    ) -> Result<f64> {
        Ok(0.0)
    }
}

struct Scratch {
    /// Per-subtype log alpha at the current event time.
    la: Vec<f64>,
    /// Per-subtype d(log alpha)/d eta, row-major K x e.
    dla: Vec<f64>,
    /// Per-subtype alpha Hessian triplets (eta-block-local).
    ha: Vec<Vec<(usize, usize, f64)>>,
    /// Per-subtype risk-set mean covariates, row-major K x p.
    r1: Vec<f64>,
    /// One subtype's risk-set second moment, p x p.
    r2: Vec<f64>,
    /// Factor gradient buffer(s): one per subtype for missing events.
    fgrad: Vec<Vec<f64>>,
    fhess: Vec<Vec<(usize, usize, f64)>>,
    /// Mixture component log-weights and normalized weights.
    comp: Vec<f64>,
    wgt: Vec<f64>,
    /// Dense per-component gradient vectors for missing events.
    gk: Vec<DVector<f64>>,
    dlog_d: DVector<f64>,
    gnum: DVector<f64>,
    score: DVector<f64>,
    hterm: DMatrix<f64>,
}

/// Evaluates the mixture partial likelihood over the layout
/// `[beta(1..K), eta, factor block]` (resolved by name, order free).
pub(crate) fn eval_mixture<F: MixtureFactor>(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    factor: &F,
    layout: &ParameterLayout,
    theta: &[f64],
    mode: EvalMode,
) -> Result<EvalOutput> {
    let n = data.len();
    let k = data.num_subtypes();
    let p = data.p();
    let e = spec.eta_len();
    let dim = layout.dim();
    if theta.len() != dim {
        return Err(Error::Domain(format!(
            "theta has length {}, layout requires {dim}",
            theta.len()
        )));
    }
    if spec.num_subtypes() != k {
        return Err(Error::Config("baseline spec subtype count differs from dataset".into()));
    }
    if spec.num_strata() < data.num_strata() {
        return Err(Error::Config(format!(
            "dataset has {} strata, baseline spec only {}",
            data.num_strata(),
            spec.num_strata()
        )));
    }
    factor.validate(data)?;
    if data.n_events() == 0 {
        return Err(Error::Fit("no usable events".into()));
    }

    let beta_ranges: Vec<std::ops::Range<usize>> =
        (1..=k).map(|m| layout.beta(m)).collect::<Result<_>>()?;
    let eta_range = layout.require(&Block::Eta)?;
    let factor_range = layout.require(&factor.block())?;
    if eta_range.len() != e {
        return Err(Error::Config("eta block length does not match baseline spec".into()));
    }
    if factor_range.len() != factor.coef_len() {
        return Err(Error::Config("factor block length does not match its model".into()));
    }
    let eta = &theta[eta_range.clone()];
    let fac_coefs = &theta[factor_range.clone()];

    // Log relative risks beta_m' x_j, row-major n x K.
    let records = data.records();
    let mut lrr = vec![0.0f64; n * k];
    for (j, rec) in records.iter().enumerate() {
        for m in 0..k {
            let beta_m = &theta[beta_ranges[m].clone()];
            lrr[j * k + m] = dot(beta_m, &rec.covariates);
        }
    }

    let mut out = EvalOutput::new(dim, n, mode);
    let mut scratch = Scratch {
        la: vec![0.0; k],
        dla: vec![0.0; k * e],
        ha: vec![Vec::new(); k],
        r1: vec![0.0; k * p],
        r2: vec![0.0; p * p],
        fgrad: vec![vec![0.0; factor.coef_len()]; k],
        fhess: vec![Vec::new(); k],
        comp: vec![0.0; k],
        wgt: vec![0.0; k],
        gk: (0..k).map(|_| DVector::zeros(dim)).collect(),
        dlog_d: DVector::zeros(dim),
        gnum: DVector::zeros(dim),
        score: DVector::zeros(dim),
        hterm: DMatrix::zeros(dim, dim),
    };

    let mut sums: Vec<RiskSums> = (0..k).map(|_| RiskSums::new(p, mode.wants_hessian())).collect();

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
                if records[idx].event {
                    process_event(
                        data, spec, factor, theta, eta, fac_coefs, mode, idx, t, stratum, &lrr,
                        &sums, &beta_ranges, &eta_range, &factor_range, &mut scratch, &mut out,
                    )?;
                }
            }
            i = j;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn process_event<F: MixtureFactor>(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    factor: &F,
    _theta: &[f64],
    eta: &[f64],
    fac_coefs: &[f64],
    mode: EvalMode,
    idx: usize,
    t: f64,
    stratum: usize,
    lrr: &[f64],
    sums: &[RiskSums],
    beta_ranges: &[std::ops::Range<usize>],
    eta_range: &std::ops::Range<usize>,
    factor_range: &std::ops::Range<usize>,
    sc: &mut Scratch,
    out: &mut EvalOutput,
) -> Result<()> {
    let k = data.num_subtypes();
    let p = data.p();
    let e = eta.len();
    let rec = &data.records()[idx];
    let grad_mode = mode.wants_gradient();
    let hess_mode = mode.wants_hessian();

    // Baseline-ratio pieces at the event time.
    sc.dla.iter_mut().for_each(|v| *v = 0.0);
    for m in 0..k {
        sc.la[m] = spec.log_alpha_unchecked(m + 1, t, eta, stratum);
        if grad_mode {
            spec.log_alpha_grad_unchecked(m + 1, t, eta, stratum, &mut sc.dla[m * e..(m + 1) * e]);
        }
        if hess_mode {
            let mut triplets = std::mem::take(&mut sc.ha[m]);
            spec.log_alpha_hess_unchecked(m + 1, t, eta, stratum, &mut triplets);
            sc.ha[m] = triplets;
        }
    }

    // Denominator: log D = lse_m( log alpha_m + log s0_m ).
    for m in 0..k {
        sc.comp[m] = sc.la[m] + sums[m].log_s0();
    }
    let log_d = log_sum_exp(&sc.comp[..k])?;
    if grad_mode {
        for m in 0..k {
            sc.wgt[m] = (sc.comp[m] - log_d).exp();
            sums[m].mean(&mut sc.r1[m * p..(m + 1) * p]);
        }
        sc.dlog_d.fill(0.0);
        for m in 0..k {
            let w = sc.wgt[m];
            for a in 0..p {
                sc.dlog_d[beta_ranges[m].start + a] += w * sc.r1[m * p + a];
            }
            for r in 0..e {
                sc.dlog_d[eta_range.start + r] += w * sc.dla[m * e + r];
            }
        }
    }
    if hess_mode {
        // H_D = sum_m w_m [ R2_m | r1_m a_m' | a_m a_m' + A2_m ] - dlogD dlogD'.
        sc.hterm.fill(0.0);
        for m in 0..k {
            let w = sc.wgt[m];
            sums[m].second_moment(&mut sc.r2);
            for a in 0..p {
                for b in 0..p {
                    sc.hterm[(beta_ranges[m].start + a, beta_ranges[m].start + b)] -=
                        w * sc.r2[a * p + b];
                }
            }
            for a in 0..p {
                for r in 0..e {
                    let v = w * sc.r1[m * p + a] * sc.dla[m * e + r];
                    sc.hterm[(beta_ranges[m].start + a, eta_range.start + r)] -= v;
                    sc.hterm[(eta_range.start + r, beta_ranges[m].start + a)] -= v;
                }
            }
            for r in 0..e {
                for q in 0..e {
                    sc.hterm[(eta_range.start + r, eta_range.start + q)] -=
                        w * sc.dla[m * e + r] * sc.dla[m * e + q];
                }
            }
            for &(r, q, v) in &sc.ha[m] {
                sc.hterm[(eta_range.start + r, eta_range.start + q)] -= w * v;
            }
        }
        // +dlogD dlogD' because H_term accumulates -(H_D).
        for a in 0..sc.dlog_d.len() {
            if sc.dlog_d[a] == 0.0 {
                continue;
            }
            for b in 0..sc.dlog_d.len() {
                sc.hterm[(a, b)] += sc.dlog_d[a] * sc.dlog_d[b];
            }
        }
    }

    // Numerator.
    let num_value;
    if rec.subtype_observed {
        let y = rec.subtype.expect("validated");
        sc.fgrad[0].iter_mut().for_each(|v| *v = 0.0);
        let mut fhess = std::mem::take(&mut sc.fhess[0]);
        fhess.clear();
        let lf = factor.observed(rec, fac_coefs, mode, &mut sc.fgrad[0], &mut fhess)?;
        num_value = lf + sc.la[y - 1] + lrr[idx * k + (y - 1)];
        if grad_mode {
            sc.gnum.fill(0.0);
            for a in 0..p {
                sc.gnum[beta_ranges[y - 1].start + a] = rec.covariates[a];
            }
            for r in 0..e {
                sc.gnum[eta_range.start + r] = sc.dla[(y - 1) * e + r];
            }
            for (c, v) in sc.fgrad[0].iter().enumerate() {
                sc.gnum[factor_range.start + c] = *v;
            }
        }
        if hess_mode {
            for &(r, q, v) in &sc.ha[y - 1] {
                sc.hterm[(eta_range.start + r, eta_range.start + q)] += v;
            }
            for &(r, q, v) in &fhess {
                sc.hterm[(factor_range.start + r, factor_range.start + q)] += v;
            }
        }
        sc.fhess[0] = fhess;
    } else {
        // log N = lse_k( log f_k + log alpha_k + beta_k' x_i ).
        for kk in 1..=k {
            sc.fgrad[kk - 1].iter_mut().for_each(|v| *v = 0.0);
            let mut fhess = std::mem::take(&mut sc.fhess[kk - 1]);
            fhess.clear();
            let lf = factor.missing(rec, kk, fac_coefs, mode, &mut sc.fgrad[kk - 1], &mut fhess)?;
            sc.fhess[kk - 1] = fhess;
            sc.comp[kk - 1] = lf + sc.la[kk - 1] + lrr[idx * k + (kk - 1)];
        }
        let log_n = log_sum_exp(&sc.comp[..k])?;
        num_value = log_n;
        if grad_mode {
            sc.gnum.fill(0.0);
            for kk in 0..k {
                let w = (sc.comp[kk] - log_n).exp();
                let g = &mut sc.gk[kk];
                g.fill(0.0);
                for a in 0..p {
                    g[beta_ranges[kk].start + a] = rec.covariates[a];
                }
                for r in 0..e {
                    g[eta_range.start + r] = sc.dla[kk * e + r];
                }
                for (c, v) in sc.fgrad[kk].iter().enumerate() {
                    g[factor_range.start + c] = *v;
                }
                sc.gnum.axpy(w, g, 1.0);
                sc.wgt[kk] = w;
            }
        }
        if hess_mode {
            // sum_k w_k (g_k g_k' + H_k) - gnum gnum'.
            for kk in 0..k {
                let w = sc.wgt[kk];
                let g = &sc.gk[kk];
                for a in 0..g.len() {
                    if g[a] == 0.0 {
                        continue;
                    }
                    for b in 0..g.len() {
                        sc.hterm[(a, b)] += w * g[a] * g[b];
                    }
                }
                for &(r, q, v) in &sc.ha[kk] {
                    sc.hterm[(eta_range.start + r, eta_range.start + q)] += w * v;
                }
                for &(r, q, v) in &sc.fhess[kk] {
                    sc.hterm[(factor_range.start + r, factor_range.start + q)] += w * v;
                }
            }
            for a in 0..sc.gnum.len() {
                if sc.gnum[a] == 0.0 {
                    continue;
                }
                for b in 0..sc.gnum.len() {
                    sc.hterm[(a, b)] -= sc.gnum[a] * sc.gnum[b];
                }
            }
        }
    }

    let term = num_value - log_d;
    if grad_mode {
        sc.score.copy_from(&sc.gnum);
        sc.score -= &sc.dlog_d;
    }
    out.add_term(
        idx,
        term,
        grad_mode.then_some(&sc.score),
        hess_mode.then_some(&sc.hterm),
    );
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
