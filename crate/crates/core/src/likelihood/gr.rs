//! Estimating-equation system combining two partial likelihoods.
//!
//! The classical approach for missing failure types stacks three scores:
//!
//! * (a) the beta-score of the observation-weighted partial likelihood, in
//!   which each risk-set member is weighted by its probability of having an
//!   observed (resp. missing) subtype at the event time;
//! * (b) the eta-score of the event-conditioned partial likelihood without
//!   auxiliary information (the mixture likelihood with a unit factor);
//! * (c) the gamma-score of the Bernoulli likelihood of the observation
//!   indicator given (t, x).
//!
//! The missingness model may depend on (t, x) only; dependence on time is
//! restricted to threshold indicators, so the observation weights take one of
//! finitely many "time regime" forms and the weighted risk-set sums stay
//! cumulative (one accumulator per subtype, regime and weight class).
//!
//! The Jacobian uses analytic blocks where an evaluator already provides them
//! (beta x beta, eta x (beta, eta), gamma x gamma) and central finite
//! differences for the remaining cross blocks.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::bernoulli::eval_bernoulli_o;
use crate::likelihood::engine::{EvalMode, EvalOutput, RiskSums};
use crate::likelihood::mixture::{eval_mixture, UnitFactor};
use crate::math::{log_expit, log_one_minus_expit, log_sum_exp};
use crate::model::{BaselineRatioSpec, Block, MissTerm, MissingnessModel, ParameterLayout};

/// Stacked residual, Jacobian and per-subject residual contributions.
#[derive(Debug, Clone)]
pub struct GrEvaluation {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub per_subject_scores: DMatrix<f64>,
}

pub struct GrSystem<'a> {
    data: &'a Dataset,
    spec: &'a BaselineRatioSpec,
    miss: &'a MissingnessModel,
    layout: ParameterLayout,
    lstar_layout: ParameterLayout,
}

impl<'a> GrSystem<'a> {
    pub fn new(
        data: &'a Dataset,
        spec: &'a BaselineRatioSpec,
        miss: &'a MissingnessModel,
    ) -> Result<Self> {
        if !miss.depends_on_t_x_only() {
            return Err(Error::Config(
                "the estimating-equation method requires a missingness model in (t, x) only"
                    .into(),
            ));
        }
        let k = data.num_subtypes();
        let p = data.p();
        let mut blocks: Vec<(Block, usize)> = (1..=k).map(|m| (Block::Beta(m), p)).collect();
        blocks.push((Block::Eta, spec.eta_len()));
        blocks.push((Block::Gamma, miss.gamma_len()));
        let layout = ParameterLayout::new(blocks)?;
        let mut lstar_blocks: Vec<(Block, usize)> =
            (1..=k).map(|m| (Block::Beta(m), p)).collect();
        lstar_blocks.push((Block::Eta, spec.eta_len()));
        lstar_blocks.push((Block::Psi, 0));
        let lstar_layout = ParameterLayout::new(lstar_blocks)?;
        Ok(Self { data, spec, miss, layout, lstar_layout })
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn n_units(&self) -> usize {
        self.data.len()
    }

    fn split(&self, theta: &[f64]) -> Result<(usize, usize, usize)> {
        if theta.len() != self.layout.dim() {
            return Err(Error::Domain(format!(
                "theta has length {}, system requires {}",
                theta.len(),
                self.layout.dim()
            )));
        }
        let kp = self.data.num_subtypes() * self.data.p();
        let e = self.spec.eta_len();
        let g = self.miss.gamma_len();
        Ok((kp, e, g))
    }

    /// Stacked residual `[d l_L / d beta; d l* / d eta; d l_O / d gamma]`.
    pub fn residual(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let (kp, e, g) = self.split(theta)?;
        let beta_eta = &theta[..kp + e];
        let gamma = &theta[kp + e..];

        let weighted =
            eval_weighted_l_beta(self.data, self.spec, self.miss, theta, EvalMode::Gradient)?;
        let lstar = eval_mixture(
            self.data,
            self.spec,
            &UnitFactor,
            &self.lstar_layout,
            beta_eta,
            EvalMode::Gradient,
        )?;
        let obs = eval_bernoulli_o(self.data, self.miss, gamma, EvalMode::Gradient)?;

        let mut r = DVector::zeros(kp + e + g);
        r.rows_mut(0, kp).copy_from(weighted.gradient.as_ref().expect("gradient mode"));
        r.rows_mut(kp, e)
            .copy_from(&lstar.gradient.as_ref().expect("gradient mode").rows(kp, e));
        if g > 0 {
            r.rows_mut(kp + e, g).copy_from(obs.gradient.as_ref().expect("gradient mode"));
        }
        Ok(r)
    }

    /// Residual, Jacobian and per-subject stacked score rows.
    pub fn evaluate(&self, theta: &[f64]) -> Result<GrEvaluation> {
        let (kp, e, g) = self.split(theta)?;
        let dim = kp + e + g;
        let n = self.data.len();
        let beta_eta = &theta[..kp + e];
        let gamma = &theta[kp + e..];

        let weighted =
            eval_weighted_l_beta(self.data, self.spec, self.miss, theta, EvalMode::Full)?;
        let lstar = eval_mixture(
            self.data,
            self.spec,
            &UnitFactor,
            &self.lstar_layout,
            beta_eta,
            EvalMode::Full,
        )?;
        let obs = eval_bernoulli_o(self.data, self.miss, gamma, EvalMode::Full)?;

        let mut residual = DVector::zeros(dim);
        residual.rows_mut(0, kp).copy_from(weighted.gradient.as_ref().expect("full mode"));
        residual
            .rows_mut(kp, e)
            .copy_from(&lstar.gradient.as_ref().expect("full mode").rows(kp, e));
        if g > 0 {
            residual.rows_mut(kp + e, g).copy_from(obs.gradient.as_ref().expect("full mode"));
        }

        let mut jacobian = DMatrix::zeros(dim, dim);
        jacobian
            .view_mut((0, 0), (kp, kp))
            .copy_from(weighted.hessian.as_ref().expect("full mode"));
        jacobian
            .view_mut((kp, 0), (e, kp + e))
            .copy_from(&lstar.hessian.as_ref().expect("full mode").view((kp, 0), (e, kp + e)));
        if g > 0 {
            jacobian
                .view_mut((kp + e, kp + e), (g, g))
                .copy_from(obs.hessian.as_ref().expect("full mode"));
        }
        // Cross blocks d(beta-score)/d(eta, gamma) by central differences.
        let mut perturbed = theta.to_vec();
        for col in kp..dim {
            let h = 1e-6 * perturbed[col].abs().max(1.0);
            perturbed[col] = theta[col] + h;
            let plus =
                eval_weighted_l_beta(self.data, self.spec, self.miss, &perturbed, EvalMode::Gradient)?;
            perturbed[col] = theta[col] - h;
            let minus =
                eval_weighted_l_beta(self.data, self.spec, self.miss, &perturbed, EvalMode::Gradient)?;
            perturbed[col] = theta[col];
            let gp = plus.gradient.expect("gradient mode");
            let gm = minus.gradient.expect("gradient mode");
            for row in 0..kp {
                jacobian[(row, col)] = (gp[row] - gm[row]) / (2.0 * h);
            }
        }

        let mut scores = DMatrix::zeros(n, dim);
        scores
            .view_mut((0, 0), (n, kp))
            .copy_from(weighted.scores.as_ref().expect("full mode"));
        scores
            .view_mut((0, kp), (n, e))
            .copy_from(&lstar.scores.as_ref().expect("full mode").view((0, kp), (n, e)));
        if g > 0 {
            scores
                .view_mut((0, kp + e), (n, g))
                .copy_from(obs.scores.as_ref().expect("full mode"));
        }

        Ok(GrEvaluation { residual, jacobian, per_subject_scores: scores })
    }
}

/// Convenience wrapper returning `(residual, jacobian)`.
pub fn gr_system(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    miss: &MissingnessModel,
    beta: &[f64],
    eta: &[f64],
    gamma: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sys = GrSystem::new(data, spec, miss)?;
    let mut theta = Vec::with_capacity(sys.layout.dim());
    theta.extend_from_slice(beta);
    theta.extend_from_slice(eta);
    theta.extend_from_slice(gamma);
    let eval = sys.evaluate(&theta)?;
    Ok((eval.residual, eval.jacobian))
}

/// Value, beta-gradient, beta-Hessian and per-subject beta-score rows of the
/// observation-weighted partial likelihood. The output dimension is `K * p`;
/// eta and gamma enter as fixed inputs read from `theta`.
pub(crate) fn eval_weighted_l_beta(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    miss: &MissingnessModel,
    theta: &[f64],
    mode: EvalMode,
) -> Result<EvalOutput> {
    let n = data.len();
    let k = data.num_subtypes();
    let p = data.p();
    let e = spec.eta_len();
    let kp = k * p;
    let eta = &theta[kp..kp + e];
    let gamma = &theta[kp + e..];
    if data.n_events() == 0 {
        return Err(Error::Fit("no usable events".into()));
    }

    let records = data.records();
    let mut lrr = vec![0.0f64; n * k];
    for (j, rec) in records.iter().enumerate() {
        for m in 0..k {
            lrr[j * k + m] =
                theta[m * p..(m + 1) * p].iter().zip(&rec.covariates).map(|(b, x)| b * x).sum();
        }
    }

    // Time regimes: thresholds sorted ascending; regime r means the first r
    // indicators are active. The shift sum_r gamma_c is subject-independent.
    let thresholds = miss.time_thresholds();
    let n_regimes = thresholds.len() + 1;
    let mut tshift = vec![0.0f64; n_regimes];
    for (r, shift) in tshift.iter_mut().enumerate() {
        for (term, coef) in miss.terms().iter().zip(gamma) {
            if let MissTerm::TimeAbove(c) = term {
                let pos = thresholds.iter().position(|v| v == c).expect("threshold listed");
                if pos < r {
                    *shift += coef;
                }
            }
        }
    }
    // Subject-level base linear predictor (non-time terms).
    let mut base = vec![0.0f64; n];
    for (j, rec) in records.iter().enumerate() {
        let mut lp = 0.0;
        for (term, coef) in miss.terms().iter().zip(gamma) {
            match term {
                MissTerm::Intercept => lp += coef,
                MissTerm::Covariate(c) => {
                    lp += coef
                        * rec.covariates.get(*c).ok_or_else(|| {
                            Error::Domain(format!("covariate index {c} out of range"))
                        })?
                }
                MissTerm::TimeAbove(_) => {}
                _ => unreachable!("validated (t, x)-only model"),
            }
        }
        base[j] = lp;
    }
    let regime_of = |t: f64| thresholds.partition_point(|c| *c < t);

    let mut out = EvalOutput::new(kp, n, mode);
    let with_s2 = mode.wants_hessian();
    // sums_obs[m][r] and sums_mis[m][r].
    let mut sums_obs: Vec<Vec<RiskSums>> =
        (0..k).map(|_| (0..n_regimes).map(|_| RiskSums::new(p, with_s2)).collect()).collect();
    let mut sums_mis: Vec<Vec<RiskSums>> =
        (0..k).map(|_| (0..n_regimes).map(|_| RiskSums::new(p, with_s2)).collect()).collect();

    let mut la = vec![0.0f64; k];
    let mut comp = vec![0.0f64; k];
    let mut wbar = vec![0.0f64; k];
    let mut vnum = vec![0.0f64; k];
    let mut r1 = vec![0.0f64; p];
    let mut r2 = vec![0.0f64; p * p];
    let mut score = DVector::zeros(kp);
    let mut hterm = DMatrix::zeros(kp, kp);
    let mut gden = DVector::zeros(kp);

    for stratum in 0..data.num_strata() {
        for m in 0..k {
            for r in 0..n_regimes {
                sums_obs[m][r].reset();
                sums_mis[m][r].reset();
            }
        }
        let order = data.stratum_order(stratum);
        let mut i = 0usize;
        while i < order.len() {
            let t = records[order[i]].time;
            let mut j = i;
            while j < order.len() && records[order[j]].time == t {
                let idx = order[j];
                for r in 0..n_regimes {
                    let lp = base[idx] + tshift[r];
                    let lo = log_expit(lp);
                    let lm = log_one_minus_expit(lp);
                    for m in 0..k {
                        sums_obs[m][r].add(lrr[idx * k + m] + lo, &records[idx].covariates);
                        sums_mis[m][r].add(lrr[idx * k + m] + lm, &records[idx].covariates);
                    }
                }
                j += 1;
            }
            for &idx in &order[i..j] {
                let rec = &records[idx];
                if !rec.event {
                    continue;
                }
                let r = regime_of(t);
                let lp_i = base[idx] + tshift[r];
                if rec.subtype_observed {
                    let y = rec.subtype.expect("validated") - 1;
                    let s = &sums_obs[y][r];
                    let term = log_expit(lp_i) + lrr[idx * k + y] - s.log_s0();
                    if mode.wants_gradient() {
                        s.mean(&mut r1);
                        score.fill(0.0);
                        for a in 0..p {
                            score[y * p + a] = rec.covariates[a] - r1[a];
                        }
                    }
                    if mode.wants_hessian() {
                        s.second_moment(&mut r2);
                        hterm.fill(0.0);
                        for a in 0..p {
                            for b in 0..p {
                                hterm[(y * p + a, y * p + b)] = -(r2[a * p + b] - r1[a] * r1[b]);
                            }
                        }
                    }
                    out.add_term(
                        idx,
                        term,
                        mode.wants_gradient().then_some(&score),
                        mode.wants_hessian().then_some(&hterm),
                    );
                } else {
                    // Numerator: sum_k alpha_k(t) exp(beta_k' x_i); denominator:
                    // sum_m alpha_m(t) * (pibar-weighted risk sums).
                    for m in 0..k {
                        la[m] = spec.log_alpha_unchecked(m + 1, t, eta, stratum);
                        comp[m] = la[m] + lrr[idx * k + m];
                    }
                    let log_n = log_sum_exp(&comp[..k])?;
                    for m in 0..k {
                        vnum[m] = (comp[m] - log_n).exp();
                    }
                    for m in 0..k {
                        comp[m] = la[m] + sums_mis[m][r].log_s0();
                    }
                    let log_d = log_sum_exp(&comp[..k])?;
                    for m in 0..k {
                        wbar[m] = (comp[m] - log_d).exp();
                    }
                    let term = log_one_minus_expit(lp_i) + log_n - log_d;
                    if mode.wants_gradient() {
                        score.fill(0.0);
                        gden.fill(0.0);
                        for m in 0..k {
                            sums_mis[m][r].mean(&mut r1);
                            for a in 0..p {
                                score[m * p + a] = vnum[m] * rec.covariates[a];
                                gden[m * p + a] = wbar[m] * r1[a];
                            }
                        }
                        if mode.wants_hessian() {
                            hterm.fill(0.0);
                            // Numerator curvature.
                            for m in 0..k {
                                for a in 0..p {
                                    for b in 0..p {
                                        hterm[(m * p + a, m * p + b)] +=
                                            vnum[m] * rec.covariates[a] * rec.covariates[b];
                                    }
                                }
                            }
                            for a in 0..kp {
                                for b in 0..kp {
                                    hterm[(a, b)] -= score[a] * score[b];
                                }
                            }
                            // Denominator curvature.
                            for m in 0..k {
                                sums_mis[m][r].second_moment(&mut r2);
                                for a in 0..p {
                                    for b in 0..p {
                                        hterm[(m * p + a, m * p + b)] -= wbar[m] * r2[a * p + b];
                                    }
                                }
                            }
                            for a in 0..kp {
                                for b in 0..kp {
                                    hterm[(a, b)] += gden[a] * gden[b];
                                }
                            }
                        }
                        score -= &gden;
                    }
                    out.add_term(
                        idx,
                        term,
                        mode.wants_gradient().then_some(&score),
                        mode.wants_hessian().then_some(&hterm),
                    );
                }
            }
            i = j;
        }
    }
    Ok(out)
}
