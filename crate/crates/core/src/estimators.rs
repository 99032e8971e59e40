//! Glue between datasets, model configuration and the fitting machinery:
//! one entry point that builds the right objective for each estimator,
//! chooses neutral starting values and runs the fit.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{maximize, solve_gr, FitResult, Objective};
use crate::likelihood::{CcaLikelihood, GrSystem, Lq2Likelihood, LyLikelihood};
use crate::model::{
    BaselineForm, BaselineRatioSpec, Block, MissKind, MissTerm, MissingnessModel, NuModel,
    ParameterVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Cca,
    Gr,
    Lq2,
    Ly,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Cca, Estimator::Gr, Estimator::Lq2, Estimator::Ly];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Cca => "cca",
            Estimator::Gr => "gr",
            Estimator::Lq2 => "lq2",
            Estimator::Ly => "ly",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cca" => Ok(Estimator::Cca),
            "gr" => Ok(Estimator::Gr),
            "lq2" | "lq" => Ok(Estimator::Lq2),
            "ly" => Ok(Estimator::Ly),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected cca, gr, lq2 or ly)"
            ))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Model configuration shared by the CLI and the simulation engine.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub baseline: BaselineRatioSpec,
    /// Auxiliary model for LQ2; `None` infers a categorical model from the
    /// data's auxiliary levels.
    pub nu: Option<NuModel>,
    /// Missingness model for LY; `None` uses intercept + subtype indicators.
    pub ly_missingness: Option<MissingnessModel>,
    /// Missingness model for GR; `None` uses intercept + all covariates.
    pub gr_missingness: Option<MissingnessModel>,
    /// Remove missing-subtype rows entirely for CCA instead of keeping them
    /// in risk sets.
    pub cca_drop_rows: bool,
    pub covariate_names: Vec<String>,
    pub options: crate::inference::FitOptions,
}

impl FitConfig {
    pub fn new(baseline: BaselineRatioSpec, p: usize) -> Self {
        let covariate_names = default_covariate_names(p);
        Self {
            baseline,
            nu: None,
            ly_missingness: None,
            gr_missingness: None,
            cca_drop_rows: false,
            covariate_names,
            options: crate::inference::FitOptions::default(),
        }
    }
}

pub fn default_covariate_names(p: usize) -> Vec<String> {
    if p == 1 {
        vec!["x".to_string()]
    } else {
        (0..p).map(|j| format!("x{j}")).collect()
    }
}

/// A completed fit with descriptive parameter names aligned to the estimate.
#[derive(Debug, Clone)]
pub struct EstimatorFit {
    pub estimator: Estimator,
    pub param_names: Vec<String>,
    pub fit: FitResult,
}

/// Names of the parameters the estimator will produce, without fitting.
pub fn parameter_names(
    data: &Dataset,
    estimator: Estimator,
    config: &FitConfig,
) -> Result<Vec<String>> {
    let k = data.num_subtypes();
    let mut names = Vec::new();
    for m in 1..=k {
        for c in &config.covariate_names {
            names.push(format!("beta{m}.{c}"));
        }
    }
    match estimator {
        Estimator::Cca => {}
        Estimator::Lq2 => {
            names.extend(config.baseline.param_names());
            names.extend(resolve_nu(data, config)?.param_names());
        }
        Estimator::Ly => {
            names.extend(config.baseline.param_names());
            names.extend(resolve_ly_missingness(data, config)?.param_names());
        }
        Estimator::Gr => {
            names.extend(config.baseline.param_names());
            names.extend(resolve_gr_missingness(data, config)?.param_names());
        }
    }
    Ok(names)
}

fn resolve_nu(data: &Dataset, config: &FitConfig) -> Result<NuModel> {
    if let Some(nu) = &config.nu {
        return Ok(nu.clone());
    }
    let levels = data.aux_levels().unwrap_or(2);
    NuModel::categorical(data.num_subtypes(), levels)
}

fn resolve_ly_missingness(data: &Dataset, config: &FitConfig) -> Result<MissingnessModel> {
    // With no missing-subtype events the observation process carries no
    // information and any non-degenerate model separates; the empty model
    // (constant pi) cancels from the likelihood instead.
    if data.missing_subtype_fraction() == 0.0 {
        return MissingnessModel::new(MissKind::LogisticOfTxy, vec![]);
    }
    if let Some(m) = &config.ly_missingness {
        return Ok(m.clone());
    }
    let mut terms = vec![MissTerm::Intercept];
    for m in 2..=data.num_subtypes() {
        terms.push(MissTerm::SubtypeIs(m));
    }
    MissingnessModel::new(MissKind::LogisticOfTxy, terms)
}

fn resolve_gr_missingness(data: &Dataset, config: &FitConfig) -> Result<MissingnessModel> {
    if data.missing_subtype_fraction() == 0.0 {
        return MissingnessModel::new(MissKind::LogisticOfTxq, vec![]);
    }
    if let Some(m) = &config.gr_missingness {
        return Ok(m.clone());
    }
    let mut terms = vec![MissTerm::Intercept];
    for j in 0..data.p() {
        terms.push(MissTerm::Covariate(j));
    }
    MissingnessModel::new(MissKind::LogisticOfTxq, terms)
}

/// Neutral starting values for eta: the crude observed-event ratio for
/// power-law scales with a flat exponent; zero log-levels for piecewise.
fn initial_eta(data: &Dataset, spec: &BaselineRatioSpec) -> Vec<f64> {
    let mut eta = vec![0.0; spec.eta_len()];
    if let BaselineForm::PowerLaw = spec.form() {
        let k = data.num_subtypes();
        let mut counts = vec![0usize; k];
        for rec in data.records() {
            if let Some(y) = rec.subtype {
                counts[y - 1] += 1;
            }
        }
        let reference = counts[0].max(1) as f64;
        let pps = spec.params_per_subtype();
        for stratum in 0..spec.num_strata() {
            for m in 2..=k {
                let ratio = (counts[m - 1].max(1) as f64 / reference).clamp(1e-3, 1e3);
                let start = (stratum * (k - 1) + (m - 2)) * pps;
                eta[start] = ratio;
            }
        }
    }
    eta
}

fn initial_theta(
    data: &Dataset,
    spec: &BaselineRatioSpec,
    layout: &crate::model::ParameterLayout,
) -> ParameterVector {
    let mut init = ParameterVector::zeros(layout.clone());
    if let Some(range) = layout.range(&Block::Eta) {
        let eta = initial_eta(data, spec);
        init.values_mut()[range].copy_from_slice(&eta);
    }
    init
}

/// Fits one estimator to a dataset.
pub fn fit_estimator(
    data: &Dataset,
    estimator: Estimator,
    config: &FitConfig,
) -> Result<EstimatorFit> {
    let param_names = parameter_names(data, estimator, config)?;
    let fit = match estimator {
        Estimator::Cca => {
            let dropped;
            let cca_data = if config.cca_drop_rows {
                dropped = data.drop_missing_subtype_rows()?;
                &dropped
            } else {
                data
            };
            let obj = CcaLikelihood::new(cca_data)?;
            let options =
                config.options.clone().with_initial(ParameterVector::zeros(obj.layout().clone()));
            maximize(&obj, &options)?
        }
        Estimator::Lq2 => {
            let nu = resolve_nu(data, config)?;
            let obj = Lq2Likelihood::new(data, &config.baseline, &nu)?;
            let init = initial_theta(data, &config.baseline, obj.layout());
            maximize(&obj, &config.options.clone().with_initial(init))?
        }
        Estimator::Ly => {
            let miss = resolve_ly_missingness(data, config)?;
            let obj = LyLikelihood::new(data, &config.baseline, &miss)?;
            let init = initial_theta(data, &config.baseline, obj.layout());
            maximize(&obj, &config.options.clone().with_initial(init))?
        }
        Estimator::Gr => {
            let miss = resolve_gr_missingness(data, config)?;
            let sys = GrSystem::new(data, &config.baseline, &miss)?;
            let init = initial_theta(data, &config.baseline, sys.layout());
            solve_gr(&sys, &config.options.clone().with_initial(init))?
        }
    };
    debug_assert_eq!(param_names.len(), fit.estimate.values().len());
    Ok(EstimatorFit { estimator, param_names, fit })
}
