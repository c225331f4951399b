//! Maximum-likelihood fitting, AIC, and forward covariate selection.
//!
//! Fitting maximises the total log-likelihood over a team's sequences with a
//! multi-start BFGS search on unconstrained working parameters (logit
//! emissions, log-ratio initial distribution, raw transition coefficients).
//! Gradients are central finite differences. The best converged start wins;
//! its states are relabelled by ascending pass probability.

mod optimizer;
mod scaling;
mod select;
mod working;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optimizer::{central_gradient, minimize, BfgsOptions, Minimum};
pub use scaling::{apply_scaling, scale_row, standardize_covariates, CovariateScaling};
pub use select::{forward_select, CandidateOutcome, SelectionRound, SelectionStep, SelectionTrace};
pub use working::{pack, unpack, working_len};

use crate::covariates::{Dataset, Design};
use crate::error::{Error, Result};
use crate::hmm::{HmmModel, HmmParams, ModelSpec, PlaySequence, TransitionCoefficients, EMISSION_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub gradient_step: f64,
    pub convergence_tol: f64,
    pub n_starts: usize,
    pub rng_seed: u64,
    /// Standardise non-binary covariates before fitting.
    pub standardize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_step: 1e-5,
            convergence_tol: 1e-10,
            n_starts: 4,
            rng_seed: 0,
            standardize: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.n_starts == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations and n_starts must be at least 1".into(),
            ));
        }
        if !(self.gradient_step > 0.0 && self.convergence_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "gradient_step and convergence_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions {
            max_iterations: self.max_iterations,
            gradient_step: self.gradient_step,
            tolerance: self.convergence_tol,
            ..BfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostics {
    pub start_index: usize,
    /// Start seeded from a previously fitted nested model.
    pub warm: bool,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// An emission probability ended on the clamp boundary.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub best_start: Option<usize>,
    pub starts: Vec<StartDiagnostics>,
}

/// Provenance of the data a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    pub first_season: Option<i32>,
    pub last_season: Option<i32>,
    pub n_sequences: usize,
    pub n_plays: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub team: Option<String>,
    pub spec: ModelSpec,
    pub params: HmmParams,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub aic: f64,
    /// Columns of the raw covariate vectors this model consumes.
    pub input_columns: Vec<String>,
    /// One entry per model covariate, applied after projection.
    pub covariate_scaling: Vec<CovariateScaling>,
    pub diagnostics: FitDiagnostics,
    pub selection_trace: Option<SelectionTrace>,
    pub training: Option<TrainingFingerprint>,
}

pub fn aic(log_likelihood: f64, n_params: usize) -> f64 {
    -2.0 * log_likelihood + 2.0 * n_params as f64
}

impl FittedModel {
    pub fn hmm(&self) -> Result<HmmModel> {
        HmmModel::new(self.spec.clone(), self.params.clone())
    }

    fn design(&self) -> Result<Design> {
        Design::new(&self.input_columns, &self.spec.covariate_names)
    }

    /// Projects raw input columns onto the model covariates and applies the
    /// stored training scaling.
    pub fn design_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        scale_row(&self.covariate_scaling, &self.design()?.row(raw)?)
    }

    pub fn prepare_sequence(&self, seq: &PlaySequence) -> Result<PlaySequence> {
        apply_scaling(&self.covariate_scaling, &self.design()?.sequence(seq)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.hmm()?;
        if model.covariate_scaling.len() != model.spec.n_covariates() {
            return Err(Error::Dimension("scaling does not match covariates".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Fits `spec` to sequences whose covariate vectors follow
/// `spec.covariate_names`.
pub fn fit(spec: &ModelSpec, sequences: &[PlaySequence], config: &FitConfig) -> Result<FittedModel> {
    fit_with_start(spec, &spec.covariate_names, sequences, config, None)
}

/// Fits `spec` to a dataset whose columns are projected onto the model
/// covariates; the fitted model keeps the dataset columns as its inputs.
pub fn fit_dataset(spec: &ModelSpec, data: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    fit_with_start(spec, &data.columns, &data.sequences, config, None)
}

/// Shared entry point: `sequences` are aligned with `input_columns`, which
/// are projected onto `spec.covariate_names` before fitting.
pub(crate) fn fit_with_start(
    spec: &ModelSpec,
    input_columns: &[String],
    sequences: &[PlaySequence],
    config: &FitConfig,
    warm: Option<&HmmParams>,
) -> Result<FittedModel> {
    spec.validate()?;
    config.validate()?;
    if sequences.is_empty() {
        return Err(Error::Precondition("no sequences to fit".into()));
    }
    let design = Design::new(input_columns, &spec.covariate_names)?;
    let projected = sequences
        .iter()
        .map(|s| {
            s.validate(input_columns.len())?;
            design.sequence(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_plays: usize = projected.iter().map(PlaySequence::len).sum();
    let n_params = spec.n_params();
    if n_plays <= n_params {
        return Err(Error::Precondition(format!(
            "{n_plays} plays cannot identify {n_params} parameters"
        )));
    }
    let (scaled, covariate_scaling) = if config.standardize {
        standardize_covariates(&spec.covariate_names, &projected)?
    } else {
        let identity = spec.covariate_names.iter().map(CovariateScaling::identity).collect();
        (projected, identity)
    };

    let (params, log_likelihood, diagnostics) = maximise(spec, &scaled, config, warm)?;
    Ok(FittedModel {
        team: None,
        spec: spec.clone(),
        params,
        log_likelihood,
        n_params,
        aic: aic(log_likelihood, n_params),
        input_columns: input_columns.to_vec(),
        covariate_scaling,
        diagnostics,
        selection_trace: None,
        training: None,
    })
}

/// Random start: persistent chain, separated emissions, zero slopes,
/// uniform initial distribution. Draw order does not depend on K so nested
/// models share their starting intercepts and emissions.
pub fn initial_params(spec: &ModelSpec, rng: &mut impl Rng) -> HmmParams {
    let n = spec.n_states;
    let pass_prob = (0..n)
        .map(|i| {
            let (lo, hi) = if n == 2 {
                [(0.2, 0.5), (0.6, 0.9)][i]
            } else {
                let width = 0.7 / n as f64;
                (0.2 + width * i as f64, 0.2 + width * (i + 1) as f64)
            };
            rng.random_range(lo..hi)
        })
        .collect();
    let mut coeffs = TransitionCoefficients::zeros(n, spec.n_covariates());
    for i in 0..n {
        let off: Vec<f64> = (0..n - 1)
            .map(|_| rng.random_range(0.05..0.3) / (n - 1) as f64)
            .collect();
        let stay = 1.0 - off.iter().sum::<f64>();
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            coeffs.row_mut(i, j)[0] = (off[slot] / stay).ln();
        }
    }
    HmmParams {
        delta: crate::hmm::InitialDistribution::uniform(n),
        emissions: crate::hmm::EmissionParams { pass_prob },
        coeffs,
    }
}

fn negative_log_likelihood(spec: &ModelSpec, sequences: &[PlaySequence], theta: &[f64]) -> f64 {
    let Ok(params) = unpack(spec, theta) else {
        return f64::INFINITY;
    };
    let Ok(model) = HmmModel::new(spec.clone(), params) else {
        return f64::INFINITY;
    };
    let total = model.total_log_likelihood_unchecked(sequences);
    if total.is_finite() {
        -total
    } else {
        f64::INFINITY
    }
}

fn is_degenerate(params: &HmmParams) -> bool {
    params
        .emissions
        .pass_prob
        .iter()
        .any(|&p| p <= EMISSION_FLOOR || p >= 1.0 - EMISSION_FLOOR)
}

fn maximise(
    spec: &ModelSpec,
    sequences: &[PlaySequence],
    config: &FitConfig,
    warm: Option<&HmmParams>,
) -> Result<(HmmParams, f64, FitDiagnostics)> {
    let objective = |theta: &[f64]| negative_log_likelihood(spec, sequences, theta);
    let opts = config.bfgs();

    let mut starts: Vec<(bool, Vec<f64>)> = (0..config.n_starts)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(s as u64);
            (false, pack(&initial_params(spec, &mut rng)))
        })
        .collect();
    if let Some(w) = warm {
        let mut w = w.clone();
        while w.coeffs.n_covariates() < spec.n_covariates() {
            w.coeffs = w.coeffs.with_zero_slope();
        }
        if w.coeffs.n_covariates() != spec.n_covariates() {
            return Err(Error::Dimension("warm start has too many covariates".into()));
        }
        starts.push((true, pack(&w)));
    }

    let mut results = Vec::with_capacity(starts.len());
    let mut start_diags = Vec::with_capacity(starts.len());
    for (index, (warm, theta0)) in starts.into_iter().enumerate() {
        let min = minimize(objective, &theta0, &opts);
        let params = unpack(spec, &min.x)?.canonicalized();
        let degenerate = is_degenerate(&params);
        start_diags.push(StartDiagnostics {
            start_index: index,
            warm,
            initial_log_likelihood: -min.initial_value,
            final_log_likelihood: -min.value,
            iterations: min.iterations,
            converged: min.converged,
            degenerate,
        });
        results.push((params, -min.value));
    }

    let pick = |accept: &dyn Fn(&StartDiagnostics) -> bool| {
        start_diags
            .iter()
            .filter(|d| accept(d) && d.final_log_likelihood.is_finite())
            .fold(None::<&StartDiagnostics>, |best, d| match best {
                Some(b) if b.final_log_likelihood >= d.final_log_likelihood => Some(b),
                _ => Some(d),
            })
            .map(|d| d.start_index)
    };
    let clean = pick(&|d| d.converged && !d.degenerate);
    let chosen = clean.or_else(|| pick(&|d| d.converged));

    let Some(best) = chosen else {
        return Err(Error::Fit {
            message: format!("none of {} starts converged", start_diags.len()),
            diagnostics: Box::new(FitDiagnostics {
                iterations: start_diags.iter().map(|d| d.iterations).sum(),
                converged: false,
                best_start: None,
                starts: start_diags,
            }),
        });
    };
    let diagnostics = FitDiagnostics {
        iterations: start_diags[best].iterations,
        converged: clean.is_some(),
        best_start: Some(best),
        starts: start_diags,
    };
    let (params, ll) = results.swap_remove(best);
    Ok((params, ll, diagnostics))
}
