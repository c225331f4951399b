use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_with_start, FitConfig, FittedModel};
use crate::covariates::{Dataset, Term};
use crate::error::{Error, Result};
use crate::hmm::ModelSpec;

/// One adopted model along the selection path. The first step is the
/// intercept-only model and has no added term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub added: Option<String>,
    pub aic: f64,
    pub log_likelihood: f64,
    pub n_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub term: String,
    pub aic: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRound {
    pub incumbent_aic: f64,
    pub candidates: Vec<CandidateOutcome>,
    pub adopted: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    pub rounds: Vec<SelectionRound>,
}

impl SelectionTrace {
    pub fn selected(&self) -> Vec<&str> {
        self.steps.iter().filter_map(|s| s.added.as_deref()).collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[1].aic < w[0].aic)
    }
}

fn step(model: &FittedModel, added: Option<String>) -> SelectionStep {
    SelectionStep {
        added,
        aic: model.aic,
        log_likelihood: model.log_likelihood,
        n_params: model.n_params,
    }
}

/// Greedy AIC forward selection.
///
/// Each round fits the incumbent plus one unused candidate, with the new
/// term entering every off-diagonal predictor. The candidate with the
/// lowest AIC is adopted if it strictly beats the incumbent; otherwise the
/// search stops. An interaction `a:b` is only eligible once both `a` and `b`
/// are in the model. Candidate fits are warm-started from the incumbent in
/// addition to the configured random starts.
pub fn forward_select(
    base: &ModelSpec,
    candidates: &[String],
    data: &Dataset,
    config: &FitConfig,
) -> Result<(FittedModel, SelectionTrace)> {
    if base.n_covariates() != 0 {
        return Err(Error::Precondition(
            "selection must start from an intercept-only model".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::Precondition("no candidate covariates".into()));
    }
    let terms: Vec<Term> = candidates.iter().map(|c| Term::parse(c)).collect::<Result<_>>()?;

    let mut incumbent = fit_with_start(base, &data.columns, &data.sequences, config, None)?;
    let mut trace = SelectionTrace {
        steps: vec![step(&incumbent, None)],
        rounds: Vec::new(),
    };

    loop {
        let selected = &incumbent.spec.covariate_names;
        let eligible: Vec<&String> = candidates
            .iter()
            .zip(&terms)
            .filter(|(name, term)| {
                !selected.contains(name) && term.parents().iter().all(|p| selected.iter().any(|s| s == p))
            })
            .map(|(name, _)| name)
            .collect();
        if eligible.is_empty() {
            break;
        }

        let fits: Vec<(String, Result<FittedModel>)> = eligible
            .par_iter()
            .map(|name| {
                let result = incumbent.spec.with_covariate(name.as_str()).and_then(|spec| {
                    fit_with_start(&spec, &data.columns, &data.sequences, config, Some(&incumbent.params))
                });
                (name.to_string(), result)
            })
            .collect();

        let mut outcomes = Vec::with_capacity(fits.len());
        let mut best: Option<FittedModel> = None;
        for (name, result) in fits {
            match result {
                Ok(model) => {
                    outcomes.push(CandidateOutcome {
                        term: name,
                        aic: Some(model.aic),
                        log_likelihood: Some(model.log_likelihood),
                        warning: (!model.diagnostics.converged).then(|| "best start flagged degenerate".to_string()),
                    });
                    if best.as_ref().is_none_or(|b| model.aic < b.aic) {
                        best = Some(model);
                    }
                }
                Err(e) => {
                    warn!("candidate {name} skipped: {e}");
                    outcomes.push(CandidateOutcome {
                        term: name,
                        aic: None,
                        log_likelihood: None,
                        warning: Some(e.to_string()),
                    });
                }
            }
        }
        let Some(best) = best else {
            return Err(Error::Selection(format!(
                "all {} candidate fits failed in round {}",
                outcomes.len(),
                trace.rounds.len() + 1
            )));
        };

        let improves = best.aic < incumbent.aic;
        let added = best.spec.covariate_names.last().cloned();
        trace.rounds.push(SelectionRound {
            incumbent_aic: incumbent.aic,
            candidates: outcomes,
            adopted: improves.then(|| added.clone()).flatten(),
        });
        if !improves {
            break;
        }
        trace.steps.push(step(&best, added));
        incumbent = best;
    }

    incumbent.selection_trace = Some(trace.clone());
    Ok((incumbent, trace))
}
