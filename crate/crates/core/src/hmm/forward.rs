use serde::{Deserialize, Serialize};

use super::transition::{fill_transition, left_multiply_into, transition_matrix_unchecked};
use super::{transition_matrix, ForecastResult, HmmParams, ModelSpec, PlaySequence, TransitionMatrix, EMISSION_FLOOR};
use crate::error::{Error, Result};

/// Normalised forward vector after some number of observed plays.
///
/// `probs` is the filtered state distribution; `log_likelihood` is the
/// accumulated sum of log normalising constants, i.e. the log-likelihood of
/// the plays absorbed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardState {
    pub probs: Vec<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
}

/// A model specification bound to a consistent parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    spec: ModelSpec,
    params: HmmParams,
    emission: [Vec<f64>; 2],
}

impl HmmModel {
    pub fn new(spec: ModelSpec, params: HmmParams) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_states;
        if params.delta.delta.len() != n || params.emissions.pass_prob.len() != n {
            return Err(Error::Dimension(format!(
                "parameters describe {} / {} states, spec has {n}",
                params.delta.delta.len(),
                params.emissions.pass_prob.len()
            )));
        }
        if params.coeffs.n_states() != n || params.coeffs.n_covariates() != spec.n_covariates() {
            return Err(Error::Dimension(format!(
                "coefficients are {} states x {} covariates, spec is {n} x {}",
                params.coeffs.n_states(),
                params.coeffs.n_covariates(),
                spec.n_covariates()
            )));
        }
        params.coeffs.validate()?;
        let pass: Vec<f64> = params
            .emissions
            .pass_prob
            .iter()
            .map(|p| p.clamp(EMISSION_FLOOR, 1.0 - EMISSION_FLOOR))
            .collect();
        let run = pass.iter().map(|p| 1.0 - p).collect();
        Ok(Self {
            spec,
            params,
            emission: [run, pass],
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &HmmParams {
        &self.params
    }

    pub fn n_states(&self) -> usize {
        self.spec.n_states
    }

    /// Clamped `Pr(y | s = i)` for every state.
    pub fn emission_probs(&self, y: u8) -> &[f64] {
        &self.emission[usize::from(y != 0)]
    }

    pub fn transition_matrix(&self, x: &[f64]) -> Result<TransitionMatrix> {
        transition_matrix(&self.params.coeffs, x)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.n_covariates() {
            return Err(Error::Dimension(format!(
                "covariate vector has length {}, model expects {}",
                x.len(),
                self.spec.n_covariates()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite covariate value".into()));
        }
        Ok(())
    }

    fn normalise(&self, mut alpha: Vec<f64>, mut log_likelihood: f64, n_obs: usize) -> ForwardState {
        let total: f64 = alpha.iter().sum();
        for a in &mut alpha {
            *a /= total;
        }
        log_likelihood += total.ln();
        ForwardState {
            probs: alpha,
            log_likelihood,
            n_obs,
        }
    }

    /// Absorbs the first play of a sequence: `delta * P(y)`.
    pub fn filter_start(&self, y: u8) -> ForwardState {
        let alpha = self
            .params
            .delta
            .delta
            .iter()
            .zip(self.emission_probs(y))
            .map(|(d, e)| d * e)
            .collect();
        self.normalise(alpha, 0.0, 1)
    }

    /// Absorbs one more play: `alpha * Gamma(x) * P(y)`.
    pub fn filter_step(&self, state: &ForwardState, x: &[f64], y: u8) -> Result<ForwardState> {
        self.check_x(x)?;
        Ok(self.filter_step_unchecked(state, x, y))
    }

    fn filter_step_unchecked(&self, state: &ForwardState, x: &[f64], y: u8) -> ForwardState {
        let gamma = transition_matrix_unchecked(&self.params.coeffs, x);
        let mut alpha = gamma.left_multiply(&state.probs);
        for (a, e) in alpha.iter_mut().zip(self.emission_probs(y)) {
            *a *= e;
        }
        self.normalise(alpha, state.log_likelihood, state.n_obs + 1)
    }

    /// Runs the forward recursion over a whole sequence.
    pub fn forward(&self, seq: &PlaySequence) -> Result<ForwardState> {
        seq.validate(self.spec.n_covariates())?;
        let mut plays = seq.plays.iter();
        let first = plays.next().expect("validated non-empty");
        let mut state = self.filter_start(first.y);
        for play in plays {
            state = self.filter_step_unchecked(&state, &play.x, play.y);
        }
        Ok(state)
    }

    pub fn sequence_log_likelihood(&self, seq: &PlaySequence) -> Result<f64> {
        Ok(self.forward(seq)?.log_likelihood)
    }

    /// Sum of per-sequence log-likelihoods, all sharing the same initial
    /// distribution.
    pub fn total_log_likelihood(&self, sequences: &[PlaySequence]) -> Result<f64> {
        if sequences.is_empty() {
            return Err(Error::Domain("no sequences supplied".into()));
        }
        sequences.iter().map(|s| self.sequence_log_likelihood(s)).sum()
    }

    /// Total log-likelihood without per-play allocation; sequences are
    /// assumed validated. Intercept-only models reuse a single matrix.
    pub(crate) fn total_log_likelihood_unchecked(&self, sequences: &[PlaySequence]) -> f64 {
        let n = self.n_states();
        let coeffs = &self.params.coeffs;
        let homogeneous = coeffs.rows().iter().all(|r| r[1..].iter().all(|&b| b == 0.0));
        let mut gamma = vec![0.0; n * n];
        let mut eta = vec![0.0; n];
        let mut alpha = vec![0.0; n];
        let mut next = vec![0.0; n];
        if homogeneous {
            fill_transition(coeffs, &vec![0.0; coeffs.n_covariates()], &mut gamma, &mut eta);
        }
        let mut total = 0.0;
        for seq in sequences {
            let mut plays = seq.plays.iter();
            let Some(first) = plays.next() else { continue };
            let e = self.emission_probs(first.y);
            for ((a, d), e) in alpha.iter_mut().zip(&self.params.delta.delta).zip(e) {
                *a = d * e;
            }
            let s: f64 = alpha.iter().sum();
            alpha.iter_mut().for_each(|a| *a /= s);
            let mut ll = s.ln();
            for play in plays {
                if !homogeneous {
                    fill_transition(coeffs, &play.x, &mut gamma, &mut eta);
                }
                left_multiply_into(&gamma, &alpha, &mut next);
                for (a, e) in next.iter_mut().zip(self.emission_probs(play.y)) {
                    *a *= e;
                }
                let s: f64 = next.iter().sum();
                for (a, v) in alpha.iter_mut().zip(&next) {
                    *a = v / s;
                }
                ll += s.ln();
            }
            total += ll;
        }
        total
    }

    pub fn filtered_state_probs(&self, history: &PlaySequence) -> Result<Vec<f64>> {
        Ok(self.forward(history)?.probs)
    }

    /// Forecast for the play following `history`, whose pre-snap covariates
    /// are `next_x`.
    pub fn forecast_next(&self, history: &PlaySequence, next_x: &[f64]) -> Result<ForecastResult> {
        let state = self.forward(history)?;
        self.forecast_from_state(&state, next_x)
    }

    /// Forecast from an already-filtered forward state.
    pub fn forecast_from_state(&self, state: &ForwardState, next_x: &[f64]) -> Result<ForecastResult> {
        self.check_x(next_x)?;
        let gamma = transition_matrix_unchecked(&self.params.coeffs, next_x);
        let predicted = gamma.left_multiply(&state.probs);
        let pass_prob = mix(&predicted, self.emission_probs(1));
        Ok(ForecastResult::new(pass_prob, state.probs.clone(), state.n_obs))
    }

    /// Forecast for the first play of a match, before any play is observed.
    /// The state distribution is the initial distribution itself.
    pub fn forecast_first(&self) -> ForecastResult {
        let delta = self.params.delta.delta.clone();
        let pass_prob = mix(&delta, self.emission_probs(1));
        ForecastResult::new(pass_prob, delta, 0)
    }
}

fn mix(weights: &[f64], probs: &[f64]) -> f64 {
    weights
        .iter()
        .zip(probs)
        .map(|(w, p)| w * p)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}
