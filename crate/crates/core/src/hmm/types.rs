use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SIMPLEX_TOL;
use crate::error::{Error, Result};

/// Number of latent states and the ordered covariates entering every
/// off-diagonal transition predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_states: usize,
    pub covariate_names: Vec<String>,
}

impl ModelSpec {
    pub fn new<S: Into<String>>(n_states: usize, covariate_names: Vec<S>) -> Result<Self> {
        let spec = Self {
            n_states,
            covariate_names: covariate_names.into_iter().map(Into::into).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_states must be at least 2, got {}",
                self.n_states
            )));
        }
        let mut seen = HashSet::new();
        for name in &self.covariate_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate covariate name {name:?}")));
            }
        }
        Ok(())
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    /// Free parameters: emissions, initial distribution (N - 1), and one
    /// intercept plus K slopes for each off-diagonal pair.
    pub fn n_params(&self) -> usize {
        let n = self.n_states;
        n + (n - 1) + n * (n - 1) * (self.n_covariates() + 1)
    }

    /// Returns a copy with one more covariate appended.
    pub fn with_covariate(&self, name: impl Into<String>) -> Result<Self> {
        let mut names = self.covariate_names.clone();
        names.push(name.into());
        Self::new(self.n_states, names)
    }
}

/// Intercepts and slopes for every ordered off-diagonal pair `(i, j)`.
///
/// Rows are stored in row-major pair order, skipping the diagonal: for
/// `N = 3` the order is `(0,1) (0,2) (1,0) (1,2) (2,0) (2,1)`. Each row is
/// `[intercept, slope_1, ..., slope_K]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCoefficients {
    n_states: usize,
    n_covariates: usize,
    rows: Vec<Vec<f64>>,
}

impl TransitionCoefficients {
    pub fn zeros(n_states: usize, n_covariates: usize) -> Self {
        Self {
            n_states,
            n_covariates,
            rows: vec![vec![0.0; n_covariates + 1]; n_states * (n_states - 1)],
        }
    }

    pub fn from_rows(n_states: usize, n_covariates: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let coeffs = Self {
            n_states,
            n_covariates,
            rows,
        };
        coeffs.validate()?;
        Ok(coeffs)
    }

    /// Intercept-only coefficients reproducing a homogeneous transition
    /// matrix. Every entry of `gamma` must lie strictly inside (0, 1).
    pub fn from_homogeneous(gamma: &[Vec<f64>]) -> Result<Self> {
        let n = gamma.len();
        let mut coeffs = Self::zeros(n.max(2), 0);
        if n < 2 {
            return Err(Error::InvalidParameter("need at least 2 states".into()));
        }
        for (i, row) in gamma.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
                return Err(Error::InvalidParameter(format!("row {i} has entries outside (0, 1)")));
            }
            for j in (0..n).filter(|&j| j != i) {
                coeffs.row_mut(i, j)[0] = (row[j] / row[i]).ln();
            }
        }
        Ok(coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 {
            return Err(Error::InvalidParameter("need at least 2 states".into()));
        }
        let expected = self.n_states * (self.n_states - 1);
        if self.rows.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} coefficient rows for {} states, got {}",
                self.n_states,
                self.rows.len()
            )));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.n_covariates + 1 {
                return Err(Error::Dimension(format!(
                    "coefficient row {r} has length {}, expected {}",
                    row.len(),
                    self.n_covariates + 1
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "coefficient row {r} contains a non-finite value"
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn index(&self, i: usize, j: usize) -> usize {
        assert!(i != j, "diagonal pairs carry no coefficients");
        assert!(i < self.n_states && j < self.n_states);
        i * (self.n_states - 1) + if j < i { j } else { j - 1 }
    }

    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        &self.rows[self.index(i, j)]
    }

    pub fn row_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let idx = self.index(i, j);
        &mut self.rows[idx]
    }

    /// Relabels states so that new state `a` is old state `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n_states, self.n_covariates);
        for a in 0..self.n_states {
            for b in (0..self.n_states).filter(|&b| b != a) {
                out.row_mut(a, b).copy_from_slice(self.row(perm[a], perm[b]));
            }
        }
        out
    }

    /// Appends a zero slope column (new covariate) to every row.
    pub fn with_zero_slope(&self) -> Self {
        let mut out = self.clone();
        out.n_covariates += 1;
        for row in &mut out.rows {
            row.push(0.0);
        }
        out
    }
}

/// State-dependent pass probabilities `Pr(y = 1 | s = i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionParams {
    pub pass_prob: Vec<f64>,
}

impl EmissionParams {
    pub fn new(pass_prob: Vec<f64>) -> Result<Self> {
        if let Some(p) = pass_prob.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "emission probability {p} is outside (0, 1)"
            )));
        }
        Ok(Self { pass_prob })
    }

    /// Canonical order: pass probabilities non-decreasing.
    pub fn is_canonical(&self) -> bool {
        self.pass_prob.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub delta: Vec<f64>,
}

impl InitialDistribution {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if delta.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::InvalidParameter(
                "initial probabilities must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = delta.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!(
                "initial probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { delta })
    }

    pub fn uniform(n_states: usize) -> Self {
        Self {
            delta: vec![1.0 / n_states as f64; n_states],
        }
    }
}

/// All estimated quantities of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub delta: InitialDistribution,
    pub emissions: EmissionParams,
    pub coeffs: TransitionCoefficients,
}

impl HmmParams {
    pub fn new(delta: Vec<f64>, pass_prob: Vec<f64>, coeffs: TransitionCoefficients) -> Result<Self> {
        let params = Self {
            delta: InitialDistribution::new(delta)?,
            emissions: EmissionParams::new(pass_prob)?,
            coeffs,
        };
        params.coeffs.validate()?;
        Ok(params)
    }

    pub fn n_states(&self) -> usize {
        self.emissions.pass_prob.len()
    }

    /// Relabels states so that new state `a` is old state `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            delta: InitialDistribution {
                delta: perm.iter().map(|&p| self.delta.delta[p]).collect(),
            },
            emissions: EmissionParams {
                pass_prob: perm.iter().map(|&p| self.emissions.pass_prob[p]).collect(),
            },
            coeffs: self.coeffs.permuted(perm),
        }
    }

    /// Reorders states by ascending pass probability (stable).
    pub fn canonicalized(&self) -> Self {
        let mut perm: Vec<usize> = (0..self.n_states()).collect();
        perm.sort_by(|&a, &b| {
            self.emissions.pass_prob[a]
                .partial_cmp(&self.emissions.pass_prob[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.permuted(&perm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayCall {
    Run,
    Pass,
}

impl PlayCall {
    pub fn from_y(y: u8) -> Self {
        if y == 0 {
            PlayCall::Run
        } else {
            PlayCall::Pass
        }
    }

    pub fn as_y(self) -> u8 {
        match self {
            PlayCall::Run => 0,
            PlayCall::Pass => 1,
        }
    }
}

impl fmt::Display for PlayCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlayCall::Run => "run",
            PlayCall::Pass => "pass",
        })
    }
}

/// One observed play: the call and the covariates known before the snap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Play {
    pub y: u8,
    pub x: Vec<f64>,
}

/// One team's offensive series within one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaySequence {
    pub match_id: String,
    pub team_id: String,
    pub plays: Vec<Play>,
}

impl PlaySequence {
    pub fn new(match_id: impl Into<String>, team_id: impl Into<String>, plays: Vec<Play>) -> Self {
        Self {
            match_id: match_id.into(),
            team_id: team_id.into(),
            plays,
        }
    }

    /// Sequence of calls with all-zero covariate vectors of length `k`.
    pub fn from_calls(match_id: &str, team_id: &str, calls: &[u8], k: usize) -> Self {
        Self::new(
            match_id,
            team_id,
            calls.iter().map(|&y| Play { y, x: vec![0.0; k] }).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn calls(&self) -> impl Iterator<Item = u8> + '_ {
        self.plays.iter().map(|p| p.y)
    }

    pub fn validate(&self, n_covariates: usize) -> Result<()> {
        if self.plays.is_empty() {
            return Err(Error::Domain(format!(
                "sequence {}/{} is empty",
                self.match_id, self.team_id
            )));
        }
        for (p, play) in self.plays.iter().enumerate() {
            if play.y > 1 {
                return Err(Error::Domain(format!("play {p} has call {} (expected 0 or 1)", play.y)));
            }
            if play.x.len() != n_covariates {
                return Err(Error::Dimension(format!(
                    "play {p} of {}/{} has {} covariates, expected {n_covariates}",
                    self.match_id,
                    self.team_id,
                    play.x.len()
                )));
            }
            if play.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "play {p} of {}/{} has a non-finite covariate",
                    self.match_id, self.team_id
                )));
            }
        }
        Ok(())
    }
}

/// Next-play forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub pass_prob: f64,
    pub filtered_state_probs: Vec<f64>,
    pub predicted_call: PlayCall,
    pub n_history: usize,
}

impl ForecastResult {
    pub(crate) fn new(pass_prob: f64, filtered_state_probs: Vec<f64>, n_history: usize) -> Self {
        // Ties go to pass, the majority class.
        let predicted_call = if pass_prob >= 0.5 {
            PlayCall::Pass
        } else {
            PlayCall::Run
        };
        Self {
            pass_prob,
            filtered_state_probs,
            predicted_call,
            n_history,
        }
    }

    pub fn run_prob(&self) -> f64 {
        1.0 - self.pass_prob
    }

    /// Probability of the more likely call.
    pub fn confidence(&self) -> f64 {
        self.pass_prob.max(self.run_prob())
    }
}
