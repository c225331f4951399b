//! Hidden Markov model with Bernoulli emissions and covariate-linked
//! transition probabilities.
//!
//! The latent chain has `N` states. Each play emits a binary call
//! (`0` = run, `1` = pass) with state-dependent pass probability. The
//! transition matrix for play `p` is built from that play's covariates
//! through a row-wise multinomial logit with the diagonal as reference
//! category:
//!
//! ```text
//! eta_ij = b0_ij + sum_l b_l_ij * x_l     (i != j),   eta_ii = 0
//! gamma_ij = exp(eta_ij) / sum_k exp(eta_ik)
//! ```
//!
//! Likelihoods are evaluated with a normalised forward recursion whose
//! log normalising constants are accumulated, so long sequences never
//! underflow. The first play of a sequence is weighted by the initial
//! distribution only; transition matrices apply from the second play on.
//!
//! # Quick start
//!
//! ```
//! use playcall::hmm::{HmmModel, HmmParams, ModelSpec, PlaySequence, TransitionCoefficients};
//!
//! let spec = ModelSpec::new(2, Vec::<String>::new()).unwrap();
//! let coeffs = TransitionCoefficients::from_rows(2, 0, vec![vec![(1.0f64 / 3.0).ln()]; 2]).unwrap();
//! let params = HmmParams::new(vec![0.5, 0.5], vec![0.2, 0.8], coeffs).unwrap();
//! let model = HmmModel::new(spec, params).unwrap();
//!
//! let history = PlaySequence::from_calls("m1", "NE", &[1], 0);
//! let forecast = model.forecast_next(&history, &[]).unwrap();
//! assert!((forecast.pass_prob - 0.59).abs() < 1e-12);
//! ```

mod forward;
mod transition;
mod types;

pub use forward::{ForwardState, HmmModel};
pub use transition::{transition_matrix, TransitionMatrix};
pub use types::{
    EmissionParams, ForecastResult, HmmParams, InitialDistribution, ModelSpec, Play, PlayCall, PlaySequence,
    TransitionCoefficients,
};

/// Lower clamp applied to emission probabilities during likelihood evaluation.
pub const EMISSION_FLOOR: f64 = 1e-10;

/// Tolerance on probability vectors summing to one.
pub const SIMPLEX_TOL: f64 = 1e-12;
