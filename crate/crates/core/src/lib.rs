//! Forecasting run/pass play calls with hidden Markov models whose
//! transition probabilities depend on the game situation.
//!
//! * [`hmm`]: transition matrices, forward likelihood, filtering, forecasts.
//! * [`estimation`]: maximum likelihood, AIC, forward covariate selection.
//! * [`covariates`]: covariate names and design projection.
//! * [`ingest`]: play-by-play CSV parsing and the sequence store.
//! * [`evaluate`]: one-step-ahead prediction and accuracy reports.
//! * [`serve`]: HTTP session service for live forecasting.
//! * [`cli`]: the `playcall` command line.
//! * [`simulate`]: synthetic data from a known model.

pub mod cli;
pub mod covariates;
pub mod error;
pub mod estimation;
pub mod evaluate;
pub mod hmm;
pub mod ingest;
pub mod serve;
pub mod simulate;

pub use error::{Error, Result};
