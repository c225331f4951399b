//! Unconstrained parameterisation used by the optimiser.
//!
//! Layout: `logit(pass_prob_i)` for every state, `ln(delta_i / delta_N)` for
//! the first `N - 1` states, then every coefficient row in pair order.

use crate::error::{Error, Result};
use crate::hmm::{EmissionParams, HmmParams, InitialDistribution, ModelSpec, TransitionCoefficients};

pub fn working_len(spec: &ModelSpec) -> usize {
    spec.n_params()
}

pub fn pack(params: &HmmParams) -> Vec<f64> {
    let n = params.n_states();
    let mut out = Vec::with_capacity(n * n * 2);
    out.extend(params.emissions.pass_prob.iter().map(|&p| (p / (1.0 - p)).ln()));
    let delta = &params.delta.delta;
    let reference = delta[n - 1];
    out.extend(delta[..n - 1].iter().map(|&d| (d / reference).ln()));
    for row in params.coeffs.rows() {
        out.extend_from_slice(row);
    }
    out
}

pub fn unpack(spec: &ModelSpec, theta: &[f64]) -> Result<HmmParams> {
    let n = spec.n_states;
    let k = spec.n_covariates();
    if theta.len() != working_len(spec) {
        return Err(Error::Dimension(format!(
            "working vector has length {}, expected {}",
            theta.len(),
            working_len(spec)
        )));
    }
    let pass_prob = theta[..n].iter().map(|&v| sigmoid(v)).collect();

    let logits = &theta[n..2 * n - 1];
    let max = logits.iter().copied().fold(0.0f64, f64::max);
    let mut delta: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    delta.push((-max).exp());
    let total: f64 = delta.iter().sum();
    for d in &mut delta {
        *d /= total;
    }

    let rows = theta[2 * n - 1..].chunks(k + 1).map(<[f64]>::to_vec).collect();
    Ok(HmmParams {
        delta: InitialDistribution { delta },
        emissions: EmissionParams { pass_prob },
        coeffs: TransitionCoefficients::from_rows(n, k, rows)?,
    })
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
