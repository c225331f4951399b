//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use playcall::covariates::{Dataset, BASE_COLUMNS};
use playcall::estimation::{aic, CovariateScaling, FitDiagnostics, FittedModel};
use playcall::hmm::{HmmModel, HmmParams, ModelSpec, Play, PlaySequence, TransitionCoefficients};
use playcall::simulate::simulate;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_model(n: usize, names: &[&str], rng: &mut impl Rng) -> HmmModel {
    let k = names.len();
    let rows = (0..n * (n - 1))
        .map(|_| (0..=k).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let coeffs = TransitionCoefficients::from_rows(n, k, rows).unwrap();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let delta = raw.iter().map(|d| d / total).collect();
    let pass = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    HmmModel::new(
        ModelSpec::new(n, names.to_vec()).unwrap(),
        HmmParams::new(delta, pass, coeffs).unwrap(),
    )
    .unwrap()
}

pub fn random_sequence(k: usize, len: usize, rng: &mut impl Rng) -> PlaySequence {
    let plays = (0..len)
        .map(|_| Play {
            y: rng.random_range(0..=1),
            x: (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
        })
        .collect();
    PlaySequence::new("m", "T", plays)
}

/// Transition matrix straight from the multinomial-logit definition.
pub fn oracle_gamma(model: &HmmModel, x: &[f64]) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let coeffs = &model.params().coeffs;
    (0..n)
        .map(|i| {
            let eta: Vec<f64> = (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let b = coeffs.row(i, j);
                        b[0] + b[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
                    }
                })
                .collect();
            let z: f64 = eta.iter().map(|e| e.exp()).sum();
            eta.iter().map(|e| e.exp() / z).collect()
        })
        .collect()
}

fn emission(model: &HmmModel, state: usize, y: u8) -> f64 {
    let p = model.params().emissions.pass_prob[state];
    if y == 1 {
        p
    } else {
        1.0 - p
    }
}

/// Likelihood by summing over every hidden state path.
pub fn brute_force_likelihood(model: &HmmModel, plays: &[Play]) -> f64 {
    let n = model.n_states();
    let t = plays.len();
    let gammas: Vec<Vec<Vec<f64>>> = plays.iter().map(|p| oracle_gamma(model, &p.x)).collect();
    let delta = &model.params().delta.delta;
    let mut total = 0.0;
    for code in 0..n.pow(t as u32) {
        let mut path = Vec::with_capacity(t);
        let mut c = code;
        for _ in 0..t {
            path.push(c % n);
            c /= n;
        }
        let mut p = delta[path[0]] * emission(model, path[0], plays[0].y);
        for s in 1..t {
            p *= gammas[s][path[s - 1]][path[s]] * emission(model, path[s], plays[s].y);
        }
        total += p;
    }
    total
}

/// P(next play is a pass | history) as a ratio of two brute-force sums.
pub fn brute_force_forecast(model: &HmmModel, history: &[Play], next_x: &[f64]) -> f64 {
    let mut extended = history.to_vec();
    extended.push(Play {
        y: 1,
        x: next_x.to_vec(),
    });
    brute_force_likelihood(model, &extended) / brute_force_likelihood(model, history)
}

/// Two-state homogeneous model used for parameter recovery.
pub fn recovery_truth() -> HmmModel {
    let coeffs = TransitionCoefficients::from_homogeneous(&[vec![0.90, 0.10], vec![0.15, 0.85]]).unwrap();
    HmmModel::new(
        ModelSpec::new(2, Vec::<String>::new()).unwrap(),
        HmmParams::new(vec![0.5, 0.5], vec![0.30, 0.85], coeffs).unwrap(),
    )
    .unwrap()
}

/// Covariate `a` drives both switches with slope 2; `b` is independent noise.
pub fn selection_data(n_sequences: usize, rng: &mut impl Rng) -> Dataset {
    let rows = vec![vec![(0.1f64 / 0.9).ln(), 2.0], vec![(0.15f64 / 0.85).ln(), 2.0]];
    let truth = HmmModel::new(
        ModelSpec::new(2, vec!["a"]).unwrap(),
        HmmParams::new(
            vec![0.5, 0.5],
            vec![0.3, 0.85],
            TransitionCoefficients::from_rows(2, 1, rows).unwrap(),
        )
        .unwrap(),
    )
    .unwrap();
    let mut sequences = simulate(&truth, n_sequences, 60, |r| vec![StandardNormal.sample(r)], rng);
    for seq in &mut sequences {
        for play in &mut seq.plays {
            play.x.push(StandardNormal.sample(rng));
        }
    }
    Dataset::new(vec!["a".into(), "b".into()], sequences).unwrap()
}

/// Wraps known parameters as a servable team model over the standard input
/// columns, without scaling.
pub fn fixed_model(team: &str, hmm: &HmmModel) -> FittedModel {
    let spec = hmm.spec().clone();
    FittedModel {
        team: Some(team.into()),
        n_params: spec.n_params(),
        aic: aic(0.0, spec.n_params()),
        log_likelihood: 0.0,
        input_columns: BASE_COLUMNS.iter().map(|c| c.to_string()).collect(),
        covariate_scaling: spec.covariate_names.iter().map(CovariateScaling::identity).collect(),
        params: hmm.params().clone(),
        spec,
        diagnostics: FitDiagnostics::default(),
        selection_trace: None,
        training: None,
    }
}
