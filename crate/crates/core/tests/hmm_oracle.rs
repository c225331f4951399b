mod common;

use common::{brute_force_forecast, brute_force_likelihood, oracle_gamma, random_model, random_sequence};
use playcall::hmm::{transition_matrix, PlaySequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 2] = ["x1", "x2"];

#[test]
fn likelihood_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(2..=3);
        let k = rng.random_range(0..=2);
        let model = random_model(n, &NAMES[..k], &mut rng);
        let seq = random_sequence(k, rng.random_range(1..=6), &mut rng);
        let brute = brute_force_likelihood(&model, &seq.plays);
        let ll = model.sequence_log_likelihood(&seq).unwrap();
        assert!((ll.exp() / brute - 1.0).abs() < 1e-10, "{} vs {brute}", ll.exp());
    }
}

#[test]
fn transition_matrix_matches_logit_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let model = random_model(3, &NAMES, &mut rng);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = transition_matrix(&model.params().coeffs, &x).unwrap();
        let oracle = oracle_gamma(&model, &x);
        for (i, row) in oracle.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((g.get(i, j) - v).abs() < 1e-14);
            }
        }
    }
}

/// Unscaled forward recursion; fine for sequences short enough not to underflow.
fn raw_forward(model: &playcall::hmm::HmmModel, seq: &PlaySequence) -> f64 {
    let pass = &model.params().emissions.pass_prob;
    let e = |s: usize, y: u8| if y == 1 { pass[s] } else { 1.0 - pass[s] };
    let n = model.n_states();
    let mut alpha: Vec<f64> = (0..n)
        .map(|s| model.params().delta.delta[s] * e(s, seq.plays[0].y))
        .collect();
    for play in &seq.plays[1..] {
        let g = oracle_gamma(model, &play.x);
        alpha = (0..n)
            .map(|j| (0..n).map(|i| alpha[i] * g[i][j]).sum::<f64>() * e(j, play.y))
            .collect();
    }
    alpha.iter().sum()
}

#[test]
fn scaling_equals_raw_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let model = random_model(2, &NAMES, &mut rng);
        let seq = random_sequence(2, 40, &mut rng);
        let raw = raw_forward(&model, &seq);
        let ll = model.sequence_log_likelihood(&seq).unwrap();
        assert!((ll - raw.ln()).abs() < 1e-10 * raw.ln().abs());
    }
}

#[test]
fn forecast_matches_likelihood_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(2..=3);
        let model = random_model(n, &NAMES, &mut rng);
        let history = random_sequence(2, rng.random_range(1..=5), &mut rng);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = model.forecast_next(&history, &x).unwrap();
        let oracle = brute_force_forecast(&model, &history.plays, &x);
        assert!((f.pass_prob - oracle).abs() < 1e-10);
    }
}

#[test]
fn first_play_forecast_is_initial_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_model(3, &[], &mut rng);
    let p = &model.params();
    let expected: f64 = p
        .delta
        .delta
        .iter()
        .zip(&p.emissions.pass_prob)
        .map(|(d, e)| d * e)
        .sum();
    assert!((model.forecast_first().pass_prob - expected).abs() < 1e-15);
}

#[test]
fn relabelling_states_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let model = random_model(3, &NAMES, &mut rng);
        let seq = random_sequence(2, 12, &mut rng);
        let x = [0.3, -1.1];
        let perm = [2, 0, 1];
        let relabelled = playcall::hmm::HmmModel::new(model.spec().clone(), model.params().permuted(&perm)).unwrap();
        let a = model.sequence_log_likelihood(&seq).unwrap();
        let b = relabelled.sequence_log_likelihood(&seq).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        let fa = model.forecast_next(&seq, &x).unwrap().pass_prob;
        let fb = relabelled.forecast_next(&seq, &x).unwrap().pass_prob;
        assert!((fa - fb).abs() < 1e-12);
    }
}

#[test]
fn likelihood_is_additive_over_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = random_model(2, &NAMES, &mut rng);
    let seqs: Vec<_> = (0..5).map(|_| random_sequence(2, 9, &mut rng)).collect();
    let total = model.total_log_likelihood(&seqs).unwrap();
    let sum: f64 = seqs.iter().map(|s| model.sequence_log_likelihood(s).unwrap()).sum();
    assert!((total - sum).abs() < 1e-12);
}

proptest! {
    #[test]
    fn forecast_probabilities_are_complementary(seed in any::<u64>(), len in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(2, &NAMES, &mut rng);
        let history = random_sequence(2, len, &mut rng);
        let f = model.forecast_next(&history, &[0.5, -0.5]).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.pass_prob));
        prop_assert!((f.pass_prob + f.run_prob() - 1.0).abs() < 1e-15);
        prop_assert!((f.filtered_state_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(f.n_history, len);
    }

    #[test]
    fn log_likelihood_is_never_positive(seed in any::<u64>(), len in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(3, &NAMES, &mut rng);
        let seq = random_sequence(2, len, &mut rng);
        let ll = model.sequence_log_likelihood(&seq).unwrap();
        prop_assert!(ll <= 0.0 && ll.is_finite());
    }
}
