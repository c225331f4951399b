use serde::{Deserialize, Serialize};

use super::TransitionCoefficients;
use crate::error::{Error, Result};

/// Row-stochastic `N x N` matrix for a single play, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    n_states: usize,
    gamma: Vec<f64>,
}

impl TransitionMatrix {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.n_states + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|i| self.row(i).to_vec()).collect()
    }

    /// `v * Gamma` for a row vector `v`.
    pub fn left_multiply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        left_multiply_into(&self.gamma, v, &mut out);
        out
    }
}

/// Builds the transition matrix implied by covariate vector `x`.
pub fn transition_matrix(coeffs: &TransitionCoefficients, x: &[f64]) -> Result<TransitionMatrix> {
    if x.len() != coeffs.n_covariates() {
        return Err(Error::Dimension(format!(
            "covariate vector has length {}, model expects {}",
            x.len(),
            coeffs.n_covariates()
        )));
    }
    Ok(transition_matrix_unchecked(coeffs, x))
}

pub(crate) fn transition_matrix_unchecked(coeffs: &TransitionCoefficients, x: &[f64]) -> TransitionMatrix {
    let n = coeffs.n_states();
    let mut gamma = vec![0.0; n * n];
    let mut eta = vec![0.0; n];
    fill_transition(coeffs, x, &mut gamma, &mut eta);
    TransitionMatrix { n_states: n, gamma }
}

/// Writes the row-major transition matrix for `x` into `gamma`, using `eta`
/// (length N) as scratch.
pub(crate) fn fill_transition(coeffs: &TransitionCoefficients, x: &[f64], gamma: &mut [f64], eta: &mut [f64]) {
    let n = coeffs.n_states();
    for i in 0..n {
        for (j, e) in eta.iter_mut().enumerate() {
            *e = if i == j {
                0.0
            } else {
                let row = coeffs.row(i, j);
                row[0] + row[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            };
        }
        let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = &mut gamma[i * n..(i + 1) * n];
        let mut total = 0.0;
        for (g, e) in out.iter_mut().zip(eta.iter()) {
            *g = (e - max).exp();
            total += *g;
        }
        for g in out.iter_mut() {
            *g /= total;
        }
    }
}

/// `out = v * gamma` for row-major `gamma`.
pub(crate) fn left_multiply_into(gamma: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        for (o, &g) in out.iter_mut().zip(&gamma[i * n..(i + 1) * n]) {
            *o += vi * g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_intercepts_give_uniform_rows() {
        let coeffs = TransitionCoefficients::zeros(2, 0);
        let g = transition_matrix(&coeffs, &[]).unwrap();
        assert_eq!(g.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn log_three_intercept() {
        let mut coeffs = TransitionCoefficients::zeros(2, 0);
        coeffs.row_mut(0, 1)[0] = 3f64.ln();
        let g = transition_matrix(&coeffs, &[]).unwrap();
        assert!((g.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((g.get(0, 1) - 0.75).abs() < 1e-15);
        assert_eq!(g.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn zero_covariate_kills_slope() {
        let mut coeffs = TransitionCoefficients::zeros(2, 1);
        coeffs.row_mut(0, 1)[1] = 1.0;
        let g = transition_matrix(&coeffs, &[0.0]).unwrap();
        assert_eq!(g.get(0, 1), 0.5);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let coeffs = TransitionCoefficients::zeros(2, 2);
        assert!(matches!(transition_matrix(&coeffs, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn huge_predictors_do_not_overflow() {
        let mut coeffs = TransitionCoefficients::zeros(2, 1);
        coeffs.row_mut(0, 1)[1] = 800.0;
        let g = transition_matrix(&coeffs, &[1.0]).unwrap();
        assert!(g.row(0).iter().all(|v| v.is_finite()));
        assert!((g.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_round_trip() {
        let target = vec![vec![0.9, 0.1], vec![0.15, 0.85]];
        let coeffs = TransitionCoefficients::from_homogeneous(&target).unwrap();
        let g = transition_matrix(&coeffs, &[]).unwrap();
        for (i, row) in target.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert!((g.get(i, j) - want).abs() < 1e-14);
            }
        }
    }

    fn coeffs_and_x(n: usize, k: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (
            prop::collection::vec(prop::collection::vec(-20.0..20.0f64, k + 1), n * (n - 1)),
            prop::collection::vec(-20.0..20.0f64, k),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rows_sum_to_one((rows, x) in (2usize..=3, 0usize..=3).prop_flat_map(|(n, k)| coeffs_and_x(n, k))) {
            let n = ((1.0 + (1.0 + 4.0 * rows.len() as f64).sqrt()) / 2.0).round() as usize;
            let coeffs = TransitionCoefficients::from_rows(n, x.len(), rows).unwrap();
            let g = transition_matrix(&coeffs, &x).unwrap();
            for i in 0..n {
                let s: f64 = g.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(g.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }

        #[test]
        fn zero_slopes_give_homogeneous_chain(
            intercepts in prop::collection::vec(-5.0..5.0f64, 2),
            x1 in prop::collection::vec(-10.0..10.0f64, 3),
            x2 in prop::collection::vec(-10.0..10.0f64, 3),
        ) {
            let rows = intercepts.iter().map(|&b| vec![b, 0.0, 0.0, 0.0]).collect();
            let coeffs = TransitionCoefficients::from_rows(2, 3, rows).unwrap();
            let g1 = transition_matrix(&coeffs, &x1).unwrap();
            let g2 = transition_matrix(&coeffs, &x2).unwrap();
            prop_assert_eq!(g1, g2);
        }
    }
}
