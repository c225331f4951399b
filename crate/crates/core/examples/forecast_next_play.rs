//! One-step-ahead forecasts from a hand-specified model.
//!
//! A run-leaning state (20% passes) and a pass-leaning state (80%), equally
//! likely at kickoff and switching with probability 1/4. After one observed
//! pass the next play is a pass with probability 0.59. A second model lets
//! a shotgun formation push the offense into the passing state.
//!
//! ```text
//! cargo run --example forecast_next_play
//! ```

use playcall::hmm::{HmmModel, HmmParams, ModelSpec, PlaySequence, TransitionCoefficients};

pub fn run_example() -> playcall::Result<()> {
    let coeffs = TransitionCoefficients::from_homogeneous(&[vec![0.75, 0.25], vec![0.25, 0.75]])?;
    let model = HmmModel::new(
        ModelSpec::new(2, Vec::<String>::new())?,
        HmmParams::new(vec![0.5, 0.5], vec![0.2, 0.8], coeffs)?,
    )?;

    let first = model.forecast_first();
    println!(
        "kickoff:      P(pass) = {:.3}  -> {}",
        first.pass_prob, first.predicted_call
    );

    let history = PlaySequence::from_calls("demo", "NE", &[1], 0);
    let next = model.forecast_next(&history, &[])?;
    println!(
        "after a pass: P(pass) = {:.3}  -> {}  (state probs {:.2?})",
        next.pass_prob, next.predicted_call, next.filtered_state_probs
    );

    // Shotgun raises the log-odds of moving run -> pass by 2 and lowers
    // pass -> run by 1.
    let mut coeffs = TransitionCoefficients::zeros(2, 1);
    coeffs.row_mut(0, 1).copy_from_slice(&[(0.25f64 / 0.75).ln(), 2.0]);
    coeffs.row_mut(1, 0).copy_from_slice(&[(0.25f64 / 0.75).ln(), -1.0]);
    let model = HmmModel::new(
        ModelSpec::new(2, vec!["shotgun"])?,
        HmmParams::new(vec![0.5, 0.5], vec![0.2, 0.8], coeffs)?,
    )?;
    // Run, run, pass, run; plays so far were all under center.
    let history = PlaySequence::from_calls("demo", "NE", &[0, 0, 1, 0], 1);
    for shotgun in [0.0, 1.0] {
        let f = model.forecast_next(&history, &[shotgun])?;
        println!(
            "after R R P R, shotgun = {shotgun}: P(pass) = {:.3}, confidence {:.3}",
            f.pass_prob,
            f.confidence()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> playcall::Result<()> {
    run_example()
}
