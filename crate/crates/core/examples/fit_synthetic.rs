//! Simulate play calls from a known two-state model and recover its
//! parameters by maximum likelihood.
//!
//! ```text
//! cargo run --example fit_synthetic
//! ```

use std::time::Instant;

use playcall::estimation::{fit, FitConfig};
use playcall::hmm::{HmmModel, HmmParams, ModelSpec, TransitionCoefficients};
use playcall::simulate::simulate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> playcall::Result<()> {
    let spec = ModelSpec::new(2, Vec::<String>::new())?;
    let coeffs = TransitionCoefficients::from_homogeneous(&[vec![0.90, 0.10], vec![0.15, 0.85]])?;
    let truth = HmmModel::new(spec.clone(), HmmParams::new(vec![0.5, 0.5], vec![0.30, 0.85], coeffs)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sequences = simulate(&truth, 500, 60, |_| vec![], &mut rng);

    let started = Instant::now();
    let fitted = fit(&spec, &sequences, &FitConfig::default())?;
    let gamma = fitted.hmm()?.transition_matrix(&[])?;

    println!("fitted in {:.2?}", started.elapsed());
    println!("log-likelihood  {:.3}", fitted.log_likelihood);
    println!("AIC             {:.3}", fitted.aic);
    println!(
        "pass prob       ({:.3}, {:.3})   truth (0.300, 0.850)",
        fitted.params.emissions.pass_prob[0], fitted.params.emissions.pass_prob[1]
    );
    println!(
        "switch prob     ({:.3}, {:.3})   truth (0.100, 0.150)",
        gamma.get(0, 1),
        gamma.get(1, 0)
    );
    println!(
        "best start {:?} after {} iterations, converged = {}",
        fitted.diagnostics.best_start, fitted.diagnostics.iterations, fitted.diagnostics.converged
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> playcall::Result<()> {
    run_example()
}
