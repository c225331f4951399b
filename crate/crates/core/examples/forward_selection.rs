//! Greedy AIC forward selection on synthetic data where covariate `a`
//! drives both state switches and `b` is pure noise.
//!
//! ```text
//! cargo run --example forward_selection
//! ```

use std::time::Instant;

use playcall::covariates::Dataset;
use playcall::estimation::{forward_select, FitConfig};
use playcall::hmm::{HmmModel, HmmParams, ModelSpec, TransitionCoefficients};
use playcall::simulate::simulate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn run_example() -> playcall::Result<()> {
    // Truth uses only `a`; the data also carry `b`.
    let rows = vec![vec![(0.1f64 / 0.9).ln(), 2.0], vec![(0.15f64 / 0.85).ln(), 2.0]];
    let truth = HmmModel::new(
        ModelSpec::new(2, vec!["a"])?,
        HmmParams::new(
            vec![0.5, 0.5],
            vec![0.3, 0.85],
            TransitionCoefficients::from_rows(2, 1, rows)?,
        )?,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sequences = simulate(&truth, 200, 60, |r| vec![StandardNormal.sample(r)], &mut rng);
    for seq in &mut sequences {
        for play in &mut seq.plays {
            play.x.push(StandardNormal.sample(&mut rng));
        }
    }
    let data = Dataset::new(vec!["a".into(), "b".into()], sequences)?;

    let started = Instant::now();
    let base = ModelSpec::new(2, Vec::<String>::new())?;
    let candidates = vec!["a".to_string(), "b".to_string(), "a:b".to_string()];
    let (model, trace) = forward_select(&base, &candidates, &data, &FitConfig::default())?;

    println!("selection took {:.2?}", started.elapsed());
    for (i, round) in trace.rounds.iter().enumerate() {
        println!("round {} (incumbent AIC {:.2})", i + 1, round.incumbent_aic);
        for c in &round.candidates {
            let aic = c.aic.map_or("failed".to_string(), |a| format!("{a:.2}"));
            println!("  + {:<4} AIC {aic}", c.term);
        }
        match &round.adopted {
            Some(term) => println!("  adopted {term}"),
            None => println!("  no improvement, stop"),
        }
    }
    println!(
        "selected {:?}, AIC path {:?}",
        trace.selected(),
        trace.steps.iter().map(|s| s.aic.round()).collect::<Vec<_>>()
    );
    println!("final model covariates {:?}", model.spec.covariate_names);
    Ok(())
}

#[allow(dead_code)]
fn main() -> playcall::Result<()> {
    run_example()
}
