//! Train per-team models on nine synthetic seasons and score one-step-ahead
//! forecasts on the tenth, with and without a confidence threshold.
//!
//! ```text
//! cargo run --example evaluate_season
//! ```

use std::io::Cursor;

use playcall::estimation::{fit_dataset, FitConfig};
use playcall::evaluate::{aggregate, evaluate_team, EvalOptions};
use playcall::ingest::store::SequenceStore;
use playcall::ingest::{build_sequences, parse_plays, split_by_season, ColumnMapping, SeasonSplit};
use playcall::simulate::{league_model, write_league_csv, LeagueConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> playcall::Result<()> {
    let truth = league_model();
    let mut csv = Vec::new();
    write_league_csv(
        &truth,
        &LeagueConfig::default(),
        &mut ChaCha8Rng::seed_from_u64(5),
        &mut csv,
    )?;
    let parsed = parse_plays(Cursor::new(csv), &ColumnMapping::default())?;
    let series = build_sequences(&parsed.rows);
    let split = split_by_season(series.clone(), &SeasonSplit::default());

    let dir = std::env::temp_dir().join("playcall-evaluate-example");
    SequenceStore::write(
        &dir,
        &split,
        SeasonSplit::default(),
        &parsed.report,
        &parsed.rows,
        &series,
    )?;
    let store = SequenceStore::open(&dir)?;

    let spec = truth.spec().clone();
    let mut models = Vec::new();
    for (i, team) in store.train_teams().iter().enumerate() {
        let config = FitConfig {
            rng_seed: i as u64,
            ..FitConfig::default()
        };
        let mut model = fit_dataset(&spec, &store.train_dataset(team)?, &config)?;
        model.team = Some(team.clone());
        models.push(model);
    }

    for threshold in [None, Some(0.7)] {
        let options = EvalOptions {
            threshold,
            ..EvalOptions::default()
        };
        let mut reports = Vec::new();
        for model in &models {
            let team = model.team.as_deref().unwrap_or_default();
            let test: Vec<_> = store.test[team].iter().map(|s| s.sequence.clone()).collect();
            reports.push(evaluate_team(model, team, &test, &options)?);
        }
        let report = aggregate(reports)?;
        println!("threshold {threshold:?}");
        print!("{}", report.to_table());
        println!();
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> playcall::Result<()> {
    run_example()
}
