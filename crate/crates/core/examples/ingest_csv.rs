//! Write a synthetic play-by-play CSV in the Kaggle layout, ingest it into
//! a sequence store and print the counts and descriptive statistics.
//!
//! ```text
//! cargo run --example ingest_csv [OUT_DIR]
//! ```
//!
//! The CSV lands in `OUT_DIR/pbp.csv` and the store in `OUT_DIR/store`
//! (default: a directory under the system temp dir).

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use playcall::ingest::store::SequenceStore;
use playcall::ingest::{build_sequences, parse_plays, split_by_season, ColumnMapping, SeasonSplit};
use playcall::simulate::{league_model, write_league_csv, LeagueConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> playcall::Result<()> {
    run_in(&std::env::temp_dir().join("playcall-ingest-example"))
}

pub fn run_in(out: &Path) -> playcall::Result<()> {
    std::fs::create_dir_all(out).map_err(|e| playcall::Error::io(out, e))?;
    let csv_path = out.join("pbp.csv");

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let file = File::create(&csv_path).map_err(|e| playcall::Error::io(&csv_path, e))?;
    let n_rows = write_league_csv(&league_model(), &LeagueConfig::default(), &mut rng, file)?;
    println!("wrote {n_rows} rows to {}", csv_path.display());

    let source = File::open(&csv_path).map_err(|e| playcall::Error::io(&csv_path, e))?;
    let parsed = parse_plays(BufReader::new(source), &ColumnMapping::default())?;
    let series = build_sequences(&parsed.rows);
    let seasons = SeasonSplit::default();
    let split = split_by_season(series.clone(), &seasons);
    let manifest = SequenceStore::write(
        &out.join("store"),
        &split,
        seasons,
        &parsed.report,
        &parsed.rows,
        &series,
    )?;

    let c = &manifest.counts;
    println!(
        "{} rows: {} other play types, {} accepted, {} rejected",
        c.input_rows, c.filtered_rows, c.accepted_rows, c.rejected_rows
    );
    for r in parsed.report.rejected.iter().take(3) {
        println!("  line {}: {}", r.line, r.reason);
    }
    println!(
        "{} matches, {} team sequences; train {} plays, test {} plays",
        c.matches, c.sequences, c.train_plays, c.test_plays
    );
    println!("{:<12} {:>8} {:>8} {:>8}", "variable", "mean", "sd", "max");
    for d in &manifest.descriptives {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<12} {:>8} {:>8} {:>8}", d.name, f(d.mean), f(d.sd), f(d.max));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> playcall::Result<()> {
    match std::env::args().nth(1) {
        Some(dir) => run_in(&PathBuf::from(dir)),
        None => run_example(),
    }
}
