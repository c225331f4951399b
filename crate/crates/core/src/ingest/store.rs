//! On-disk sequence store.
//!
//! ```text
//! <dir>/store.json          columns, counts, descriptive statistics
//! <dir>/train/<TEAM>.jsonl  one record per match: {match_id, season, plays:[{y, x}]}
//! <dir>/test/<TEAM>.jsonl
//! <dir>/rejects.tsv         line<TAB>reason for every rejected row
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DatasetSplit, IngestReport, RawPlayRow, SeasonSplit, TeamSeries};
use crate::covariates::{Dataset, BASE_COLUMNS};
use crate::error::{Error, Result};
use crate::hmm::{Play, PlaySequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub match_id: String,
    pub season: i32,
    pub plays: Vec<Play>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub name: String,
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation.
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreCounts {
    pub input_rows: usize,
    pub filtered_rows: usize,
    pub rejected_rows: usize,
    pub accepted_rows: usize,
    pub range_warnings: usize,
    pub matches: usize,
    pub sequences: usize,
    pub plays: usize,
    pub train_matches: usize,
    pub train_sequences: usize,
    pub train_plays: usize,
    pub test_matches: usize,
    pub test_sequences: usize,
    pub test_plays: usize,
    pub excluded_sequences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub columns: Vec<String>,
    pub seasons: SeasonSplit,
    pub counts: StoreCounts,
    /// Response and covariates over every accepted play.
    pub descriptives: Vec<Descriptive>,
    pub train_teams: Vec<String>,
    pub test_teams: Vec<String>,
    pub warnings: Vec<String>,
}

/// Mean, sample sd, min and max of `pass` and each base covariate.
pub fn descriptives(series: &[TeamSeries]) -> Vec<Descriptive> {
    let names = std::iter::once("pass").chain(BASE_COLUMNS);
    names
        .enumerate()
        .map(|(c, name)| {
            let values = series.iter().flat_map(|s| {
                s.sequence
                    .plays
                    .iter()
                    .map(move |p| if c == 0 { f64::from(p.y) } else { p.x[c - 1] })
            });
            let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in values {
                n += 1;
                let d = v - mean;
                mean += d / n as f64;
                m2 += d * (v - mean);
                min = min.min(v);
                max = max.max(v);
            }
            Descriptive {
                name: name.to_string(),
                n,
                mean: (n > 0).then_some(mean),
                sd: (n > 1).then(|| (m2 / (n - 1) as f64).sqrt()),
                min: (n > 0).then_some(min),
                max: (n > 0).then_some(max),
            }
        })
        .collect()
}

fn write_split(dir: &Path, series: &[TeamSeries]) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_team: BTreeMap<&str, Vec<&TeamSeries>> = BTreeMap::new();
    for s in series {
        by_team.entry(s.sequence.team_id.as_str()).or_default().push(s);
    }
    for (team, list) in &by_team {
        let path = dir.join(format!("{team}.jsonl"));
        let mut out = String::new();
        for s in list {
            let record = SeriesRecord {
                match_id: s.sequence.match_id.clone(),
                season: s.season,
                plays: s.sequence.plays.clone(),
            };
            out.push_str(&serde_json::to_string(&record)?);
            out.push('\n');
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }
    Ok(by_team.keys().map(|t| t.to_string()).collect())
}

fn read_split(dir: &Path) -> Result<BTreeMap<String, Vec<TeamSeries>>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    for path in paths {
        let team = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut list = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SeriesRecord = serde_json::from_str(&line)?;
            list.push(TeamSeries {
                season: record.season,
                sequence: PlaySequence::new(record.match_id, team.clone(), record.plays),
            });
        }
        out.insert(team, list);
    }
    Ok(out)
}

/// Sequences read back from a store directory.
#[derive(Debug, Clone)]
pub struct SequenceStore {
    pub manifest: StoreManifest,
    pub train: BTreeMap<String, Vec<TeamSeries>>,
    pub test: BTreeMap<String, Vec<TeamSeries>>,
}

impl SequenceStore {
    /// Writes the split, its manifest and the rejection list under `dir`.
    pub fn write(
        dir: &Path,
        split: &DatasetSplit,
        seasons: SeasonSplit,
        report: &IngestReport,
        rows: &[RawPlayRow],
        all_series: &[TeamSeries],
    ) -> Result<StoreManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let train_teams = write_split(&dir.join("train"), &split.train)?;
        let test_teams = write_split(&dir.join("test"), &split.test)?;
        let counts = StoreCounts {
            input_rows: report.input_rows,
            filtered_rows: report.filtered_rows,
            rejected_rows: report.rejected_rows(),
            accepted_rows: rows.len(),
            range_warnings: report.range_warnings,
            matches: all_series
                .iter()
                .map(|s| s.sequence.match_id.as_str())
                .collect::<std::collections::BTreeSet<_>>()
                .len(),
            sequences: all_series.len(),
            plays: all_series.iter().map(|s| s.sequence.len()).sum(),
            train_matches: split.train_matches(),
            train_sequences: split.train.len(),
            train_plays: split.train_plays(),
            test_matches: split.test_matches(),
            test_sequences: split.test.len(),
            test_plays: split.test_plays(),
            excluded_sequences: split.excluded,
        };
        let manifest = StoreManifest {
            columns: BASE_COLUMNS.iter().map(|c| c.to_string()).collect(),
            seasons,
            counts,
            descriptives: descriptives(all_series),
            train_teams,
            test_teams,
            warnings: split.warnings.clone(),
        };
        let path = dir.join("store.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

        let path = dir.join("rejects.tsv");
        let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        writeln!(file, "line\treason").map_err(|e| Error::io(&path, e))?;
        for r in &report.rejected {
            writeln!(file, "{}\t{}", r.line, r.reason.replace(['\t', '\n'], " ")).map_err(|e| Error::io(&path, e))?;
        }
        Ok(manifest)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("store.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: StoreManifest = serde_json::from_str(&text)?;
        Ok(Self {
            train: read_split(&dir.join("train"))?,
            test: read_split(&dir.join("test"))?,
            manifest,
        })
    }

    pub fn train_teams(&self) -> Vec<String> {
        self.train.keys().cloned().collect()
    }

    /// Training data of one team as a fitting dataset.
    pub fn train_dataset(&self, team: &str) -> Result<Dataset> {
        let series = self
            .train
            .get(team)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Precondition(format!("no training data for team {team}")))?;
        Dataset::new(
            self.manifest.columns.clone(),
            series.iter().map(|s| s.sequence.clone()).collect(),
        )
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hash over every store file (relative path and content), in path order.
pub fn store_digest(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "run_manifest.json") {
                files.push(path);
            }
        }
    }
    files.sort();
    let mut hasher = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap_or(&f);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(fs::read(&f).map_err(|e| Error::io(&f, e))?);
    }
    Ok(hex::encode(hasher.finalize()))
}
