//! Play-by-play ingestion: CSV parsing, covariate derivation, grouping into
//! per-team match sequences, and the season split.

pub mod mapping;
pub mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use log::warn;
use serde::{Deserialize, Serialize};

pub use mapping::{ColumnMapping, ScoreTiming, DEFAULT_TEAM_ALIASES, FIELDS};
pub use store::{file_sha256, store_digest, Descriptive, SequenceStore, SeriesRecord, StoreCounts, StoreManifest};

use crate::covariates::BASE_COLUMNS;
use crate::error::{Error, Result};
use crate::hmm::{Play, PlaySequence};

/// Play types kept for modelling; everything else is filtered out.
pub const KEPT_PLAY_TYPES: [&str; 2] = ["run", "pass"];

pub const YDSTOGO_RANGE: (f64, f64) = (1.0, 50.0);
pub const SCOREDIFF_RANGE: (f64, f64) = (-59.0, 59.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPlayRow {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub match_id: String,
    pub season: i32,
    pub offense: String,
    pub home_team: String,
    pub play_type: String,
    pub down: u8,
    pub ydstogo: f64,
    pub shotgun: bool,
    pub no_huddle: bool,
    pub offense_score: f64,
    pub defense_score: f64,
    pub goal_to_go: bool,
    pub yardline_100: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub pass: u8,
    pub home: u8,
    pub ydstogo: f64,
    pub down: [u8; 4],
    pub shotgun: u8,
    pub no_huddle: u8,
    pub scorediff: f64,
    pub goaltogo: u8,
    pub yardline90: u8,
}

impl CovariateRow {
    /// Covariate values in [`BASE_COLUMNS`] order.
    pub fn to_base_vector(&self) -> Vec<f64> {
        let v = vec![
            f64::from(self.home),
            self.ydstogo,
            f64::from(self.down[0]),
            f64::from(self.down[1]),
            f64::from(self.down[2]),
            f64::from(self.down[3]),
            f64::from(self.shotgun),
            f64::from(self.no_huddle),
            self.scorediff,
            f64::from(self.goaltogo),
            f64::from(self.yardline90),
        ];
        debug_assert_eq!(v.len(), BASE_COLUMNS.len());
        v
    }

    /// Values outside the ranges observed in the reference data.
    pub fn range_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(YDSTOGO_RANGE.0..=YDSTOGO_RANGE.1).contains(&self.ydstogo) {
            out.push(format!("ydstogo {} outside [1, 50]", self.ydstogo));
        }
        if !(SCOREDIFF_RANGE.0..=SCOREDIFF_RANGE.1).contains(&self.scorediff) {
            out.push(format!("scorediff {} outside [-59, 59]", self.scorediff));
        }
        out
    }
}

/// Pre-snap situation fields shared by ingestion and the live service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Situation {
    pub home: bool,
    pub down: u8,
    pub ydstogo: f64,
    pub shotgun: bool,
    pub no_huddle: bool,
    pub own_score: f64,
    pub opponent_score: f64,
    pub goal_to_go: bool,
    pub yardline_100: f64,
}

impl Situation {
    pub fn covariates(&self, pass: u8) -> CovariateRow {
        let mut down = [0u8; 4];
        down[usize::from(self.down.clamp(1, 4) - 1)] = 1;
        CovariateRow {
            pass,
            home: u8::from(self.home),
            ydstogo: self.ydstogo,
            down,
            shotgun: u8::from(self.shotgun),
            no_huddle: u8::from(self.no_huddle),
            scorediff: self.own_score - self.opponent_score,
            goaltogo: u8::from(self.goal_to_go),
            // yardline_100 is the distance to the opponent's end zone, so
            // "within 10 yards of the own end zone" is >= 90.
            yardline90: u8::from(self.yardline_100 >= 90.0),
        }
    }
}

pub fn derive_covariates(row: &RawPlayRow) -> CovariateRow {
    Situation {
        home: row.offense == row.home_team,
        down: row.down,
        ydstogo: row.ydstogo,
        shotgun: row.shotgun,
        no_huddle: row.no_huddle,
        own_score: row.offense_score,
        opponent_score: row.defense_score,
        goal_to_go: row.goal_to_go,
        yardline_100: row.yardline_100,
    }
    .covariates(u8::from(row.play_type == "pass"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Data rows in the file (header excluded).
    pub input_rows: usize,
    /// Rows whose play type is not run or pass.
    pub filtered_rows: usize,
    pub accepted_rows: usize,
    pub rejected: Vec<Rejection>,
    /// Accepted rows with ydstogo or scorediff outside the reference range.
    pub range_warnings: usize,
}

impl IngestReport {
    pub fn rejected_rows(&self) -> usize {
        self.rejected.len()
    }

    /// Run/pass rows considered for typing.
    pub fn candidate_rows(&self) -> usize {
        self.input_rows - self.filtered_rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPlays {
    pub rows: Vec<RawPlayRow>,
    pub report: IngestReport,
}

fn is_missing(v: &str) -> bool {
    let v = v.trim();
    v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan")
}

fn number(v: &str, what: &str) -> std::result::Result<f64, String> {
    if is_missing(v) {
        return Err(format!("missing {what}"));
    }
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("invalid {what} {v:?}"))
}

fn flag(v: &str, what: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        t if t.eq_ignore_ascii_case("true") => Ok(true),
        t if t.eq_ignore_ascii_case("false") => Ok(false),
        _ => match number(v, what)? {
            0.0 => Ok(false),
            1.0 => Ok(true),
            x => Err(format!("invalid {what} {x} (expected 0 or 1)")),
        },
    }
}

/// NFL season of a match. January and February games belong to the
/// previous calendar year's season.
pub fn season_of(date: Option<&str>, game_id: &str) -> Option<i32> {
    let from_ymd = |y: i32, m: u32| if m <= 2 { y - 1 } else { y };
    if let Some(date) = date.filter(|d| !is_missing(d)) {
        let parts: Vec<&str> = date.trim().split(['-', '/']).collect();
        if parts.len() >= 3 {
            let nums: Vec<Option<i64>> = parts[..3].iter().map(|p| p.trim().parse().ok()).collect();
            match (nums[0], nums[1], nums[2]) {
                (Some(y), Some(m), Some(_)) if parts[0].len() == 4 => {
                    return Some(from_ymd(y as i32, m as u32));
                }
                (Some(m), Some(_), Some(y)) if parts[2].len() == 4 => {
                    return Some(from_ymd(y as i32, m as u32));
                }
                _ => {}
            }
        }
    }
    let digits: String = game_id.trim().chars().take_while(char::is_ascii_digit).collect();
    if digits.len() >= 8 {
        let y: i32 = digits[..4].parse().ok()?;
        let m: u32 = digits[4..6].parse().ok()?;
        if (1..=12).contains(&m) {
            return Some(from_ymd(y, m));
        }
    }
    None
}

struct Columns {
    idx: HashMap<&'static str, usize>,
}

impl Columns {
    fn get<'r>(&self, record: &'r csv::StringRecord, field: &str) -> std::result::Result<&'r str, String> {
        match self.idx.get(field) {
            Some(&i) => record.get(i).ok_or_else(|| format!("missing field {field}")),
            None => Ok(""),
        }
    }
}

/// Latest post-play score of each side (home, away) per match.
#[derive(Default)]
struct ScoreTracker {
    last: HashMap<String, [f64; 2]>,
}

impl ScoreTracker {
    /// Returns the (offense, defense) score before this row and records the
    /// score after it. Rows of every play type count, since kicks score too.
    fn observe(&mut self, cols: &Columns, record: &csv::StringRecord, mapping: &ColumnMapping) -> Option<(f64, f64)> {
        let field = |f: &str| cols.get(record, f).ok().map(str::trim).filter(|v| !is_missing(v));
        let game = field("game_id")?.to_string();
        let offense = mapping.team(field("posteam")?);
        let home = mapping.team(field("home_team")?);
        let side = usize::from(offense != home);
        let last = self.last.entry(game).or_insert([0.0, 0.0]);
        let before = (last[side], last[1 - side]);
        let post = |f: &str| field(f).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite());
        if let (Some(own), Some(opp)) = (post("posteam_score"), post("defteam_score")) {
            last[side] = own;
            last[1 - side] = opp;
        }
        Some(before)
    }
}

/// Parses a play-by-play CSV. Rows whose play type is not run or pass are
/// counted and skipped; run/pass rows that fail typing are rejected with a
/// line-numbered reason. Accepted rows keep file order.
pub fn parse_plays<R: Read>(source: R, mapping: &ColumnMapping) -> Result<ParsedPlays> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut idx = HashMap::new();
    let mut missing = Vec::new();
    for (field, _) in FIELDS {
        let Some(name) = mapping.column(field) else {
            if field != "game_date" {
                missing.push(format!("{field} (disabled)"));
            }
            continue;
        };
        match headers.iter().position(|h| h.trim() == name) {
            Some(i) => {
                idx.insert(field, i);
            }
            None => missing.push(format!("{field} -> {name:?}")),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "required columns not found: {}",
            missing.join(", ")
        )));
    }
    let cols = Columns { idx };

    let mut report = IngestReport::default();
    let mut scores = ScoreTracker::default();
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut line = 1u64;
    loop {
        let more = match reader.read_record(&mut record) {
            Ok(more) => more,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                report.input_rows += 1;
                line = e.position().map_or(line + 1, |p| p.line());
                report.rejected.push(Rejection {
                    line,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        if !more {
            break;
        }
        report.input_rows += 1;
        line = record.position().map_or(line + 1, |p| p.line());
        let pre_scores = match mapping.score_timing {
            ScoreTiming::Pre => None,
            ScoreTiming::Post => scores.observe(&cols, &record, mapping),
        };
        let play_type = cols.get(&record, "play_type").unwrap_or("").trim().to_ascii_lowercase();
        if !KEPT_PLAY_TYPES.contains(&play_type.as_str()) {
            report.filtered_rows += 1;
            continue;
        }
        match type_row(&cols, &record, mapping, line, play_type) {
            Ok(mut row) => {
                if let Some((own, opp)) = pre_scores {
                    row.offense_score = own;
                    row.defense_score = opp;
                }
                let covs = derive_covariates(&row);
                let violations = covs.range_violations();
                if !violations.is_empty() {
                    report.range_warnings += 1;
                    warn!("line {line}: {}", violations.join("; "));
                }
                rows.push(row);
            }
            Err(reason) => report.rejected.push(Rejection { line, reason }),
        }
    }
    report.accepted_rows = rows.len();
    Ok(ParsedPlays { rows, report })
}

fn type_row(
    cols: &Columns,
    record: &csv::StringRecord,
    mapping: &ColumnMapping,
    line: u64,
    play_type: String,
) -> std::result::Result<RawPlayRow, String> {
    let text = |field: &str| -> std::result::Result<String, String> {
        let v = cols.get(record, field)?;
        if is_missing(v) {
            Err(format!("missing {field}"))
        } else {
            Ok(v.trim().to_string())
        }
    };
    let match_id = text("game_id")?;
    let date = cols.get(record, "game_date")?;
    let season = season_of(Some(date), &match_id)
        .ok_or_else(|| format!("cannot derive season from date {date:?} / id {match_id:?}"))?;
    let down_raw = cols.get(record, "down")?;
    if is_missing(down_raw) {
        return Err("missing down".into());
    }
    let down = number(down_raw, "down")?;
    if !(down == down.trunc() && (1.0..=4.0).contains(&down)) {
        return Err(format!("invalid down {down}"));
    }
    Ok(RawPlayRow {
        line,
        offense: mapping.team(&text("posteam")?),
        home_team: mapping.team(&text("home_team")?),
        match_id,
        season,
        play_type,
        down: down as u8,
        ydstogo: number(cols.get(record, "ydstogo")?, "ydstogo")?,
        shotgun: flag(cols.get(record, "shotgun")?, "shotgun")?,
        no_huddle: flag(cols.get(record, "no_huddle")?, "no_huddle")?,
        offense_score: number(cols.get(record, "posteam_score")?, "posteam_score")?,
        defense_score: number(cols.get(record, "defteam_score")?, "defteam_score")?,
        goal_to_go: flag(cols.get(record, "goal_to_go")?, "goal_to_go")?,
        yardline_100: number(cols.get(record, "yardline_100")?, "yardline_100")?,
    })
}

/// One team's offensive series in one match, tagged with its season.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamSeries {
    pub season: i32,
    pub sequence: PlaySequence,
}

/// Groups rows by (match, offense) in order of first appearance; plays keep
/// file order. Covariate vectors follow [`BASE_COLUMNS`].
pub fn build_sequences(rows: &[RawPlayRow]) -> Vec<TeamSeries> {
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    let mut out: Vec<TeamSeries> = Vec::new();
    for row in rows {
        let key = (row.match_id.as_str(), row.offense.as_str());
        let slot = *index.entry(key).or_insert_with(|| {
            out.push(TeamSeries {
                season: row.season,
                sequence: PlaySequence::new(row.match_id.clone(), row.offense.clone(), Vec::new()),
            });
            out.len() - 1
        });
        let covs = derive_covariates(row);
        out[slot].sequence.plays.push(Play {
            y: covs.pass,
            x: covs.to_base_vector(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonSplit {
    pub first_train: i32,
    pub last_train: i32,
    pub test: i32,
}

impl Default for SeasonSplit {
    fn default() -> Self {
        Self {
            first_train: 2009,
            last_train: 2017,
            test: 2018,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<TeamSeries>,
    pub test: Vec<TeamSeries>,
    pub excluded: usize,
    pub warnings: Vec<String>,
}

fn by_team(series: &[TeamSeries]) -> BTreeMap<String, Vec<usize>> {
    let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in series.iter().enumerate() {
        map.entry(s.sequence.team_id.clone()).or_default().push(i);
    }
    map
}

fn distinct_matches(series: &[TeamSeries]) -> usize {
    series
        .iter()
        .map(|s| s.sequence.match_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

impl DatasetSplit {
    pub fn train_by_team(&self) -> BTreeMap<String, Vec<usize>> {
        by_team(&self.train)
    }

    pub fn test_by_team(&self) -> BTreeMap<String, Vec<usize>> {
        by_team(&self.test)
    }

    pub fn train_matches(&self) -> usize {
        distinct_matches(&self.train)
    }

    pub fn test_matches(&self) -> usize {
        distinct_matches(&self.test)
    }

    pub fn train_plays(&self) -> usize {
        self.train.iter().map(|s| s.sequence.len()).sum()
    }

    pub fn test_plays(&self) -> usize {
        self.test.iter().map(|s| s.sequence.len()).sum()
    }

    /// Fitting needs a non-empty training split.
    pub fn require_training(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Precondition("training split is empty".into()));
        }
        Ok(())
    }
}

pub fn split_by_season(series: Vec<TeamSeries>, seasons: &SeasonSplit) -> DatasetSplit {
    let mut split = DatasetSplit::default();
    let mut excluded_seasons = BTreeSet::new();
    for s in series {
        if s.season == seasons.test {
            split.test.push(s);
        } else if (seasons.first_train..=seasons.last_train).contains(&s.season) {
            split.train.push(s);
        } else {
            excluded_seasons.insert(s.season);
            split.excluded += 1;
        }
    }
    if !excluded_seasons.is_empty() {
        let msg = format!(
            "{} sequences from seasons {:?} fall outside {}-{} and were excluded",
            split.excluded, excluded_seasons, seasons.first_train, seasons.test
        );
        warn!("{msg}");
        split.warnings.push(msg);
    }
    if split.train.is_empty() {
        let msg = "training split is empty; fitting is not possible".to_string();
        warn!("{msg}");
        split.warnings.push(msg);
    }
    if split.test.is_empty() {
        let msg = format!("no {} sequences; evaluation disabled", seasons.test);
        warn!("{msg}");
        split.warnings.push(msg);
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "game_id,game_date,posteam,home_team,play_type,down,ydstogo,shotgun,no_huddle,posteam_score,defteam_score,goal_to_go,yardline_100";

    fn parse(body: &str) -> ParsedPlays {
        let text = format!("{HEADER}\n{body}");
        parse_plays(text.as_bytes(), &ColumnMapping::default()).unwrap()
    }

    #[test]
    fn empty_file_with_header() {
        let p = parse("");
        assert!(p.rows.is_empty());
        assert_eq!(p.report.input_rows, 0);
        assert_eq!(p.report.rejected_rows(), 0);
    }

    #[test]
    fn missing_down_rejected() {
        let p = parse("2015110100,2015-11-01,NO,NO,pass,NA,10,1,0,0,0,0,75\n");
        assert_eq!(p.report.rejected.len(), 1);
        assert_eq!(p.report.rejected[0].reason, "missing down");
        assert_eq!(p.report.rejected[0].line, 2);
    }

    #[test]
    fn non_run_pass_rows_filtered() {
        let p = parse(
            "g1,2015-11-01,NO,NO,kickoff,NA,0,0,0,0,0,0,35\n\
             g1,2015-11-01,NO,NO,run,1,10,0,0,0,0,0,75\n\
             g1,2015-11-01,NO,NO,qb_kneel,1,10,0,0,0,0,0,75\n\
             g1,2015-11-01,NO,NO,Pass,2,7,1,0,0,0,0,72\n",
        );
        assert_eq!(p.report.input_rows, 4);
        assert_eq!(p.report.filtered_rows, 2);
        assert_eq!(p.rows.len(), 2);
        assert_eq!(p.rows[1].line, 5);
        assert_eq!(p.rows[1].play_type, "pass");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let text = "game_id,posteam\n1,NE\n";
        assert!(matches!(
            parse_plays(text.as_bytes(), &ColumnMapping::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn short_row_rejected_not_dropped() {
        let p = parse("g1,2015-11-01,NO,NO,run,1\n");
        assert_eq!(p.report.rejected.len(), 1);
        assert!(p.report.rejected[0].reason.contains("missing"));
    }

    fn raw(down: u8, own: f64, opp: f64, yardline: f64) -> RawPlayRow {
        RawPlayRow {
            line: 2,
            match_id: "g".into(),
            season: 2015,
            offense: "NO".into(),
            home_team: "NYG".into(),
            play_type: "run".into(),
            down,
            ydstogo: 10.0,
            shotgun: false,
            no_huddle: true,
            offense_score: own,
            defense_score: opp,
            goal_to_go: false,
            yardline_100: yardline,
        }
    }

    #[test]
    fn derive_definitions() {
        let c = derive_covariates(&raw(2, 14.0, 20.0, 50.0));
        assert_eq!(c.down, [0, 1, 0, 0]);
        assert_eq!(c.scorediff, -6.0);
        assert_eq!(c.home, 0);
        assert_eq!(c.pass, 0);
        assert_eq!(c.no_huddle, 1);
        assert_eq!(derive_covariates(&raw(1, 0.0, 0.0, 95.0)).yardline90, 1);
        assert_eq!(derive_covariates(&raw(1, 0.0, 0.0, 89.0)).yardline90, 0);
        assert_eq!(derive_covariates(&raw(1, 0.0, 0.0, 90.0)).yardline90, 1);
    }

    #[test]
    fn seasons() {
        assert_eq!(season_of(Some("2015-11-01"), ""), Some(2015));
        assert_eq!(season_of(Some("2016-01-03"), ""), Some(2015));
        assert_eq!(season_of(Some("01/03/2016"), ""), Some(2015));
        assert_eq!(season_of(Some("NA"), "2018090600"), Some(2018));
        assert_eq!(season_of(None, "2019010600"), Some(2018));
        assert_eq!(season_of(None, "abc"), None);
    }

    #[test]
    fn grouping_preserves_order() {
        let p = parse(
            "g1,2015-11-01,NO,NO,run,1,10,0,0,0,0,0,75\n\
             g1,2015-11-01,NYG,NO,pass,1,10,0,0,0,0,0,75\n\
             g1,2015-11-01,NO,NO,pass,2,3,0,0,0,0,0,68\n\
             g1,2015-11-01,NYG,NO,pass,2,10,0,0,0,0,0,75\n",
        );
        let series = build_sequences(&p.rows);
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].sequence.team_id, "NO");
        assert_eq!(series[0].sequence.calls().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(series[0].sequence.plays[1].x[1], 3.0);
        assert_eq!(series[0].sequence.plays[0].x[0], 1.0);
        assert_eq!(series[1].sequence.plays[0].x[0], 0.0);
    }

    fn series(season: i32, id: &str) -> TeamSeries {
        TeamSeries {
            season,
            sequence: PlaySequence::from_calls(id, "NE", &[1], 11),
        }
    }

    #[test]
    fn split_rules() {
        let s = split_by_season(
            vec![
                series(2009, "a"),
                series(2018, "b"),
                series(2019, "c"),
                series(2017, "d"),
            ],
            &SeasonSplit::default(),
        );
        assert_eq!(s.train.len(), 2);
        assert_eq!(s.test.len(), 1);
        assert_eq!(s.excluded, 1);
        assert!(s.require_training().is_ok());

        let only_test = split_by_season(vec![series(2018, "b")], &SeasonSplit::default());
        assert!(only_test.require_training().is_err());
        let no_test = split_by_season(vec![series(2010, "a")], &SeasonSplit::default());
        assert!(no_test.test.is_empty());
        assert!(no_test.warnings.iter().any(|w| w.contains("evaluation disabled")));
    }
}
