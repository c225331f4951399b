//! Synthetic play sequences drawn from a known model.

use std::io::Write;

use rand::Rng;

use crate::covariates::{Design, BASE_COLUMNS};
use crate::error::{Error, Result};
use crate::hmm::{HmmModel, Play, PlaySequence};
use crate::ingest::mapping::FIELDS;
use crate::ingest::Situation;

fn draw_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Simulates one sequence whose covariate vectors are given; returns the
/// sequence and the hidden state path.
pub fn simulate_with_covariates(
    model: &HmmModel,
    match_id: &str,
    team_id: &str,
    covariates: Vec<Vec<f64>>,
    rng: &mut impl Rng,
) -> (PlaySequence, Vec<usize>) {
    let pass = model.emission_probs(1).to_vec();
    let mut states = Vec::with_capacity(covariates.len());
    let mut plays = Vec::with_capacity(covariates.len());
    for (p, x) in covariates.into_iter().enumerate() {
        let s = if p == 0 {
            draw_index(&model.params().delta.delta, rng)
        } else {
            let gamma = model.transition_matrix(&x).expect("covariate length matches model");
            draw_index(gamma.row(states[p - 1]), rng)
        };
        let y = u8::from(rng.random::<f64>() < pass[s]);
        states.push(s);
        plays.push(Play { y, x });
    }
    (PlaySequence::new(match_id, team_id, plays), states)
}

/// Simulates `n_sequences` sequences of `length` plays; `covariate` draws
/// the covariate vector of each play.
pub fn simulate<R, F>(
    model: &HmmModel,
    n_sequences: usize,
    length: usize,
    mut covariate: F,
    rng: &mut R,
) -> Vec<PlaySequence>
where
    R: Rng,
    F: FnMut(&mut R) -> Vec<f64>,
{
    (0..n_sequences)
        .map(|m| {
            let xs = (0..length).map(|_| covariate(rng)).collect();
            simulate_with_covariates(model, &format!("sim{m:05}"), "SIM", xs, rng).0
        })
        .collect()
}

/// A two-state play-calling model over `shotgun` and `down3`: a run-leaning
/// and a pass-leaning state, with shotgun formations and third downs
/// pushing the offense toward passing.
pub fn league_model() -> HmmModel {
    let spec = crate::hmm::ModelSpec::new(2, vec!["shotgun", "down3"]).expect("valid spec");
    let rows = vec![
        vec![(0.1f64 / 0.9).ln(), 1.5, 1.0],
        vec![(0.15f64 / 0.85).ln(), -1.0, -0.5],
    ];
    let coeffs = crate::hmm::TransitionCoefficients::from_rows(2, 2, rows).expect("valid rows");
    let params = crate::hmm::HmmParams::new(vec![0.5, 0.5], vec![0.3, 0.85], coeffs).expect("valid params");
    HmmModel::new(spec, params).expect("consistent model")
}

/// Shape of a synthetic league written as a play-by-play CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LeagueConfig {
    /// Team codes; an even number, every team plays every week.
    pub teams: Vec<String>,
    pub first_season: i32,
    pub last_season: i32,
    /// Weeks per season, at most 16.
    pub weeks: usize,
    /// Offensive plays per team per match.
    pub plays_per_team: usize,
}

impl Default for LeagueConfig {
    fn default() -> Self {
        Self {
            teams: ["NE", "SEA", "KC", "GB"].map(String::from).to_vec(),
            first_season: 2009,
            last_season: 2018,
            weeks: 4,
            plays_per_team: 60,
        }
    }
}

struct Drive {
    down: u8,
    ydstogo: f64,
    yardline: f64,
    score: f64,
}

impl Drive {
    fn fresh(&mut self) {
        self.down = 1;
        self.ydstogo = 10.0;
        self.yardline = 75.0;
    }

    /// Advances after a play; true when possession changes.
    fn advance(&mut self, gain: f64) -> bool {
        if gain >= self.yardline {
            self.score += 7.0;
            self.fresh();
            return true;
        }
        self.yardline -= gain;
        if gain >= self.ydstogo {
            self.down = 1;
            self.ydstogo = self.yardline.min(10.0);
            false
        } else if self.down == 4 {
            self.fresh();
            true
        } else {
            self.down += 1;
            self.ydstogo -= gain.max(0.0);
            self.ydstogo = self.ydstogo.max(1.0);
            false
        }
    }
}

/// Writes a play-by-play CSV with the default Kaggle header names. Play
/// calls come from `model`, whose covariates must be built from the
/// standard input columns and are used unscaled. Kickoffs, punts and the
/// odd two-point try without a down are mixed in, as in real data.
/// Returns the number of data rows.
pub fn write_league_csv<W: Write>(
    model: &HmmModel,
    config: &LeagueConfig,
    rng: &mut impl Rng,
    out: W,
) -> Result<usize> {
    let teams = &config.teams;
    if teams.len() < 2 || !teams.len().is_multiple_of(2) || config.weeks == 0 || config.weeks > 16 {
        return Err(Error::InvalidParameter(
            "league needs an even number of teams and 1 to 16 weeks".into(),
        ));
    }
    let design = Design::new(
        &BASE_COLUMNS,
        &model
            .spec()
            .covariate_names
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELDS.iter().map(|(_, header)| *header))?;
    let mut rows = 0;
    let n = teams.len();
    for season in config.first_season..=config.last_season {
        for week in 0..config.weeks {
            // Circle-method round robin.
            let mut order: Vec<usize> = (0..n).collect();
            order[1..].rotate_right(week % (n - 1));
            let (month, day) = (9 + week / 4, 1 + 7 * (week % 4));
            for g in 0..n / 2 {
                let (home, away) = (order[g], order[n - 1 - g]);
                let game_id = format!("{season}{month:02}{day:02}{g:02}");
                let date = format!("{season}-{month:02}-{day:02}");
                rows += write_match(model, &design, config, [home, away], &game_id, &date, rng, &mut w)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn write_match<W: Write>(
    model: &HmmModel,
    design: &Design,
    config: &LeagueConfig,
    sides: [usize; 2],
    game_id: &str,
    date: &str,
    rng: &mut impl Rng,
    w: &mut csv::Writer<W>,
) -> Result<usize> {
    let home_code = &config.teams[sides[0]];
    let mut drives = [0, 1].map(|_| Drive {
        down: 1,
        ydstogo: 10.0,
        yardline: 75.0,
        score: 0.0,
    });
    let mut states: [Option<usize>; 2] = [None, None];
    let mut plays = [0usize; 2];
    let mut rows = 0;
    let mut side = 0;
    let record = |w: &mut csv::Writer<W>,
                  off: usize,
                  kind: &str,
                  down: &str,
                  d: &Drive,
                  opp: f64,
                  shotgun: bool,
                  no_huddle: bool| {
        let team = &config.teams[sides[off]];
        let goal = d.yardline <= 10.0 && d.ydstogo >= d.yardline;
        w.write_record([
            game_id,
            date,
            team,
            home_code,
            kind,
            down,
            &d.ydstogo.to_string(),
            if shotgun { "1" } else { "0" },
            if no_huddle { "1" } else { "0" },
            &d.score.to_string(),
            &opp.to_string(),
            if goal { "1" } else { "0" },
            &d.yardline.to_string(),
        ])
    };
    record(w, 1, "kickoff", "NA", &drives[1], 0.0, false, false)?;
    rows += 1;
    while plays.iter().any(|&p| p < config.plays_per_team) {
        if plays[side] >= config.plays_per_team {
            side = 1 - side;
            continue;
        }
        let opp = drives[1 - side].score;
        let d = &drives[side];
        if d.down == 4 && rng.random::<f64>() < 0.7 {
            record(w, side, "punt", "4", d, opp, false, false)?;
            rows += 1;
            drives[side].fresh();
            side = 1 - side;
            drives[side].yardline = rng.random_range(60..=97) as f64;
            continue;
        }
        let shotgun = rng.random::<f64>() < 0.3 + 0.15 * f64::from(d.down.min(3));
        let no_huddle = rng.random::<f64>() < 0.05;
        let situation = Situation {
            home: side == 0,
            down: d.down,
            ydstogo: d.ydstogo,
            shotgun,
            no_huddle,
            own_score: d.score,
            opponent_score: opp,
            goal_to_go: d.yardline <= 10.0 && d.ydstogo >= d.yardline,
            yardline_100: d.yardline,
        };
        let x = design.row(&situation.covariates(0).to_base_vector())?;
        let s = match states[side] {
            None => draw_index(&model.params().delta.delta, rng),
            Some(prev) => draw_index(model.transition_matrix(&x)?.row(prev), rng),
        };
        states[side] = Some(s);
        let pass = rng.random::<f64>() < model.emission_probs(1)[s];
        record(
            w,
            side,
            if pass { "pass" } else { "run" },
            &d.down.to_string(),
            d,
            opp,
            shotgun,
            no_huddle,
        )?;
        rows += 1;
        plays[side] += 1;
        let gain = if pass {
            if rng.random::<f64>() < 0.4 {
                0.0
            } else {
                rng.random_range(3..25) as f64
            }
        } else {
            rng.random_range(-2..9) as f64
        };
        let score_before = drives[side].score;
        if drives[side].advance(gain) {
            if drives[side].score > score_before && rng.random::<f64>() < 0.1 {
                // Two-point try: a pass without a down.
                record(w, side, "pass", "NA", &drives[side], opp, true, false)?;
                rows += 1;
            }
            side = 1 - side;
        }
    }
    Ok(rows)
}
