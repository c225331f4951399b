//! Out-of-sample one-step-ahead prediction and accuracy reporting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::hmm::{ForecastResult, PlayCall, PlaySequence};

/// Slack on the confidence threshold so that, e.g., a 0.2 forecast counts
/// as 0.8-confident despite `1.0 - 0.2` rounding below `0.8`.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Whether a forecast is confident enough to act on: `max(p, 1 - p) >= threshold`.
pub fn meets_threshold(pass_prob: f64, threshold: f64) -> bool {
    pass_prob.max(1.0 - pass_prob) + THRESHOLD_SLACK >= threshold
}

/// Forecasts every play of `seq` from the plays before it. The first play
/// is forecast from the initial distribution. `seq` carries raw input
/// columns; the model's design and training scaling are applied here.
pub fn predict_match(model: &FittedModel, seq: &PlaySequence) -> Result<Vec<ForecastResult>> {
    if let Some(team) = &model.team {
        if team != &seq.team_id {
            return Err(Error::Precondition(format!(
                "model for {team} applied to a {} sequence",
                seq.team_id
            )));
        }
    }
    let hmm = model.hmm()?;
    let prepared = model.prepare_sequence(seq)?;
    prepared.validate(hmm.spec().n_covariates())?;

    let mut out = Vec::with_capacity(prepared.len());
    out.push(hmm.forecast_first());
    let mut state = hmm.filter_start(prepared.plays[0].y);
    for play in &prepared.plays[1..] {
        out.push(hmm.forecast_from_state(&state, &play.x)?);
        state = hmm.filter_step(&state, &play.x, play.y)?;
    }
    Ok(out)
}

/// Confusion counts with pass as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp_pass: usize,
    pub fp_pass: usize,
    pub fn_pass: usize,
    pub tn_pass: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp_pass + self.fp_pass + self.fn_pass + self.tn_pass
    }

    pub fn record(&mut self, predicted: PlayCall, actual: PlayCall) {
        match (predicted, actual) {
            (PlayCall::Pass, PlayCall::Pass) => self.tp_pass += 1,
            (PlayCall::Pass, PlayCall::Run) => self.fp_pass += 1,
            (PlayCall::Run, PlayCall::Pass) => self.fn_pass += 1,
            (PlayCall::Run, PlayCall::Run) => self.tn_pass += 1,
        }
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp_pass += other.tp_pass;
        self.fp_pass += other.fp_pass;
        self.fn_pass += other.fn_pass;
        self.tn_pass += other.tn_pass;
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp_pass + self.tn_pass, self.total())
    }

    pub fn precision_pass(&self) -> Option<f64> {
        ratio(self.tp_pass, self.tp_pass + self.fp_pass)
    }

    pub fn recall_pass(&self) -> Option<f64> {
        ratio(self.tp_pass, self.tp_pass + self.fn_pass)
    }

    pub fn precision_run(&self) -> Option<f64> {
        ratio(self.tn_pass, self.tn_pass + self.fn_pass)
    }

    pub fn recall_run(&self) -> Option<f64> {
        ratio(self.tn_pass, self.tn_pass + self.fp_pass)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub counts: ConfusionCounts,
    /// Plays offered for scoring, before threshold gating.
    pub n_total: usize,
    /// Scored fraction; `None` for empty input.
    pub coverage: Option<f64>,
}

/// Scores pass probabilities against actual calls. With a threshold, only
/// plays whose more likely call has probability at least `threshold` are
/// scored.
pub fn score(pass_probs: &[f64], actuals: &[u8], threshold: Option<f64>) -> Result<Score> {
    if pass_probs.len() != actuals.len() {
        return Err(Error::Dimension(format!(
            "{} forecasts for {} actual plays",
            pass_probs.len(),
            actuals.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &y) in pass_probs.iter().zip(actuals) {
        if let Some(t) = threshold {
            if !meets_threshold(p, t) {
                continue;
            }
        }
        let predicted = if p >= 0.5 { PlayCall::Pass } else { PlayCall::Run };
        counts.record(predicted, PlayCall::from_y(y));
    }
    Ok(Score {
        counts,
        n_total: actuals.len(),
        coverage: ratio(counts.total(), actuals.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamReport {
    pub team: String,
    /// Scored plays.
    pub n_plays: usize,
    pub accuracy: Option<f64>,
    pub precision_pass: Option<f64>,
    pub recall_pass: Option<f64>,
    pub precision_run: Option<f64>,
    pub recall_run: Option<f64>,
    pub coverage: Option<f64>,
    pub counts: ConfusionCounts,
    pub n_total: usize,
}

impl TeamReport {
    pub fn from_score(team: impl Into<String>, score: &Score) -> Self {
        let c = &score.counts;
        Self {
            team: team.into(),
            n_plays: c.total(),
            accuracy: c.accuracy(),
            precision_pass: c.precision_pass(),
            recall_pass: c.recall_pass(),
            precision_run: c.precision_run(),
            recall_run: c.recall_run(),
            coverage: score.coverage,
            counts: *c,
            n_total: score.n_total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub threshold: Option<f64>,
    /// Score the initial-distribution forecast of each match's first play.
    pub include_first_play: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: None,
            include_first_play: true,
        }
    }
}

/// Predicts and scores every sequence of one team.
pub fn evaluate_team(
    model: &FittedModel,
    team: &str,
    sequences: &[PlaySequence],
    options: &EvalOptions,
) -> Result<TeamReport> {
    let mut probs = Vec::new();
    let mut actuals = Vec::new();
    for seq in sequences {
        let forecasts = predict_match(model, seq)?;
        let skip = usize::from(!options.include_first_play);
        probs.extend(forecasts.iter().skip(skip).map(|f| f.pass_prob));
        actuals.extend(seq.calls().skip(skip));
    }
    Ok(TeamReport::from_score(
        team,
        &score(&probs, &actuals, options.threshold)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub teams: Vec<TeamReport>,
    /// Pooled counts; accuracy equals the play-weighted mean of team accuracies.
    pub overall: TeamReport,
    pub weighted_accuracy: Option<f64>,
    /// Lowest and highest defined team accuracy.
    pub accuracy_range: Option<(f64, f64)>,
}

/// Combines team reports, weighting each team by its scored plays.
pub fn aggregate(teams: Vec<TeamReport>) -> Result<EvaluationReport> {
    if teams.is_empty() {
        return Err(Error::Precondition("no team reports to aggregate".into()));
    }
    let mut counts = ConfusionCounts::default();
    let mut n_total = 0;
    let (mut weighted, mut weight) = (0.0, 0usize);
    for t in &teams {
        counts.add(&t.counts);
        n_total += t.n_total;
        if let Some(a) = t.accuracy {
            weighted += a * t.n_plays as f64;
            weight += t.n_plays;
        }
    }
    let defined = teams.iter().filter_map(|t| t.accuracy);
    let accuracy_range = defined.fold(None, |acc: Option<(f64, f64)>, a| match acc {
        None => Some((a, a)),
        Some((lo, hi)) => Some((lo.min(a), hi.max(a))),
    });
    let overall = TeamReport::from_score(
        "ALL",
        &Score {
            counts,
            n_total,
            coverage: ratio(counts.total(), n_total),
        },
    );
    Ok(EvaluationReport {
        weighted_accuracy: (weight > 0).then(|| weighted / weight as f64),
        teams,
        overall,
        accuracy_range,
    })
}

const COLUMNS: [&str; 8] = [
    "team",
    "n_plays",
    "accuracy",
    "precision_pass",
    "recall_pass",
    "precision_run",
    "recall_run",
    "coverage",
];

fn cells(t: &TeamReport, accuracy: Option<f64>, fmt: impl Fn(Option<f64>) -> String) -> Vec<String> {
    vec![
        t.team.clone(),
        t.n_plays.to_string(),
        fmt(accuracy),
        fmt(t.precision_pass),
        fmt(t.recall_pass),
        fmt(t.precision_run),
        fmt(t.recall_run),
        fmt(t.coverage),
    ]
}

impl EvaluationReport {
    fn rows(&self, fmt: impl Fn(Option<f64>) -> String + Copy) -> Vec<Vec<String>> {
        self.teams
            .iter()
            .map(|t| cells(t, t.accuracy, fmt))
            .chain(std::iter::once(cells(&self.overall, self.weighted_accuracy, fmt)))
            .collect()
    }

    /// Machine-readable report; undefined rates are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for row in self.rows(|v| v.map(|x| x.to_string()).unwrap_or_default()) {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned text table for humans.
    pub fn to_table(&self) -> String {
        let rows = self.rows(|v| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}")));
        let widths: Vec<usize> = (0..COLUMNS.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([COLUMNS[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |cols: Vec<&str>, out: &mut String| {
            for (c, (v, w)) in cols.iter().zip(&widths).enumerate() {
                if c == 0 {
                    let _ = write!(out, "{v:<w$}");
                } else {
                    let _ = write!(out, "  {v:>w$}");
                }
            }
            out.push('\n');
        };
        line(COLUMNS.to_vec(), &mut out);
        for (i, row) in rows.iter().enumerate() {
            if i + 1 == rows.len() {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
            line(row.iter().map(String::as_str).collect(), &mut out);
        }
        out
    }
}
