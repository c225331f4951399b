use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ingest::Situation;

/// Pre-snap situation entered for a play. Flags default to false, scores
/// to 0 and `yardline_100` to 50 when omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SituationInput {
    pub down: u8,
    pub ydstogo: f64,
    pub shotgun: bool,
    pub no_huddle: bool,
    pub own_score: f64,
    pub opponent_score: f64,
    pub goaltogo: bool,
    pub yardline_100: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

const FIELDS: [&str; 8] = [
    "down",
    "ydstogo",
    "shotgun",
    "no_huddle",
    "own_score",
    "opponent_score",
    "goaltogo",
    "yardline_100",
];

impl SituationInput {
    pub fn situation(&self, home: bool) -> Situation {
        Situation {
            home,
            down: self.down,
            ydstogo: self.ydstogo,
            shotgun: self.shotgun,
            no_huddle: self.no_huddle,
            own_score: self.own_score,
            opponent_score: self.opponent_score,
            goal_to_go: self.goaltogo,
            yardline_100: self.yardline_100,
        }
    }

    /// Validates a JSON object field by field, collecting every violation.
    /// `extra` names additional keys the caller accepts.
    pub fn from_object(obj: &Map<String, Value>, extra: &[&str]) -> Result<Self, Vec<Violation>> {
        let mut v = Vec::new();
        for key in obj.keys() {
            if !FIELDS.contains(&key.as_str()) && !extra.contains(&key.as_str()) {
                v.push(Violation::new(key, "unknown field"));
            }
        }
        let down = number(obj, "down", None, &mut v).and_then(|d| {
            if d.fract() == 0.0 && (1.0..=4.0).contains(&d) {
                Some(d as u8)
            } else {
                v.push(Violation::new("down", "must be an integer from 1 to 4"));
                None
            }
        });
        let ydstogo =
            number(obj, "ydstogo", None, &mut v).and_then(|y| in_range("ydstogo", y, 1.0, 99.0, &mut v).then_some(y));
        let yardline = number(obj, "yardline_100", Some(50.0), &mut v)
            .and_then(|y| in_range("yardline_100", y, 1.0, 99.0, &mut v).then_some(y));
        let own = score(obj, "own_score", &mut v);
        let opp = score(obj, "opponent_score", &mut v);
        let shotgun = flag(obj, "shotgun", &mut v);
        let no_huddle = flag(obj, "no_huddle", &mut v);
        let goaltogo = flag(obj, "goaltogo", &mut v);
        match (down, ydstogo, yardline, own, opp, shotgun, no_huddle, goaltogo) {
            (Some(down), Some(ydstogo), Some(yardline_100), Some(own), Some(opp), Some(s), Some(n), Some(g))
                if v.is_empty() =>
            {
                Ok(Self {
                    down,
                    ydstogo,
                    shotgun: s,
                    no_huddle: n,
                    own_score: own,
                    opponent_score: opp,
                    goaltogo: g,
                    yardline_100,
                })
            }
            _ => Err(v),
        }
    }
}

fn number(obj: &Map<String, Value>, field: &str, default: Option<f64>, v: &mut Vec<Violation>) -> Option<f64> {
    match obj.get(field) {
        None | Some(Value::Null) => {
            if default.is_none() {
                v.push(Violation::new(field, "required"));
            }
            default
        }
        Some(Value::Number(n)) => n.as_f64().filter(|x| x.is_finite()).or_else(|| {
            v.push(Violation::new(field, "must be a finite number"));
            None
        }),
        Some(_) => {
            v.push(Violation::new(field, "must be a number"));
            None
        }
    }
}

fn in_range(field: &str, x: f64, lo: f64, hi: f64, v: &mut Vec<Violation>) -> bool {
    let ok = (lo..=hi).contains(&x);
    if !ok {
        v.push(Violation::new(field, format!("must be between {lo} and {hi}")));
    }
    ok
}

fn score(obj: &Map<String, Value>, field: &str, v: &mut Vec<Violation>) -> Option<f64> {
    number(obj, field, Some(0.0), v).and_then(|s| {
        if s >= 0.0 && s.fract() == 0.0 {
            Some(s)
        } else {
            v.push(Violation::new(field, "must be a non-negative integer"));
            None
        }
    })
}

/// Booleans, or 0/1 as in the play-by-play data.
fn flag(obj: &Map<String, Value>, field: &str, v: &mut Vec<Violation>) -> Option<bool> {
    match obj.get(field) {
        None | Some(Value::Null) => Some(false),
        Some(Value::Bool(b)) => Some(*b),
        Some(Value::Number(n)) if n.as_f64() == Some(0.0) => Some(false),
        Some(Value::Number(n)) if n.as_f64() == Some(1.0) => Some(true),
        Some(_) => {
            v.push(Violation::new(field, "must be true/false or 0/1"));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<SituationInput, Vec<Violation>> {
        SituationInput::from_object(v.as_object().unwrap(), &[])
    }

    #[test]
    fn minimal_form_uses_defaults() {
        let s = parse(json!({"down": 3, "ydstogo": 8, "shotgun": true})).unwrap();
        assert_eq!(s.down, 3);
        assert!(s.shotgun && !s.no_huddle && !s.goaltogo);
        assert_eq!((s.own_score, s.opponent_score, s.yardline_100), (0.0, 0.0, 50.0));
    }

    #[test]
    fn every_violation_is_listed() {
        let err = parse(json!({"down": 5, "shotgun": "yes", "own_score": -3, "yards": 1})).unwrap_err();
        let fields: Vec<&str> = err.iter().map(|v| v.field.as_str()).collect();
        for f in ["yards", "down", "ydstogo", "own_score", "shotgun"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn numeric_flags_accepted() {
        let s = parse(json!({"down": 1, "ydstogo": 10, "no_huddle": 1, "goaltogo": 0})).unwrap();
        assert!(s.no_huddle && !s.goaltogo);
    }

    #[test]
    fn round_trips_through_serde() {
        let s = parse(json!({"down": 2, "ydstogo": 4.5, "own_score": 7, "opponent_score": 10})).unwrap();
        let back: SituationInput = serde_json::from_value(serde_json::to_value(s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
