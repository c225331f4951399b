use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logical fields read from the play-by-play file, with their default
/// header names in the public Kaggle NFL play-by-play schema.
pub const FIELDS: [(&str, &str); 13] = [
    ("game_id", "game_id"),
    ("game_date", "game_date"),
    ("posteam", "posteam"),
    ("home_team", "home_team"),
    ("play_type", "play_type"),
    ("down", "down"),
    ("ydstogo", "ydstogo"),
    ("shotgun", "shotgun"),
    ("no_huddle", "no_huddle"),
    ("posteam_score", "posteam_score"),
    ("defteam_score", "defteam_score"),
    ("goal_to_go", "goal_to_go"),
    ("yardline_100", "yardline_100"),
];

/// Team code renames applied by default. These are spelling changes and
/// relocations of a single franchise within the Kaggle data.
pub const DEFAULT_TEAM_ALIASES: [(&str, &str); 3] = [("JAC", "JAX"), ("STL", "LA"), ("SD", "LAC")];

/// Header names for every logical field, plus team-code aliases.
///
/// Configuration files are plain `key=value` lines; `#` starts a comment.
/// Keys are field names (`down=Down`) or `alias.OLD=NEW`. Setting
/// `game_date=` to an empty value derives seasons from `game_id` alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub columns: BTreeMap<String, String>,
    pub team_aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub score_timing: ScoreTiming,
}

/// Whether the score columns hold the score before or after each play.
/// Post-play scores are shifted within each match to recover the pre-play
/// values (`score_timing = post`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreTiming {
    #[default]
    Pre,
    Post,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            columns: FIELDS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            team_aliases: DEFAULT_TEAM_ALIASES
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            score_timing: ScoreTiming::Pre,
        }
    }
}

impl ColumnMapping {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if let Some(code) = key.strip_prefix("alias.") {
            if value.is_empty() {
                self.team_aliases.remove(code);
            } else {
                self.team_aliases.insert(code.to_string(), value.to_string());
            }
            return Ok(());
        }
        if key == "score_timing" {
            self.score_timing = match value {
                "pre" => ScoreTiming::Pre,
                "post" => ScoreTiming::Post,
                _ => {
                    return Err(Error::Schema(format!(
                        "score_timing must be pre or post, got {value:?}"
                    )))
                }
            };
            return Ok(());
        }
        if !FIELDS.iter().any(|(f, _)| *f == key) {
            return Err(Error::Schema(format!("unknown mapping key {key:?}")));
        }
        self.columns.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value` lines on top of the current mapping.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("mapping line {}: expected key=value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut mapping = Self::default();
        mapping.apply_kv(&text)?;
        Ok(mapping)
    }

    /// Header name for a field, `None` when the field is disabled.
    pub fn column(&self, field: &str) -> Option<&str> {
        self.columns.get(field).map(String::as_str).filter(|c| !c.is_empty())
    }

    pub fn team(&self, code: &str) -> String {
        self.team_aliases.get(code).cloned().unwrap_or_else(|| code.to_string())
    }
}
