//! Covariate vocabulary and design-matrix projection.
//!
//! Stored sequences carry a fixed set of base columns. A model uses an
//! ordered list of terms, each either a base column (`"ydstogo"`) or a
//! product of two columns (`"ydstogo:scorediff"`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{Play, PlaySequence};

/// Base columns written by ingest, in storage order.
pub const BASE_COLUMNS: [&str; 11] = [
    "home",
    "ydstogo",
    "down1",
    "down2",
    "down3",
    "down4",
    "shotgun",
    "no_huddle",
    "scorediff",
    "goaltogo",
    "yardline90",
];

/// Interaction candidates considered during forward selection.
pub const INTERACTIONS: [(&str, &str); 8] = [
    ("ydstogo", "scorediff"),
    ("down1", "ydstogo"),
    ("down2", "ydstogo"),
    ("down3", "ydstogo"),
    ("down4", "ydstogo"),
    ("shotgun", "ydstogo"),
    ("no_huddle", "scorediff"),
    ("no_huddle", "shotgun"),
];

/// Main-effect columns fitted when selection is disabled. `down1` is the
/// reference category of the down dummies, which otherwise sum to one and
/// are collinear with the intercept.
pub fn full_main_effects() -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .filter(|c| **c != "down1")
        .map(|c| c.to_string())
        .collect()
}

/// Every candidate term for selection: all main effects, then interactions.
pub fn selection_candidates() -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(INTERACTIONS.iter().map(|(a, b)| format!("{a}:{b}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Main(String),
    Interaction(String, String),
}

impl Term {
    pub fn parse(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.split(':').map(str::trim).collect();
        match parts.as_slice() {
            [a] if !a.is_empty() => Ok(Term::Main(a.to_string())),
            [a, b] if !a.is_empty() && !b.is_empty() => Ok(Term::Interaction(a.to_string(), b.to_string())),
            _ => Err(Error::InvalidParameter(format!("malformed covariate term {name:?}"))),
        }
    }

    /// Columns that must already be in the model before this term may enter.
    pub fn parents(&self) -> Vec<&str> {
        match self {
            Term::Main(_) => vec![],
            Term::Interaction(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Main(a) => f.write_str(a),
            Term::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// Maps a row of base columns onto an ordered list of terms.
#[derive(Debug, Clone)]
pub struct Design {
    terms: Vec<Term>,
    indices: Vec<(usize, Option<usize>)>,
    n_columns: usize,
}

impl Design {
    pub fn new<S: AsRef<str>>(columns: &[S], terms: &[S]) -> Result<Self> {
        let lookup = |name: &str| {
            columns
                .iter()
                .position(|c| c.as_ref() == name)
                .ok_or_else(|| Error::Schema(format!("unknown covariate column {name:?}")))
        };
        let terms: Vec<Term> = terms.iter().map(|t| Term::parse(t.as_ref())).collect::<Result<_>>()?;
        let indices = terms
            .iter()
            .map(|t| match t {
                Term::Main(a) => Ok((lookup(a)?, None)),
                Term::Interaction(a, b) => Ok((lookup(a)?, Some(lookup(b)?))),
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            terms,
            indices,
            n_columns: columns.len(),
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn row(&self, base: &[f64]) -> Result<Vec<f64>> {
        if base.len() != self.n_columns {
            return Err(Error::Dimension(format!(
                "row has {} columns, expected {}",
                base.len(),
                self.n_columns
            )));
        }
        Ok(self
            .indices
            .iter()
            .map(|&(a, b)| match b {
                None => base[a],
                Some(b) => base[a] * base[b],
            })
            .collect())
    }

    pub fn sequence(&self, seq: &PlaySequence) -> Result<PlaySequence> {
        let plays = seq
            .plays
            .iter()
            .map(|p| {
                Ok(Play {
                    y: p.y,
                    x: self.row(&p.x)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PlaySequence::new(seq.match_id.clone(), seq.team_id.clone(), plays))
    }
}

/// Sequences whose covariate vectors are aligned with named base columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub sequences: Vec<PlaySequence>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, sequences: Vec<PlaySequence>) -> Result<Self> {
        for seq in &sequences {
            seq.validate(columns.len())?;
        }
        Ok(Self { columns, sequences })
    }

    pub fn n_plays(&self) -> usize {
        self.sequences.iter().map(PlaySequence::len).sum()
    }

    /// Projects every sequence onto `terms`.
    pub fn design<S: AsRef<str>>(&self, terms: &[S]) -> Result<Vec<PlaySequence>> {
        let columns: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        let terms: Vec<&str> = terms.iter().map(AsRef::as_ref).collect();
        let design = Design::new(&columns, &terms)?;
        self.sequences.iter().map(|s| design.sequence(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_terms() {
        assert_eq!(Term::parse("home").unwrap(), Term::Main("home".into()));
        assert_eq!(Term::parse("a:b").unwrap(), Term::Interaction("a".into(), "b".into()));
        assert!(Term::parse("a:b:c").is_err());
        assert!(Term::parse(":b").is_err());
        assert_eq!(Term::parse("a:b").unwrap().to_string(), "a:b");
    }

    #[test]
    fn design_projects_products() {
        let design = Design::new(&["a", "b", "c"], &["c", "a:b"]).unwrap();
        assert_eq!(design.row(&[2.0, 3.0, 5.0]).unwrap(), vec![5.0, 6.0]);
        assert!(design.row(&[1.0]).is_err());
        assert!(Design::new(&["a"], &["z"]).is_err());
    }

    #[test]
    fn candidates_cover_mains_and_interactions() {
        let c = selection_candidates();
        assert_eq!(c.len(), 19);
        assert!(c.contains(&"no_huddle:shotgun".to_string()));
        assert_eq!(full_main_effects().len(), 10);
    }
}
