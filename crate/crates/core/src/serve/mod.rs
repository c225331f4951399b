//! Live match sessions: play-by-play forecasting over HTTP.
//!
//! [`SessionService`] holds the loaded team models and the in-memory
//! sessions; [`router`] exposes it under `/v1`. Each session keeps its
//! filtered state and advances it by one forward step per recorded play,
//! using the same operations as [`HmmModel::forecast_next`], so service
//! forecasts match the library exactly.

mod http;
mod journal;
mod situation;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariates::BASE_COLUMNS;
use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::evaluate::meets_threshold;
use crate::hmm::{ForwardState, HmmModel, Play, PlayCall};

pub use http::{bind, router, serve};
pub use journal::JournalEntry;
pub use situation::{SituationInput, Violation};

use journal::Journal;

pub const DEFAULT_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeConfig {
    /// Confidence needed for `threshold_advice = "consult"`.
    pub threshold: f64,
    /// Append-only session journal, replayed at startup.
    pub journal: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            journal: None,
        }
    }
}

/// A team model ready for serving.
#[derive(Debug)]
pub struct LoadedModel {
    pub team: String,
    /// Content hash of the model JSON.
    pub model_id: String,
    pub model: FittedModel,
    hmm: HmmModel,
    /// Position of each model input column in [`BASE_COLUMNS`].
    columns: Vec<usize>,
}

impl LoadedModel {
    pub fn new(model: FittedModel) -> Result<Self> {
        let team = model
            .team
            .clone()
            .ok_or_else(|| Error::Precondition("model has no team".into()))?;
        let columns = model
            .input_columns
            .iter()
            .map(|c| {
                BASE_COLUMNS.iter().position(|b| b == c).ok_or_else(|| {
                    Error::Schema(format!(
                        "model for {team} uses column {c:?}, which situations do not provide"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let hmm = model.hmm()?;
        let model_id = hex::encode(&Sha256::digest(model.to_json()?.as_bytes())[..8]);
        Ok(Self {
            team,
            model_id,
            model,
            hmm,
            columns,
        })
    }

    pub fn hmm(&self) -> &HmmModel {
        &self.hmm
    }

    /// Model covariate vector for a situation.
    pub fn covariates(&self, situation: &SituationInput, home: bool) -> Result<Vec<f64>> {
        let base = situation.situation(home).covariates(0).to_base_vector();
        let raw: Vec<f64> = self.columns.iter().map(|&i| base[i]).collect();
        self.model.design_row(&raw)
    }
}

/// Loads every team model in `dir`. Files that are not models (such as run
/// manifests) are skipped.
pub fn load_models(dir: &Path) -> Result<Vec<LoadedModel>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != crate::cli::MANIFEST_FILE))
        .collect();
    paths.sort();
    let mut models = Vec::new();
    for path in paths {
        match FittedModel::load(&path).and_then(LoadedModel::new) {
            Ok(m) => models.push(m),
            Err(e) => warn!("skipping {}: {e}", path.display()),
        }
    }
    if models.is_empty() {
        return Err(Error::Precondition(format!(
            "no team models found in {}",
            dir.display()
        )));
    }
    Ok(models)
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub team: String,
    pub home: bool,
    pub model_id: String,
    /// Recorded plays with model covariates.
    pub history: Vec<Play>,
    /// Filtered state after the last recorded play.
    state: Option<ForwardState>,
    pub created_at: u64,
    pub updated_at: u64,
}

impl Session {
    pub fn n_history(&self) -> usize {
        self.history.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub pass_prob: f64,
    pub predicted_call: PlayCall,
    pub filtered_state_probs: Vec<f64>,
    pub n_history: usize,
    /// `"consult"` when the forecast is at least as confident as the
    /// service threshold, `"low_confidence"` otherwise.
    pub threshold_advice: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub team: String,
    pub home: bool,
    pub model_id: String,
    pub n_history: usize,
    /// Initial distribution for an empty history.
    pub filtered_state_probs: Vec<f64>,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub team: String,
    pub model_id: String,
    pub n_states: usize,
    pub covariates: Vec<String>,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub threshold: f64,
    pub sessions: usize,
    pub models: Vec<ModelInfo>,
}

/// An error as returned by the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            violations: Vec::new(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(404, "not_found", message)
    }

    pub fn invalid(violations: Vec<Violation>) -> Self {
        Self {
            violations,
            ..Self::new(422, "invalid_input", "request body failed validation")
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, "internal", message)
    }
}

type SessionRef = Arc<RwLock<Session>>;

pub struct SessionService {
    models: BTreeMap<String, Arc<LoadedModel>>,
    sessions: RwLock<HashMap<String, SessionRef>>,
    threshold: f64,
    journal: Option<Journal>,
}

impl SessionService {
    pub fn new(models: Vec<LoadedModel>, config: &ServeConfig) -> Result<Self> {
        if !(0.5..=1.0).contains(&config.threshold) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} outside [0.5, 1]",
                config.threshold
            )));
        }
        let mut service = Self {
            models: models.into_iter().map(|m| (m.team.clone(), Arc::new(m))).collect(),
            sessions: RwLock::new(HashMap::new()),
            threshold: config.threshold,
            journal: None,
        };
        if let Some(path) = &config.journal {
            let entries = journal::read(path)?;
            let n = entries.len();
            for entry in entries {
                if let Err(e) = service.replay(entry) {
                    warn!("journal {}: {}", path.display(), e.message);
                }
            }
            info!("replayed {n} journal entries, {} sessions", service.session_count());
            service.journal = Some(Journal::open(path)?);
        }
        Ok(service)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            threshold: self.threshold,
            sessions: self.session_count(),
            models: self
                .models
                .values()
                .map(|m| ModelInfo {
                    team: m.team.clone(),
                    model_id: m.model_id.clone(),
                    n_states: m.model.spec.n_states,
                    covariates: m.model.spec.covariate_names.clone(),
                    aic: m.model.aic,
                })
                .collect(),
        }
    }

    fn model(&self, team: &str) -> std::result::Result<&Arc<LoadedModel>, ApiError> {
        self.models.get(team).ok_or_else(|| {
            let teams: Vec<&str> = self.models.keys().map(String::as_str).collect();
            ApiError::not_found(format!("no model for team {team:?}; available: {}", teams.join(", ")))
        })
    }

    fn session(&self, id: &str) -> std::result::Result<SessionRef, ApiError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }

    fn write_journal(&self, entry: &JournalEntry) -> std::result::Result<(), ApiError> {
        match &self.journal {
            Some(j) => j.append(entry).map_err(|e| ApiError::internal(e.to_string())),
            None => Ok(()),
        }
    }

    pub fn create_session(&self, team: &str, home: bool) -> std::result::Result<SessionSummary, ApiError> {
        let model = self.model(team)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let at = now_millis();
        self.write_journal(&JournalEntry::Create {
            session_id: id.clone(),
            team: team.to_string(),
            home,
            model_id: model.model_id.clone(),
            at,
        })?;
        Ok(self.insert_session(id, model, home, at))
    }

    fn insert_session(&self, id: String, model: &LoadedModel, home: bool, at: u64) -> SessionSummary {
        let session = Session {
            session_id: id.clone(),
            team: model.team.clone(),
            home,
            model_id: model.model_id.clone(),
            history: Vec::new(),
            state: None,
            created_at: at,
            updated_at: at,
        };
        let summary = self.summarise(&session, model);
        self.sessions.write().insert(id, Arc::new(RwLock::new(session)));
        summary
    }

    fn summarise(&self, session: &Session, model: &LoadedModel) -> SessionSummary {
        SessionSummary {
            session_id: session.session_id.clone(),
            team: session.team.clone(),
            home: session.home,
            model_id: session.model_id.clone(),
            n_history: session.n_history(),
            filtered_state_probs: session
                .state
                .as_ref()
                .map_or_else(|| model.hmm.params().delta.delta.clone(), |s| s.probs.clone()),
            created_at: session.created_at,
            updated_at: session.updated_at,
        }
    }

    pub fn summary(&self, id: &str) -> std::result::Result<SessionSummary, ApiError> {
        let session = self.session(id)?;
        let session = session.read();
        Ok(self.summarise(&session, self.model(&session.team)?))
    }

    fn covariates(
        &self,
        model: &LoadedModel,
        situation: &SituationInput,
        home: bool,
    ) -> std::result::Result<Vec<f64>, ApiError> {
        model
            .covariates(situation, home)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    /// Forecast for the imminent play. Does not change the session.
    pub fn forecast(&self, id: &str, situation: &SituationInput) -> std::result::Result<ForecastResponse, ApiError> {
        let session = self.session(id)?;
        let session = session.read();
        let model = self.model(&session.team)?;
        let x = self.covariates(model, situation, session.home)?;
        let result = match &session.state {
            None => model.hmm.forecast_first(),
            Some(state) => model
                .hmm
                .forecast_from_state(state, &x)
                .map_err(|e| ApiError::internal(e.to_string()))?,
        };
        let advice = if meets_threshold(result.pass_prob, self.threshold) {
            "consult"
        } else {
            "low_confidence"
        };
        Ok(ForecastResponse {
            pass_prob: result.pass_prob,
            predicted_call: result.predicted_call,
            filtered_state_probs: result.filtered_state_probs,
            n_history: session.n_history(),
            threshold_advice: advice.into(),
        })
    }

    /// Records the realised call and advances the filtered state.
    pub fn record_play(
        &self,
        id: &str,
        situation: &SituationInput,
        actual: PlayCall,
    ) -> std::result::Result<usize, ApiError> {
        let session = self.session(id)?;
        let mut session = session.write();
        let at = now_millis();
        // Journal first: a play that cannot be journalled is not applied.
        self.write_journal(&JournalEntry::Play {
            session_id: id.to_string(),
            situation: *situation,
            actual_call: actual,
            at,
        })?;
        self.apply_play(&mut session, situation, actual, at)
    }

    fn apply_play(
        &self,
        session: &mut Session,
        situation: &SituationInput,
        actual: PlayCall,
        at: u64,
    ) -> std::result::Result<usize, ApiError> {
        let model = self.model(&session.team)?;
        let x = self.covariates(model, situation, session.home)?;
        let y = actual.as_y();
        let state = match &session.state {
            None => model.hmm.filter_start(y),
            Some(s) => model
                .hmm
                .filter_step(s, &x, y)
                .map_err(|e| ApiError::internal(e.to_string()))?,
        };
        session.state = Some(state);
        session.history.push(Play { y, x });
        session.updated_at = at;
        Ok(session.n_history())
    }

    /// Recorded history of a session, for audit and recomputation checks.
    pub fn history(&self, id: &str) -> std::result::Result<Vec<Play>, ApiError> {
        Ok(self.session(id)?.read().history.clone())
    }

    fn replay(&self, entry: JournalEntry) -> std::result::Result<(), ApiError> {
        match entry {
            JournalEntry::Create {
                session_id,
                team,
                home,
                model_id,
                at,
            } => {
                let model = self.model(&team)?;
                if model.model_id != model_id {
                    return Err(ApiError::not_found(format!(
                        "session {session_id} was created with model {model_id}, loaded model is {}",
                        model.model_id
                    )));
                }
                self.insert_session(session_id, model, home, at);
                Ok(())
            }
            JournalEntry::Play {
                session_id,
                situation,
                actual_call,
                at,
            } => {
                let session = self.session(&session_id)?;
                let mut session = session.write();
                self.apply_play(&mut session, &situation, actual_call, at).map(|_| ())
            }
        }
    }
}
