mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request};
use axum::Router;
use common::{fixed_model, random_model};
use playcall::hmm::{HmmModel, HmmParams, ModelSpec, PlaySequence, TransitionCoefficients};
use playcall::serve::{router, LoadedModel, ServeConfig, SessionService, SituationInput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

fn hand_model() -> HmmModel {
    let coeffs = TransitionCoefficients::from_homogeneous(&[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
    HmmModel::new(
        ModelSpec::new(2, Vec::<String>::new()).unwrap(),
        HmmParams::new(vec![0.5, 0.5], vec![0.2, 0.8], coeffs).unwrap(),
    )
    .unwrap()
}

fn sea_model() -> HmmModel {
    random_model(2, &["shotgun", "down3", "ydstogo"], &mut ChaCha8Rng::seed_from_u64(1))
}

fn service_with(config: ServeConfig) -> Arc<SessionService> {
    let models = vec![
        LoadedModel::new(fixed_model("NE", &hand_model())).unwrap(),
        LoadedModel::new(fixed_model("SEA", &sea_model())).unwrap(),
    ];
    Arc::new(SessionService::new(models, &config).unwrap())
}

fn app() -> Router {
    router(service_with(ServeConfig::default()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (u16, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status().as_u16();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, team: &str) -> String {
    let (status, body) = call(
        app,
        Method::POST,
        "/v1/sessions",
        Some(json!({"team": team, "home": true})),
    )
    .await;
    assert_eq!(status, 201);
    body["session_id"].as_str().unwrap().to_string()
}

fn situation() -> Value {
    json!({"down": 3, "ydstogo": 8, "shotgun": true})
}

#[tokio::test]
async fn health_lists_models() {
    let (status, body) = call(&app(), Method::GET, "/v1/health", None).await;
    assert_eq!(status, 200);
    let teams: Vec<&str> = body["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["team"].as_str().unwrap())
        .collect();
    assert_eq!(teams, vec!["NE", "SEA"]);
    assert_eq!(body["threshold"], json!(0.7));
}

#[tokio::test]
async fn sessions_are_distinct_and_start_empty() {
    let app = app();
    let a = create(&app, "NE").await;
    let b = create(&app, "NE").await;
    assert_ne!(a, b);
    let (status, summary) = call(&app, Method::GET, &format!("/v1/sessions/{a}"), None).await;
    assert_eq!(status, 200);
    assert_eq!(summary["n_history"], json!(0));
    assert_eq!(summary["team"], json!("NE"));
}

#[tokio::test]
async fn unknown_team_and_session() {
    let app = app();
    let (status, body) = call(&app, Method::POST, "/v1/sessions", Some(json!({"team": "XX"}))).await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], json!("not_found"));
    assert!(body["message"].as_str().unwrap().contains("NE, SEA"));
    assert!(body["violations"].as_array().unwrap().is_empty());
    for (method, uri) in [
        (Method::GET, "/v1/sessions/nope"),
        (Method::POST, "/v1/sessions/nope/forecast"),
        (Method::POST, "/v1/sessions/nope/plays"),
    ] {
        let (status, _) = call(&app, method, uri, Some(situation())).await;
        assert_eq!(status, 404, "{uri}");
    }
    let (status, body) = call(&app, Method::POST, "/v1/sessions", Some(json!({"home": 1}))).await;
    assert_eq!(status, 422);
    assert_eq!(body["violations"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn hand_example_through_the_api() {
    let app = app();
    let id = create(&app, "NE").await;
    let uri = format!("/v1/sessions/{id}/forecast");
    let (status, first) = call(&app, Method::POST, &uri, Some(situation())).await;
    assert_eq!(status, 200);
    assert_eq!(first["pass_prob"].as_f64().unwrap(), 0.5);
    assert_eq!(first["predicted_call"], json!("pass"));
    assert_eq!(first["n_history"], json!(0));

    let (_, again) = call(&app, Method::POST, &uri, Some(situation())).await;
    assert_eq!(again, first);

    let mut play = situation();
    play["actual_call"] = json!("pass");
    let (status, appended) = call(&app, Method::POST, &format!("/v1/sessions/{id}/plays"), Some(play)).await;
    assert_eq!(status, 200);
    assert_eq!(appended["n_history"], json!(1));

    let (_, second) = call(&app, Method::POST, &uri, Some(situation())).await;
    assert!((second["pass_prob"].as_f64().unwrap() - 0.59).abs() < 1e-12);
    assert_eq!(second["threshold_advice"], json!("low_confidence"));
    let probs: Vec<f64> = serde_json::from_value(second["filtered_state_probs"].clone()).unwrap();
    assert!((probs[0] - 0.2).abs() < 1e-12 && (probs[1] - 0.8).abs() < 1e-12);
}

#[tokio::test]
async fn threshold_is_per_instance() {
    let app = router(service_with(ServeConfig {
        threshold: 0.55,
        journal: None,
    }));
    let id = create(&app, "NE").await;
    let mut play = situation();
    play["actual_call"] = json!("pass");
    call(&app, Method::POST, &format!("/v1/sessions/{id}/plays"), Some(play)).await;
    let (_, f) = call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/forecast"),
        Some(situation()),
    )
    .await;
    assert_eq!(f["threshold_advice"], json!("consult"));
}

#[tokio::test]
async fn invalid_bodies_list_violations() {
    let app = app();
    let id = create(&app, "SEA").await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/forecast"),
        Some(json!({"down": 0, "ydstogo": -1, "shotgun": "maybe"})),
    )
    .await;
    assert_eq!(status, 422);
    assert_eq!(body["code"], json!("invalid_input"));
    assert_eq!(body["violations"].as_array().unwrap().len(), 3);

    let mut play = situation();
    play["actual_call"] = json!("punt");
    let (status, body) = call(&app, Method::POST, &format!("/v1/sessions/{id}/plays"), Some(play)).await;
    assert_eq!(status, 422);
    assert_eq!(body["violations"][0]["field"], json!("actual_call"));

    let request = Request::builder()
        .method(Method::POST)
        .uri(format!("/v1/sessions/{id}/plays"))
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(app.clone().oneshot(request).await.unwrap().status().as_u16(), 422);
    let (_, summary) = call(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(summary["n_history"], json!(0));
}

#[tokio::test]
async fn unknown_route_is_json_404() {
    let (status, body) = call(&app(), Method::GET, "/v2/health", None).await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], json!("not_found"));
}

fn input(down: u8, ydstogo: f64, shotgun: bool) -> SituationInput {
    SituationInput {
        down,
        ydstogo,
        shotgun,
        no_huddle: false,
        own_score: 0.0,
        opponent_score: 0.0,
        goaltogo: false,
        yardline_100: 50.0,
    }
}

#[test]
fn forecasts_between_appends_do_not_change_state() {
    let plays = [(1, 10.0, false, true), (2, 4.0, true, false), (3, 4.0, true, true)];
    let run = |interleave: bool| {
        let service = service_with(ServeConfig::default());
        let id = service.create_session("SEA", false).unwrap().session_id;
        for &(d, y, s, pass) in &plays {
            if interleave {
                for k in 0..3 {
                    service
                        .forecast(&id, &input(4 - k, 1.0 + f64::from(k), k == 1))
                        .unwrap();
                }
            }
            let call = if pass {
                playcall::hmm::PlayCall::Pass
            } else {
                playcall::hmm::PlayCall::Run
            };
            service.record_play(&id, &input(d, y, s), call).unwrap();
        }
        service.summary(&id).unwrap().filtered_state_probs
    };
    assert_eq!(run(false), run(true));
}

#[test]
fn journal_replay_restores_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServeConfig {
        journal: Some(dir.path().join("sessions.jsonl")),
        ..ServeConfig::default()
    };
    let service = service_with(config.clone());
    let id = service.create_session("SEA", true).unwrap().session_id;
    for (k, call) in [
        playcall::hmm::PlayCall::Pass,
        playcall::hmm::PlayCall::Run,
        playcall::hmm::PlayCall::Pass,
    ]
    .into_iter()
    .enumerate()
    {
        service
            .record_play(&id, &input(1 + k as u8, 10.0, k > 0), call)
            .unwrap();
    }
    let before = service.summary(&id).unwrap();
    drop(service);

    let restored = service_with(config);
    let after = restored.summary(&id).unwrap();
    assert_eq!(after.n_history, 3);
    assert_eq!(after.filtered_state_probs, before.filtered_state_probs);
    assert_eq!(restored.history(&id).unwrap().len(), 3);
}

#[test]
fn incremental_state_matches_recomputation() {
    let service = service_with(ServeConfig::default());
    let id = service.create_session("SEA", true).unwrap().session_id;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..80 {
        use rand::Rng;
        let s = input(rng.random_range(1..=4), rng.random_range(1..=20) as f64, rng.random());
        let call = if rng.random() {
            playcall::hmm::PlayCall::Pass
        } else {
            playcall::hmm::PlayCall::Run
        };
        service.record_play(&id, &s, call).unwrap();
    }
    // The fixture model is unscaled, so stored covariates are model inputs.
    let history = PlaySequence::new("m", "SEA", service.history(&id).unwrap());
    let summary = service.summary(&id).unwrap();
    let recomputed = sea_model().filtered_state_probs(&history).unwrap();
    for (a, b) in summary.filtered_state_probs.iter().zip(&recomputed) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_appends_are_all_recorded() {
    let service = service_with(ServeConfig::default());
    let app = router(service.clone());
    let id = create(&app, "NE").await;
    let mut handles = Vec::new();
    for k in 0..40 {
        let app = app.clone();
        let uri = format!("/v1/sessions/{id}/plays");
        handles.push(tokio::spawn(async move {
            let mut play = situation();
            play["actual_call"] = json!(if k % 2 == 0 { "pass" } else { "run" });
            call(&app, Method::POST, &uri, Some(play)).await.0
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), 200);
    }
    assert_eq!(service.summary(&id).unwrap().n_history, 40);
}
