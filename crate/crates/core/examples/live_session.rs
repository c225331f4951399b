//! Drive a match session through the HTTP API in-process: create a session,
//! ask for a forecast before each snap, then record the actual call.
//!
//! ```text
//! cargo run --example live_session
//! ```
//!
//! `playcall serve --models DIR --port 8080` exposes the same routes.

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request};
use playcall::covariates::BASE_COLUMNS;
use playcall::estimation::{fit_dataset, FitConfig};
use playcall::ingest::{build_sequences, parse_plays, ColumnMapping};
use playcall::serve::{router, LoadedModel, ServeConfig, SessionService};
use playcall::simulate::{league_model, write_league_csv, LeagueConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: Method, uri: &str, body: Value) -> (u16, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .expect("valid request");
    let response = app.clone().oneshot(request).await.expect("infallible");
    let status = response.status().as_u16();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.expect("body");
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn fitted_model() -> playcall::Result<LoadedModel> {
    let truth = league_model();
    let config = LeagueConfig {
        teams: vec!["NE".into(), "SEA".into()],
        ..LeagueConfig::default()
    };
    let mut csv = Vec::new();
    write_league_csv(&truth, &config, &mut ChaCha8Rng::seed_from_u64(3), &mut csv)?;
    let parsed = parse_plays(std::io::Cursor::new(csv), &ColumnMapping::default())?;
    let ne: Vec<_> = build_sequences(&parsed.rows)
        .into_iter()
        .filter(|s| s.sequence.team_id == "NE")
        .map(|s| s.sequence)
        .collect();
    let data = playcall::covariates::Dataset::new(BASE_COLUMNS.iter().map(|c| c.to_string()).collect(), ne)?;
    let mut model = fit_dataset(truth.spec(), &data, &FitConfig::default())?;
    model.team = Some("NE".into());
    LoadedModel::new(model)
}

pub fn run_example() -> playcall::Result<()> {
    let service = Arc::new(SessionService::new(vec![fitted_model()?], &ServeConfig::default())?);
    let app = router(service);
    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .map_err(|e| playcall::Error::Service(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let (_, health) = call(&app, Method::GET, "/v1/health", Value::Null).await;
        println!("models: {}", health["models"]);

        let (status, created) = call(&app, Method::POST, "/v1/sessions", json!({"team": "NE", "home": true})).await;
        let id = created["session_id"].as_str().unwrap_or_default().to_string();
        println!("created session {id} ({status})");

        let drive = [
            (json!({"down": 1, "ydstogo": 10, "yardline_100": 75}), "run"),
            (json!({"down": 2, "ydstogo": 6, "yardline_100": 71}), "run"),
            (
                json!({"down": 3, "ydstogo": 4, "shotgun": true, "yardline_100": 69}),
                "pass",
            ),
            (
                json!({"down": 1, "ydstogo": 10, "shotgun": true, "yardline_100": 55}),
                "pass",
            ),
        ];
        for (situation, actual) in drive {
            let uri = format!("/v1/sessions/{id}/forecast");
            let (_, f) = call(&app, Method::POST, &uri, situation.clone()).await;
            println!(
                "down {} & {:<2}  P(pass) {:.3}  {:<4}  {:<14}  actual {actual}",
                situation["down"],
                situation["ydstogo"],
                f["pass_prob"].as_f64().unwrap_or(f64::NAN),
                f["predicted_call"].as_str().unwrap_or("?"),
                f["threshold_advice"].as_str().unwrap_or("?"),
            );
            let mut play = situation;
            play["actual_call"] = json!(actual);
            call(&app, Method::POST, &format!("/v1/sessions/{id}/plays"), play).await;
        }

        let (status, err) = call(
            &app,
            Method::POST,
            &format!("/v1/sessions/{id}/forecast"),
            json!({"down": 5}),
        )
        .await;
        println!("invalid situation -> {status}: {}", err["violations"]);
        let (_, summary) = call(&app, Method::GET, &format!("/v1/sessions/{id}"), Value::Null).await;
        println!(
            "history length {}, state probs {}",
            summary["n_history"], summary["filtered_state_probs"]
        );
    });
    Ok(())
}

#[allow(dead_code)]
fn main() -> playcall::Result<()> {
    run_example()
}
