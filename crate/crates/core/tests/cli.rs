use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use playcall::cli::RunManifest;
use playcall::estimation::FittedModel;
use playcall::simulate::{league_model, write_league_csv, LeagueConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn playcall(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_playcall"))
        .args(args)
        .env("PLAYCALL_LOG", "error")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    playcall(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small league ingested once and shared by the tests.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = LeagueConfig {
            teams: vec!["NE".into(), "SEA".into()],
            weeks: 3,
            plays_per_team: 30,
            ..LeagueConfig::default()
        };
        let file = std::fs::File::create(root.join("pbp.csv")).unwrap();
        write_league_csv(&league_model(), &config, &mut ChaCha8Rng::seed_from_u64(4), file).unwrap();
        let out = playcall(&[
            "ingest",
            "--input",
            s(&root.join("pbp.csv")),
            "--out",
            s(&root.join("store")),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Fixture { _dir: dir, root }
    })
}

#[test]
fn usage_errors_exit_2() {
    let f = fixture();
    let store = f.root.join("store");
    let bad_config = f.root.join("bad.conf");
    std::fs::write(&bad_config, "colour = blue\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["launch"],
        vec!["ingest", "--out", "x"],
        vec!["fit", "--out", "x"],
        vec!["fit", "--data", s(&store), "--out", "x", "--seed", "minus one"],
        vec!["fit", "--data", s(&store), "--out", "x", "--jobs", "0"],
        vec![
            "evaluate",
            "--models",
            "m",
            "--data",
            s(&store),
            "--out",
            "x",
            "--threshold",
            "high",
        ],
        vec![
            "evaluate",
            "--models",
            "m",
            "--data",
            s(&store),
            "--out",
            "x",
            "--threshold",
            "0.3",
        ],
        vec!["serve", "--models", "m", "--port", "99999"],
        vec!["--config", s(&bad_config), "fit", "--data", s(&store), "--out", "x"],
        vec!["--config", "/no/such/file", "fit", "--data", s(&store), "--out", "x"],
    ];
    for args in cases {
        assert_eq!(code(&args), 2, "{args:?}");
    }
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["fit", "--help"]), 0);
}

#[test]
fn runtime_failures_exit_1() {
    let f = fixture();
    let headerless = f.root.join("bad.csv");
    std::fs::write(&headerless, "game_id,posteam\n1,NE\n").unwrap();
    let out = f.root.join("unused");
    let store = f.root.join("store");
    let cases: Vec<Vec<&str>> = vec![
        vec!["ingest", "--input", "/no/such.csv", "--out", s(&out)],
        vec!["ingest", "--input", s(&headerless), "--out", s(&out)],
        vec!["fit", "--data", "/no/such/store", "--out", s(&out)],
        vec!["fit", "--data", s(&store), "--team", "XX", "--out", s(&out)],
        vec![
            "evaluate",
            "--models",
            "/no/models",
            "--data",
            s(&store),
            "--out",
            s(&out),
        ],
        vec!["serve", "--models", "/no/models"],
        vec!["serve", "--models", s(&f.root)],
    ];
    for args in cases {
        assert_eq!(code(&args), 1, "{args:?}");
    }
}

fn models(f: &Fixture) -> PathBuf {
    static DONE: OnceLock<PathBuf> = OnceLock::new();
    DONE.get_or_init(|| {
        let dir = f.root.join("models");
        let out = playcall(&[
            "fit",
            "--data",
            s(&f.root.join("store")),
            "--team",
            "all",
            "--seed",
            "11",
            "--out",
            s(&dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
    .clone()
}

#[test]
fn fit_writes_one_model_per_store_team_reproducibly() {
    let f = fixture();
    let dir = models(f);
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, vec!["NE.json", "SEA.json", "run_manifest.json"]);

    let manifest = RunManifest::load(&dir).unwrap();
    assert_eq!(manifest.command, "fit");
    assert_eq!(manifest.seed, Some(11));
    assert_eq!(manifest.outputs, vec!["NE.json", "SEA.json"]);
    assert!(manifest.inputs.iter().all(|i| i.sha256.len() == 64 && i.size > 0));
    assert_eq!(manifest.config["team"], "all");

    // A single-team run with the same seed reproduces that team's file.
    let again = f.root.join("models-sea");
    assert_eq!(
        code(&[
            "fit",
            "--data",
            s(&f.root.join("store")),
            "--team",
            "sea",
            "--seed",
            "11",
            "--out",
            s(&again)
        ]),
        0
    );
    assert_eq!(
        std::fs::read(dir.join("SEA.json")).unwrap(),
        std::fs::read(again.join("SEA.json")).unwrap()
    );
    let model = FittedModel::load(&dir.join("SEA.json")).unwrap();
    assert_eq!(model.team.as_deref(), Some("SEA"));
    assert_eq!(model.spec.n_covariates(), 10);
}

#[test]
fn config_file_fills_unset_flags() {
    let f = fixture();
    let conf = f.root.join("fit.conf");
    std::fs::write(&conf, "seed = 5\nstarts = 2\nteam = NE\n").unwrap();
    let out = f.root.join("models-conf");
    assert_eq!(
        code(&[
            "--config",
            s(&conf),
            "fit",
            "--data",
            s(&f.root.join("store")),
            "--seed",
            "3",
            "--out",
            s(&out)
        ]),
        0
    );
    let manifest = RunManifest::load(&out).unwrap();
    assert_eq!(manifest.seed, Some(3));
    assert_eq!(manifest.config["starts"], 2);
    assert_eq!(manifest.outputs, vec!["NE.json"]);
    let model = FittedModel::load(&out.join("NE.json")).unwrap();
    assert_eq!(model.diagnostics.starts.len(), 2);
}

#[test]
fn select_records_a_decreasing_trace() {
    let f = fixture();
    let out = f.root.join("models-select");
    assert_eq!(
        code(&[
            "fit",
            "--data",
            s(&f.root.join("store")),
            "--team",
            "NE",
            "--select",
            "--out",
            s(&out)
        ]),
        0
    );
    let model = FittedModel::load(&out.join("NE.json")).unwrap();
    let trace = model.selection_trace.unwrap();
    assert!(trace.is_strictly_decreasing());
    assert_eq!(
        trace.selected(),
        model
            .spec
            .covariate_names
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>()
    );
}

#[test]
fn evaluate_reports_and_threshold_half_is_neutral() {
    let f = fixture();
    let models = models(f);
    let store = f.root.join("store");
    let plain = f.root.join("eval");
    let half = f.root.join("eval-half");
    assert_eq!(
        code(&[
            "evaluate",
            "--models",
            s(&models),
            "--data",
            s(&store),
            "--out",
            s(&plain)
        ]),
        0
    );
    assert_eq!(
        code(&[
            "evaluate",
            "--models",
            s(&models),
            "--data",
            s(&store),
            "--threshold",
            "0.5",
            "--out",
            s(&half)
        ]),
        0
    );
    let csv = std::fs::read_to_string(plain.join("report.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(half.join("report.csv")).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("team,n_plays,accuracy"));
    assert!(lines.last().unwrap().starts_with("ALL,"));
    assert_eq!(lines.len(), 4);
    assert!(plain.join("report.txt").exists() && plain.join("run_manifest.json").exists());
}

#[test]
fn evaluate_skips_teams_without_models() {
    let f = fixture();
    let partial = f.root.join("models-partial");
    std::fs::create_dir_all(&partial).unwrap();
    std::fs::copy(models(f).join("NE.json"), partial.join("NE.json")).unwrap();
    let out = f.root.join("eval-partial");
    let result = playcall(&[
        "evaluate",
        "--models",
        s(&partial),
        "--data",
        s(&f.root.join("store")),
        "--out",
        s(&out),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let manifest = RunManifest::load(&out).unwrap();
    assert!(manifest.warnings.iter().any(|w| w.contains("SEA")));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn reingest_is_identical() {
    let f = fixture();
    let again = f.root.join("store-again");
    assert_eq!(
        code(&["ingest", "--input", s(&f.root.join("pbp.csv")), "--out", s(&again)]),
        0
    );
    let a = playcall::ingest::store::store_digest(&f.root.join("store")).unwrap();
    let b = playcall::ingest::store::store_digest(&again).unwrap();
    assert_eq!(a, b);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(
        stream,
        "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n"
    )
    .ok()?;
    let mut text = String::new();
    stream.read_to_string(&mut text).ok()?;
    Some(text)
}

#[test]
fn serve_answers_health_and_reports_busy_port() {
    let f = fixture();
    let models = models(f);
    let port = free_port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_playcall"))
        .args(["serve", "--models", s(&models), "--port", &port.to_string()])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let started = Instant::now();
    let health = loop {
        if let Some(text) = get(port, "/v1/health") {
            break text;
        }
        assert!(started.elapsed() < Duration::from_secs(20), "service did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(health.starts_with("HTTP/1.1 200"));
    assert!(health.contains("\"team\":\"NE\"") && health.contains("\"team\":\"SEA\""));

    let busy = playcall(&["serve", "--models", s(&models), "--port", &port.to_string()]);
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(busy.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&busy.stderr).contains("already in use"));
}
