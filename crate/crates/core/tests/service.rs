//! Persistence and the HTTP advisor API.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use gridiron::dataset::{ingest_str, Dataset, IngestOptions, Target};
use gridiron::kernel::{KernelSpec, SmoParams, SvcParams};
use gridiron::linear::LdaParams;
use gridiron::model::{ModelSpec, Recipe};
use gridiron::neural::MlpConfig;
use gridiron::playparse::{PassLength, Side};
use gridiron::serve::http::{router, AppState};
use gridiron::serve::{enumerate_candidates, rank_plays, BundleMeta, ModelBundle, ModelSet, RankBy, Situation};
use gridiron::synth::{synthesize, write_records, FavoredPlay, SynthSpec};
use gridiron::trees::TreeParams;
use gridiron::{rng, Error};

fn planted(spec: SynthSpec, seed: u64) -> Dataset {
    let out = synthesize(&spec, seed).unwrap();
    let mut buf = Vec::new();
    write_records(&mut buf, &out.records).unwrap();
    ingest_str(std::str::from_utf8(&buf).unwrap(), "planted", &IngestOptions::default()).unwrap().0
}

fn bundle(ds: &Dataset, recipe: Recipe, target: Target) -> ModelBundle {
    let pipeline = recipe.fit(ds, target).unwrap();
    ModelBundle::new(
        recipe.spec.name(),
        pipeline,
        ds.schema.clone(),
        BundleMeta { target, recipe: Some(recipe), corpus_fingerprint: Some("test".into()), metrics: None },
    )
    .unwrap()
}

fn third_and_eight() -> Situation {
    Situation { team: "NE".into(), opponent: "NYJ".into(), half: 2, time: 420, position: 62, down: 3, togo: 8 }
}

#[test]
fn save_load_preserves_decision_values_bitwise() {
    let ds = planted(SynthSpec { n: 600, ..SynthSpec::default() }, 3);
    let recipes = [
        (Recipe::new(ModelSpec::Tree(TreeParams::depth(5))), Target::Success),
        (Recipe::new(ModelSpec::Lda(LdaParams::default())), Target::Success),
        (Recipe::new(ModelSpec::Linreg), Target::Progress),
        (
            Recipe {
                scale: true,
                ..Recipe::new(ModelSpec::Svm(SvcParams {
                    c: 2.0,
                    kernel: KernelSpec::Rbf { gamma: 0.1 },
                    smo: SmoParams::default(),
                }))
            },
            Target::Success,
        ),
        (Recipe::new(ModelSpec::Mlp(MlpConfig { max_epochs: 2, ..MlpConfig::default() })), Target::Yards),
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng::seeded(44);
    for (i, (recipe, target)) in recipes.into_iter().enumerate() {
        let b = bundle(&ds, recipe, target);
        let path = dir.path().join(format!("m{i}.json"));
        b.save(&path).unwrap();
        let back = ModelBundle::load(&path).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..77).map(|_| r.random_range(-2.0..100.0)).collect();
            let a = b.pipeline.predict_value(&x).unwrap();
            let z = back.pipeline.predict_value(&x).unwrap();
            assert_eq!(a.to_bits(), z.to_bits(), "{}", b.name);
        }
    }
}

#[test]
fn truncated_bundle_is_reported_corrupt() {
    let ds = planted(SynthSpec { n: 200, ..SynthSpec::default() }, 4);
    let b = bundle(&ds, Recipe::new(ModelSpec::Tree(TreeParams::depth(2))), Target::Success);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    b.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() - 40]).unwrap();
    assert!(matches!(ModelBundle::load(&path), Err(Error::CorruptModel(_))));
}

#[test]
fn planted_favourite_ranks_first() {
    let spec = SynthSpec {
        favored: Some(FavoredPlay { side: Side::Left, passlen: PassLength::Short, success: 0.95 }),
        ..SynthSpec::default()
    };
    let ds = planted(spec, 8);
    let clf = bundle(&ds, Recipe::new(ModelSpec::Tree(TreeParams::depth(4))), Target::Success);
    let models = ModelSet::new(vec![clf]);
    let (by, ranked) = rank_plays(&third_and_eight(), &enumerate_candidates(None).unwrap(), &models, None).unwrap();
    assert_eq!(by, RankBy::Success);
    for r in &ranked[..2] {
        assert_eq!((r.candidate.side, r.candidate.passlen), (Side::Left, PassLength::Short));
    }
}

fn app_with(models: ModelSet) -> axum::Router {
    router(AppState::new(models))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn two_models() -> ModelSet {
    let ds = planted(SynthSpec { n: 1500, ..SynthSpec::default() }, 5);
    ModelSet::new(vec![
        bundle(&ds, Recipe::new(ModelSpec::Tree(TreeParams::depth(4))), Target::Progress),
        bundle(&ds, Recipe::new(ModelSpec::Tree(TreeParams::depth(3))), Target::Success),
    ])
}

#[tokio::test]
async fn health_and_models() {
    let app = app_with(two_models());
    let (s, v) = call(&app, "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "ok", "models": 2}));
    let (s, v) = call(&app, "GET", "/models", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["target"], "progress");
    assert_eq!(v[1]["kind"], "tree");
    assert_eq!(v[0]["width"], 77);
}

#[tokio::test]
async fn parse_endpoint() {
    let app = app_with(ModelSet::default());
    let record = json!({
        "game_id": "2014091100", "team": "ATL", "opponent": "CAR", "quarter": 3,
        "clock_seconds": 596, "yardline": 24, "down": 2, "togo": 10,
        "description": "(9:56) M.Ryan pass short left to J.Jones to CAR 17 for 7 yards (J.Norman)."
    });
    let (s, v) = call(&app, "POST", "/parse", Some(record.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "relevant");
    assert_eq!(v["labels"]["progress"], 0.49);
    assert_eq!(v["features"]["side"], "left");

    let mut punt = record.clone();
    punt["description"] = json!("(4:12) S.Koch punts 45 yards to NE 20.");
    let (_, v) = call(&app, "POST", "/parse", Some(punt)).await;
    assert_eq!(v, json!({"status": "rejected", "reason": "punt"}));

    let mut bad = record;
    bad["down"] = json!(7);
    let (s, v) = call(&app, "POST", "/parse", Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "invalid_input");

    let (s, v) = call(&app, "POST", "/parse", Some(json!({"team": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "malformed_request");
}

#[tokio::test]
async fn rank_returns_a_stable_permutation() {
    let app = app_with(two_models());
    let body = json!({"situation": third_and_eight()});
    let (s, first) = call(&app, "POST", "/rank", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["rank_by"], "progress");
    assert_eq!(first["score_kind"], "model_estimate");
    let plays = first["plays"].as_array().unwrap();
    assert_eq!(plays.len(), 24);
    let mut got: Vec<String> = plays.iter().map(|p| p["candidate"].to_string()).collect();
    let mut want: Vec<String> =
        enumerate_candidates(None).unwrap().iter().map(|c| serde_json::to_value(c).unwrap().to_string()).collect();
    for (i, p) in plays.iter().enumerate() {
        assert_eq!(p["rank"], i + 1);
        assert!(p["predicted_progress"].is_number() && p["success_score"].is_number());
        assert!(p["predicted_yards"].is_null());
        if i > 0 {
            assert!(plays[i - 1]["predicted_progress"].as_f64() >= p["predicted_progress"].as_f64());
        }
    }
    got.sort();
    want.sort();
    assert_eq!(got, want);
    for _ in 0..5 {
        let (_, again) = call(&app, "POST", "/rank", Some(body.clone())).await;
        assert_eq!(again, first);
    }

    let (_, by_success) =
        call(&app, "POST", "/rank", Some(json!({"situation": third_and_eight(), "rank_by": "success"}))).await;
    assert_eq!(by_success["rank_by"], "success");
}

#[tokio::test]
async fn rank_errors_carry_codes() {
    let app = app_with(two_models());
    let mut s = serde_json::to_value(third_and_eight()).unwrap();
    s["team"] = json!("ZZZ");
    let (status, v) = call(&app, "POST", "/rank", Some(json!({"situation": s}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "unknown_team");

    let bad_book = json!({"situation": third_and_eight(), "playbook": [
        {"pass": false, "side": "left", "passlen": "deep", "shotgun": false, "qbrun": false}
    ]});
    let (_, v) = call(&app, "POST", "/rank", Some(bad_book)).await;
    assert_eq!(v["error"]["code"], "invalid_input");

    let one = json!({"situation": third_and_eight(), "playbook": [
        {"pass": true, "side": "right", "passlen": "short", "shotgun": true, "qbrun": false}
    ]});
    let (_, v) = call(&app, "POST", "/rank", Some(one)).await;
    assert_eq!(v["plays"].as_array().unwrap().len(), 1);

    let empty = app_with(ModelSet::default());
    let (status, v) = call(&empty, "POST", "/rank", Some(json!({"situation": third_and_eight()}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["error"]["code"], "no_models");

    let (_, v) = call(&app, "POST", "/rank", Some(json!({"situation": third_and_eight(), "rank_by": "yards"}))).await;
    assert_eq!(v["error"]["code"], "invalid_input");
}

#[tokio::test]
async fn reload_swaps_models_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::from_dir(dir.path().to_path_buf()).unwrap();
    let app = router(state.clone());
    let (_, v) = call(&app, "GET", "/health", None).await;
    assert_eq!(v["models"], 0);

    let ds = planted(SynthSpec { n: 300, ..SynthSpec::default() }, 6);
    bundle(&ds, Recipe::new(ModelSpec::Tree(TreeParams::depth(2))), Target::Yards)
        .save(&dir.path().join("yards.json"))
        .unwrap();
    let held = state.snapshot();
    assert_eq!(state.reload().unwrap(), 1);
    assert!(held.is_empty());
    let (_, v) = call(&app, "GET", "/health", None).await;
    assert_eq!(v["models"], 1);

    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    assert!(state.reload().is_err());
    let (_, v) = call(&app, "GET", "/health", None).await;
    assert_eq!(v["models"], 1);
}

#[test]
fn ranking_ignores_candidate_order_up_to_ties() {
    use rand::seq::SliceRandom;
    let models = two_models();
    let cands = enumerate_candidates(None).unwrap();
    let (_, base) = rank_plays(&third_and_eight(), &cands, &models, None).unwrap();
    let mut r = rng::seeded(12);
    for _ in 0..20 {
        let mut shuffled = cands.clone();
        shuffled.shuffle(&mut r);
        let (_, other) = rank_plays(&third_and_eight(), &shuffled, &models, None).unwrap();
        let scores = |v: &[gridiron::serve::RankedPlay]| v.iter().map(|p| p.predicted_progress).collect::<Vec<_>>();
        assert_eq!(scores(&base), scores(&other));
        // within a block of equal scores the order follows the input order
        for w in other.windows(2) {
            if w[0].predicted_progress == w[1].predicted_progress {
                let pos = |c| shuffled.iter().position(|s| *s == c).unwrap();
                assert!(pos(w[0].candidate) < pos(w[1].candidate));
            }
        }
    }
}
