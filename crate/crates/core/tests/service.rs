mod common;

use std::net::SocketAddr;

use radonmap::mc::{self, McSettings};
use radonmap::service::{self, AggregateTable, AppState, Artifacts};
use reqwest::StatusCode;
use serde_json::{json, Value};

use common::Fixture;

async fn spawn(state: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, service::router(state, "http://ui.example")).await });
    addr
}

fn artifacts(f: &Fixture, stats_dir: &std::path::Path) -> Artifacts {
    let model = radonmap::predict::DwellingModel::load(
        &f.forest_path,
        &common::raster_files(&f.raster_dir),
        Default::default(),
    )
    .unwrap();
    Artifacts { model, aggregates: AggregateTable::load(stats_dir).unwrap() }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn endpoints_and_error_mapping() {
    let f = Fixture::new(400, 700, 20, 3);
    let stats = f.path().join("stats");
    let settings = McSettings { min_population: 30.0, ..McSettings::default() };
    let inputs = mc::PipelineInputs {
        forest: f.forest_path.clone(),
        stock: f.path().join("stock.csv"),
        rasters: common::raster_files(&f.raster_dir),
    };
    tokio::task::block_in_place(|| mc::run_pipeline(&inputs, &settings, &Default::default(), 1, 1, &stats)).unwrap();

    let addr = spawn(AppState::loaded(artifacts(&f, &stats))).await;
    let http = reqwest::Client::new();
    let url = |p: &str| format!("http://{addr}{p}");

    let health: Value = http.get(url("/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["predictors"].as_array().unwrap().len(), 9);

    let b = &f.buildings[0];
    let good = json!({"x": b.x, "y": b.y, "floor": 0, "age_class": "1945_1980", "building_type": "apartment", "living_units": 6});
    let r = http.post(url("/predict")).json(&good).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["access-control-allow-origin"], "http://ui.example");
    let body: Value = r.json().await.unwrap();
    let q: Vec<f64> = serde_json::from_value(body["quantiles"].clone()).unwrap();
    assert_eq!(q.len(), 9);
    assert!(q.windows(2).all(|w| w[0] <= w[1]));
    assert!(body["distribution"]["sdlog"].as_f64().unwrap() > 0.0);
    assert_eq!(body["exceedance"].as_array().unwrap().len(), 4);

    let post = |v: Value| http.post(url("/predict")).json(&v).send();
    let mut outside = good.clone();
    outside["x"] = json!(-1.0e7);
    assert_eq!(post(outside).await.unwrap().status(), StatusCode::UNPROCESSABLE_ENTITY);
    let mut bad_age = good.clone();
    bad_age["age_class"] = json!("medieval");
    let r = post(bad_age).await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "unknown_category");
    let mut extra = good.clone();
    extra["colour"] = json!("red");
    assert_eq!(post(extra).await.unwrap().status(), StatusCode::BAD_REQUEST);
    let r = http.post(url("/predict")).header("content-type", "application/json").body("{").send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let national: Value = http.get(url("/aggregates/national")).send().await.unwrap().json().await.unwrap();
    assert_eq!(national["level"], "national");
    let state_key = &b.ags.to_string()[..2];
    let r = http.get(url(&format!("/aggregates/{state_key}"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let s: Value = r.json().await.unwrap();
    assert_eq!(s["level"], "state");
    assert!(s["n"].as_u64().unwrap() <= national["n"].as_u64().unwrap());

    let suppressed = std::fs::read_to_string(stats.join(mc::SUPPRESSED_FILE)).unwrap();
    if let Some(line) = suppressed.lines().nth(1) {
        let key = line.split(',').next().unwrap();
        let r = http.get(url(&format!("/aggregates/{key}"))).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::NOT_FOUND);
        assert_eq!(r.json::<Value>().await.unwrap()["code"], "below_population_threshold");
    }
    let r = http.get(url("/aggregates/99999999")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = http.get(url("/aggregates/12a")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unavailable_until_loaded() {
    let state = AppState::default();
    let addr = spawn(state.clone()).await;
    let http = reqwest::Client::new();
    let r = http.get(format!("http://{addr}/aggregates/national")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::SERVICE_UNAVAILABLE);
    let r = http.get(format!("http://{addr}/health")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::SERVICE_UNAVAILABLE);
}
