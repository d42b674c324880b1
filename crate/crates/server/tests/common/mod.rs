#![allow(dead_code)]

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use fgis_server::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use tempfile::TempDir;
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden(name: &str) -> Vec<u8> {
    std::fs::read(fixtures().join("golden").join(name)).unwrap()
}

pub struct Harness {
    pub dir: TempDir,
    pub state: AppState,
    pub app: Router,
}

pub fn harness() -> Harness {
    harness_with(1024)
}

pub fn harness_with(cache_capacity: usize) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig::new(fixtures().join("tiles"), dir.path());
    config.cache_capacity = cache_capacity;
    config.validate().unwrap();
    let state = AppState::open(&config).unwrap();
    let app = router(state.clone(), &config);
    Harness { dir, state, app }
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }
}

impl Harness {
    pub async fn send(&self, method: Method, uri: &str, body: impl Into<Body>) -> Reply {
        let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let content_type = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, content_type, body }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, Body::empty()).await
    }

    pub async fn post_json(&self, uri: &str, v: serde_json::Value) -> Reply {
        self.send(Method::POST, uri, v.to_string()).await
    }

    pub async fn new_case(&self) -> String {
        let r = self.post_json("/cases", serde_json::json!({"name": "test"})).await;
        assert_eq!(r.status, StatusCode::CREATED);
        r.json()["case_id"].as_str().unwrap().to_string()
    }

    pub async fn import(&self, case: &str, format: &str, bytes: Vec<u8>) -> Reply {
        self.send(Method::POST, &format!("/cases/{case}/import?format={format}&label=t"), bytes).await
    }
}
