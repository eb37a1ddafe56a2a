#![allow(dead_code)]

pub mod gen;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pc4pm_core::guidance::Registry;
use pc4pm_core::repo::{JobRunner, KeyStore, MemoryKeyStore, Repository};
use pc4pm_core::server::{router, AppState};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub const BOUNDARY: &str = "pc4pm-test-boundary";

pub struct Api {
    pub app: Router,
    pub runner: Arc<JobRunner>,
    _dir: TempDir,
}

pub fn api() -> Api {
    api_with_keys(Arc::new(MemoryKeyStore::new().with("demo", b"0123456789abcdef0123456789abcdef".to_vec())))
}

pub fn api_with_keys(keys: Arc<dyn KeyStore>) -> Api {
    let dir = tempfile::tempdir().unwrap();
    let repo = Arc::new(Repository::open(dir.path()).unwrap());
    let runner = Arc::new(JobRunner::new(repo, Arc::new(Registry::builtin().clone()), keys, 2));
    Api { app: router(AppState { runner: runner.clone() }), runner, _dir: dir }
}

pub fn multipart(fields: &[(&str, Option<&str>, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, file_name, data) in fields {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match file_name {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\n").as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n").as_bytes()),
        }
        body.extend_from_slice(b"\r\n");
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

impl Api {
    pub async fn raw(&self, method: Method, uri: &str, content_type: Option<&str>, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(ct) = content_type {
            req = req.header("content-type", ct);
        }
        let resp = self.app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (ct, bytes) = match body {
            Some(v) => (Some("application/json"), serde_json::to_vec(&v).unwrap()),
            None => (None, Vec::new()),
        };
        let (status, out) = self.raw(method, uri, ct, bytes).await;
        let value = if out.is_empty() { Value::Null } else { serde_json::from_slice(&out).unwrap_or(Value::Null) };
        (status, value)
    }

    pub async fn upload(&self, file_name: &str, content: &[u8]) -> (StatusCode, Value) {
        let body = multipart(&[("file", Some(file_name), content)]);
        let (status, out) = self
            .raw(Method::POST, "/logs", Some(&format!("multipart/form-data; boundary={BOUNDARY}")), body)
            .await;
        (status, serde_json::from_slice(&out).unwrap())
    }

    /// Submits a job and polls until it finishes.
    pub async fn run_job(&self, job: Value) -> Value {
        let (status, accepted) = self.call(Method::POST, "/jobs", Some(job)).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{accepted}");
        let id = accepted["job_id"].as_str().unwrap().to_owned();
        for _ in 0..2000 {
            let (_, s) = self.call(Method::GET, &format!("/jobs/{id}"), None).await;
            if s["status"] == "done" || s["status"] == "failed" {
                return s;
            }
            tokio::time::sleep(std::time::Duration::from_millis(5)).await;
        }
        panic!("job {id} did not finish");
    }
}
