mod common;

use axum::http::{Method, StatusCode};
use common::{api, multipart, BOUNDARY};
use pc4pm_core::fixtures::fix1;
use pc4pm_core::xes::write_xes;
use serde_json::json;

#[tokio::test]
async fn techniques_lists_schemas() {
    let api = api();
    let (status, body) = api.call(Method::GET, "/techniques", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["techniques"].as_array().unwrap().iter().map(|t| t["technique_id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"group-privacy") && ids.contains(&"dp-engine"));
    let tlkc = body["operations"].as_array().unwrap().iter().find(|o| o["operation"] == "tlkc").unwrap();
    assert!(tlkc["parameters"].as_array().unwrap().iter().any(|p| p["name"] == "k"));
}

#[tokio::test]
async fn guide_filters_and_rejects_unknown_fields() {
    let api = api();
    let (status, all) = api.call(Method::POST, "/guide", Some(json!({}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all["techniques"].as_array().unwrap().len(), 6);
    let (status, _) = api.call(Method::POST, "/guide", Some(json!({"colour": "red"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn upload_show_content_delete() {
    let api = api();
    let xes = write_xes(&fix1());
    let (status, entry) = api.upload("fix1.xes", &xes).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(entry["kind"], "xes");
    assert_eq!(entry["name"], "fix1.xes");
    let id = entry["entry_id"].as_str().unwrap();

    let (status, shown) = api.call(Method::GET, &format!("/logs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(shown["summary"]["traces"], 3);
    assert_eq!(shown["summary"]["events"], 8);
    assert_eq!(shown["summary"]["variants"], 2);

    let (status, bytes) = api.raw(Method::GET, &format!("/logs/{id}/content"), None, vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bytes, xes);

    let (_, listed) = api.call(Method::GET, "/logs", None).await;
    assert_eq!(listed["entries"].as_array().unwrap().len(), 1);
    let (status, deleted) = api.call(Method::DELETE, &format!("/logs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(deleted["deleted"], true);
    let (_, listed) = api.call(Method::GET, "/logs", None).await;
    assert!(listed["entries"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn upload_errors() {
    let api = api();
    let (status, body) = api.upload("bad.xes", b"<log><trace>").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "parse_failure");

    let body = multipart(&[("name", None, b"x")]);
    let (status, _) = api
        .raw(Method::POST, "/logs", Some(&format!("multipart/form-data; boundary={BOUNDARY}")), body)
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let api = api();
    for uri in ["/logs/abcdef", "/logs/abcdef/lineage", "/jobs/job-99", "/analysis/risk?log=abcdef"] {
        let (status, body) = api.call(Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(body["error"]["code"].is_string());
    }
}

#[tokio::test]
async fn job_validation_errors_name_parameters() {
    let api = api();
    let (_, entry) = api.upload("fix1.xes", &write_xes(&fix1())).await;
    let id = entry["entry_id"].as_str().unwrap();
    let (status, body) = api
        .call(Method::POST, "/jobs", Some(json!({"technique_id": "tlkc", "inputs": [id], "params": {"l": 0}})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let params: Vec<&str> =
        body["error"]["params"].as_array().unwrap().iter().map(|p| p["param"].as_str().unwrap()).collect();
    assert!(params.contains(&"l") && params.contains(&"k"), "{body}");

    let (status, body) = api
        .call(Method::POST, "/jobs", Some(json!({"technique_id": "nope", "inputs": [id]})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "unknown_technique");

    let (status, _) = api
        .call(
            Method::POST,
            "/jobs",
            Some(json!({"technique_id": "connector_encode", "inputs": [id], "params": {"key_ref": "demo", "secret": "00"}})),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn risk_and_utility_endpoints() {
    let api = api();
    let (_, entry) = api.upload("fix1.xes", &write_xes(&fix1())).await;
    let id = entry["entry_id"].as_str().unwrap().to_owned();
    let (status, risk) = api.call(Method::GET, &format!("/analysis/risk?log={id}&kind=set&l=1"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!((risk["uniqueness_rate"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let (status, _) = api.call(Method::GET, &format!("/analysis/risk?log={id}&l=0"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let job = api
        .run_job(json!({"technique_id": "tlkc", "inputs": [id], "params": {"l": 1, "k": 2}}))
        .await;
    assert_eq!(job["status"], "done", "{job}");
    let out = job["outputs"][0].as_str().unwrap();
    let (status, u) = api
        .call(Method::GET, &format!("/analysis/utility?original={id}&anonymized={out}"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert!((u["variant_preservation"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((u["event_count_ratio"].as_f64().unwrap() - 0.875).abs() < 1e-9);

    let (_, lineage) = api.call(Method::GET, &format!("/logs/{out}/lineage"), None).await;
    assert_eq!(lineage["depth"], 2);
    assert_eq!(lineage["edges"][0]["technique"], "tlkc");
}

#[tokio::test]
async fn role_mining_job_reports_roles() {
    let api = api();
    let (_, entry) = api.upload("fix1.xes", &write_xes(&fix1())).await;
    let id = entry["entry_id"].as_str().unwrap();
    let job = api
        .run_job(json!({"technique_id": "role-miner", "inputs": [id], "params": {"noise_bound": 1}, "seed": 3}))
        .await;
    assert_eq!(job["status"], "done", "{job}");
    assert!(!job["report"]["roles"].as_array().unwrap().is_empty());
    let (_, shown) = api.call(Method::GET, &format!("/logs/{}", job["outputs"][0].as_str().unwrap()), None).await;
    assert_eq!(shown["entry"]["kind"], "ela");
    assert_eq!(shown["summary"]["abstraction_kind"], "resource-activity-matrix");
}
