use axum::body::Body;
use axum::http::{Request, StatusCode};
use credbench_core::ledger::ProfileKind;
use credbench_service::ops::{self, CertFields, CertIssueRequest, LedgerInitRequest, SenderSpec, TokenIssueRequest};
use credbench_service::server::router;
use credbench_service::Workspace;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const T0: u64 = 1_700_000_000;

fn workspace() -> (tempfile::TempDir, Workspace) {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    ops::keygen_op(&ws, Some("issuer"), [1; 32]).unwrap();
    (dir, ws)
}

async fn call(ws: &Workspace, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(ws.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(ws: &Workspace, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = call(ws, "POST", uri, Some(body)).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn healthz_answers_ok() {
    let (_d, ws) = workspace();
    let (status, body) = call(&ws, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn token_issue_then_verify() {
    let (_d, ws) = workspace();
    let (status, issued) = call_json(&ws, "/token", json!({"sub": "u1", "scopes": ["read:/data"], "now": T0})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(issued["claims"]["exp"], T0 + 600);
    let token = issued["token"].as_str().unwrap();

    let (status, fresh) = call_json(&ws, "/token/verify", json!({"token": token, "now": T0 + 1})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fresh["valid"], true);
    assert_eq!(fresh["claims"]["sub"], "u1");

    let (status, stale) = call_json(&ws, "/token/verify", json!({"token": token, "now": T0 + 600})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(stale["reasons"], json!(["expired"]));
}

#[tokio::test]
async fn bad_requests_are_400() {
    let (_d, ws) = workspace();
    let (status, _) = call(&ws, "POST", "/token/verify", Some(json!({"tok": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&ws, "POST", "/token", Some(json!({"sub": "u", "scopes": ["fly:/x"], "now": T0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call_json(&ws, "/token/verify", json!({"token": "not.a.token", "now": T0})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["reasons"], json!(["malformed"]));
}

#[tokio::test]
async fn certificate_verification_endpoint() {
    let (_d, ws) = workspace();
    let init = LedgerInitRequest {
        profile: ProfileKind::Permissionless,
        owner: Some("issuer".into()),
        accounts: vec![],
        peers: vec![],
        channel: "default".into(),
        threshold: 0,
    };
    ops::ledger_init(&ws, &init, T0).unwrap();
    let fields =
        CertFields { name: "Alice".into(), program: "CS".into(), graduation_date: "2023-05-15".into(), gpa: "3.90".into() };
    let req = CertIssueRequest {
        from: SenderSpec { sender: "issuer".into(), ..Default::default() },
        fields: fields.clone(),
        subject: None,
        attest: false,
    };
    let issued = ops::cert_issue(&ws, &req, T0).unwrap();
    let id = issued.certificate_id.as_str().to_string();

    let body = json!({"id": id, "name": "Alice", "program": "CS", "graduation_date": "2023-05-15", "gpa": "3.90"});
    let (status, out) = call_json(&ws, "/cert/verify", body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["valid"], true);

    let body = json!({"id": id, "name": "Alice", "program": "CS", "graduation_date": "2023-05-15", "gpa": "3.91"});
    let (status, out) = call_json(&ws, "/cert/verify", body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(out["reasons"], json!(["mismatch"]));
}

#[tokio::test]
async fn cert_verify_without_ledger_is_client_error() {
    let (_d, ws) = workspace();
    let body = json!({"id": "x", "name": "A", "program": "B", "graduation_date": "C", "gpa": "1.00"});
    let (status, _) = call(&ws, "POST", "/cert/verify", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn corrupt_keystore_is_500() {
    let (_d, ws) = workspace();
    let issued = ops::token_issue(
        &ws,
        &TokenIssueRequest { sub: "u".into(), scopes: vec![], ttl: None, aud: None, nbf: None, refresh: false, now: None },
        [3; 32],
        T0,
    )
    .unwrap();
    std::fs::write(ws.path("keystore.json"), "{").unwrap();
    let (status, body) = call_json(&ws, "/token/verify", json!({"token": issued.token.compact, "now": T0})).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert!(body["error"].as_str().unwrap().contains("keystore.json"));
}

#[tokio::test]
async fn concurrent_issuance_keeps_every_jti() {
    let (_d, ws) = workspace();
    let app = router(ws.clone());
    let mut handles = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let body = json!({"sub": format!("u{i}"), "scopes": ["read:/d"], "now": T0}).to_string();
            let req = Request::post("/token").header("content-type", "application/json").body(Body::from(body)).unwrap();
            app.oneshot(req).await.unwrap().status()
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    assert_eq!(ws.issuer_state().unwrap().issued_jti.len(), 16);
}
