#![allow(dead_code)]

use std::fs::File;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use ontosearch_core::{load_kb, KnowledgeBase, ScoringParams};
use ontosearch_service::api::{self, ApiErrorBody, ApiSearchResponse, AppState, DepartmentEntry, EmployeeCard, Health};
use reqwest::StatusCode;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn acme() -> KnowledgeBase {
    load_kb(File::open(fixture("acme-kb.json")).unwrap()).unwrap()
}

/// Binds an ephemeral port on loopback and serves the API there in the background.
pub async fn spawn_server(kb: KnowledgeBase, cors: Option<&str>) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(Arc::new(kb), ScoringParams::default(), cors);
    tokio::spawn(async move { api::serve(listener, state).await.unwrap() });
    addr
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

async fn get(client: &reqwest::Client, base: &str, path: &str) -> Result<(StatusCode, String), String> {
    let resp = client.get(format!("{base}{path}")).send().await.map_err(|e| format!("GET {path}: {e}"))?;
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_owned();
    ensure(ctype == api::JSON_CONTENT_TYPE, || format!("GET {path}: content type `{ctype}`"))?;
    let body = resp.text().await.map_err(|e| format!("GET {path}: {e}"))?;
    Ok((status, body))
}

async fn get_json<T: serde::de::DeserializeOwned>(
    client: &reqwest::Client,
    base: &str,
    path: &str,
    want: StatusCode,
) -> Result<T, String> {
    let (status, body) = get(client, base, path).await?;
    ensure(status == want, || format!("GET {path}: status {status}, expected {want}: {body}"))?;
    serde_json::from_str(&body).map_err(|e| format!("GET {path}: bad body ({e}): {body}"))
}

async fn expect_error(client: &reqwest::Client, base: &str, path: &str, want: StatusCode, code: &str) -> Result<(), String> {
    let body: ApiErrorBody = get_json(client, base, path, want).await?;
    ensure(body.error.code == code, || format!("GET {path}: error code `{}`, expected `{code}`", body.error.code))
}

/// Query texts of the full fixture corpus.
pub fn corpus_texts() -> Vec<String> {
    std::fs::read_to_string(fixture("queries.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["text"].as_str().unwrap().to_owned())
        .collect()
}

/// Percent-encodes everything outside the URL-unreserved set.
fn encode(text: &str) -> String {
    text.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

fn strip_id(mut resp: ApiSearchResponse) -> ApiSearchResponse {
    resp.request_id.clear();
    resp
}

/// Every endpoint's status codes, bodies and content type against a server
/// running on the fixture KB, plus concurrent-versus-serial agreement.
pub async fn service_contract(base: &str, kb: &KnowledgeBase) -> Result<(), String> {
    let client = reqwest::Client::new();

    let resp: ApiSearchResponse =
        get_json(&client, base, "/api/search?q=who%20approves%20invoices", StatusCode::OK).await?;
    ensure(resp.results.first().is_some_and(|r| r.employee_id == "e7"), || {
        format!("first result for `who approves invoices` is {:?}", resp.results.first().map(|r| &r.employee_id))
    })?;
    for r in &resp.results {
        ensure(
            [&r.full_name, &r.phone, &r.email, &r.position_title].iter().all(|f| !f.trim().is_empty()),
            || format!("result {} is missing a display field", r.employee_id),
        )?;
    }
    ensure(resp.trace.len() == 3, || format!("trace has {} stages", resp.trace.len()))?;

    for q in corpus_texts() {
        let path = format!("/api/search?q={}", encode(&q));
        let resp: ApiSearchResponse = get_json(&client, base, &path, StatusCode::OK).await?;
        for r in &resp.results {
            ensure(
                [&r.full_name, &r.phone, &r.email, &r.position_title].iter().all(|f| !f.trim().is_empty()),
                || format!("`{q}`: result {} is missing a display field", r.employee_id),
            )?;
        }
    }

    let resp: ApiSearchResponse =
        get_json(&client, base, "/api/search?q=invoice&dept=finance&k=1", StatusCode::OK).await?;
    ensure(resp.results.len() <= 1 && resp.department_key.as_deref() == Some("finance"), || {
        "dept/k parameters not applied".to_owned()
    })?;

    let resp: ApiSearchResponse = get_json(&client, base, "/api/search?q=zzz", StatusCode::OK).await?;
    ensure(resp.results.is_empty() && resp.unknown_terms == ["zzz"], || {
        format!("`zzz` gave {} results, unknown terms {:?}", resp.results.len(), resp.unknown_terms)
    })?;

    expect_error(&client, base, "/api/search?q=", StatusCode::BAD_REQUEST, "invalid_query").await?;
    expect_error(&client, base, "/api/search", StatusCode::BAD_REQUEST, "invalid_query").await?;
    expect_error(&client, base, "/api/search?q=invoice&k=0", StatusCode::BAD_REQUEST, "invalid_query").await?;
    expect_error(&client, base, "/api/search?q=invoice&k=ten", StatusCode::BAD_REQUEST, "invalid_query").await?;
    expect_error(&client, base, "/api/search?q=invoice&dept=marketing", StatusCode::NOT_FOUND, "unknown_department").await?;

    let depts: Vec<DepartmentEntry> = get_json(&client, base, "/api/departments", StatusCode::OK).await?;
    ensure(depts.len() == kb.departments().len() && depts.len() == 5, || format!("{} departments", depts.len()))?;

    let card: EmployeeCard = get_json(&client, base, "/api/employees/e7", StatusCode::OK).await?;
    ensure(card.full_name == kb.employee("e7").unwrap().full_name, || format!("employee card {card:?}"))?;
    expect_error(&client, base, "/api/employees/nope", StatusCode::NOT_FOUND, "unknown_employee").await?;
    expect_error(&client, base, "/api/nothing-here", StatusCode::NOT_FOUND, "not_found").await?;

    let h1: Health = get_json(&client, base, "/api/health", StatusCode::OK).await?;
    let h2: Health = get_json(&client, base, "/api/health", StatusCode::OK).await?;
    ensure(h1 == h2 && h1.status == "ok" && h1.kb_fingerprint == kb.fingerprint(), || {
        format!("health {h1:?} / {h2:?}")
    })?;

    let paths: Vec<String> = ["who approves invoices", "price quote", "printer broken", "forgot password", "hiring", "zzz"]
        .iter()
        .cycle()
        .take(24)
        .map(|q| format!("/api/search?q={}", q.replace(' ', "%20")))
        .collect();
    let mut serial = Vec::new();
    for p in &paths {
        serial.push(strip_id(get_json(&client, base, p, StatusCode::OK).await?));
    }
    let tasks: Vec<_> = paths
        .iter()
        .map(|p| {
            let (client, base, p) = (client.clone(), base.to_owned(), p.clone());
            tokio::spawn(async move { get_json::<ApiSearchResponse>(&client, &base, &p, StatusCode::OK).await })
        })
        .collect();
    for (task, want) in tasks.into_iter().zip(&serial) {
        let got = strip_id(task.await.map_err(|e| e.to_string())??);
        ensure(&got == want, || "concurrent response differs from serial response".to_owned())?;
    }
    Ok(())
}
