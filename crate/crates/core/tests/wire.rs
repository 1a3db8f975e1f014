//! HTTP contracts: the /score + /health scorer protocol and the
//! chat-completions streaming client, each against a local stub.

mod common;

use std::time::Duration;

use common::{dead_url, Request, Response, StubServer};
use serde_json::Value;
use thinkstream::backend::{generate, ChatBackend, ChatConfig, GenerationRequest, Role, StreamEnd, StreamingBackend};
use thinkstream::clock::{CancelToken, WallClock};
use thinkstream::trigger::{score_prefix, RemoteScorer, Scorer, TriggerConfig};
use thinkstream::Error;

fn scorer_stub() -> StubServer {
    StubServer::start(|req: &Request| match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/health") => Response::json(200, r#"{"status":"ok"}"#),
        ("POST", "/score") => match serde_json::from_str::<Value>(&req.body) {
            Ok(v) => match v["text"].as_str() {
                Some(t) if t.contains("explode") => Response::json(500, r#"{"error":"model failure"}"#),
                Some(t) if t.contains("wild") => Response::json(200, r#"{"score": 1.5}"#),
                Some(t) => {
                    let s = if t.trim_end().ends_with('.') { 0.9 } else { 0.1 };
                    Response::json(200, format!(r#"{{"score": {s}}}"#))
                }
                None => Response::json(400, r#"{"error":"missing text"}"#),
            },
            Err(_) => Response::json(400, r#"{"error":"malformed body"}"#),
        },
        _ => Response::json(404, "{}"),
    })
}

#[test]
fn remote_scorer_speaks_the_score_protocol() {
    let srv = scorer_stub();
    let scorer = RemoteScorer::new(srv.url.clone()).unwrap();
    scorer.health().unwrap();
    assert_eq!(scorer.score("I have 3 apples.").unwrap(), 0.9);
    assert_eq!(scorer.score("I have 3").unwrap(), 0.1);
    assert_eq!(scorer.name(), "remote");

    let reqs = srv.requests();
    let post = reqs.iter().find(|r| r.method == "POST").unwrap();
    assert_eq!(post.path, "/score");
    assert!(post.header("content-type").unwrap().starts_with("application/json"));
    let body: Value = serde_json::from_str(&post.body).unwrap();
    assert_eq!(body, serde_json::json!({"text": "I have 3 apples."}));
}

#[test]
fn remote_scorer_truncates_to_max_input_len() {
    let srv = scorer_stub();
    let scorer = RemoteScorer::new(srv.url.clone()).unwrap();
    let long: String = (0..600).map(|i| format!("w{i} ")).collect();
    score_prefix(&scorer, &long, &TriggerConfig::default()).unwrap();
    let body: Value = serde_json::from_str(&srv.requests()[0].body).unwrap();
    let sent = body["text"].as_str().unwrap();
    assert_eq!(sent.split_whitespace().count(), 512);
    assert!(sent.starts_with("w88 "));
}

#[test]
fn remote_scorer_failures_are_scorer_unavailable() {
    let srv = scorer_stub();
    let scorer = RemoteScorer::new(srv.url.clone()).unwrap();
    assert!(matches!(scorer.score("explode"), Err(Error::ScorerUnavailable(_))));
    assert!(matches!(scorer.score("wild"), Err(Error::ScorerUnavailable(_))));

    let gone = RemoteScorer::with_timeout(dead_url(), Duration::from_millis(300)).unwrap();
    assert!(matches!(gone.score("x"), Err(Error::ScorerUnavailable(_))));
    assert!(matches!(gone.health(), Err(Error::ScorerUnavailable(_))));
}

fn sse(words: &[&str]) -> Vec<String> {
    let mut chunks = vec!["data: {\"choices\":[{\"delta\":{\"role\":\"assistant\"}}]}\n\n".to_string()];
    for w in words {
        let delta = serde_json::json!({"choices": [{"delta": {"content": w}}]});
        chunks.push(format!("data: {delta}\n\n"));
    }
    chunks.push("data: [DONE]\n\n".into());
    chunks
}

fn chat_stub(delay: Duration) -> StubServer {
    StubServer::start(move |req: &Request| {
        let body: Value = serde_json::from_str(&req.body).unwrap_or_default();
        if req.path != "/v1/chat/completions" {
            return Response::json(404, "{}");
        }
        if body["messages"][0]["content"] == "fail" {
            return Response::json(503, r#"{"error":"overloaded"}"#);
        }
        if body["stream"] == true {
            Response::sse(sse(&["The", " answer", " is", " 36."]), delay)
        } else {
            Response::json(
                200,
                r#"{"choices":[{"message":{"role":"assistant","content":"ok [T] done"}}]}"#,
            )
        }
    })
}

fn chat_config(url: &str) -> ChatConfig {
    ChatConfig {
        endpoint: format!("{url}/v1/chat/completions"),
        model: "test-model".into(),
        api_key_env: None,
        timeout_ms: 5_000,
    }
}

#[test]
fn chat_backend_streams_deltas() {
    let srv = chat_stub(Duration::from_millis(5));
    let backend = ChatBackend::new(chat_config(&srv.url)).unwrap();
    let clock = WallClock::start();
    let rec = generate(
        &backend,
        &GenerationRequest::new(Role::Speaker, "q"),
        &CancelToken::new(),
        &clock,
    )
    .unwrap();
    assert_eq!(rec.output_text, "The answer is 36.");
    assert_eq!(rec.n_tokens, 4);
    assert!(!rec.interrupted);
    assert!(rec.first_token_ms <= rec.first_sentence_ms && rec.first_sentence_ms <= rec.end_ms);

    let sent: Value = serde_json::from_str(&srv.requests()[0].body).unwrap();
    assert_eq!(sent["model"], "test-model");
    assert_eq!(sent["stream"], true);
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["max_tokens"], 4096);
    assert_eq!(sent["messages"][0]["role"], "user");
    assert_eq!(sent["messages"][0]["content"], "q");
}

#[test]
fn chat_backend_sends_bearer_token_from_env() {
    let srv = chat_stub(Duration::ZERO);
    std::env::set_var("THINKSTREAM_WIRE_TEST_KEY", "sekrit");
    let mut cfg = chat_config(&srv.url);
    cfg.api_key_env = Some("THINKSTREAM_WIRE_TEST_KEY".into());
    let backend = ChatBackend::new(cfg).unwrap();
    assert_eq!(backend.complete("annotate", 16).unwrap(), "ok [T] done");
    assert_eq!(srv.requests()[0].header("authorization"), Some("Bearer sekrit"));
}

#[test]
fn chat_backend_status_errors_carry_the_status() {
    let srv = chat_stub(Duration::ZERO);
    let backend = ChatBackend::new(chat_config(&srv.url)).unwrap();
    let err = generate(
        &backend,
        &GenerationRequest::new(Role::Speaker, "fail"),
        &CancelToken::new(),
        &WallClock::start(),
    )
    .unwrap_err();
    match err {
        Error::Backend { status, message } => {
            assert_eq!(status, Some(503));
            assert!(message.contains("overloaded"));
        }
        other => panic!("expected backend error, got {other:?}"),
    }
    let gone = ChatBackend::new(chat_config(&dead_url())).unwrap();
    assert!(matches!(gone.probe(), Err(Error::Backend { status: None, .. })));
}

#[test]
fn chat_backend_cancellation_stops_delivery() {
    let srv = chat_stub(Duration::from_millis(60));
    let backend = ChatBackend::new(chat_config(&srv.url)).unwrap();
    let clock = WallClock::start();
    let cancel = CancelToken::new();
    let c2 = cancel.clone();
    let killer = std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(100));
        c2.cancel();
    });
    let mut got = Vec::new();
    let end = backend
        .stream(&GenerationRequest::new(Role::Speaker, "q"), &cancel, &clock, &mut |t| {
            got.push(t)
        })
        .unwrap();
    killer.join().unwrap();
    assert_eq!(end, StreamEnd::Cancelled);
    assert!(got.len() < 4, "got {} tokens after cancel", got.len());
}
