#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;

use idiombench::adjudicate::VoteRecord;
use idiombench::synthetic::{idiom_dialogue, task_dialogue};
use idiombench::transcripts::{build_experiment1, build_experiment2, FnResponder, Transcript};
use idiombench_service::http;
use idiombench_service::service::AnnotationService;
use serde_json::Value;

pub const MODEL_A: &str = "hidden-generator-alpha";
pub const MODEL_B: &str = "hidden-generator-beta";

pub fn experiment1(id: &str, seed: u64) -> Transcript {
    let m = FnResponder::new(MODEL_A, |p: &str| format!("sure, {p}"));
    build_experiment1(id, &idiom_dialogue(60, 1), &task_dialogue(60, 2), &m, seed).unwrap()
}

pub fn experiment2(id: &str, seed: u64) -> Transcript {
    let a = FnResponder::new(MODEL_A, |p: &str| format!("sure, {p}"));
    let b = FnResponder::new(MODEL_B, |p: &str| format!("{} words", p.split(' ').count()));
    build_experiment2(id, &idiom_dialogue(60, 1), &task_dialogue(60, 2), &a, &b, seed).unwrap()
}

pub struct Server {
    pub base: String,
    handle: tokio::task::JoinHandle<()>,
}

impl Server {
    pub async fn start(dir: &Path) -> Server {
        let svc = AnnotationService::open(dir).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let app = http::router(std::sync::Arc::new(std::sync::Mutex::new(svc)));
        let handle = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Server { base, handle }
    }

    /// Simulates a crash: the task is dropped without any shutdown hook.
    pub fn kill(self) {
        self.handle.abort();
    }
}

/// Per-annotator map from item id to the vote body the script will send.
pub fn script(votes: &[VoteRecord]) -> HashMap<String, HashMap<u32, Value>> {
    let mut out: HashMap<String, HashMap<u32, Value>> = HashMap::new();
    for v in votes {
        out.entry(v.annotator_id.clone())
            .or_default()
            .insert(v.item_id, serde_json::to_value(v.vote).unwrap());
    }
    out
}

/// Everything an annotator saw, for leak checks.
pub struct Session {
    pub bodies: Vec<String>,
    pub order: Vec<u32>,
}

/// Plays one annotator through the transcript the way the web client does:
/// fetch next, answer it, repeat until completed.
pub async fn drive(client: &reqwest::Client, base: &str, tid: &str, annotator: &str, answers: &HashMap<u32, Value>) -> Session {
    let mut s = Session { bodies: Vec::new(), order: Vec::new() };
    loop {
        let resp = client
            .get(format!("{base}/transcripts/{tid}/next?annotator={annotator}"))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), 200);
        let text = resp.text().await.unwrap();
        let next: Value = serde_json::from_str(&text).unwrap();
        s.bodies.push(text);
        if next["completed"].as_bool().unwrap() {
            assert!(next["item"].is_null());
            break;
        }
        let item_id = next["item"]["item_id"].as_u64().unwrap() as u32;
        let body = serde_json::json!({ "annotator_id": annotator, "item_id": item_id, "vote": answers[&item_id] });
        let resp = client
            .post(format!("{base}/transcripts/{tid}/votes"))
            .json(&body)
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), 200, "vote on item {item_id}");
        s.bodies.push(resp.text().await.unwrap());
        s.order.push(item_id);
    }
    s
}

pub async fn register(client: &reqwest::Client, base: &str, id: &str) {
    let r = client
        .post(format!("{base}/annotators"))
        .json(&serde_json::json!({ "annotator_id": id }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 201);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["annotator_id"], id);
}

pub async fn create(client: &reqwest::Client, base: &str, t: &Transcript) {
    let r = client.post(format!("{base}/transcripts")).json(t).send().await.unwrap();
    assert_eq!(r.status(), 201);
}
