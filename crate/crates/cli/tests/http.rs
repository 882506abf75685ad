use std::net::SocketAddr;
use std::sync::Arc;

use toxscore::server::{self, ErrorBody, Health, ScoreResponse};
use toxscore_core::models::{LinearModel, Model};
use toxscore_core::persistence::BundleMetadata;
use toxscore_core::vectorizer::{Preset, Vocabulary};
use toxscore_core::{CleanMode, ModelBundle};

fn bundle() -> ModelBundle {
    let vocab = Vocabulary::from_parts(
        Preset::Tfidf2.config(),
        10,
        vec![("bad".into(), 3), ("idiot".into(), 4), ("nice".into(), 3)],
    )
    .unwrap();
    ModelBundle::new(
        CleanMode::Clean1,
        vocab,
        Model::Linear(LinearModel {
            weights: vec![0.7, 0.9, -0.2],
            bias: 0.125,
        }),
        BundleMetadata {
            dataset: "class".into(),
            model_kind: "ridge".into(),
            seed: 1,
            created_at: 0,
            grid_accuracy: None,
        },
    )
    .unwrap()
}

async fn start(b: Arc<ModelBundle>) -> (SocketAddr, tokio::sync::oneshot::Sender<()>) {
    let listener = server::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(server::serve_until(b, listener, async {
        let _ = rx.await;
    }));
    (addr, tx)
}

#[tokio::test]
async fn score_health_and_errors() {
    let b = Arc::new(bundle());
    let (addr, stop) = start(b.clone()).await;
    let client = reqwest::Client::new();
    let url = format!("http://{addr}");

    let r = client.post(format!("{url}/score")).json(&serde_json::json!({"text": ""})).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let body: ScoreResponse = r.json().await.unwrap();
    assert_eq!(body, ScoreResponse { score: 0.125, cleaned: String::new() });

    let r = client.post(format!("{url}/score")).json(&serde_json::json!({"text": "You IDIOT!!! http://x.y"})).send().await.unwrap();
    let body: ScoreResponse = r.json().await.unwrap();
    assert_eq!(body.cleaned, "you idiot!");
    assert_eq!(body.score.to_bits(), b.score("You IDIOT!!! http://x.y").score.to_bits());

    for bad in ["{not json", "{\"txt\": \"a\"}", "[1,2]", ""] {
        let r = client.post(format!("{url}/score")).body(bad).send().await.unwrap();
        assert_eq!(r.status(), 400, "{bad:?}");
        let e: ErrorBody = r.json().await.unwrap();
        assert!(!e.error.is_empty());
    }

    let h: Health = client.get(format!("{url}/healthz")).send().await.unwrap().json().await.unwrap();
    assert_eq!(h.status, "ok");
    assert_eq!(h.model_version, "toxb1/clean1-v1/word1-2/ridge");
    stop.send(()).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_are_independent() {
    let b = Arc::new(bundle());
    let (addr, stop) = start(b.clone()).await;
    let client = reqwest::Client::new();
    let texts: Vec<String> = (0..64)
        .map(|i| match i % 4 {
            0 => format!("bad {i}"),
            1 => "idiot idiot nice".to_string(),
            2 => format!("nice day number {i}"),
            _ => String::new(),
        })
        .collect();
    let futures = texts.iter().map(|t| {
        let client = client.clone();
        async move {
            client
                .post(format!("http://{addr}/score"))
                .json(&serde_json::json!({ "text": t }))
                .send()
                .await
                .unwrap()
                .json::<ScoreResponse>()
                .await
                .unwrap()
        }
    });
    let results = futures::future::join_all(futures).await;
    for (t, r) in texts.iter().zip(results) {
        assert_eq!(r.score.to_bits(), b.score(t).score.to_bits(), "{t}");
    }
    stop.send(()).unwrap();
}

#[test]
fn bind_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toxb");
    toxscore_core::save_bundle(&bundle(), &path).unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_toxscore"))
        .args(["serve", "--model", path.to_str().unwrap(), "--port", &port])
        .env_remove("TOXSCORE_MODEL")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
