//! End-to-end tests for the remote policy, scorer, and rewriter clients
//! against a local scripted HTTP server.

use std::sync::{Arc, Mutex};
use std::thread;

use requery_core::corpus::{Corpus, Document, Origin};
use requery_core::episode::{run_episode, EpisodeConfig, Termination};
use requery_core::forge::{BenchSample, ForgeError, RemoteRewriter, Rewriter, SampleKind};
use requery_core::index::Index;
use requery_core::policy::{Policy, PolicyError, PolicyRequest, RemotePolicy};
use requery_core::reward::{RelevanceScorer, RemoteScorer, RewardError};

struct Captured {
    path: String,
    auth: Option<String>,
    body: serde_json::Value,
}

struct ScriptedServer {
    url: String,
    requests: Arc<Mutex<Vec<Captured>>>,
    handle: Option<thread::JoinHandle<()>>,
}

impl ScriptedServer {
    /// Serves the given (status, body) responses in order, then shuts down.
    fn start(responses: Vec<(u16, &str)>) -> ScriptedServer {
        let responses: Vec<(u16, String)> = responses
            .into_iter()
            .map(|(s, b)| (s, b.to_string()))
            .collect();
        let server = tiny_http::Server::http("127.0.0.1:0").expect("bind test server");
        let port = server
            .server_addr()
            .to_ip()
            .expect("ip listener")
            .port();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let captured = Arc::clone(&requests);
        let handle = thread::spawn(move || {
            for (status, body) in responses {
                let mut request = match server.recv() {
                    Ok(r) => r,
                    Err(_) => return,
                };
                let mut raw = String::new();
                request.as_reader().read_to_string(&mut raw).unwrap();
                let auth = request
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.as_str().to_string());
                captured.lock().unwrap().push(Captured {
                    path: request.url().to_string(),
                    auth,
                    body: serde_json::from_str(&raw).unwrap_or(serde_json::Value::Null),
                });
                let header = tiny_http::Header::from_bytes(
                    &b"Content-Type"[..],
                    &b"application/json"[..],
                )
                .unwrap();
                let response = tiny_http::Response::from_string(body)
                    .with_status_code(status)
                    .with_header(header);
                let _ = request.respond(response);
            }
        });
        ScriptedServer {
            url: format!("http://127.0.0.1:{port}"),
            requests,
            handle: Some(handle),
        }
    }

    fn finish(mut self) -> Vec<Captured> {
        self.handle.take().unwrap().join().unwrap();
        Arc::try_unwrap(self.requests)
            .ok()
            .expect("no other holders")
            .into_inner()
            .unwrap()
    }
}

fn policy_request(prompt: &str) -> PolicyRequest {
    PolicyRequest {
        context_text: prompt.to_string(),
        temperature: 0.7,
        max_new_tokens: 128,
        seed: 5,
        gold: vec![],
    }
}

#[test]
fn policy_round_trips_text_logprobs_and_auth() {
    let server = ScriptedServer::start(vec![(
        200,
        r#"{"text":"<answer>done</answer>","logprobs":[-0.1,-0.2],"ref_logprobs":[-0.3,-0.4]}"#,
    )]);
    let policy = RemotePolicy::new(&server.url)
        .with_auth_token(Some("sesame".into()))
        .with_return_logprobs(true);
    let out = policy.next_actions(&policy_request("the prompt")).unwrap();
    assert_eq!(out.text, "<answer>done</answer>");
    assert_eq!(out.logprobs, Some(vec![-0.1, -0.2]));
    assert_eq!(out.ref_logprobs, Some(vec![-0.3, -0.4]));

    let requests = server.finish();
    assert_eq!(requests.len(), 1);
    assert_eq!(requests[0].path, "/generate");
    assert_eq!(requests[0].auth.as_deref(), Some("Bearer sesame"));
    assert_eq!(requests[0].body["prompt"], "the prompt");
    assert_eq!(requests[0].body["temperature"], 0.7);
    assert_eq!(requests[0].body["max_new_tokens"], 128);
    assert_eq!(requests[0].body["return_logprobs"], true);
}

#[test]
fn policy_retries_server_errors_until_success() {
    let server = ScriptedServer::start(vec![
        (500, r#"{"error":"flaky"}"#),
        (200, r#"{"text":"ok"}"#),
    ]);
    let policy = RemotePolicy::new(&server.url).with_max_retries(2);
    let out = policy.next_actions(&policy_request("p")).unwrap();
    assert_eq!(out.text, "ok");
    assert_eq!(out.logprobs, None);
    assert_eq!(server.finish().len(), 2);
}

#[test]
fn policy_gives_up_after_exhausting_retries() {
    let server = ScriptedServer::start(vec![
        (503, "no"),
        (503, "no"),
        (503, "no"),
    ]);
    let policy = RemotePolicy::new(&server.url).with_max_retries(2);
    let err = policy.next_actions(&policy_request("p")).unwrap_err();
    match err {
        PolicyError::Transport { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 3);
}

#[test]
fn policy_does_not_retry_client_errors() {
    let server = ScriptedServer::start(vec![(422, r#"{"error":"bad request"}"#)]);
    let policy = RemotePolicy::new(&server.url).with_max_retries(3);
    let err = policy.next_actions(&policy_request("p")).unwrap_err();
    assert!(matches!(err, PolicyError::Protocol(_)), "{err:?}");
    assert_eq!(server.finish().len(), 1);
}

#[test]
fn policy_rejects_malformed_and_inconsistent_payloads() {
    let server = ScriptedServer::start(vec![
        (200, r#"{"nope":1}"#),
        (200, r#"{"text":"x","logprobs":[-0.1],"ref_logprobs":[-0.1,-0.2]}"#),
    ]);
    let policy = RemotePolicy::new(&server.url).with_max_retries(0);
    let missing_text = policy.next_actions(&policy_request("p")).unwrap_err();
    assert!(matches!(missing_text, PolicyError::Protocol(_)));
    let uneven = policy.next_actions(&policy_request("p")).unwrap_err();
    assert!(matches!(uneven, PolicyError::Protocol(_)));
    server.finish();
}

#[test]
fn scorer_round_trips_and_clamps() {
    let server = ScriptedServer::start(vec![
        (200, r#"{"scores":[0.85]}"#),
        (200, r#"{"scores":[1.7]}"#),
    ]);
    let scorer = RemoteScorer::new(&server.url)
        .with_auth_token(Some("sesame".into()))
        .with_threshold(0.6);
    assert_eq!(scorer.threshold(), 0.6);
    let gold = vec!["1969".to_string()];
    let score = scorer.utility_score("who?", "(Doc) text", &gold).unwrap();
    assert_eq!(score, 0.85);
    let clamped = scorer.utility_score("who?", "(Doc) text", &gold).unwrap();
    assert_eq!(clamped, 1.0);

    let requests = server.finish();
    assert_eq!(requests[0].path, "/rerank");
    assert_eq!(requests[0].auth.as_deref(), Some("Bearer sesame"));
    assert_eq!(requests[0].body["query"], "who?");
    assert_eq!(requests[0].body["passages"][0], "(Doc) text");
    assert_eq!(requests[0].body["gold"][0], "1969");
}

#[test]
fn scorer_rejects_bad_score_lists() {
    let server = ScriptedServer::start(vec![
        (200, r#"{"scores":[]}"#),
        (200, r#"{"scores":[0.5,0.5]}"#),
    ]);
    let scorer = RemoteScorer::new(&server.url).with_max_retries(0);
    for _ in 0..2 {
        let err = scorer.utility_score("q", "obs", &[]).unwrap_err();
        assert!(matches!(err, RewardError::Protocol(_)), "{err:?}");
    }
    server.finish();
}

#[test]
fn rewriter_round_trips_and_validates() {
    let good = r#"{
        "question": "In which year did Zelvor Brint first visit Qualmere Fold?",
        "gold": ["1961"],
        "entity_map": [["Vera Caldwell", "Zelvor Brint"], ["Amber Cove", "Qualmere Fold"], ["1948", "1961"]],
        "documents": [{"id": "fic-s1-0", "title": "Zelvor Brint", "text": "The archive records the answer 1961."}]
    }"#;
    let bad_gold = r#"{
        "question": "Q?",
        "gold": ["1999"],
        "entity_map": [["A B", "C D"]],
        "documents": [{"id": "fic-s1-0", "title": "C D", "text": "nothing here"}]
    }"#;
    let server = ScriptedServer::start(vec![(200, good), (200, bad_gold)]);
    let rewriter = RemoteRewriter::new(&server.url).with_max_retries(0);
    let seed_sample = BenchSample {
        sample_id: "s1".into(),
        question: "In which year did Vera Caldwell first visit Amber Cove?".into(),
        gold: vec!["1948".into()],
        kind: SampleKind::Original,
        entity_map: None,
        support_doc_ids: None,
    };

    let out = rewriter.fictionalize(&seed_sample, 11).unwrap();
    assert_eq!(out.sample.kind, SampleKind::Fictional);
    assert_eq!(out.sample.gold, vec!["1961".to_string()]);
    assert_eq!(out.documents[0].origin, Origin::Injected);

    let err = rewriter.fictionalize(&seed_sample, 11).unwrap_err();
    assert!(matches!(err, ForgeError::GoldNotInDoc { .. }), "{err:?}");

    let requests = server.finish();
    assert_eq!(requests[0].path, "/rewrite");
    assert_eq!(requests[0].body["sample_id"], "s1");
    assert_eq!(requests[0].body["seed"], 11);
}

#[test]
fn episode_runs_end_to_end_over_a_remote_policy() {
    let corpus = Corpus::new(vec![Document {
        id: "d1".into(),
        title: "Loren Bouchard".into(),
        text: "Loren Bouchard, an illustrator active since 1969, grew up near Boston.".into(),
        origin: Origin::Base,
    }])
    .unwrap();
    let index = Index::build(&corpus);
    let server = ScriptedServer::start(vec![
        (
            200,
            r#"{"text":"<think>look it up</think>\n<search>Loren Bouchard</search>","logprobs":[-0.5],"ref_logprobs":[-0.6]}"#,
        ),
        (
            200,
            r#"{"text":"<judge>Yes</judge>\n<answer>1969</answer>","logprobs":[-0.25],"ref_logprobs":[-0.3]}"#,
        ),
    ]);
    let policy = RemotePolicy::new(&server.url).with_return_logprobs(true);
    let gold = vec!["1969".to_string()];
    let result = run_episode(
        "Since when is Loren Bouchard active?",
        &gold,
        &policy,
        &index,
        &EpisodeConfig::default(),
        3,
    )
    .unwrap();
    assert_eq!(result.termination, Termination::Answered);
    assert_eq!(result.trajectory.final_answer.as_deref(), Some("1969"));
    assert_eq!(result.logprobs, Some(vec![-0.5, -0.25]));
    assert_eq!(result.ref_logprobs, Some(vec![-0.6, -0.3]));

    let requests = server.finish();
    assert_eq!(requests.len(), 2);
    let first_prompt = requests[0].body["prompt"].as_str().unwrap();
    assert!(first_prompt.starts_with("Answer the given question step by step."));
    let second_prompt = requests[1].body["prompt"].as_str().unwrap();
    assert!(second_prompt.contains("<observation>(Loren Bouchard)"));
}
