use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

use forge_core::audit::AuditOutcome;
use forge_core::iteration::{aggregate_stats, export_training_data, ExportFormat, IterationRunner, SftRecord};
use forge_core::jsonl;
use forge_core::lean::LeanBridge;
use forge_core::llm::fixture::Recorder;
use forge_core::llm::{FixtureBackend, Gateway, HttpBackend, HttpConfig, RetryPolicy, Role, ScriptedBackend};
use forge_core::ConceptRepository;

#[test]
fn recorded_fixtures_replay_a_round_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = ConceptRepository::bundled();
    let lean = LeanBridge::mock();

    let recorder = Arc::new(Recorder::new(ScriptedBackend::default()));
    let live = Gateway::single(recorder.clone());
    let first = IterationRunner::new(&live, &lean, &repo, tmp.path().join("a"))
        .run_rounds(1, 1, 20, 7, Vec::new(), |_| true)
        .unwrap();
    let saved = recorder.store.save_to(&tmp.path().join("fixtures")).unwrap();
    assert!(saved > 0);

    let replay = Gateway::single(Arc::new(FixtureBackend::from_dir(tmp.path().join("fixtures")).unwrap()));
    let second = IterationRunner::new(&replay, &lean, &repo, tmp.path().join("b"))
        .run_rounds(1, 1, 20, 7, Vec::new(), |_| true)
        .unwrap();
    // Only the backend name differs between the two manifests.
    let strip = |m: &forge_core::iteration::RoundManifest| {
        let mut m = m.clone();
        m.bindings.clear();
        m.input_hash.clear();
        m
    };
    assert_eq!(strip(&first[0]), strip(&second[0]));
    assert_eq!(first[0].files, second[0].files);
}

#[test]
fn exported_records_embed_statement_text() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = ConceptRepository::bundled();
    let lean = LeanBridge::mock();
    let gw = Gateway::single(Arc::new(ScriptedBackend::default()));
    let runner = IterationRunner::new(&gw, &lean, &repo, tmp.path().join("run"));
    let manifests = runner.run_rounds(1, 2, 15, 3, Vec::new(), |_| true).unwrap();
    let out = tmp.path().join("sft.jsonl");
    let n = export_training_data(runner.run_dir(), 1..=2, &out, ExportFormat::SftPairs).unwrap();
    let records: Vec<SftRecord> = jsonl::read(&out).unwrap();
    assert_eq!(records.len(), n);
    assert_eq!(n as u64, aggregate_stats(&manifests).unwrap().total);
    assert!(records
        .iter()
        .all(|r| r.instruction.contains("theorem tm_name") && r.output.ends_with(":= by sorry")));
}

#[test]
fn stopping_between_rounds_keeps_completed_rounds() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = ConceptRepository::bundled();
    let lean = LeanBridge::mock();
    let gw = Gateway::single(Arc::new(ScriptedBackend::default()));
    let runner = IterationRunner::new(&gw, &lean, &repo, tmp.path());
    let done = runner.run_rounds(1, 5, 5, 1, Vec::new(), |_| false).unwrap();
    assert_eq!(done.len(), 1);
    let (next, carry) = runner.resume_point().unwrap();
    assert_eq!(next, 2);
    assert_eq!(carry.len() as u64, done[0].carryover_out);
}

/// Serves canned HTTP responses, one per connection, in order.
fn serve(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for response in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            bodies.push(String::from_utf8(body).unwrap());
            stream.write_all(response.as_bytes()).unwrap();
        }
        bodies
    });
    (url, handle)
}

fn http_response(status: &str, extra: &str, body: &str) -> String {
    format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n{extra}\r\n{body}",
        body.len()
    )
}

#[test]
fn http_backend_retries_rate_limits() {
    let ok = r#"{"choices":[{"message":{"role":"assistant","content":"theorem tm_name : 1 = 1 := by sorry"}}]}"#;
    let (url, server) = serve(vec![
        http_response("429 Too Many Requests", "Retry-After: 0\r\n", "{}"),
        http_response("200 OK", "", ok),
    ]);
    let backend = HttpBackend::new("teacher", HttpConfig::new(&url, "some-model")).unwrap();
    let gw = Gateway::builder()
        .backend("teacher", Arc::new(backend), 1)
        .bind(Role::Translator, "teacher")
        .retry(RetryPolicy::immediate())
        .build()
        .unwrap();
    let text = gw
        .ask(
            Some("s"),
            Role::Translator,
            &[("informal_statement", "One equals one.")],
        )
        .unwrap();
    assert_eq!(text, "theorem tm_name : 1 = 1 := by sorry");
    let entry = &gw.audit().for_subject("s")[0];
    assert_eq!((entry.attempts, entry.outcome), (2, AuditOutcome::Ok));

    let bodies = server.join().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(sent["model"], "some-model");
    assert_eq!(sent["top_p"], 0.9);
    assert!(sent["messages"][0]["content"]
        .as_str()
        .unwrap()
        .ends_with("One equals one."));
}

#[test]
fn http_client_errors_are_not_retried() {
    let (url, server) = serve(vec![http_response("400 Bad Request", "", r#"{"error":"bad"}"#)]);
    let backend = HttpBackend::new("t", HttpConfig::new(&url, "m")).unwrap();
    let gw = Gateway::builder()
        .backend("t", Arc::new(backend), 1)
        .bind(Role::NliCheck, "t")
        .retry(RetryPolicy::immediate())
        .build()
        .unwrap();
    let err = gw.complete(Some("x"), Role::NliCheck, "prompt", None).unwrap_err();
    assert!(err.to_string().contains("400"), "{err}");
    assert_eq!(gw.audit().for_subject("x")[0].attempts, 1);
    server.join().unwrap();
}
