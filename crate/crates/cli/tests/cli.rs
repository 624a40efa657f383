use std::path::Path;
use std::process::{Command, Output};

fn forge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("forge runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn repo_stats_reports_bundled_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = forge(tmp.path(), &["repo", "stats"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "13 domains, 55 topics, 350 concepts");

    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/undergrad.yaml");
    let out = forge(tmp.path(), &["repo", "stats", file]);
    assert_eq!(stdout(&out).trim(), "13 domains, 55 topics, 350 concepts");
    assert_eq!(forge(tmp.path(), &["repo", "validate", file]).status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(forge(tmp.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(forge(tmp.path(), &["synth"]).status.code(), Some(2));
    assert_eq!(forge(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(forge(tmp.path(), &["eval"]).status.code(), Some(2));
    assert_eq!(
        forge(tmp.path(), &["repo", "stats", "missing.yaml"]).status.code(),
        Some(1)
    );

    std::fs::write(tmp.path().join("bad.toml"), "[pools]\nllm_workers = 0\n").unwrap();
    let out = forge(tmp.path(), &["--config", "bad.toml", "stats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pools.llm_workers"), "{}", stderr(&out));
}

#[test]
fn help_lists_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let help = stdout(&forge(tmp.path(), &["--help"]));
    for cmd in ["repo", "synth", "augment", "iterate", "eval", "stats", "export"] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
}

fn manifest(dir: &Path, run: &str, round: u32) -> Vec<u8> {
    std::fs::read(
        dir.join("runs")
            .join(run)
            .join(format!("round-{round}"))
            .join("manifest.json"),
    )
    .unwrap()
}

#[test]
fn iterate_stats_export() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = forge(d, &["iterate", "--run", "a", "--rounds", "2", "--quota", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("round 2:"));
    // Default seed is 42.
    let out = forge(
        d,
        &[
            "--seed", "42", "iterate", "--run", "b", "--rounds", "2", "--quota", "20",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(manifest(d, "a", 1), manifest(d, "b", 1));
    assert_eq!(manifest(d, "a", 2), manifest(d, "b", 2));
    let out = forge(
        d,
        &["--seed", "7", "iterate", "--run", "c", "--rounds", "1", "--quota", "20"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(manifest(d, "a", 1), manifest(d, "c", 1));

    // A further invocation resumes at round 3.
    let out = forge(d, &["iterate", "--run", "a", "--rounds", "1", "--quota", "20"]);
    assert!(stderr(&out).contains("resuming run a at round 3"), "{}", stderr(&out));

    let out = forge(d, &["stats", "--run", "a"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("round,synthetic,proof_aug,contra_aug,total,student_ratio")
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    let series: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("runs/a/stats.json")).unwrap()).unwrap();
    assert_eq!(series["round"], serde_json::json!([1, 2, 3]));
    let total: u64 = rows.iter().map(|r| r[4].parse::<u64>().unwrap()).sum();
    let dups: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("runs/a/duplicates.json")).unwrap()).unwrap();
    let synthetic: u64 = rows.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(dups["pairs"], synthetic);

    let out = forge(d, &["export", "--run", "a", "--out", "sft.jsonl"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let exported = std::fs::read_to_string(d.join("sft.jsonl")).unwrap().lines().count() as u64;
    assert_eq!(exported, total);
    assert_eq!(
        forge(d, &["export", "--run", "a", "--to", "9", "--out", "x.jsonl"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(forge(d, &["stats", "--run", "nope"]).status.code(), Some(1));
}

#[test]
fn synth_then_augment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = forge(d, &["synth", "--round", "1", "--quota", "12", "--out", "s"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let accepted = std::fs::read_to_string(d.join("s/accepted.jsonl")).unwrap();
    let carried = std::fs::read_to_string(d.join("s/carryover.jsonl")).unwrap();
    assert!(!accepted.is_empty());
    assert_eq!(accepted.lines().count() + carried.lines().count(), 12);

    // Carryover can be fed back in as explicit input.
    let out = forge(
        d,
        &["synth", "--round", "2", "--input", "s/carryover.jsonl", "--out", "s2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let out = forge(
        d,
        &[
            "augment",
            "--input",
            "s/accepted.jsonl",
            "--round",
            "1",
            "--out",
            "aug.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(d.join("aug.records.jsonl").exists());
    let out = forge(
        d,
        &[
            "augment",
            "--input",
            "s/accepted.jsonl",
            "--round",
            "1",
            "--out",
            "p.jsonl",
            "--no-contraposition",
        ],
    );
    let origins = std::fs::read_to_string(d.join("p.jsonl")).unwrap();
    assert!(!origins.contains("contra_aug"), "{}", stderr(&out));
}

#[test]
fn process_toolchain_matches_in_process_mock() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let worker = env!("CARGO_BIN_EXE_forge-mock-lean");
    std::fs::write(
        d.join("proc.toml"),
        format!("[toolchain]\nkind = \"process\"\nprogram = \"{worker}\"\nversion = \"mock-1\"\n[pools]\nlean_workers = 2\n"),
    )
    .unwrap();
    std::fs::write(
        d.join("mock.toml"),
        "[toolchain]\nkind = \"mock\"\nversion = \"mock-1\"\n",
    )
    .unwrap();
    let a = forge(d, &["--config", "proc.toml", "iterate", "--run", "p", "--quota", "15"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = forge(d, &["--config", "mock.toml", "iterate", "--run", "m", "--quota", "15"]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert_eq!(manifest(d, "p", 1), manifest(d, "m", 1));

    let missing = "[toolchain]\nkind = \"process\"\nprogram = \"/nonexistent/worker\"\nversion = \"x\"\n";
    std::fs::write(d.join("missing.toml"), missing).unwrap();
    let out = forge(
        d,
        &[
            "--config",
            "missing.toml",
            "synth",
            "--round",
            "1",
            "--quota",
            "2",
            "--out",
            "o",
        ],
    );
    // Compile failures become carryover; the command itself still completes.
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(d.join("o/accepted.jsonl")).unwrap(), "");
}

#[test]
fn mock_mode_refuses_network_backends() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[backends.remote]\nkind = \"http\"\nbase_url = \"http://127.0.0.1:9\"\nmodel = \"m\"\n[roles]\ntranslator = \"remote\"\n";
    std::fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let out = forge(
        tmp.path(),
        &["--config", "c.toml", "synth", "--round", "1", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("mock mode"), "{}", stderr(&out));
}

#[test]
fn eval_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("bench.jsonl"),
        concat!(
            r#"{"id":"a","nl_text":"For every natural number n with n > 3, we have n ≥ 3.","source":"custom"}"#,
            "\n",
            r#"{"id":"b","nl_text":"Show that every bounded monotone sequence converges.","source":"putnambench","msc_class":"40"}"#,
            "\n"
        ),
    )
    .unwrap();
    std::fs::write(
        d.join("pn.jsonl"),
        r#"{"name":"exercise_1","informal_prefix":"/-- Prove that for every real x with x > 2, x > 2. -/\n"}"#
            .to_string()
            + "\n",
    )
    .unwrap();
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec![
            "eval",
            "--benchmark",
            "bench.jsonl",
            "--k",
            "1,2,4",
            "--seeds",
            "1,2,3",
            "--out",
            out,
        ];
        args.extend_from_slice(extra);
        forge(d, &args)
    };
    let a = run("a.json", &[]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let table = stdout(&a);
    assert!(table.starts_with("seed,pass@1,pass@2,pass@4\n"));
    assert_eq!(table.lines().count(), 1 + 3 + 1);
    assert_eq!(stdout(&run("a2.json", &[])), table);
    let b = run("b.json", &["--translator", "teacher_translate"]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert_eq!(run("f.json", &["--first-k"]).status.code(), Some(0));
    assert_eq!(run("x.json", &["--translator", "fl_rev"]).status.code(), Some(2));

    let cmp = forge(d, &["eval", "compare", "a.json", "b.json"]);
    assert_eq!(cmp.status.code(), Some(0), "{}", stderr(&cmp));
    let text = stdout(&cmp);
    assert_eq!(text.lines().next(), Some("k,mean_a,mean_b,p_value,significant"));
    assert_eq!(text.lines().count(), 4);

    let pn = forge(
        d,
        &[
            "eval",
            "--benchmark",
            "pn.jsonl",
            "--proofnet",
            "--k",
            "1",
            "--seeds",
            "1,2",
        ],
    );
    assert_eq!(pn.status.code(), Some(0), "{}", stderr(&pn));
}
