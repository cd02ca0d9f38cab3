use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_normgraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn normgraph")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a small corpus and returns its manifest path.
fn corpus(dir: &Path, documents: usize) -> PathBuf {
    let out = ok(&[
        "fixture",
        "--out",
        p(&dir.join("corpus")),
        "--documents",
        &documents.to_string(),
    ]);
    PathBuf::from(out.trim())
}

fn ingest(manifest: &Path, out: &Path, mode: &str) {
    ok(&[
        "ingest",
        "--manifest",
        p(manifest),
        "--out",
        p(out),
        "--mode",
        mode,
    ]);
}

fn error_summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(stdout.lines().last().unwrap_or_default())
        .expect("JSON error summary on stdout")
}

const SUBCOMMANDS: [&str; 6] = [
    "ingest", "embed", "query", "synth-qa", "evaluate", "fixture",
];

#[test]
fn readme_documents_every_flag() {
    let readme =
        fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    for sub in SUBCOMMANDS {
        assert!(
            readme.contains(&format!("normgraph {sub}")),
            "README lacks `normgraph {sub}`"
        );
        let help = ok(&[sub, "--help"]);
        for word in help.split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']') {
            if let Some(flag) = word.strip_prefix("--") {
                let flag = flag.split(['=', '<']).next().unwrap();
                if flag.is_empty() || flag == "help" {
                    continue;
                }
                assert!(
                    readme.contains(&format!("--{flag}")),
                    "README lacks --{flag} of {sub}"
                );
            }
        }
    }
}

#[test]
fn ingest_writes_a_complete_index() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    let out = dir.path().join("idx");
    let stdout = ok(&[
        "ingest",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--json",
    ]);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["report"]["documents"], 3);
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "bm25.json",
            "embeddings.bin",
            "embeddings_meta.json",
            "graph.json",
            "index.json",
            "ingest_report.json"
        ]
    );
}

#[test]
fn missing_document_fails_the_ingest_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    let docs = manifest.parent().unwrap().join("docs");
    let victim = fs::read_dir(&docs).unwrap().next().unwrap().unwrap().path();
    fs::remove_file(victim).unwrap();
    let out = dir.path().join("idx");
    let result = run(&["ingest", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(result.status.code(), Some(7));
    assert_eq!(error_summary(&result)["kind"], "ingest_failed");
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");

    ok(&[
        "ingest",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--allow-partial",
    ]);
    assert!(out.join("index.json").is_file());
}

#[test]
fn stale_and_foreign_indexes_have_their_own_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = dir.path().join("idx");
    ingest(&manifest, &out, "structured");
    ok(&["query", "--index", p(&out), "--text", "shall"]);

    let index_json = out.join("index.json");
    let original = fs::read_to_string(&index_json).unwrap();
    let mut v: Value = serde_json::from_str(&original).unwrap();
    v["version"] = Value::from(99);
    fs::write(&index_json, v.to_string()).unwrap();
    let r = run(&["query", "--index", p(&out), "--text", "shall"]);
    assert_eq!(r.status.code(), Some(4));
    assert_eq!(error_summary(&r)["kind"], "version_mismatch");
    fs::write(&index_json, original).unwrap();

    let docs = manifest.parent().unwrap().join("docs");
    let doc = fs::read_dir(&docs).unwrap().next().unwrap().unwrap().path();
    fs::write(&doc, fs::read_to_string(&doc).unwrap() + "\nedited\n").unwrap();
    let r = run(&["query", "--index", p(&out), "--text", "shall"]);
    assert_eq!(r.status.code(), Some(5));
    assert_eq!(error_summary(&r)["code"], 5);

    let r = run(&[
        "query",
        "--index",
        p(&dir.path().join("nope")),
        "--text",
        "shall",
    ]);
    assert_eq!(r.status.code(), Some(6));
}

#[test]
fn bad_configuration_exits_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = dir.path().join("idx");
    ingest(&manifest, &out, "structured");
    let r = run(&["query", "--index", p(&out), "--text", "shall", "--k", "0"]);
    assert_eq!(r.status.code(), Some(3));
    let r = run(&[
        "synth-qa",
        "--manifest",
        p(&manifest),
        "--out",
        p(&dir.path().join("qa.jsonl")),
        "--backend",
        "remote",
    ]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn synth_qa_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 4);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        ok(&[
            "synth-qa",
            "--manifest",
            p(&manifest),
            "--out",
            p(out),
            "--n",
            "15",
            "--seed",
            "7",
        ]);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(!text.is_empty());
    let meta: Value =
        serde_json::from_slice(&fs::read(dir.path().join("a.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["prompt_version"], "qa_prompt_v1");
    assert_eq!(meta["config"]["seed"], 7);
}

#[test]
fn evaluate_reports_failed_cells_and_fails_only_when_strict() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 4);
    let qa = dir.path().join("qa.jsonl");
    ok(&[
        "synth-qa",
        "--manifest",
        p(&manifest),
        "--out",
        p(&qa),
        "--n",
        "10",
    ]);
    let structured = dir.path().join("structured");
    let chunks = dir.path().join("chunks");
    ingest(&manifest, &structured, "structured");
    ingest(&manifest, &chunks, "structured-chunks");
    let missing = dir.path().join("vanilla-missing");
    let indexes = format!("{},{},{}", p(&structured), p(&chunks), p(&missing));
    let reports = dir.path().join("reports");

    let stdout = ok(&[
        "evaluate",
        "--dataset",
        p(&qa),
        "--indexes",
        &indexes,
        "--out",
        p(&reports),
        "--ks",
        "4,8",
        "--json",
    ]);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["status"], "partial");
    assert_eq!(v["index_errors"].as_array().unwrap().len(), 1);
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 16);
    let failed: Vec<&Value> = cells.iter().filter(|c| !c["error"].is_null()).collect();
    assert_eq!(failed.len(), 4);
    assert!(failed
        .iter()
        .all(|c| c["config"].as_str().unwrap().starts_with("vanilla")));

    let summary = fs::read_to_string(reports.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 17);
    assert!(summary.starts_with("config,K,recall,map,mrr,n_questions"));
    let file = normgraph::eval::report_file_name("structured-chunks+rrf", 8);
    assert!(reports.join(file).is_file());

    let r = run(&[
        "evaluate",
        "--dataset",
        p(&qa),
        "--indexes",
        &indexes,
        "--out",
        p(&reports),
        "--strict",
    ]);
    assert_eq!(r.status.code(), Some(8));
    assert_eq!(error_summary(&r)["kind"], "partial_failure");
}

#[test]
fn query_json_has_entries_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    let out = dir.path().join("idx");
    ingest(&manifest, &out, "structured-chunks");
    let stdout = ok(&[
        "query",
        "--index",
        p(&out),
        "--text",
        "equipment shall meet limits",
        "--k",
        "3",
        "--rrf",
        "--expand",
        "--json",
    ]);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        for key in ["node_id", "score", "doc_id", "title", "snippet"] {
            assert!(!e[key].is_null(), "{key}");
        }
    }
    let trace = &v["trace"];
    assert!(!trace["sparse"].as_array().unwrap().is_empty());
    assert!(trace["fused"].is_array());
    assert!(trace["expanded"].is_array());
    let scores: Vec<f64> = entries
        .iter()
        .map(|e| e["score"].as_f64().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn embed_subcommand_smooths_in_place() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = dir.path().join("idx");
    ingest(&manifest, &out, "structured-chunks");
    ok(&[
        "embed",
        "--index",
        p(&out),
        "--smooth",
        "--alpha",
        "0.25",
        "--embed-dim",
        "128",
    ]);
    let meta: Value =
        serde_json::from_slice(&fs::read(out.join("embeddings_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["smoothed"], true);
    assert_eq!(meta["dim"], 128);
    assert_eq!(meta["alpha"], 0.25);
    ok(&["query", "--index", p(&out), "--text", "shall"]);
}
