use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use darkscan_core::report::{parse_report, render_report, ReportFormat};
use darkscan_core::{Category, Lexicon, LrBaseline, PageSource, Scanner, Thresholds};
use darkscan_testkit::{generate_corpus, write_keyword_model, KeywordModel, CORPUS_SEED};

fn darkscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darkscan"))
        .args(args)
        .env_remove("DARKSCAN_MODEL_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/reports").join(name)
}

#[test]
fn help_exits_zero() {
    let out = darkscan(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("scan"));
}

#[test]
fn usage_errors_exit_one_with_synopsis() {
    for args in [&["frobnicate"][..], &["scan"], &["classify"], &["scan", "--file", "a", "--url", "b"]] {
        let out = darkscan(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).contains("Usage:"), "{args:?}: {}", stderr(&out));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn page_without_text_is_an_empty_site() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.html");
    std::fs::write(&empty, "<html><head><title>t</title></head><body><script>x()</script></body></html>").unwrap();
    let out = darkscan(&["scan", "--file", path_str(&empty)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no segments"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let zero = dir.path().join("zero.html");
    std::fs::write(&zero, "").unwrap();
    assert_eq!(darkscan(&["scan", "--file", path_str(&zero)]).status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = darkscan(&["scan", "--file", "/nonexistent/page.html"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn comparing_a_report_with_itself_is_a_tie() {
    let r1 = bundled("website1.json");
    let out = darkscan(&["compare", path_str(&r1), path_str(&r1)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("tie"));

    let out = darkscan(&["compare", path_str(&r1), path_str(&r1), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cleanest"], "tie");
}

#[test]
fn bundled_reports_rank_website1_first() {
    let out = darkscan(&[
        "compare",
        path_str(&bundled("website1.json")),
        path_str(&bundled("website2.json")),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cleanest"], "website1");
    let better = |name: &str| {
        v["categories"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["category"] == name)
            .unwrap()["better"]
            .clone()
    };
    assert_eq!(better("Scarcity"), "website2");
    assert_eq!(better("Urgency"), "website2");
}

#[test]
fn compare_rejects_invalid_reports() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"site_id\": 1}").unwrap();
    let out = darkscan(&["compare", path_str(&bad), path_str(&bundled("website1.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.json"));
}

fn keyword_model(dir: &Path) {
    let labels: Vec<String> = Category::ALL.iter().map(|c| c.display_name().to_string()).collect();
    let spec = KeywordModel {
        labels,
        keywords: vec![
            ("hurry".into(), Category::Urgency.index()),
            ("left".into(), Category::Scarcity.index()),
            ("stock".into(), Category::Scarcity.index()),
        ],
        filler: vec!["only".into(), "in".into()],
        strength: 3.0,
        bias: vec![0.0; 8],
        max_seq_len: 16,
        n_outputs: 8,
    };
    write_keyword_model(dir, &spec).unwrap();
}

#[test]
fn classify_with_transformer_model() {
    let model = tempfile::tempdir().unwrap();
    keyword_model(model.path());
    let out = darkscan(&[
        "classify",
        "--text",
        "Hurry! Only 2 left in stock",
        "--backend",
        "transformer",
        "--model",
        path_str(model.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("predicted: Scarcity"), "{text}");
    for c in Category::ALL {
        assert!(text.contains(c.display_name()));
    }

    // the model directory may come from the environment instead
    let out = Command::new(env!("CARGO_BIN_EXE_darkscan"))
        .args(["classify", "--text", "Hurry! Only 2 left in stock", "--backend", "transformer", "--json"])
        .env("DARKSCAN_MODEL_DIR", model.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"][0]["predicted"], "Scarcity");
}

#[test]
fn transformer_without_model_fails_at_runtime() {
    let out = darkscan(&["classify", "--text", "x", "--backend", "transformer"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--model"));
}

#[test]
fn scan_file_matches_library_output_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_corpus(dir.path(), CORPUS_SEED).unwrap();
    let page = dir.path().join(&manifest.pages[0].file);
    let lexicon: Lexicon = Lexicon::builtin();

    for (flag, format, mode) in [
        ("json", ReportFormat::Json, darkscan_core::AggregationMode::ArgmaxFraction),
        ("md", ReportFormat::Markdown, darkscan_core::AggregationMode::ArgmaxFraction),
    ] {
        let out_file = dir.path().join(format!("out.{flag}"));
        let out = darkscan(&[
            "scan",
            "--file",
            path_str(&page),
            "--site-id",
            "bravo",
            "--format",
            flag,
            "--out",
            path_str(&out_file),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let report = Scanner::new(&lexicon)
            .with_mode(mode)
            .scan_site("bravo", &[PageSource::from_file(&page).unwrap()])
            .unwrap();
        assert_eq!(std::fs::read_to_string(&out_file).unwrap(), render_report(&report, format));
    }

    // stdout carries the same document
    let out = darkscan(&["scan", "--file", path_str(&page), "--site-id", "bravo", "--mode", "mean"]);
    let doc = parse_report(&stdout(&out)).unwrap();
    assert_eq!(doc.mode, darkscan_core::AggregationMode::MeanProbability);
    assert_eq!(doc.site_id, "bravo");
}

#[test]
fn scan_file_honours_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_corpus(dir.path(), CORPUS_SEED).unwrap();
    let page = dir.path().join(&manifest.pages[0].file);
    let strict = dir.path().join("strict.json");
    std::fs::write(&strict, serde_json::to_string(&Thresholds::uniform(1.0)).unwrap()).unwrap();
    let out = darkscan(&["scan", "--file", path_str(&page), "--thresholds", path_str(&strict)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(parse_report(&stdout(&out)).unwrap().flags.is_empty());
}

#[test]
fn corpus_scan_is_independent_of_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    generate_corpus(&corpus, CORPUS_SEED).unwrap();
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    for (out_dir, jobs) in [(&one, "1"), (&four, "4")] {
        let out = darkscan(&["scan", "--corpus", path_str(&corpus), "--jobs", jobs, "--out", path_str(out_dir)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for site in ["bravo-mart", "clean-goods", "rush-deals"] {
        let a = std::fs::read_to_string(one.join(format!("{site}.json"))).unwrap();
        let b = std::fs::read_to_string(four.join(format!("{site}.json"))).unwrap();
        assert_eq!(a, b);
        let doc = parse_report(&a).unwrap();
        assert_eq!(doc.site_id, site);
        assert_eq!(doc.pages.len(), 10);
    }
}

/// Eight classes with disjoint vocabularies, 12 lines each.
fn write_dataset(path: &Path) {
    let words: [&[&str]; 8] = [
        &["account", "required", "register", "signup"],
        &["recommended", "preselected", "confirmshaming", "nothanks"],
        &["shipping", "returns", "contact", "about"],
        &["cancel", "phone", "retention", "unsubscribe"],
        &["only", "left", "remaining", "few"],
        &["added", "protection", "hidden", "insurance"],
        &["bought", "viewing", "customers", "popular"],
        &["hurry", "ends", "countdown", "minutes"],
    ];
    let mut csv = String::from("text,label\n");
    for (k, vocab) in words.iter().enumerate() {
        for i in 0..12 {
            let a = vocab[i % 4];
            let b = vocab[(i / 4 + i + 1) % 4];
            csv.push_str(&format!("\"{a} {b} {a}\",{}\n", Category::ALL[k].display_name()));
        }
    }
    csv.push_str("something,Not A Label\n");
    std::fs::write(path, csv).unwrap();
}

#[test]
fn train_evaluate_and_tune_on_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_dataset(&data);
    let model = dir.path().join("model-lr.json");
    let metrics = dir.path().join("metrics.json");

    let out = darkscan(&[
        "train-baseline",
        "--dataset",
        path_str(&data),
        "--seed",
        "42",
        "--epochs",
        "30",
        "--out",
        path_str(&model),
        "--metrics-out",
        path_str(&metrics),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("epoch  30"));
    assert!(stderr(&out).contains("line 98"), "{}", stderr(&out));
    let loaded = LrBaseline::from_path(&model).unwrap();
    assert_eq!(loaded.history.len(), 30);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!(m["accuracy"].as_f64().unwrap() >= 0.9);

    let out = darkscan(&["evaluate", "--dataset", path_str(&data), "--backend", "lr", "--model", path_str(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v, m);

    let thresholds = dir.path().join("thresholds.json");
    let out = darkscan(&[
        "tune-thresholds",
        "--dataset",
        path_str(&data),
        "--backend",
        "lr",
        "--model",
        path_str(&model),
        "--objective",
        "fbeta:0.5",
        "--out",
        path_str(&thresholds),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let t = Thresholds::from_path(&thresholds).unwrap();
    assert_eq!(t.iter().count(), 7);

    let out = darkscan(&["tune-thresholds", "--dataset", path_str(&data), "--backend", "lr", "--objective", "f2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_lexical_backend_emits_metrics_schema() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_dataset(&data);
    let out = darkscan(&["evaluate", "--dataset", path_str(&data), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["accuracy", "macro_f1", "per_class", "confusion"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["confusion"].as_array().unwrap().len(), 8);
}

fn http_get(addr: &str, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(addr).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").ok()?;
    let mut body = String::new();
    s.read_to_string(&mut body).ok()?;
    Some(body)
}

#[test]
fn serve_answers_health_checks() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().to_string()
    };
    let mut child = Command::new(env!("CARGO_BIN_EXE_darkscan"))
        .args(["serve", "--bind", &addr])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut reply = None;
    while Instant::now() < deadline {
        if let Some(r) = http_get(&addr, "/v1/health") {
            reply = Some(r);
            break;
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let reply = reply.expect("server never answered");
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("lexical"), "{reply}");
}

#[test]
fn serve_reports_bind_failure() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    let out = darkscan(&["serve", "--bind", &addr]);
    assert_eq!(out.status.code(), Some(2));
}
