//! End-to-end tests of the `lenfid` binary: output contracts and the
//! documented exit codes (0 success, 1 user error, 2 runtime error).

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn lenfid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lenfid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn lenfid_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lenfid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_file(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

const MOCK_PLAN: &str = r#"
variants = ["vanilla-v1", "thinking-v1"]
targets = [20, 50]
attempts = 2
inter_attempt_delay_ms = 0
concurrency_limit = 2
output_path = "store.jsonl"
seed = 7

[task]
kind = "summarize"
document = "doc.txt"

[[endpoints]]
id = "mock-exact"
style = "mock"
mock = { mode = "exact-n" }
"#;

fn setup_plan(dir: &Path) {
    write_file(&dir.join("plan.toml"), MOCK_PLAN);
    write_file(
        &dir.join("doc.txt"),
        "A short source document for the run.\n",
    );
}

#[test]
fn render_vanilla_v1_is_byte_exact() {
    let out = lenfid(&["render", "--variant", "vanilla-v1", "--target", "100"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "Summarize this document into exactly 100 words.\n"
    );
}

#[test]
fn render_thinking_v2_contains_expected_phrase() {
    let out = lenfid(&["render", "--variant", "thinking-v2", "--target", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("maximizing information preservation"));
    assert!(text.contains("Final 50-word document:"));
}

#[test]
fn render_unknown_variant_exits_one() {
    let out = lenfid(&["render", "--variant", "nope", "--target", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_custom_template() {
    let dir = tempfile::tempdir().unwrap();
    let template = dir.path().join("custom.txt");
    write_file(&template, "Answer in exactly {target_words} words, please.");
    let out = lenfid(&[
        "render",
        "--variant",
        "mine",
        "--target",
        "33",
        "--template-file",
        template.to_str().unwrap(),
        "--family",
        "vanilla",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "Answer in exactly 33 words, please.\n");

    let bad = dir.path().join("bad.txt");
    write_file(&bad, "No placeholder here.");
    let out = lenfid(&[
        "render",
        "--variant",
        "mine",
        "--target",
        "33",
        "--template-file",
        bad.to_str().unwrap(),
        "--family",
        "vanilla",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn count_reads_file_and_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("text.txt");
    write_file(&file, "Amazon's growth was 12% last year.");
    let out = lenfid(&["count", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "7");

    let mut child = Command::new(env!("CARGO_BIN_EXE_lenfid"))
        .args(["count"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"one two three")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "3");
}

#[test]
fn count_token_dump() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("text.txt");
    write_file(&file, "It's 12%.");
    let out = lenfid(&["count", file.to_str().unwrap(), "--tokens"]);
    let text = stdout(&out);
    assert!(text.contains("w It"));
    assert!(text.contains("w 's"));
    assert!(text.contains("w 12"));
    assert!(text.contains("- %"));
    assert!(text.contains("- ."));
    assert!(text.trim_end().ends_with('3'));
}

#[test]
fn run_resume_analyze_audit_cycle() {
    let dir = tempfile::tempdir().unwrap();
    setup_plan(dir.path());

    let out = lenfid_in(dir.path(), &["run", "--plan", "plan.toml"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("8 completed, 0 failed"));

    // running again without --resume refuses to clobber
    let out = lenfid_in(dir.path(), &["run", "--plan", "plan.toml"]);
    assert_eq!(out.status.code(), Some(1));

    // resume on a complete store does nothing
    let out = lenfid_in(dir.path(), &["resume", "--plan", "plan.toml"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("0 completed (nothing to do)"));

    // analyze writes artifacts
    let out = lenfid_in(
        dir.path(),
        &["analyze", "--store", "store.jsonl", "--out", "reports"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for artifact in [
        "reports/mapd.md",
        "reports/mapd.csv",
        "reports/fidelity_points.csv",
        "reports/fidelity_overlay.csv",
        "reports/significance.csv",
        "reports/cost.md",
    ] {
        assert!(dir.path().join(artifact).exists(), "{artifact} missing");
    }
    assert!(stdout(&out).contains("best"));

    // audit is clean
    let out = lenfid_in(dir.path(), &["audit", "--store", "store.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("0 mismatches"));

    // tampering flips audit to exit 2
    let store_path = dir.path().join("store.jsonl");
    let text = std::fs::read_to_string(&store_path).unwrap();
    let tampered = text.replacen("\"word_count\":20", "\"word_count\":21", 1);
    assert_ne!(text, tampered);
    std::fs::write(&store_path, tampered).unwrap();
    let out = lenfid_in(dir.path(), &["audit", "--store", "store.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("mismatch"));
}

#[test]
fn invalid_plan_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write_file(&dir.path().join("plan.toml"), "variants = []\noutput_path = \"s\"\n[task]\nkind = \"story\"\n[[endpoints]]\nid = \"x\"\nstyle = \"mock\"\nmock = { mode = \"exact-n\" }\n");
    let out = lenfid_in(dir.path(), &["run", "--plan", "plan.toml"]);
    assert_eq!(out.status.code(), Some(1));

    // unknown endpoint style fails TOML parsing
    write_file(
        &dir.path().join("plan2.toml"),
        "variants = [\"vanilla-v1\"]\noutput_path = \"s\"\n[task]\nkind = \"summarize\"\ndocument = \"d\"\n[[endpoints]]\nid = \"x\"\nstyle = \"carrier-pigeon\"\n",
    );
    let out = lenfid_in(dir.path(), &["run", "--plan", "plan2.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn all_cells_failing_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_file(
        &dir.path().join("plan.toml"),
        r#"
variants = ["vanilla-v1"]
targets = [20]
attempts = 1
inter_attempt_delay_ms = 0
output_path = "store.jsonl"

[task]
kind = "summarize"
document = "doc.txt"

[[endpoints]]
id = "broken"
style = "chat-completions"
base_url = "http://127.0.0.1:9/v1"
api_key_env = "LENFID_TEST_MISSING_CREDENTIAL"
"#,
    );
    write_file(&dir.path().join("doc.txt"), "words here\n");
    let out = lenfid_in(dir.path(), &["run", "--plan", "plan.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("0 completed, 1 failed"));
}

#[test]
fn judge_with_mock_judge() {
    let dir = tempfile::tempdir().unwrap();
    setup_plan(dir.path());
    let out = lenfid_in(dir.path(), &["run", "--plan", "plan.toml"]);
    assert_eq!(out.status.code(), Some(0));

    write_file(
        &dir.path().join("judge.toml"),
        "[endpoint]\nid = \"mock-judge\"\nstyle = \"mock\"\nmock = { mode = \"judge\", score = 0.9 }\n",
    );
    let out = lenfid_in(
        dir.path(),
        &[
            "judge",
            "--store",
            "store.jsonl",
            "--judge",
            "judge.toml",
            "--document",
            "doc.txt",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("8 records judged"));
    assert!(text.contains("0.90"));

    let scores = std::fs::read_to_string(dir.path().join("store.jsonl.scores.jsonl")).unwrap();
    assert_eq!(scores.lines().count(), 8);
    assert!(scores.lines().all(|l| l.contains("\"score\":0.9")));
}

#[test]
fn report_subcommand_formats() {
    let dir = tempfile::tempdir().unwrap();
    setup_plan(dir.path());
    lenfid_in(dir.path(), &["run", "--plan", "plan.toml"]);

    let out = lenfid_in(
        dir.path(),
        &["report", "--store", "store.jsonl", "--kind", "mapd"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("| Endpoint |"));

    let out = lenfid_in(
        dir.path(),
        &[
            "report",
            "--store",
            "store.jsonl",
            "--kind",
            "fidelity",
            "--format",
            "csv",
            "--out",
            "points.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("points.csv")).unwrap();
    assert!(csv.starts_with("endpoint,variant,target,attempt,ratio,class"));

    let out = lenfid_in(
        dir.path(),
        &[
            "report",
            "--store",
            "store.jsonl",
            "--kind",
            "records",
            "--format",
            "jsonl",
            "--out",
            "records.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(0));

    // unsupported combination is a user error
    let out = lenfid_in(
        dir.path(),
        &[
            "report",
            "--store",
            "store.jsonl",
            "--kind",
            "cost",
            "--format",
            "csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_prints_improvement_for_reference_shaped_store() {
    use lenfid_core::metrics::length_metrics;
    use lenfid_core::parse::ParseMethod;
    use lenfid_core::prompt::{PromptFamily, VariantId};
    use lenfid_harness::store::{GenerationRecord, Outcome, StoreHeader, StoreWriter};

    // A store whose best-thinking mean APD is 0.088 and best-vanilla mean
    // is 0.141 (targets of 1000 make the APDs exact), so the analysis must
    // report a 37.6% improvement.
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("shaped.jsonl");
    let mut writer = StoreWriter::create(&store_path, &StoreHeader::new("fixture")).unwrap();
    let mut write_record = |variant: VariantId, family: PromptFamily, attempt: u32, words: u64| {
        let text = vec!["word"; words as usize].join(" ");
        writer
            .append(&GenerationRecord {
                record_id: format!("sonnet-like/{variant}/t1000/a{attempt}"),
                endpoint_id: "sonnet-like".into(),
                variant_id: variant,
                family,
                target_words: 1000,
                attempt,
                outcome: Outcome::Ok,
                error_class: None,
                error_message: None,
                raw_response: None,
                final_text: Some(text),
                thinking_text: None,
                parse_method: Some(ParseMethod::WholeText),
                unclosed_tag: false,
                word_count: Some(words),
                metrics: Some(length_metrics(words, 1000).unwrap()),
                latency_ms: 10.0,
                input_tokens: 10,
                output_tokens: 10,
                tokens_estimated: true,
                rules_version: lenfid_core::wordcount::RULES_VERSION.into(),
                timestamp_unix_ms: 0,
            })
            .unwrap();
    };
    for attempt in 0..5 {
        write_record(VariantId::ThinkingV1, PromptFamily::Thinking, attempt, 1088);
        write_record(VariantId::VanillaV1, PromptFamily::Vanilla, attempt, 1141);
    }
    drop(writer);

    let out = lenfid_in(
        dir.path(),
        &["analyze", "--store", "shaped.jsonl", "--out", "reports"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("sonnet-like: best thinking-v1"), "{text}");
    assert!(text.contains("improvement 37.6%"), "{text}");

    let mapd = std::fs::read_to_string(dir.path().join("reports/mapd.md")).unwrap();
    assert!(mapd.contains("**0.088 ± 0.000**"));
    assert!(mapd.contains("0.141 ± 0.000"));
}

#[test]
fn analyze_empty_store_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // header-only store
    write_file(
        &dir.path().join("empty.jsonl"),
        "{\"schema\":\"lenfid-store/1\",\"plan_fingerprint\":\"fp\",\"rules_version\":\"treebank-lite/1\",\"created_unix_ms\":0}\n",
    );
    let out = lenfid_in(
        dir.path(),
        &["analyze", "--store", "empty.jsonl", "--out", "r"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_documents_every_subcommand_and_flag() {
    let out = lenfid(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for subcommand in [
        "render", "count", "run", "resume", "analyze", "judge", "report", "audit",
    ] {
        assert!(text.contains(subcommand), "--help missing {subcommand}");
    }

    let expectations: &[(&str, &[&str])] = &[
        (
            "render",
            &["--variant", "--target", "--template-file", "--family"],
        ),
        ("count", &["--tokens"]),
        ("run", &["--plan", "--resume", "--seed"]),
        ("resume", &["--plan", "--seed"]),
        (
            "analyze",
            &["--store", "--out", "--seed", "--resamples", "--sample-std"],
        ),
        (
            "judge",
            &["--store", "--judge", "--document", "--out", "--seed"],
        ),
        (
            "report",
            &["--store", "--kind", "--format", "--out", "--sample-std"],
        ),
        ("audit", &["--store"]),
    ];
    for (subcommand, flags) in expectations {
        let out = lenfid(&[subcommand, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        for flag in *flags {
            assert!(text.contains(flag), "{subcommand} --help missing {flag}");
        }
    }
}
