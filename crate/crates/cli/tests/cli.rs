use std::path::Path;
use std::process::{Command, Output};

use vivid_forge_core::model::{read_manifest, write_manifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vivid-forge"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn corpus(dir: &Path) {
    run(dir, &["synth-corpus", "--out", "corpus", "--seed", "7"]);
}

#[test]
fn ingest_strict_rejects_small_short_clips() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let strict = bin()
        .args(["ingest", "corpus/video_000", "--fps", "8", "--strict"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!strict.status.success());
    let err = String::from_utf8_lossy(&strict.stderr);
    assert!(err.contains("below 720p") && err.contains("below 5 s"), "{err}");

    let out = run(
        tmp.path(),
        &[
            "ingest",
            "corpus/video_000",
            "--out",
            "extracted",
            "--extract-cmd",
            "cp {input}/*.png {output}/",
            "--fps",
            "8",
            "--listing",
            "listing.txt",
        ],
    );
    assert!(stdout(&out).contains("8 frame(s), 96x64"));
    let listing = std::fs::read_to_string(tmp.path().join("listing.txt")).unwrap();
    assert!(listing.trim_end().ends_with("extracted 8/1"), "{listing}");
}

#[test]
fn ingest_strict_rejects_three_second_hd_clip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("clip");
    std::fs::create_dir(&dir).unwrap();
    for i in 0..3 {
        image::RgbImage::new(1280, 720)
            .save(dir.join(format!("frame_{i:05}.png")))
            .unwrap();
    }
    let out = bin().args(["ingest", "clip", "--fps", "1", "--strict"]).current_dir(tmp.path()).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("duration 3.00 s is below 5 s") && !err.contains("720p"), "{err}");
    run(tmp.path(), &["ingest", "clip", "--fps", "1"]);
}

#[test]
fn subprocess_backends_match_in_process_mock() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let cmd = format!("{} mock-backend", env!("CARGO_BIN_EXE_vivid-forge"));
    let toml: String = ["tagger", "detector", "segmenter", "captioner", "flow", "scorer", "embedder"]
        .iter()
        .map(|r| format!("[{r}]\ntransport = \"subprocess\"\nendpoint = \"{cmd}\"\nsessions = 2\n\n"))
        .collect();
    std::fs::write(tmp.path().join("backends.toml"), toml).unwrap();
    let base = ["build-addmod", "--corpus", "corpus/corpus.txt", "--seed", "3", "--aug", "none,box"];
    run(tmp.path(), &[&base[..], &["--out", "mock"]].concat());
    run(tmp.path(), &[&base[..], &["--out", "sub", "--backends", "backends.toml"]].concat());
    let a = std::fs::read(tmp.path().join("mock/manifest.jsonl")).unwrap();
    let b = std::fs::read(tmp.path().join("sub/manifest.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn deletion_augment_stats_and_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d);
    run(d, &["build-addmod", "--corpus", "corpus/corpus.txt", "--out", "am", "--seed", "1"]);
    run(
        d,
        &["build-del", "--corpus", "corpus/corpus.txt", "--donors", "am/manifest.jsonl", "--out", "del", "--seed", "1"],
    );
    run(d, &["augment", "--manifest", "del/manifest.jsonl", "--out", "aug"]);
    let aug = read_manifest(d.join("aug/manifest.jsonl")).unwrap();
    let del = read_manifest(d.join("del/manifest.jsonl")).unwrap();
    assert!(aug.records.len() > del.records.len());
    assert!(aug.get("video_000-del-r0-flowed-box").is_some());

    let stats = run(
        d,
        &["stats", "--manifest", "am/manifest.jsonl", "--manifest", "del/manifest.jsonl", "--json"],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&stats)).unwrap();
    assert_eq!(v["addition_modification"], 144);
    assert_eq!(v["deletion"], del.records.len());
    assert_eq!(v["sources"], 4);

    run(
        d,
        &[
            "plan-batches",
            "--images",
            "am/manifest.jsonl",
            "--images",
            "del/manifest.jsonl",
            "--videos",
            "am/manifest.jsonl",
            "--videos",
            "del/manifest.jsonl",
            "--out",
            "plan.jsonl",
            "--batches",
            "50",
            "--batch-size",
            "4",
        ],
    );
    let plan = std::fs::read_to_string(d.join("plan.jsonl")).unwrap();
    let lines: Vec<&str> = plan.lines().collect();
    assert_eq!(lines.len(), 51);
    assert!(lines[0].starts_with("{\"config\""));
}

#[test]
fn kive_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cost = run(d, &["kive", "cost", "--attempts", "5"]);
    assert_eq!(stdout(&cost), "direct: 85.50 PFLOPs\nkive:   24.60 PFLOPs\n");
    let chain = run(d, &["kive", "chain", "--frames", "145"]);
    let s = stdout(&chain);
    assert!(s.contains("0..=48") && s.contains("48..=96") && s.contains("96..=144"), "{s}");

    corpus(d);
    run(d, &["build-addmod", "--corpus", "corpus/corpus.txt", "--out", "am", "--aug", "none"]);
    let id = "video_000-am-e0-none-short";
    run(d, &["kive", "assemble", "--manifest", "am/manifest.jsonl", "--id", id, "--out", "kv"]);
    let m = read_manifest(d.join("kv/manifest.jsonl")).unwrap();
    let rec = m.get(&format!("{id}-kive")).unwrap();
    assert!(rec.kive);
    let first = image::open(d.join("corpus/video_000/frame_00000.png")).unwrap().to_rgb8();
    let slot0 = image::open(d.join(format!("kv/{id}-kive/frame_00000.png"))).unwrap().to_rgb8();
    assert_eq!(first, slot0);
}

#[test]
fn eval_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d);
    run(d, &["build-addmod", "--corpus", "corpus/corpus.txt", "--out", "am", "--aug", "none"]);
    // Score the sources against themselves: background is untouched.
    let records = read_manifest(d.join("am/manifest.jsonl")).unwrap().records;
    let lines: Vec<String> = records
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).unwrap();
            v["edited_ref"] = v["frames_ref"].clone();
            v.to_string()
        })
        .collect();
    write_manifest(d.join("scratch.jsonl"), &records).unwrap();
    let header = std::fs::read_to_string(d.join("scratch.jsonl")).unwrap();
    let header = header.lines().next().unwrap();
    std::fs::write(d.join("am/eval.jsonl"), format!("{header}\n{}\n", lines.join("\n"))).unwrap();

    let out = run(d, &["eval", "--manifest", "am/eval.jsonl", "--out-dir", "ev", "--builtin-embedder"]);
    assert!(stdout(&out).contains("addition_modification"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("ev/report.json")).unwrap()).unwrap();
    assert!(report["failures"].as_array().unwrap().is_empty());
    for r in report["records"].as_array().unwrap() {
        assert_eq!(r["native"]["bp"], 0.0);
        assert_eq!(r["native"]["ta"], 21.0);
    }
    assert!(d.join("ev/report.txt").exists());
}

#[test]
fn mock_backend_speaks_json_lines() {
    use std::io::Write;
    let mut child = bin()
        .arg("mock-backend")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"{\"id\":4,\"method\":\"ping\"}\n").unwrap();
    let out = child.wait_with_output().unwrap();
    let reply: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reply["id"], 4);
    assert_eq!(reply["result"]["status"], "ok");
}
