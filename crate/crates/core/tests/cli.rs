use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn skini(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skini")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_reports_counts() {
    let o = skini(&["check", &fixture("jazz.json")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("80 patterns, 7 groups, 7 instruments\n"), "{text}");
    assert!(text.contains("  trumpet: 18\n"));
}

#[test]
fn check_exit_codes() {
    let o = skini(&["check", &fixture("orphan.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ViolinOut"), "{}", stderr(&o));

    let o = skini(&["check", &fixture("no-such-score.json")]);
    assert_eq!(o.status.code(), Some(2));

    // The paradox only shows up when the score runs.
    assert_eq!(skini(&["check", &fixture("paradox.json")]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(skini(&["dance"]).status.code(), Some(2));
    assert_eq!(skini(&["play"]).status.code(), Some(2));
    assert_eq!(skini(&["play", &fixture("jazz.json"), "--seed", "x"]).status.code(), Some(2));
    let o = skini(&["play", &fixture("jazz.json"), "--min-response", "5", "--max-response", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(skini(&["--help"]).status.code(), Some(0));
}

#[test]
fn play_paradox_is_a_domain_error() {
    let o = skini(&["play", &fixture("paradox.json"), "--audience", "5", "--duration", "60"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("causality") && err.contains("A"), "{err}");
}

fn play_into(dir: &Path, tag: &str, score: &str, seed: &str) -> [PathBuf; 3] {
    let files = ["csv", "json", "mid"].map(|ext| dir.join(format!("{tag}.{ext}")));
    let o = skini(&[
        "play",
        &fixture(score),
        "--seed",
        seed,
        "--out",
        s(&files[0]),
        "--stats",
        s(&files[1]),
        "--midi",
        s(&files[2]),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    files
}

#[test]
fn play_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = play_into(dir.path(), "a", "jazz.json", "7");
    let b = play_into(dir.path(), "b", "jazz.json", "7");
    let c = play_into(dir.path(), "c", "jazz.json", "8");
    for i in 0..3 {
        assert_eq!(std::fs::read(&a[i]).unwrap(), std::fs::read(&b[i]).unwrap());
    }
    assert_ne!(std::fs::read(&a[0]).unwrap(), std::fs::read(&c[0]).unwrap());

    let stats: serde_json::Value = serde_json::from_slice(&std::fs::read(&a[1]).unwrap()).unwrap();
    assert!(stats["admissions"].as_u64().unwrap() > 0);
    let csv = std::fs::read_to_string(&a[0]).unwrap();
    assert!(csv.starts_with("time_seconds,instrument,pattern_id,kind,participant\n"));
}

#[test]
fn play_without_out_prints_the_csv() {
    let o = skini(&["play", &fixture("chromatic.json"), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("time_seconds,"));
    assert!(stderr(&o).contains("admissions"));
}

#[test]
fn render_matches_play() {
    let dir = tempfile::tempdir().unwrap();
    let [csv, _, mid] = play_into(dir.path(), "p", "jazz.json", "3");
    let again = dir.path().join("again.mid");
    let o = skini(&["render", s(&csv), "--midi", s(&again), "--score", &fixture("jazz.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = std::fs::read(&again).unwrap();
    assert_eq!(bytes, std::fs::read(&mid).unwrap());

    let smf = midly::Smf::parse(&bytes).unwrap();
    assert_eq!(smf.header.format, midly::Format::Parallel);
    assert_eq!(smf.tracks.len(), 7);
}

#[test]
fn render_rejects_a_bad_log() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time_seconds,instrument,pattern_id,kind,participant\n1.0,bass,Nope,start,x\n").unwrap();
    let o = skini(&[
        "render",
        s(&bad),
        "--midi",
        s(&dir.path().join("x.mid")),
        "--score",
        &fixture("jazz.json"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = skini(&["render", s(&dir.path().join("missing.csv")), "--midi", "x.mid", "--score", &fixture("jazz.json")]);
    assert_eq!(o.status.code(), Some(2));
}
