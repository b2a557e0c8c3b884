use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn posecg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posecg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_e1() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sol.json");
    let o = posecg(&["solve", path_str(&data("e1.json")), "-o", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("objective=-16.5 columns="), "{line}");
    assert!(line.contains(" integral=true "), "{line}");
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"objective\": -16.5"));
}

#[test]
fn solve_to_stdout_keeps_report_on_stderr() {
    let o = posecg(&["solve", path_str(&data("e1.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_start().starts_with('{'));
    assert!(stderr(&o).contains("objective=-16.5"));
}

#[test]
fn solve_empty() {
    let o = posecg(&["solve", path_str(&data("empty.json")), "-o", "/dev/null"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("objective=0 "));
}

#[test]
fn solve_invalid_instance() {
    let o = posecg(&["solve", path_str(&data("bad.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("share no edge"), "{}", stderr(&o));
    let o = posecg(&["solve", "/nonexistent.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn iteration_cap_exits_three() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst.json");
    let o = posecg(&["gen", "--seed", "3", "--people", "2", "-o", path_str(&inst)]);
    assert_eq!(o.status.code(), Some(0));
    let o = posecg(&["solve", path_str(&inst), "--max-iters", "1", "-o", "/dev/null"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn omega_override() {
    // With a huge pose cost nothing is worth selecting.
    let o = posecg(&[
        "solve",
        path_str(&data("e1.json")),
        "--omega",
        "1000",
        "-o",
        "/dev/null",
    ]);
    assert!(stdout(&o).starts_with("objective=0 "), "{}", stdout(&o));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = posecg(&["gen", "--seed", "7", "--people", "2", "-o", path_str(p)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gen_without_people_gives_only_false_positives() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("fp.json");
    posecg(&[
        "gen",
        "--seed",
        "1",
        "--people",
        "0",
        "--fp-rate",
        "0.5",
        "-o",
        path_str(&inst),
    ]);
    let sol = dir.path().join("sol.json");
    let o = posecg(&["solve", path_str(&inst), "-o", path_str(&sol)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&sol).unwrap();
    assert!(text.contains("\"poses\": []"), "{text}");
}

#[test]
fn gen_stats_respect_part_cap() {
    let o = posecg(&["gen", "--seed", "7", "--people", "3", "--stats", "-o", "/dev/null"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut parts = 0;
    for line in out.lines().skip(1) {
        let n: usize = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!(n <= 15, "{line}");
        parts += 1;
    }
    assert_eq!(parts, 14);
}

#[test]
fn check_e1_passes() {
    let o = posecg(&["check", path_str(&data("e1.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).trim(), "PASS solver=-16.5 oracle=-16.5");
}

#[test]
fn check_refuses_large_instances() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("big.json");
    posecg(&[
        "gen",
        "--seed",
        "2024",
        "--people",
        "7",
        "--max-total",
        "150",
        "-o",
        path_str(&inst),
    ]);
    let o = posecg(&["check", path_str(&inst)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("refusing"));
}

#[test]
fn check_detects_injected_bug() {
    let o = posecg(&["check", path_str(&data("e1.json")), "--wrong-omega", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("FAIL"), "{out}");
    assert!(out.contains("oracle=-16.5"));
}

#[test]
fn generated_instances_round_trip() {
    let dir = TempDir::new().unwrap();
    for seed in 0..5 {
        let inst = dir.path().join(format!("i{seed}.json"));
        let sol = dir.path().join(format!("s{seed}.json"));
        let svg = dir.path().join(format!("p{seed}.svg"));
        posecg(&[
            "gen",
            "--seed",
            &seed.to_string(),
            "--people",
            "2",
            "-o",
            path_str(&inst),
        ]);
        let o = posecg(&["solve", path_str(&inst), "-o", path_str(&sol)]);
        assert_eq!(o.status.code(), Some(0));
        let o = posecg(&["render", path_str(&inst), path_str(&sol), "-o", path_str(&svg)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn render_e1() {
    let dir = TempDir::new().unwrap();
    let sol = dir.path().join("sol.json");
    posecg(&["solve", path_str(&data("e1.json")), "-o", path_str(&sol)]);
    let o = posecg(&["render", path_str(&data("e1.json")), path_str(&sol)]);
    assert_eq!(o.status.code(), Some(0));
    let svg = stdout(&o);
    assert_eq!(svg.matches("<circle").count(), 2);
    assert_eq!(svg.matches("<rect").count(), 1);
    assert_eq!(svg.matches("<line").count(), 1);
    assert_eq!(svg.matches("class=\"fp\"").count(), 0);
}

#[test]
fn render_needs_positions() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("nopos.json");
    let text = fs::read_to_string(data("e1.json"))
        .unwrap()
        .replace(", \"x\": 50.0, \"y\": 20.0", "");
    fs::write(&inst, text).unwrap();
    let sol = dir.path().join("sol.json");
    posecg(&["solve", path_str(&inst), "-o", path_str(&sol)]);
    let o = posecg(&["render", path_str(&inst), path_str(&sol)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("detection 1 has no position"), "{}", stderr(&o));
}
