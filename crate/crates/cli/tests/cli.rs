use std::path::Path;
use std::process::{Command, Output};

use fliplab::algebra::Ring;
use fliplab::scheme::{read_scheme, strassen, write_scheme, Format, Scheme};

fn fliplab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fliplab"))
        .args(args)
        .current_dir(dir)
        .env_remove("FLIPLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn f(n: usize, m: usize, p: usize) -> Format {
    Format::new(n, m, p).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_scheme(&Scheme::standard(f(2, 2, 2), Ring::Z2), dir.path().join("std222.json")).unwrap();
    write_scheme(&strassen(Ring::Z2), dir.path().join("strassen.json")).unwrap();
    dir
}

#[test]
fn verify_reports_rank_and_exit_codes() {
    let dir = setup();
    let o = fliplab(&["verify", "std222.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "rank=8 verified");

    let mut triples = Scheme::standard(f(2, 2, 2), Ring::Z2).into_triples();
    triples.pop();
    write_scheme(&Scheme::new(f(2, 2, 2), Ring::Z2, triples).unwrap(), dir.path().join("bad.json")).unwrap();
    let o = fliplab(&["verify", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("violated"));

    assert_eq!(fliplab(&["verify", "missing.json"], dir.path()).status.code(), Some(3));
    std::fs::write(dir.path().join("junk.json"), "{\"format\": [2,2").unwrap();
    assert_eq!(fliplab(&["verify", "junk.json"], dir.path()).status.code(), Some(3));
    assert_eq!(fliplab(&["verify"], dir.path()).status.code(), Some(2));
    assert_eq!(fliplab(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn extend_project_combine_permute() {
    let dir = setup();
    let p = dir.path();
    let o = fliplab(&["extend", "strassen.json", "--axis", "p", "--out", "e.json"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let e = read_scheme(p.join("e.json")).unwrap();
    assert_eq!((e.format(), e.rank()), (f(2, 2, 3), 11));
    assert!(e.is_verified());
    assert!(p.join("e.json.manifest.json").exists());

    let o = fliplab(&["project", "e.json", "--axis", "p", "--out", "back.json"], p);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_scheme(p.join("back.json")).unwrap().rank(), 7);

    let o = fliplab(&["project", "e.json", "--axis", "q"], p);
    assert_eq!(o.status.code(), Some(2));

    let o = fliplab(&["combine", "strassen.json", "e.json", "--axis", "p", "--out", "c.json"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = read_scheme(p.join("c.json")).unwrap();
    assert_eq!((c.format(), c.rank()), (f(2, 2, 5), 18));
    assert!(c.is_verified());

    let o = fliplab(&["combine", "strassen.json", "e.json", "--axis", "n"], p);
    assert_eq!(o.status.code(), Some(2));

    let o = fliplab(&["permute", "e.json", "--perm", "rot", "--out", "r.json"], p);
    assert_eq!(o.status.code(), Some(0));
    let r = read_scheme(p.join("r.json")).unwrap();
    assert_eq!((r.format(), r.rank()), (f(2, 3, 2), 11));
    assert!(r.is_verified());
}

#[test]
fn search_is_deterministic_and_prints_its_seed() {
    let dir = setup();
    let p = dir.path();
    let args = |out: &'static str| {
        vec![
            "search", "--standard", "2", "2", "2", "--seed", "5", "--workers", "1", "--paths-mult", "2",
            "--len-mult", "2000", "--out", out,
        ]
    };
    let a = fliplab(&args("a.json"), p);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert!(stderr(&a).contains("seed=5"));
    fliplab(&args("b.json"), p);
    let (x, y) = (std::fs::read(p.join("a.json")).unwrap(), std::fs::read(p.join("b.json")).unwrap());
    assert_eq!(x, y);
    let s = read_scheme(p.join("a.json")).unwrap();
    assert!(s.is_verified() && s.rank() <= 8);
    let o = fliplab(&["verify", "a.json"], p);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn seed_precedence() {
    let dir = setup();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fliplab"));
        cmd.current_dir(dir.path()).env_remove("FLIPLAB_SEED");
        cmd.args(["search", "std222.json", "--workers", "1", "--paths-mult", "1", "--len-mult", "1"]);
        if let Some(e) = env {
            cmd.env("FLIPLAB_SEED", e);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        cmd.output().unwrap()
    };
    assert!(stderr(&run(Some("11"), None)).contains("seed=11"));
    assert!(stderr(&run(Some("11"), Some("12"))).contains("seed=12"));
    let o = run(None, None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).lines().any(|l| l.starts_with("seed=") && l[5..].parse::<u64>().is_ok()));
    assert_eq!(run(Some("x"), None).status.code(), Some(2));
}

#[test]
fn progress_stream_is_json_lines() {
    let dir = setup();
    let o = fliplab(
        &["search", "std222.json", "--seed", "1", "--workers", "1", "--paths-mult", "1", "--len-mult", "10", "--progress"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let events: Vec<serde_json::Value> = stderr(&o)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| e.get("walks_done").is_some()));
}

#[test]
fn lift_strassen() {
    let dir = setup();
    let p = dir.path();
    let o = fliplab(&["lift", "strassen.json", "--level", "16", "--out", "q.json", "--report", "r.json"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let q = read_scheme(p.join("q.json")).unwrap();
    assert_eq!(q.ring(), Ring::Q);
    assert!(q.is_verified());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["reconstructed"], true);
    let o = fliplab(&["verify", "q.json"], p);
    assert_eq!(o.status.code(), Some(0));

    let o = fliplab(&["lift", "strassen.json", "--level", "1"], p);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn enumerate_paths_and_dot() {
    let dir = setup();
    let p = dir.path();
    let o = fliplab(&["enumerate-paths", "--max-len", "2"], p);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "222 223 224\n222 223 233\n");
    let o = fliplab(&["enumerate-paths", "--max-len", "2", "--count"], p);
    assert_eq!(stdout(&o).trim(), "2");

    std::fs::write(
        p.join("spec.json"),
        r#"[{"from": [2,2,2], "to": [2,2,3], "kind": "extend"}]"#,
    )
    .unwrap();
    let o = fliplab(
        &[
            "campaign", "spec.json", "--pool-root", "pools", "--out", "dag.json", "--dot", "dag.dot", "--seed", "2",
            "--workers", "1", "--paths-mult", "5", "--len-mult", "2000",
        ],
        p,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = fliplab(&["export-dot", "dag.json"], p);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), std::fs::read_to_string(p.join("dag.dot")).unwrap());
    assert!(stdout(&o).contains("\"222\" -> \"223\" [label=\"extend\"];"));
    assert!(p.join("dag.json.manifest.json").exists());
    assert!(p.join("pools/2x2x3/Z2").is_dir());
}
