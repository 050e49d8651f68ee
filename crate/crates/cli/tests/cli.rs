use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn netrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netrec")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value printed on the `key value` line of a report.
fn field(o: &Output, key: &str) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{}", stdout(o)))
        .parse()
        .unwrap()
}

const THREE_ITEMS: &str = r#"
alpha = 0.9
N = 1
q = 0.0
p0 = [0.3333333333333333, 0.3333333333333333, 0.3333333333333334]
c = [0.0, 1.0, 1.0]
[graph]
kind = "matrix"
u = [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]]
"#;

const SYNTHETIC: &str = r#"
seed = 5
alpha = 0.8
N = 2
q = 0.8
s = 0.7
C = 2
[graph]
kind = "poisson"
K = 25
mean_degree = 6.0
"#;

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn three_item_solve_matches_the_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "three.toml", THREE_ITEMS);
    let policy = dir.path().join("p2.csv");
    let solved = netrec(&["solve", "--config", s(&cfg), "--policy", "P2", "--out", s(&policy)]);
    assert!(solved.status.success(), "{}", String::from_utf8_lossy(&solved.stderr));
    assert!((field(&solved, "chr") - 28.0 / 57.0).abs() < 1e-9);

    let oracle = netrec(&["oracle", "--config", s(&cfg)]);
    assert!(oracle.status.success());
    assert_eq!(field(&oracle, "evaluated"), 8.0);
    assert!((field(&oracle, "chr") - field(&solved, "chr")).abs() < 1e-9);

    let evaluated = netrec(&["eval", "--config", s(&cfg), "--policy-file", s(&policy)]);
    assert!(evaluated.status.success());
    assert_eq!(field(&evaluated, "ltec"), field(&solved, "ltec"));
    let text = std::fs::read_to_string(&policy).unwrap();
    assert!(text.starts_with("# netrec-policy v1 kind=uniform K=3 N=1 policy=P2\n"));
}

#[test]
fn everything_cached_gives_full_hit_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cached.toml", &THREE_ITEMS.replace("c = [0.0, 1.0, 1.0]", "c = [0.0, 0.0, 0.0]"));
    for policy in ["baseline", "P1", "P2"] {
        let out = netrec(&["solve", "--config", s(&cfg), "--policy", policy]);
        assert!(out.status.success());
        assert_eq!(field(&out, "chr"), 1.0);
        assert_eq!(field(&out, "mph_pct"), 100.0);
    }
}

#[test]
fn uniform_clicks_make_positional_and_uniform_objectives_equal() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "syn.toml", SYNTHETIC);
    let p2 = netrec(&["solve", "--config", s(&cfg), "--policy", "uni", "--solver", "builtin"]);
    let p3 = netrec(&["solve", "--config", s(&cfg), "--policy", "pref", "--solver", "builtin"]);
    assert!(p2.status.success() && p3.status.success());
    assert!((field(&p2, "lp_objective") - field(&p3, "lp_objective")).abs() < 1e-8);
    let skewed = netrec(&["solve", "--config", s(&cfg), "--policy", "P3", "--clicks", "0.7,0.3", "--out", s(&dir.path().join("p3.csv"))]);
    assert!(skewed.status.success());
    let text = std::fs::read_to_string(dir.path().join("p3.csv")).unwrap();
    assert!(text.contains("kind=positional K=25 N=2 policy=P3\nn,i,j,r\n"));
}

#[test]
fn simulation_agrees_with_the_model() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "syn.toml", SYNTHETIC);
    let out = netrec(&["sim", "--config", s(&cfg), "--policy", "P2", "--steps", "200000", "--replications", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(field(&out, "z_score").abs() <= 3.0);
    assert_eq!(field(&out, "steps"), 400_000.0);
    assert!((field(&out, "mean_cycle_length") - 5.0).abs() < 0.1);
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "syn.toml", SYNTHETIC);
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = netrec(&[
            "sweep", "--config", s(&cfg), "--axis", "q", "--values", "0.5,0.9", "--policies", "P1,P2,baseline",
            "--seeds", "1,2", "--workers", workers, "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv", "1");
    assert_eq!(a, run("b.csv", "3"));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "# netrec-sweep v1 axis=q reference=P1");
    assert_eq!(lines.len(), 2 + 2 * 2 * 3);
    assert!(lines[2].starts_with("q,0.5,1,1,P1,ok,"));

    let timed = netrec(&["sweep", "--config", s(&cfg), "--axis", "C", "--values", "1,3", "--timing"]);
    assert!(stdout(&timed).lines().nth(1).unwrap().contains("wall_ms"));
}

#[test]
fn gen_then_ingest() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("g.txt");
    let gen = netrec(&["gen", "--K", "60", "--mean-degree", "5", "--seed", "3", "--out", s(&graph)]);
    assert!(gen.status.success());
    let cleaned = dir.path().join("clean.txt");
    let ing = netrec(&["ingest", s(&graph), "--threshold", "0.5", "--out", s(&cleaned)]);
    assert!(ing.status.success(), "{}", String::from_utf8_lossy(&ing.stderr));
    assert!(stdout(&ing).starts_with("nodes "));
    let again = netrec(&["ingest", s(&cleaned)]);
    assert_eq!(stdout(&again), stdout(&ing));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 1\n1 two\n").unwrap();
    let out = netrec(&["ingest", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "three.toml", THREE_ITEMS);
    let infeasible = netrec(&[
        "solve", "--config", s(&cfg), "--solver", "external", "--external-cmd", "echo 'status infeasible' > {sol}",
    ]);
    assert_eq!(infeasible.status.code(), Some(2));
    let failing = netrec(&["solve", "--config", s(&cfg), "--solver", "external", "--external-cmd", "exit 7"]);
    assert_eq!(failing.status.code(), Some(3));
    let missing = netrec(&["solve", "--config", s(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(4));
    let invalid = netrec(&["solve", "--config", s(&cfg), "--alpha", "1.5"]);
    assert_eq!(invalid.status.code(), Some(1));
    let usage = netrec(&["solve"]);
    assert_eq!(usage.status.code(), Some(1));
    assert_eq!(netrec(&["--help"]).status.code(), Some(0));
}
