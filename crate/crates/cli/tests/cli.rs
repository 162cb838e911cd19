use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn klent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klent"))
        .args(args)
        .env_remove("KLENT_OUT")
        .output()
        .expect("spawn klent")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = klent(args);
    assert!(
        o.status.success(),
        "klent {args:?} failed\nstdout:\n{}\nstderr:\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn train_countup(dir: &Path, budget: &str) -> String {
    ok(&[
        "train",
        "--game",
        "countup",
        "--preset",
        "klent",
        "--budget",
        budget,
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn solve_countup_prints_the_strategy_table() {
    let text = ok(&["solve-countup", "7", "2"]);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(
        rows,
        [
            "    6  Win with A_t = +1 or +2.",
            "    5  Win with A_t = +2.",
            "    4  Lose anyway.",
            "    3  Win with A_t = +1.",
            "    2  Win with A_t = +2.",
            "    1  Lose anyway.",
            "    0  Win with A_t = +1.",
        ]
    );
    let short = ok(&["solve-countup", "3", "5"]);
    assert!(short.contains("    0  Win with A_t = +3 or +4 or +5."), "{short}");
}

#[test]
fn solve_countup_with_alpha_has_interior_rows() {
    let text = ok(&["solve-countup", "7", "2", "--alpha", "1.0"]);
    let start = text.lines().position(|l| l.starts_with("state   pi")).unwrap();
    let rows: Vec<&str> = text.lines().skip(start + 1).take(7).collect();
    for row in rows {
        let nums: Vec<f64> = row.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert!(
            nums[1] > 0.0 && nums[1] < 1.0 && nums[2] > 0.0 && nums[2] < 1.0,
            "{row}"
        );
    }
}

#[test]
fn train_writes_artifacts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let summary = train_countup(&a, "20000");
    assert!(summary.contains("/ 20000 simulator evaluations"), "{summary}");
    for f in ["config.txt", "metrics.jsonl", "final.bin"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    // Re-running from the written config reproduces the metrics stream.
    ok(&[
        "train",
        "--config",
        a.join("config.txt").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    let ma = std::fs::read(a.join("metrics.jsonl")).unwrap();
    let mb = std::fs::read(b.join("metrics.jsonl")).unwrap();
    assert!(!ma.is_empty());
    assert_eq!(ma, mb);
    for line in String::from_utf8(ma).unwrap().lines() {
        assert!(line.starts_with('{') && line.contains("\"schema\""), "{line}");
    }
}

#[test]
fn trained_countup_is_optimal_and_evaluates() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = train_countup(tmp.path(), "200000");
    assert!(
        summary.contains("greedy policy optimal in 5/5 winning states"),
        "{summary}"
    );
    let ck = tmp.path().join("final.bin");
    let ck = ck.to_str().unwrap();

    let vs_opt = ok(&["eval", ck, "optimal-countup", "--games", "100"]);
    assert!(vs_opt.contains("moving second: W 0 D 0 L 50"), "{vs_opt}");
    assert!(vs_opt.contains("moving first:  W 50 D 0 L 0"), "{vs_opt}");

    let vs_self = ok(&["eval", ck, ck, "--games", "100"]);
    assert!(vs_self.contains("win rate 0.5000"), "{vs_self}");
    assert!(vs_self.contains("elo 1000.00"), "{vs_self}");

    let searched = ok(&["eval", ck, "random", "--games", "50", "--simulations", "16"]);
    assert!(searched.contains("search(16) vs random"), "{searched}");
}

#[test]
fn play_rejects_illegal_input_and_exits_on_eof() {
    let tmp = tempfile::tempdir().unwrap();
    train_countup(tmp.path(), "5000");
    let ck = tmp.path().join("final.bin");
    let mut child = Command::new(env!("CARGO_BIN_EXE_klent"))
        .args(["play", ck.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"+3\nbanana\n").unwrap();
    let o = child.wait_with_output().unwrap();
    let text = stdout(&o);
    assert!(o.status.success());
    assert!(text.contains("illegal move '+3'; legal moves: +1 +2"), "{text}");
    assert!(text.contains("illegal move 'banana'"), "{text}");
    assert!(text.contains("end of input"), "{text}");
}

#[test]
fn play_reaches_the_end_of_a_game() {
    let tmp = tempfile::tempdir().unwrap();
    train_countup(tmp.path(), "5000");
    let ck = tmp.path().join("final.bin");
    let mut child = Command::new(env!("CARGO_BIN_EXE_klent"))
        .args(["play", ck.to_str().unwrap(), "--simulations", "0"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("+1\n".repeat(8).as_bytes())
        .unwrap();
    let o = child.wait_with_output().unwrap();
    let text = stdout(&o);
    assert!(o.status.success());
    assert!(text.contains("game over: you"), "{text}");
    assert!(text.contains("agent plays"), "{text}");
}

#[test]
fn bias_variance_writes_a_row_per_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    train_countup(tmp.path(), "5000");
    let ck = tmp.path().join("final.bin");
    let csv = tmp.path().join("bv.csv");
    ok(&[
        "bias-variance",
        ck.to_str().unwrap(),
        "--lambdas",
        "0,1",
        "--rollouts",
        "300",
        "--oracle-rollouts",
        "300",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "lambda,bias_sq,bias_sq_se,variance,variance_se,mse,mse_se");
    let mc: Vec<f64> = lines[2].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(mc[0], 1.0);
    assert!(mc[1] <= 3.0 * mc[2], "{}", lines[2]);
}

#[test]
fn single_cell_sweep_matches_train_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    train_countup(tmp.path(), "10000");
    let ck = tmp.path().join("final.bin");
    let evaluated = ok(&["eval", ck.to_str().unwrap(), "random", "--games", "200", "--seed", "0"]);
    let rate = evaluated
        .lines()
        .find_map(|l| l.strip_prefix("win rate "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .to_string();

    let swept = ok(&[
        "sweep",
        "--game",
        "countup",
        "--budget",
        "10000",
        "--alphas",
        "0.03",
        "--betas",
        "0.1",
        "--lambdas",
        "0.8824969025845955",
        "--seeds",
        "0",
        "--eval-games",
        "200",
    ]);
    let row = swept.lines().nth(1).unwrap();
    let cols: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(cols[3], "1", "{row}");
    assert_eq!(cols[4], rate, "{swept}\n{evaluated}");
}

#[test]
fn sweep_records_failed_cells_and_continues() {
    let text = ok(&[
        "sweep",
        "--game",
        "countup",
        "--budget",
        "2000",
        "--alphas",
        "0,0.03",
        "--betas",
        "0",
        "--lambdas",
        "0.5",
        "--seeds",
        "0,1",
        "--eval-games",
        "10",
    ]);
    let rows: Vec<&str> = text.lines().skip(1).take(2).collect();
    assert!(rows[0].contains("FAILED"), "{text}");
    assert!(rows[1].ends_with("ok"), "{text}");
    assert!(text.contains("1 of 2 cells completed"), "{text}");
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let bad = [
        vec!["train", "--alpha", "0", "--beta", "0", "--out", out],
        vec!["train", "--set", "bogus=1", "--out", out],
        vec!["train", "--set", "noequals", "--out", out],
        vec!["eval", "/nonexistent/ck.bin", "random"],
        vec!["solve-countup", "0", "2"],
    ];
    for args in bad {
        let o = klent(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_klent"))
        .args(["train", "--budget", "500"])
        .env("KLENT_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("final.bin").exists());
}

#[test]
fn legal_stats_reports_sparsity() {
    let text = ok(&["legal-stats", "--game", "hex", "--size", "3", "--games", "50"]);
    assert!(text.contains("max 9"), "{text}");
}
