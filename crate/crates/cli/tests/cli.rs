use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use nsgame_core::generators;
use nsgame_core::hatgame::run_game;
use nsgame_core::modelfile::{model_to_json, parse_measure, parse_model};
use nsgame_core::{local_model, BellScenario, GameConfig, RunStats};
use serde_json::Value;

fn nsgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsgame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

#[test]
fn check_ns_on_fixtures() {
    for (name, code) in [("pr-box.json", 0), ("local-mix.json", 0), ("echo.json", 0), ("signalling.json", 1)] {
        for fast in [false, true] {
            let path = fixture(name);
            let mut args = vec!["check-ns", "--model", &path];
            if fast {
                args.push("--fast");
            }
            let out = nsgame(&args);
            assert_eq!(out.status.code(), Some(code), "{name}");
            let v = stdout_json(&out);
            assert_eq!(v["verdict"], if code == 0 { "pass" } else { "fail" });
        }
    }
    let out = nsgame(&["check-ns", "--model", &fixture("signalling.json")]);
    let w = &stdout_json(&out)["witness"];
    assert_eq!(w["subset"], serde_json::json!(["A"]));
    assert!(w["deviation"].as_f64().unwrap() > 0.5);
}

#[test]
fn malformed_and_missing_models_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"scenario\": 3}").unwrap();
    let bad = bad.to_string_lossy().into_owned();
    for cmd in ["check-ns", "check-local"] {
        assert_eq!(nsgame(&[cmd, "--model", &bad]).status.code(), Some(2));
        assert_eq!(nsgame(&[cmd, "--model", "/nonexistent.json"]).status.code(), Some(2));
    }
    assert_eq!(nsgame(&["check-ns", "--model", &fixture("pr-box.json"), "--tol", "0"]).status.code(), Some(2));
}

#[test]
fn check_local_certificates_replay() {
    for name in ["local-mix.json", "echo.json"] {
        let out = nsgame(&["check-local", "--model", &fixture(name)]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let model = parse_model(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
        let mu = parse_measure(model.scenario(), &stdout_json(&out)["certificate"]).unwrap();
        let replay = local_model(&mu, model.scenario()).unwrap();
        assert!(replay.max_table_deviation(&model).unwrap() <= 1e-9);
    }
    for name in ["pr-box.json", "signalling.json"] {
        let out = nsgame(&["check-local", "--model", &fixture(name)]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        assert!(stdout_json(&out)["deviation"].as_f64().unwrap() > 1e-9);
    }
}

#[test]
fn oversize_locality_question_is_a_capacity_error() {
    let s = BellScenario::with_sizes(3, 3, 3).unwrap();
    let m = generators::random_model(&mut generators::rng(1), &s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    std::fs::write(&path, model_to_json(&m)).unwrap();
    let out = nsgame(&["check-local", "--model", &path.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

fn simulate(dir: &std::path::Path, extra: &[&str]) -> Output {
    let out_dir = dir.to_string_lossy().into_owned();
    let mut args = vec!["simulate", "--out", &out_dir];
    args.extend_from_slice(extra);
    nsgame(&args)
}

#[test]
fn simulate_choice_strategy_on_eventually_zero_hats() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        dir.path(),
        &["--strategy", "g", "--input", "evzero:100", "--players", "10000", "--trials", "5", "--seed", "8"],
    );
    assert_eq!(out.status.code(), Some(0));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for run in summary["runs"].as_array().unwrap() {
        assert!(run["last_loss"].is_null() || run["last_loss"].as_u64().unwrap() < 100);
        assert_eq!(run["n"], 10000);
    }
    let csv = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("trial,k,S_k,W_k"));
    assert_eq!(csv.lines().count(), 1 + 5 * 5);
}

#[test]
fn simulate_constant_guess_is_a_fair_coin() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        dir.path(),
        &["--strategy", "const:0", "--players", "10000", "--trials", "1000", "--seed", "1", "--checkpoints", "10000"],
    );
    assert_eq!(out.status.code(), Some(0));
    let mean = stdout_json(&out)["mean_W_n"].as_f64().unwrap();
    assert!((mean - 0.5).abs() <= 0.005, "{mean}");
}

#[test]
fn simulate_is_reproducible_and_guards_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let flags = ["--strategy", "e", "--input", "evzero:20", "--players", "500", "--trials", "20", "--seed", "42", "--histogram"];
    assert_eq!(simulate(a.path(), &flags).status.code(), Some(0));
    assert_eq!(simulate(b.path(), &flags).status.code(), Some(0));
    for f in ["summary.json", "trajectories.csv", "last_loss.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(simulate(a.path(), &flags).status.code(), Some(2));
    let mut forced = flags.to_vec();
    forced.push("--force");
    assert_eq!(simulate(a.path(), &forced).status.code(), Some(0));
}

#[test]
fn simulate_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    for flags in [
        vec!["--strategy", "g", "--players", "10", "--horizon", "5"],
        vec!["--strategy", "nope", "--players", "10"],
        vec!["--strategy", "g", "--players", "10", "--input", "evzero:11"],
        vec!["--strategy", "g", "--players", "10", "--checkpoints", "0"],
        vec!["--strategy", "g", "--players", "10", "--trials", "0"],
        vec!["--strategy", "g", "--players", "0"],
    ] {
        assert_eq!(simulate(dir.path(), &flags).status.code(), Some(2), "{flags:?}");
    }
}

#[test]
fn verify_azuma_reports() {
    let out = nsgame(&["verify-azuma", "--strategy", "const:0", "--players", "10000", "--trials", "1000", "--delta", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["fraction"].as_f64().unwrap() <= 0.071);
    assert_eq!(v["low_power"], false);
    let out = nsgame(&["verify-azuma", "--strategy", "majority", "--players", "100", "--trials", "1"]);
    let v = stdout_json(&out);
    assert_eq!(v["low_power"], true);
    let f = v["fraction"].as_f64().unwrap();
    assert!(f == 0.0 || f == 1.0);
    assert_eq!(nsgame(&["verify-azuma", "--strategy", "g", "--players", "10", "--delta", "1.5"]).status.code(), Some(2));
}

#[test]
fn oracle_reports_exact_halves() {
    let out = nsgame(&["oracle", "--strategy", "majority", "--players", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["expected_wins"], "3/2");
    let out = nsgame(&["oracle", "--strategy", "const:0", "--players", "1"]);
    assert_eq!(stdout_json(&out)["expected_wins"], "1/2");
    assert_eq!(nsgame(&["oracle", "--strategy", "d", "--players", "3"]).status.code(), Some(2));
    assert_eq!(nsgame(&["oracle", "--strategy", "g", "--players", "21"]).status.code(), Some(2));
}

fn harness_stats(strategy: &str, input: &str, players: &str, seed: &str) -> RunStats {
    let out = nsgame(&[
        "harness", "--strategy", strategy, "--input", input, "--players", players, "--seed", seed,
        "--block-size", "128", "--retain",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn harness_command_matches_in_process_runs() {
    let stats = harness_stats("const:0", "evzero:0", "8", "0");
    assert_eq!(stats.wins, 8);
    for spec in ["d", "majority"] {
        let mut game = GameConfig::new(spec.parse().unwrap(), "evzero:50".parse().unwrap(), 400);
        game.retain = true;
        assert_eq!(harness_stats(spec, "evzero:50", "400", "13"), run_game(&game, 13).unwrap());
    }
}

#[test]
fn referee_and_worker_processes() {
    let mut referee = Command::new(env!("CARGO_BIN_EXE_nsgame"))
        .args(["referee", "--players", "100", "--block-size", "60", "--seed", "5", "--timeout", "20"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    let mut stderr = BufReader::new(referee.stderr.take().unwrap());
    stderr.read_line(&mut banner).unwrap();
    let addr = banner.split_whitespace().nth(2).unwrap().to_string();
    let workers: Vec<_> = (0..2)
        .map(|id| {
            Command::new(env!("CARGO_BIN_EXE_nsgame"))
                .args(["worker", "--connect", &addr, "--strategy", "random", "--seed", "5", "--id", &id.to_string()])
                .spawn()
                .unwrap()
        })
        .collect();
    let out = referee.wait_with_output().unwrap();
    drop(stderr);
    assert_eq!(out.status.code(), Some(0));
    for mut w in workers {
        assert!(w.wait().unwrap().success());
    }
    let got: RunStats = serde_json::from_slice(&out.stdout).unwrap();
    let game = GameConfig::new("random".parse().unwrap(), "uniform".parse().unwrap(), 100);
    assert_eq!(got, run_game(&game, 5).unwrap());
}

#[test]
fn worker_exits_nonzero_on_malformed_referee_lines() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    let fake = std::thread::spawn(move || {
        let (mut s, _) = l.accept().unwrap();
        let mut hello = String::new();
        BufReader::new(s.try_clone().unwrap()).read_line(&mut hello).unwrap();
        assert!(hello.contains("\"hello\""));
        s.write_all(b"this is not json\n").unwrap();
    });
    let out = nsgame(&["worker", "--connect", &addr, "--strategy", "g", "--timeout", "5"]);
    fake.join().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol"));
}

#[test]
fn worker_without_referee_fails() {
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let out = nsgame(&["worker", "--connect", &addr, "--strategy", "g", "--timeout", "0.2"]);
    assert_eq!(out.status.code(), Some(1));
}
