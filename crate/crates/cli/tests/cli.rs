//! End-to-end tests of the `ncgames` binary: output formats, exit codes,
//! report files, and determinism.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ncgames"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ncgames")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn solve_chsh_prints_tsirelson() {
    let out = run(&["solve", "builtin:chsh-correlator", "--level", "full:1"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let v: f64 = text.trim().parse().unwrap();
    assert!((v - 2.0 * 2.0f64.sqrt()).abs() < 1e-6, "got {text}");
    assert!(text.trim().len() >= 9, "nine significant digits, got {text:?}");
}

#[test]
fn solve_is_deterministic() {
    let a = run(&["solve", "builtin:i3322", "--level", "1+AB"]);
    let b = run(&["solve", "builtin:i3322", "--level", "1+AB"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v: f64 = stdout(&a).trim().parse().unwrap();
    assert!((v - 0.25147090).abs() < 1e-5);
}

#[test]
fn printed_bound_equals_report_bound() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("run.report");
    let out = run(&[
        "solve",
        "builtin:chsh-correlator",
        "--level",
        "full:1",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let printed = stdout(&out).trim().to_string();
    let text = std::fs::read_to_string(&report).unwrap();
    let bound_line = text
        .lines()
        .find(|l| l.starts_with("bound = "))
        .expect("bound line in report");
    assert_eq!(bound_line, format!("bound = {printed}"));
    for key in ["tool_version", "game", "input_sha256", "status", "iterations", "gap", "time_s"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "missing {key}");
    }
}

#[test]
fn solve_writes_certificate_and_sdpa() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("chsh.cert");
    let sdpa = dir.path().join("chsh.dat-s");
    let out = run(&[
        "solve",
        "builtin:chsh-correlator",
        "--level",
        "full:1",
        "--form",
        "sos",
        "--cert",
        cert.to_str().unwrap(),
        "--export-sdpa",
        sdpa.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // The written certificate verifies through the verify-cert command.
    let v = run(&["verify-cert", cert.to_str().unwrap(), "builtin:chsh-correlator"]);
    assert_eq!(code(&v), 0, "stderr: {}", String::from_utf8_lossy(&v.stderr));
    let residual: f64 = stdout(&v).trim().parse().unwrap();
    assert!(residual <= 1e-6);

    // The SDPA file re-parses in-process.
    let text = std::fs::read_to_string(&sdpa).unwrap();
    ncgames::sdp::parse_sdpa(&text).unwrap();
}

#[test]
fn export_only_writes_file_without_solving() {
    let dir = tempfile::tempdir().unwrap();
    let sdpa = dir.path().join("out.dat-s");
    let out = run(&[
        "solve",
        "builtin:i3322",
        "--level",
        "full:1",
        "--solver",
        "export",
        "--export-sdpa",
        sdpa.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty());
    assert!(sdpa.exists());

    // export without a target path is a usage error.
    let bad = run(&["solve", "builtin:i3322", "--level", "full:1", "--solver", "export"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn classical_chsh_game_is_three_quarters() {
    let out = run(&["classical", "builtin:chsh-game"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "0.750000000");
}

#[test]
fn seesaw_reaches_tsirelson() {
    let out = run(&[
        "seesaw",
        "builtin:chsh-correlator",
        "--dim",
        "2",
        "--restarts",
        "10",
        "--seed",
        "0",
    ]);
    assert_eq!(code(&out), 0);
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!(v >= 2.0 * 2.0f64.sqrt() - 1e-6, "got {v}");
}

#[test]
fn verify_cert_rejects_bad_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cert");
    let mut cert = ncgames::certificates::chsh_reference_certificate();
    cert.bound += 0.5;
    ncgames::certificates::write_certificate(&path, &cert).unwrap();
    let out = run(&["verify-cert", path.to_str().unwrap(), "builtin:chsh-correlator"]);
    assert_eq!(code(&out), 2);

    cert.bound -= 0.5;
    ncgames::certificates::write_certificate(&path, &cert).unwrap();
    let ok = run(&["verify-cert", path.to_str().unwrap(), "builtin:chsh-correlator"]);
    assert_eq!(code(&ok), 0);
}

#[test]
fn sequence_chsh_two_equal_levels() {
    let out = run(&["sequence", "builtin:chsh-correlator", "--max-level", "2"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields[0], (i + 1).to_string());
        let bound: f64 = fields[1].parse().unwrap();
        assert!((bound - 2.0 * 2.0f64.sqrt()).abs() < 1e-6, "line {line:?}");
        assert_eq!(fields[2], "optimal");
    }
}

#[test]
fn game_file_and_custom_basis_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let game_path = dir.path().join("yao.game");
    let basis_path = dir.path().join("yao25.basis");
    let game = ncgames::games::builtin("yao").unwrap();
    std::fs::write(&game_path, ncgames::games::serialize_game(&game)).unwrap();
    std::fs::write(&basis_path, ncgames::certificates::YAO25_BASIS).unwrap();
    let out = run(&[
        "solve",
        game_path.to_str().unwrap(),
        "--level",
        &format!("custom:{}", basis_path.display()),
        "--form",
        "sos",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 3.0 * 3.0f64.sqrt()).abs() < 1e-5, "got {v}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["solve", "builtin:chsh-correlator"])), 1); // missing --level
    assert_eq!(code(&run(&["solve", "builtin:nope", "--level", "full:1"])), 1);
    assert_eq!(code(&run(&["solve", "/no/such/file", "--level", "full:1"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["solve", "builtin:i3322", "--level", "full:0"])), 1);
}
