use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn levin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levin"))
        .args(args)
        .output()
        .expect("levin binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn construct(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["construct", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    levin(&args)
}

#[test]
fn threads_do_not_change_output() {
    let tmp = TempDir::new().unwrap();
    for mode in ["lemma2", "scaled:98/1000"] {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let dir = tmp.path().join(format!("{}-{threads}", mode.replace([':', '/'], "_")));
            let out = construct(
                &dir,
                &["--preset", "original", "--start", "sqrt2@256", "--rmax", "5", "--bound-mode", mode, "--threads", threads],
            );
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            outputs.push((
                fs::read(dir.join("steps.csv")).unwrap(),
                fs::read(dir.join("checkpoint.json")).unwrap(),
            ));
        }
        assert_eq!(outputs[0], outputs[1], "mode {mode}");
    }
}

#[test]
fn resume_matches_a_single_run() {
    let tmp = TempDir::new().unwrap();
    let whole = tmp.path().join("whole");
    let part = tmp.path().join("part");
    assert_eq!(code(&construct(&whole, &["--preset", "quadratic", "--rmax", "12"])), 0);
    assert_eq!(code(&construct(&part, &["--preset", "quadratic", "--rmax", "8"])), 0);
    let resumed = tmp.path().join("resumed");
    let ckpt = part.join("checkpoint.json");
    let out = construct(&resumed, &["--resume", ckpt.to_str().unwrap(), "--rmax", "12"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(whole.join("checkpoint.json")).unwrap(),
        fs::read(resumed.join("checkpoint.json")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    // a cap that no candidate can meet
    let out = construct(
        &tmp.path().join("cap"),
        &["--preset", "original", "--start", "sqrt2@256", "--rmax", "5", "--bound-mode", "scaled:1/20", "--cap", "64"],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("r=5"));

    // r_max below the first step
    assert_eq!(code(&construct(&tmp.path().join("short"), &["--preset", "original", "--rmax", "4"])), 2);
    // malformed arguments
    assert_eq!(code(&levin(&["construct", "--preset", "original"])), 2);
    assert_eq!(
        code(&construct(&tmp.path().join("bad"), &["--preset", "original", "--rmax", "5", "--bound-mode", "loose"])),
        2
    );
    // a missing checkpoint is an I/O failure
    assert_eq!(code(&levin(&["digits", "--checkpoint", "/nonexistent/checkpoint.json"])), 1);
}

#[test]
fn linear_schedule_needs_force() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("linear");
    let refused = construct(&dir, &["--preset", "linear", "--rmax", "6"]);
    assert_eq!(code(&refused), 2);
    assert!(stderr(&refused).contains("--force"));
    assert!(!dir.join("checkpoint.json").exists());

    let forced = construct(&dir, &["--preset", "linear", "--rmax", "6", "--force"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
    let ckpt = fs::read_to_string(dir.join("checkpoint.json")).unwrap();
    assert!(ckpt.contains("normality not guaranteed"));
}

#[test]
fn digits_and_analyze() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let out = construct(&run, &["--preset", "quadratic", "--start", "sqrt2@400", "--rmax", "20"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ckpt = run.join("checkpoint.json");
    let ckpt = ckpt.to_str().unwrap();

    let digits = levin(&["digits", "--checkpoint", ckpt, "--base", "2"]);
    assert_eq!(code(&digits), 0);
    let text = stdout(&digits);
    let length: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("# certified_length: "))
        .unwrap()
        .parse()
        .unwrap();
    // n_21 = 441
    assert!(length + 8 >= 441, "{length}");
    let body = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(body.len(), length + 2); // "0." prefix
    // frac(√2) = 0.0110101000001001111…
    assert!(body.starts_with("0.0110101000001001111"));

    let report = tmp.path().join("report");
    let out = levin(&[
        "analyze", "--checkpoint", ckpt, "--bases", "2,3", "--ladder", "16,64,128", "--baseline", "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "source,base,P,D_measured,D_corollary_bound,ratio");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let d: f64 = row[3].parse().unwrap();
        assert!(d > 0.0 && d <= 1.0);
    }
    assert_eq!(rows.iter().filter(|r| r[0] == "levin").count(), 6);
    assert!(report.join("report.json").exists());

    // a ladder beyond the certified precision asks for a longer run
    let out = levin(&["analyze", "--checkpoint", ckpt, "--ladder", "4096", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("r_max ="));
}

#[test]
fn verify_accepts_fresh_and_rejects_tampered() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    assert_eq!(code(&construct(&run, &["--preset", "original", "--rmax", "6"])), 0);
    let ckpt = run.join("checkpoint.json");

    let ok = levin(&["verify", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(code(&ok), 0, "{}{}", stdout(&ok), stderr(&ok));
    assert!(stdout(&ok).lines().any(|l| l.starts_with("PASS")));
    assert!(!stdout(&ok).lines().any(|l| l.starts_with("FAIL")));

    let text = fs::read_to_string(&ckpt).unwrap();
    let tampered = text.replacen("\"a_r\": \"0\"", "\"a_r\": \"3\"", 1);
    assert_ne!(text, tampered);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, tampered).unwrap();
    let out = levin(&["verify", "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn validate_reports_verdicts() {
    let ok = levin(&["validate", "--preset", "original"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let text = stdout(&ok);
    assert!(text.contains("exponential"));
    assert!(text.to_lowercase().contains("valid"));

    let linear = levin(&["validate", "--preset", "linear"]);
    assert!(stdout(&linear).contains("non-normal-linear"));
    let bounded = levin(&["validate", "--preset", "bounded-q"]);
    assert!(stdout(&bounded).contains("bounded q_r"));
}
