use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hamster-wheel"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.conf");
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const SMALL: &str = "\
# small noisy sweep
n = 6
hops = 0,4,9
trajectories = 6
shots = 200
bootstrap = 20
p2 = 0.02
p1 = 0.002
eps01 = 0.01
eps10 = 0.01
seed = 3
";

#[test]
fn run_writes_identical_files_for_identical_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let status = run(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let text_a = fs::read_to_string(&a).unwrap();
    let text_b = fs::read_to_string(&b).unwrap();
    // The echo records the output path, so compare everything else.
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with("# output")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&text_a), strip(&text_b));
    let data: Vec<&str> = text_a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "m,mode,negativity,neg_err,fidelity,fid_err,trajectories,seconds");
    assert_eq!(data.len(), 4);
}

#[test]
fn same_out_path_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("r.json");
    let mut seen = Vec::new();
    for _ in 0..2 {
        let status = run(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json"]);
        assert!(status.status.success());
        seen.push(fs::read(&out).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
    let text = String::from_utf8(seen.remove(0)).unwrap();
    assert!(text.trim_start().starts_with('{'));
}

#[test]
fn exact_flag_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n = 5\nhops = 0,7\ntrajectories = 1\n");
    let output = run(&["run", "--config", config.to_str().unwrap(), "--exact"]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("# exact = true"));
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with(char::is_numeric)).collect();
    assert_eq!(rows, vec!["0,dynamic,0.5,0,1,0,1,0", "7,dynamic,0.5,0,1,0,1,0"]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = run(&["run", "--config", config.to_str().unwrap()]);
    let b = run(&["run", "--config", config.to_str().unwrap(), "--seed", "4"]);
    let a = String::from_utf8(a.stdout).unwrap();
    let b = String::from_utf8(b.stdout).unwrap();
    assert!(b.contains("# seed = 4"));
    assert_ne!(a, b);
}

#[test]
fn bad_config_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n = 5\nshotz = 10\n");
    let output = run(&["run", "--config", config.to_str().unwrap()]);
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("shotz"), "{stderr}");
}

#[test]
fn missing_config_and_unwritable_output_fail() {
    let output = run(&["run", "--config", "/nonexistent/experiment.conf"]);
    assert!(!output.status.success());
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n = 4\nhops = 0\ntrajectories = 1\nexact = true\n");
    let output = run(&["run", "--config", config.to_str().unwrap(), "--out", "/nonexistent/dir/out.csv"]);
    assert!(!output.status.success());
    assert!(String::from_utf8(output.stderr).unwrap().contains("error"));
}

#[test]
fn calibrate_noise_prints_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n = 6\ntrajectories = 60\nseed = 1\n");
    let output = run(&["calibrate-noise", "--target-negativity", "0.35", "--at-hops", "6", "--config", config.to_str().unwrap()]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let p2: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("p2 = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(p2 > 0.0 && p2 < 0.1);
    assert!(stdout.contains("p1 = "));
}

#[test]
fn unreachable_target_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n = 5\ntrajectories = 4\neps01 = 0.2\neps10 = 0.2\n");
    let output = run(&["calibrate-noise", "--target-negativity", "0.5", "--at-hops", "4", "--config", config.to_str().unwrap()]);
    assert!(!output.status.success());
}
