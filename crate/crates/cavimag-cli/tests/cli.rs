//! Exit-code and error-message contract of the binary.
//! The happy paths are exercised by the acceptance suite; this file pins the
//! failure modes users actually hit (bad paths, bad flags, bad files).

use std::path::Path;
use std::process::{Command, Output};

use cavimag::fields::FieldMap;
use cavimag::mesh::Mesh;
use cavimag::ovf::{self, OvfDocument, Representation};
use cavimag::Vec3;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cavimag"));
    c.env_remove("CAVIMAG_THREADS");
    c
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const MINIMAL_CFG: &str = "\
[mesh]
nx = 1
ny = 1
nz = 1
dx = 5e-9
dy = 5e-9
dz = 5e-9
m0 = 1, 0, 0

[material]
msat = 8e5
alpha = 0.1

[fields]
b_ext = 0, 0, 0.1

[run]
dt = 1e-12
steps = 50
";

#[test]
fn run_with_missing_config_names_the_path_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config", "/no/such/file.cfg", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("/no/such/file.cfg"), "stderr was: {msg}");
    // a failed run must not leave stray output files behind
    assert!(!out_dir.exists(), "output dir was created for a bad config");
}

#[test]
fn run_reports_config_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, MINIMAL_CFG.replace("dt = 1e-12", "dt = fast")).unwrap();
    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("line") && msg.contains("dt"), "stderr was: {msg}");
}

#[test]
fn sweep_requires_a_sweep_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plain.cfg");
    std::fs::write(&cfg, MINIMAL_CFG).unwrap();
    let out = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("[sweep]"), "stderr was: {msg}");
}

#[test]
fn thread_flag_and_env_reject_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, MINIMAL_CFG).unwrap();

    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--threads", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("threads"), "stderr was: {}", stderr(&out));

    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("CAVIMAG_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("CAVIMAG_THREADS"), "stderr was: {}", stderr(&out));
}

#[test]
fn run_writes_outputs_and_quiet_silences_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, MINIMAL_CFG).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(out.stdout.is_empty(), "quiet run printed: {}", String::from_utf8_lossy(&out.stdout));
    assert!(out_dir.join("table.csv").is_file());
    assert!(out_dir.join("run.log").is_file());
    let log = std::fs::read_to_string(out_dir.join("run.log")).unwrap();
    assert!(log.contains("cavity disabled"), "run.log was: {log}");
}

#[test]
fn dicke_bench_distinguishes_pass_from_tolerance_failure() {
    let dir = tempfile::tempdir().unwrap();
    // defaults are tuned to pass with margin
    let ok = bin()
        .args(["dicke-bench", "--out", dir.path().join("good").to_str().unwrap(), "--quiet"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr(&ok));

    // a deliberately coarse step makes the engine-vs-oracle check fail: that
    // is a tolerance violation (2), not an operational error (1)
    let bad = bin()
        .args([
            "dicke-bench",
            "--steps-per-period",
            "64",
            "--out",
            dir.path().join("coarse").to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2), "stderr: {}", stderr(&bad));
}

fn write_sample_ovf(path: &Path) -> Vec<u8> {
    let mesh = Mesh::new(3, 2, 1, 4e-9, 4e-9, 4e-9).unwrap();
    let mut field = FieldMap::zeros(mesh.cell_count());
    for i in 0..field.len() {
        field[i] = Vec3::new(i as f64, 0.5, -1.0);
    }
    let doc = OvfDocument::from_field(&mesh, &field, "sample", "m", "1");
    let bytes = ovf::write_ovf(&doc, Representation::Binary4);
    std::fs::write(path, &bytes).unwrap();
    bytes
}

#[test]
fn closed_stdout_pipe_does_not_panic() {
    // enough output to overrun the 64 KiB pipe buffer after `head` exits, so
    // the binary is guaranteed to hit EPIPE mid-print
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.ovf");
    write_sample_ovf(&good);
    let files = vec![good.to_str().unwrap(); 1500].join(" ");
    let out = Command::new("sh")
        .arg("-c")
        .arg(format!("{} validate-ovf {files} | head -c 16", env!("CARGO_BIN_EXE_cavimag")))
        .env_remove("CAVIMAG_THREADS")
        .output()
        .unwrap();
    let msg = stderr(&out);
    assert!(!msg.contains("panic"), "stderr was: {msg}");
}

#[test]
fn validate_ovf_accepts_good_and_rejects_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.ovf");
    let bytes = write_sample_ovf(&good);

    let out = bin().args(["validate-ovf", good.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("OK") && text.contains("3 x 2 x 1"), "stdout was: {text}");

    // flip one payload byte: the check value no longer matches
    let marker = b"# Begin: Data Binary 4\n";
    let at = bytes.windows(marker.len()).position(|w| w == marker).unwrap() + marker.len();
    let mut corrupt = bytes.clone();
    corrupt[at] ^= 0xFF;
    let bad = dir.path().join("bad.ovf");
    std::fs::write(&bad, &corrupt).unwrap();

    let out = bin()
        .args(["validate-ovf", good.to_str().unwrap(), bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("check value"), "stderr was: {}", stderr(&out));
}
