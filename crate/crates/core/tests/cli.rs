use std::path::Path;
use std::process::Command;

use allmach::snapshot::Snapshot;

fn allmach(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_allmach")).current_dir(dir).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn snapshots(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn run_writes_snapshots_that_reparse_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, stdout, _) = allmach(
        tmp.path(),
        &["run", "--case", "gresho", "--eps", "1e-3", "--nx", "16", "--t-final", "0.1", "--snap-times", "0.05", "--out-dir", "snaps"],
    );
    assert_eq!(code, 0);
    assert!(stdout.contains("t=0.1"), "{stdout}");
    let files = snapshots(&tmp.path().join("snaps"));
    assert_eq!(files.len(), 3);
    let times: Vec<f64> = files.iter().map(|f| Snapshot::read(f).unwrap().header.time).collect();
    assert_eq!(times, [0.0, 0.05, 0.1]);
    let text = std::fs::read_to_string(&files[1]).unwrap();
    let snap = Snapshot::parse(&text).unwrap();
    assert_eq!(snap.rows.len(), 256);
    assert_eq!(snap.to_text(), text);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("run.cfg"),
        "# explosion at moderate Mach\ncase = explosion\neps=0.5\nnx=40\nt_final=0.01\ndt-override=3:2e-3\nout-dir=a\n",
    )
    .unwrap();
    let (code, stdout, stderr) = allmach(tmp.path(), &["run", "--config", "run.cfg", "--nx", "12", "--out-dir", "b"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("12x12"), "{stdout}");
    assert!(!tmp.path().join("a").exists());
    let last = snapshots(&tmp.path().join("b")).pop().unwrap();
    let snap = Snapshot::read(&last).unwrap();
    assert_eq!(snap.header.eps, 0.5);
    let o = snap.header.dt_override.unwrap();
    assert_eq!((o.steps, o.dt), (3, 2e-3));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(allmach(p, &["run", "--case", "nope"]).0, 4);
    assert_eq!(allmach(p, &["run", "--case", "vortex", "--unknown-flag"]).0, 4);
    assert_eq!(allmach(p, &["run", "--case", "vortex", "--eps", "2"]).0, 4);
    assert_eq!(allmach(p, &["run", "--case", "vortex", "--order", "3"]).0, 4);
    assert_eq!(allmach(p, &["run", "--case", "vortex", "--dt-override", "5"]).0, 4);
    assert_eq!(allmach(p, &["run", "--config", "missing.cfg"]).0, 4);
    assert_eq!(allmach(p, &["--help"]).0, 0);
    // A forced step far above the stability limit drives the explosion non-physical.
    let (code, _, stderr) = allmach(
        p,
        &["run", "--case", "explosion", "--nx", "16", "--t-final", "0.5", "--dt-override", "100:0.04", "--out-dir", "x"],
    );
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("non-physical"), "{stderr}");
    // The default tolerance is out of reach with this few iterations at a tiny Mach number.
    let (code, _, stderr) =
        allmach(p, &["run", "--case", "gresho", "--eps", "1e-6", "--nx", "16", "--t-final", "0.05", "--elliptic-tol", "1e-30", "--out-dir", "y"]);
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn convergence_writes_text_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) =
        allmach(tmp.path(), &["convergence", "--case", "vortex", "--eps-list", "1", "--n-list", "16,32", "--t-final", "0.02", "--out-dir", "c"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 3);
    let csv = std::fs::read_to_string(tmp.path().join("c/vortex_convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("c/vortex_convergence.txt").exists());
    assert_eq!(allmach(tmp.path(), &["convergence", "--case", "explosion"]).0, 4);
}

#[test]
fn diagnose_prints_one_row_per_mach_number() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, stdout, _) = allmach(tmp.path(), &["diagnose", "--n", "16", "--eps-list", "1e-2,1e-4"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 4);
}
