//! Command-line behaviour: artifacts, overrides, manifests and failures.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vlcpos::cli::{read_manifest, SWEEP_CSV_HEADER};

const GOLDEN: &str = include_str!("golden/sweep_snr_tiny.csv");

fn vlcpos(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlcpos"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("VLCPOS_OUT")
        .output()
        .expect("spawn vlcpos")
}

fn tiny_sweep(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["sweep", "--sweep", "snr", "--values", "10,30", "--n-ud", "6", "--seed", "3", "--m", "60", "--d-th", "8"];
    args.extend_from_slice(extra);
    vlcpos(&args, out)
}

#[test]
fn tiny_fixed_seed_sweep_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_sweep(dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep_snr.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SWEEP_CSV_HEADER);
    assert_eq!(csv, GOLDEN);
    for f in ["trials_snr.csv", "sweep_snr.dat", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn manifest_replay_is_bit_identical_at_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(tiny_sweep(&first, &["--threads", "1"]).status.success());
    let manifest = first.join("manifest.json");
    let m = read_manifest(&manifest).unwrap();
    assert_eq!(m.master_seed, 3);
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.points.len(), 2);

    let replay = dir.path().join("replay");
    let out = Command::new(env!("CARGO_BIN_EXE_vlcpos"))
        .args(["replay", "--threads", "4", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&replay)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["sweep_snr.csv", "trials_snr.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(replay.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[experiment]\nn_ud = 50\nmaster_seed = 11\n\n[signal]\nm = 80\n").unwrap();
    let out = vlcpos(
        &["sweep", "--config", cfg.to_str().unwrap(), "--n-ud", "4", "--sweep", "r", "--values", "3,4"],
        &dir.path().join("o"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_manifest(&dir.path().join("o/manifest.json")).unwrap();
    assert_eq!(m.config.experiment.n_ud, 4);
    assert_eq!(m.config.experiment.master_seed, 11);
    assert_eq!(m.config.signal.m, 80);
    let csv = fs::read_to_string(dir.path().join("o/sweep_r.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",4")));
}

#[test]
fn env_var_supplies_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_vlcpos"))
        .args(["sweep", "--values", "20", "--n-ud", "2", "--m", "40"])
        .env("VLCPOS_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sweep_snr.csv").is_file());
}

#[test]
fn unwritable_output_directory_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = tiny_sweep(&blocker.join("sub"), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error") && err.contains("sub"), "{err}");
}

#[test]
fn bad_config_value_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "signal.snr_db = abc\n").unwrap();
    let out = vlcpos(&["sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("signal.snr_db"));
}

#[test]
fn inspection_subcommands_write_maps() {
    let dir = tempfile::tempdir().unwrap();
    let out = vlcpos(&["kmap", "--resolution", "0.5"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("inside margin 4 m: [10, 14]"));
    let k = fs::read_to_string(dir.path().join("kmap.csv")).unwrap();
    assert_eq!(k.lines().count(), 1 + 101 * 101);

    let out = vlcpos(&["oracle", "--resolution", "1"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("oracle_map.csv").is_file());

    let out = vlcpos(&["trial", "--index", "2", "--export-signals", "--m", "50"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = fs::read_to_string(dir.path().join("signatures.csv")).unwrap();
    assert_eq!(s.lines().count(), 51);
    assert!(String::from_utf8_lossy(&out.stdout).contains("receiver:"));
}
