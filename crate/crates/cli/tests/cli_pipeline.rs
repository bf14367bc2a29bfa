//! End-to-end tests through the `translab` binary: exit codes, output
//! files, determinism, and the run-log config echo.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn translab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_translab"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

/// flat-interface config with a small grid and cheap analysis defaults,
/// written into the test's temp dir.
fn small_flat_config(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(repo_config("flat_interface.toml")).unwrap();
    let text = text
        .replace("cells_per_side = 64", "cells_per_side = 32")
        .replace("density_resolution = 256", "density_resolution = 64");
    let path = dir.join("flat.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_produces_field_log_and_gradients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_flat_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(translab().args(["solve", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for file in ["field.fld", "run.log", "gradients.csv"] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }

    // the run log's [config] echo re-parses to the effective config
    let log = std::fs::read_to_string(out_dir.join("run.log")).unwrap();
    let echoed = translab_cli::report::config_from_run_log(&log).unwrap();
    let original = translab_cli::config::Config::load(&cfg).unwrap();
    assert_eq!(echoed, original);

    // the field file reads back on the same grid
    let field = translab_cli::core::field_io::read_field_path(out_dir.join("field.fld")).unwrap();
    assert_eq!(field.grid().cells_per_side(), 32);
}

#[test]
fn analyze_is_deterministic_and_row_counted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = {
        // grid 128: the finest of the five dyadic scales from 0.25 equals
        // h, so every center keeps at least one quadrature cell and the
        // row count is exactly centers × scales
        let text = std::fs::read_to_string(repo_config("flat_interface.toml")).unwrap();
        let text = text
            .replace("cells_per_side = 64", "cells_per_side = 128")
            .replace("density_resolution = 256", "density_resolution = 64");
        let path = dir.path().join("flat128.toml");
        std::fs::write(&path, text).unwrap();
        path
    };
    let out_dir = dir.path().join("out");
    let out = run(translab().args(["solve", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let field = out_dir.join("field.fld");
    let (csv_a, csv_b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out_csv in [&csv_a, &csv_b] {
        let out = run(translab()
            .args(["analyze", "--config"])
            .arg(&cfg)
            .arg("--field")
            .arg(&field)
            .args(["--centers", "grid16", "--scales", "0.25:5", "--out"])
            .arg(out_csv));
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes_a = std::fs::read(&csv_a).unwrap();
    let bytes_b = std::fs::read(&csv_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "two analyze runs must be byte-identical");

    // 16² contained centers × 5 scales data rows + version line + header
    let text = String::from_utf8(bytes_a).unwrap();
    assert_eq!(text.lines().count(), 2 + 16 * 16 * 5);
    assert!(text.starts_with("# translab-report v1\n"));

    // report aggregates the CSV
    let out = run(translab().args(["report", "--inputs"]).arg(&csv_a));
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1280 rows"), "{stdout}");
    assert!(stdout.contains("case1"), "{stdout}");
}

#[test]
fn analyze_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_flat_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(translab().args(["solve", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir));
    assert!(out.status.success());

    let mut bytes = Vec::new();
    for threads in ["1", "4"] {
        let csv = dir.path().join(format!("t{threads}.csv"));
        let out = run(translab()
            .env("TRANSLAB_THREADS", threads)
            .args(["analyze", "--config"])
            .arg(&cfg)
            .arg("--field")
            .arg(out_dir.join("field.fld"))
            .args(["--centers", "grid4", "--scales", "0.25:2", "--out"])
            .arg(&csv));
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        bytes.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "thread count must not change the report");
}

#[test]
fn malformed_config_exits_one_with_line_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[problem]\nn = \"two\"\n").unwrap();
    let out = run(translab().args(["solve", "--config"]).arg(&path));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "expected line-anchored message, got: {stderr}");
}

#[test]
fn modulus_check_flags_non_dini() {
    let out = run(translab()
        .args(["modulus-check", "--config"])
        .arg(repo_config("modulus_nondini.toml")));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("non-Dini"), "{stderr}");
}

#[test]
fn modulus_check_passes_power_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_flat_config(dir.path());
    let out = run(translab().args(["modulus-check", "--config"]).arg(&cfg));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("convergent"), "{stdout}");
}

#[test]
fn oracle_check_smoke() {
    let out = run(translab().args(["oracle-check", "--points", "5000"]));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pass"));
}

#[test]
fn sweep_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_flat_config(dir.path());
    let out_csv = dir.path().join("sweep.csv");
    let out = run(translab()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--resolutions", "16,32"])
        .arg("--out")
        .arg(&out_csv));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    // aligned flat interface: errors at solver tolerance, rate "exact"
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("exact"), "{stdout}");
    assert!(out_csv.exists());
}

#[test]
fn parabolic_writes_time_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo_config("eigenmode_parabolic.toml"))
        .unwrap()
        .replace("dt = 1e-3", "dt = 1e-2")
        .replace("snapshot_every = 100", "snapshot_every = 10");
    let cfg = dir.path().join("parab.toml");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let out =
        run(translab().args(["parabolic", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let field = translab_cli::core::field_io::read_field_path(out_dir.join("field.fld")).unwrap();
    match field {
        translab_cli::core::field_io::FieldFile::Time(tf) => {
            assert_eq!(tf.frame_count(), 11); // initial + 100 steps / 10
            assert_eq!(tf.t0(), -1.0);
        }
        _ => panic!("expected a time field"),
    }
}

#[test]
fn analyze_on_parabolic_field_emits_extended_schema() {
    let dir = tempfile::tempdir().unwrap();
    // static flat-interface problem stepped in time, then analyzed at a
    // space-time center
    let text = std::fs::read_to_string(repo_config("flat_interface.toml"))
        .unwrap()
        .replace("cells_per_side = 64", "cells_per_side = 32")
        .replace("density_resolution = 256", "density_resolution = 64")
        .replace("dt = 0.0", "dt = 0.01")
        .replace("scales = \"0.25:4\"", "scales = \"0.25:2\"");
    let cfg = dir.path().join("flatp.toml");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let out =
        run(translab().args(["parabolic", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = dir.path().join("parab_report.csv");
    let out = run(translab()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--field")
        .arg(out_dir.join("field.fld"))
        .args(["--centers", "0.0,0.0;0.2,0.0", "--out"])
        .arg(&csv));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.contains("sup_t_residual") && header.contains("log_bound_ratio"), "{header}");
    assert_eq!(text.lines().count(), 2 + 2 * 2);
}
