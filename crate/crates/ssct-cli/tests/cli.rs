//! End-to-end checks of the command-line surface: exit codes, config
//! handling, snapshot round trips through subcommands, and reproducibility
//! through the real binary.

use std::path::PathBuf;
use std::process::Command;

fn ssct() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssct"))
}

fn temp_dir(leaf: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ssct_cli_tests").join(leaf);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small scenario config shared by several tests: zero potential, modest
/// grid, short horizon.
const SMALL_CLASSIFY: &str = r#"
[grid]
k = 1
par = 256x160
perp = 256x200

[potential]
kind = zero

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.7
perp_center = 0
perp_p = 1.7
perp_width = 0.6
alpha = 1

[frame]
delta = 0.5

[run]
dt = auto
t_list = 2, 3.5, 5, 7
v_list = 0.5, 1
epsilon = 0.05

[plan]
steps = classify

[checks]
verdict = scattering-like
"#;

#[test]
fn missing_subcommand_is_usage_error() {
    let out = ssct().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ssct-error"), "stderr: {err}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = ssct().arg("blorp").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dump_config_prints_a_parseable_preset() {
    let out = ssct().args(["--dump-config", "enss"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[grid]"));
    ssct_core::config::RawConfig::parse(&text).unwrap();
}

#[test]
fn scenario_list_names_presets() {
    let out = ssct().args(["scenario", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["separable", "free", "cook", "enss", "tube", "random"] {
        assert!(text.contains(name), "missing preset {name}");
    }
}

#[test]
fn unknown_scenario_is_config_error() {
    let out = ssct()
        .args(["scenario", "run", "nonexistent"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = temp_dir("badcfg");
    let path = dir.join("bad.cfg");
    std::fs::write(&path, "key_without_section = 1\n").unwrap();
    let out = ssct()
        .args(["--config", path.to_str().unwrap(), "classify"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_runs_small_config_and_reports() {
    let dir = temp_dir("classify");
    let cfg = dir.join("small.cfg");
    std::fs::write(&cfg, SMALL_CLASSIFY).unwrap();
    let out = ssct()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("report").to_str().unwrap(),
            "classify",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {text}");
    assert!(text.contains("scattering-like"), "stdout: {text}");
    assert!(dir.join("report/surface_curves.csv").exists());
    assert!(dir.join("report/manifest.txt").exists());
}

#[test]
fn scenario_file_runs_and_is_bit_reproducible_single_threaded() {
    let dir = temp_dir("repro");
    let cfg = dir.join("scenario.cfg");
    std::fs::write(&cfg, SMALL_CLASSIFY).unwrap();
    let run = |leaf: &str| {
        let out_dir = dir.join(leaf);
        let out = ssct()
            .args([
                "--threads",
                "1",
                "--out",
                out_dir.to_str().unwrap(),
                "scenario",
                "run",
                cfg.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out_dir
    };
    let a = run("a");
    let b = run("b");
    for name in ["surface_curves.csv", "tube.csv", "manifest.txt"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between runs");
    }
    // reductions run in fixed order, so a different pool size reproduces
    // the same bytes as well
    let out_c = dir.join("c");
    let out = ssct()
        .args([
            "--threads",
            "2",
            "--out",
            out_c.to_str().unwrap(),
            "scenario",
            "run",
            cfg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    for name in ["surface_curves.csv", "tube.csv", "manifest.txt"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fc = std::fs::read(out_c.join(name)).unwrap();
        assert_eq!(fa, fc, "{name} differs across thread counts");
    }
}

#[test]
fn propagate_then_povm_round_trip() {
    let dir = temp_dir("pipeline");
    let cfg = dir.join("prop.cfg");
    std::fs::write(
        &cfg,
        r#"
[grid]
k = 1
par = 256x160
perp = 512x320

[potential]
kind = strip_well
depth = 1
r0 = 1

[state]
kind = packet
par_center = 0
par_p = 0
par_width = 0.7
perp_center = -6
perp_p = 1.7
perp_width = 0.6
alpha = 1

[run]
dt = auto
horizon = 2
snapshot_every = 64
"#,
    )
    .unwrap();
    let prop_dir = dir.join("prop");
    let out = ssct()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            prop_dir.to_str().unwrap(),
            "propagate",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(prop_dir.join("propagation.csv").exists());
    let snap = prop_dir.join("snapshots/000000.ssct");
    assert!(snap.exists());

    let povm_dir = dir.join("povm");
    let out = ssct()
        .args([
            "--out",
            povm_dir.to_str().unwrap(),
            "povm",
            "--input",
            snap.to_str().unwrap(),
            "--region",
            "strip:r=3",
            "--delta",
            "0.5",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(povm_dir.join("povm_result.ssct").exists());
    // the POVM output never exceeds the input norm
    let result = ssct_core::io::read_wavefunction(&povm_dir.join("povm_result.ssct")).unwrap();
    let input = ssct_core::io::read_wavefunction(&snap).unwrap();
    assert!(result.norm() <= input.norm() * (1.0 + 1e-9));

    // rejected region grammar is a usage error
    let out = ssct()
        .args([
            "povm",
            "--input",
            snap.to_str().unwrap(),
            "--region",
            "blorp:z=1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_potential_verdicts() {
    let dir = temp_dir("checkpot");
    let cfg = dir.join("yafaev.cfg");
    std::fs::write(
        &cfg,
        "[grid]\nk = 1\npar = 1024x1200\nperp = 512x40\n\n[potential]\nkind = yafaev\nalpha = 0.25\n\n[check]\nr_list = 1.2, 1.4, 1.7, 2, 2.4, 2.9, 3.4, 4\n",
    )
    .unwrap();
    let out = ssct()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("o1").to_str().unwrap(),
            "check-potential",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {text}");
    assert!(text.contains("integrable"), "stdout: {text}");

    // slow transverse decay fails the verdict and exits 1
    let bad = dir.join("slow.cfg");
    std::fs::write(
        &bad,
        "[grid]\nk = 1\npar = 64x40\nperp = 1024x400\n\n[potential]\nkind = slow_inverse\n",
    )
    .unwrap();
    // unknown kind is a config error first; craft the slow tail via config of
    // an existing kind is not possible, so only the happy path is covered here.
    let out = ssct()
        .args(["--config", bad.to_str().unwrap(), "check-potential"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_small_grid_passes() {
    let dir = temp_dir("selftest");
    let cfg = dir.join("small.cfg");
    std::fs::write(
        &cfg,
        "[selftest]\ngrid = 128x50, 128x50\ndelta_list = 1, 0.5\n",
    )
    .unwrap();
    let out = ssct()
        .args(["--config", cfg.to_str().unwrap(), "selftest"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {text}");
    assert!(text.contains("resolution_of_identity"), "stdout: {text}");
    assert!(!text.contains("FAIL"), "stdout: {text}");
}
