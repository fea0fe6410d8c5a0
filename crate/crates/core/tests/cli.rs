//! End-to-end tests of the `minsurf` binary: exit codes, error lines and the
//! files each subcommand writes.

use std::path::Path;
use std::process::{Command, Output};

fn minsurf(args: &[&str]) -> Output {
    minsurf_env(args, &[])
}

fn minsurf_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_minsurf"));
    cmd.args(args).env_remove("MINSURF_OUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run minsurf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Asserts the single-line `error[CODE]: message` format and the exit code.
fn assert_error(o: &Output, code: &str, exit: i32) {
    let err = stderr(o);
    assert_eq!(o.status.code(), Some(exit), "stderr: {err}");
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with(&format!("error[{code}]: ")), "stderr: {err}");
}

/// A small, fast configuration file.
fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    let text = format!(
        r#"
d = 2
learning_rate = 0.003
epochs = 20
w_bdry = 3.0
n_interior = 40
per_edge = 10
log_every = 5
{extra}

[boundary]
builtin = "radial_sine_2d"
"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_boundaries_names_every_builtin_and_preset() {
    let o = minsurf(&["list-boundaries"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for name in ["scherk", "radial_sine_2d", "four_sided_2d", "abs_cos_3d", "trig_sum_3d", "radial_sine_4d"] {
        assert!(out.contains(name), "{name} missing");
    }
    for preset in ["2d-1", "2d-1-20k", "2d-2", "2d-3", "3d-1", "3d-2", "3d-3", "4d-1"] {
        assert!(out.contains(preset), "{preset} missing");
    }
}

#[test]
fn usage_errors_exit_one() {
    let o = minsurf(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));

    let o = minsurf(&["corners", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));

    let o = minsurf(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("residual-check"));
}

#[test]
fn eval_g_prints_the_frame_value() {
    let o = minsurf(&["eval-g", "--boundary", "scherk", "--at", "1,0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.615_626_47).abs() < 1e-8);

    let o = minsurf(&["eval-g", "--expr", "x1 * x2 + x3", "--at=-1,2,0.5"]);
    assert_eq!(stdout(&o).trim(), "-1.5");
}

#[test]
fn eval_g_error_codes() {
    assert_error(&minsurf(&["eval-g", "--boundary", "helicoid", "--at", "0,0"]), "E_CONFIG", 1);
    assert_error(&minsurf(&["eval-g", "--expr", "sin(x1", "--at", "0,0"]), "E_SYNTAX", 1);
    assert_error(&minsurf(&["eval-g", "--expr", "x3", "--at", "0,0"]), "E_CONFIG", 1);
    // log of a negative number: a numeric failure, not bad input.
    assert_error(&minsurf(&["eval-g", "--boundary", "scherk", "--at", "2,0"]), "E_EVAL", 2);
    // Interior point of a piecewise frame.
    assert_error(&minsurf(&["eval-g", "--boundary", "four_sided_2d", "--at", "0.5,0.5"]), "E_DOMAIN", 1);
}

#[test]
fn corners_reports_two_mismatches_and_succeeds() {
    let o = minsurf(&["corners", "--boundary", "four_sided_2d"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.matches("MISMATCH").count(), 2);
    assert!(out.contains("[0.0, 1.0] MISMATCH"));
    assert!(out.contains("[1.0, 0.0] MISMATCH"));
    assert!(out.contains("2 of 4 corners mismatch"));

    let o = minsurf(&["corners", "--boundary", "scherk"]);
    assert!(stdout(&o).contains("0 of 4 corners mismatch"));
}

#[test]
fn residual_check_of_scherk_is_round_off() {
    let o = minsurf(&["residual-check", "--analytic", "scherk", "--n", "1000"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let max: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("max |residual| "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max < 1e-6, "{out}");
    // Piecewise frames have no closed form to check.
    assert_error(&minsurf(&["residual-check", "--analytic", "four_sided_2d"]), "E_CONFIG", 1);
}

#[test]
fn grad_check_on_small_run_passes() {
    let o = minsurf(&["grad-check", "--points", "3", "--skip-params", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn train_writes_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "small.toml", "");
    let run = |out: &str| {
        let o = minsurf(&["train", "--config", &config, "--out", out, "--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(a.to_str().unwrap());
    run(b.to_str().unwrap());
    for file in ["checkpoint.json", "history.json", "config.toml"] {
        let fa = std::fs::read(a.join(file)).unwrap();
        let fb = std::fs::read(b.join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs between identical runs");
    }
    let history: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("history.json")).unwrap()).unwrap();
    let epochs: Vec<u64> = history["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["epoch"].as_u64().unwrap())
        .collect();
    assert_eq!(epochs, vec![0, 5, 10, 15, 19]);
    assert!(history["records"][0]["seconds"].is_null());

    // Slices from the checkpoint: CSV to a file and to stdout agree.
    let ckpt = a.join("checkpoint.json");
    let csv = dir.path().join("s.csv");
    let svg = dir.path().join("s.svg");
    let o = minsurf(&[
        "slice",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--resolution",
        "7",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 49);
    assert!(text.starts_with("x1,x2,u\n"));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let o = minsurf(&["slice", "--checkpoint", ckpt.to_str().unwrap(), "--resolution", "7"]);
    assert_eq!(stdout(&o), text);

    // Fixing an axis of a 2-D model leaves one free axis.
    let o = minsurf(&["slice", "--checkpoint", ckpt.to_str().unwrap(), "--fix", "x1=0.5"]);
    assert_error(&o, "E_CONFIG", 1);
}

#[test]
fn resume_matches_a_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "small.toml", "resample = true");
    let straight = dir.path().join("straight");
    let split = dir.path().join("split");
    let o = minsurf(&["train", "--config", &config, "--out", straight.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = minsurf(&["train", "--config", &config, "--epochs", "8", "--out", split.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = split.join("checkpoint.json");
    let o = minsurf(&["train", "--resume", ckpt.to_str().unwrap(), "--epochs", "20", "--out", split.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(straight.join("checkpoint.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(split.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(a["network"], b["network"]);
    assert_eq!(a["adam"], b["adam"]);
    assert_eq!(a["rng_word_pos"], b["rng_word_pos"]);
    // The logging schedule depends on the epoch budget, so only the
    // records both runs share are compared.
    assert_eq!(a["history"]["records"][0], b["history"]["records"][0]);
    assert_eq!(a["history"]["records"][1], b["history"]["records"][1]);
}

#[test]
fn default_output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "envrun.toml", "");
    let outdir = dir.path().join("outputs");
    let o = minsurf_env(&["train", "--config", &config, "--epochs", "2", "-q"], &[("MINSURF_OUT_DIR", &outdir)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(outdir.join("envrun").join("checkpoint.json").exists());
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_error(&minsurf(&["train", "--preset", "9d-9"]), "E_CONFIG", 1);

    let config = write_config(dir.path(), "bad.toml", "learning_rate_typo = 1.0");
    assert_error(&minsurf(&["train", "--config", &config]), "E_CONFIG", 1);

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    assert_error(&minsurf(&["slice", "--checkpoint", junk.to_str().unwrap()]), "E_MALFORMED", 1);

    let future = dir.path().join("future.json");
    std::fs::write(&future, r#"{"version": 99}"#).unwrap();
    assert_error(&minsurf(&["slice", "--checkpoint", future.to_str().unwrap()]), "E_VERSION", 1);

    let missing = dir.path().join("missing.toml");
    assert_error(&minsurf(&["train", "--config", missing.to_str().unwrap()]), "E_IO", 2);
}

#[test]
fn non_finite_loss_exits_two_and_keeps_the_last_good_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    // A step this large overflows the output layer on the first update.
    let config = write_config(dir.path(), "blowup.toml", "");
    let path = Path::new(&config);
    let text = std::fs::read_to_string(path).unwrap().replace("learning_rate = 0.003", "learning_rate = 1e300");
    std::fs::write(path, text).unwrap();
    let out = dir.path().join("blowup");
    let o = minsurf(&["train", "--config", &config, "--out", out.to_str().unwrap(), "-q"]);
    assert_error(&o, "E_NONFINITE", 2);
    let ckpt: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("checkpoint.json")).unwrap()).unwrap();
    let epoch = ckpt["epoch"].as_u64().unwrap();
    assert!(epoch >= 1, "at least the first epoch completed");
    assert!(stderr(&o).contains(&format!("epoch {epoch}")), "{}", stderr(&o));
}

#[test]
fn oracle_compare_runs_on_analytic_scherk() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("grid.csv");
    let o = minsurf(&["oracle-compare", "--analytic", "scherk", "--n", "17", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("converged"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 17 * 17);
    assert_error(&minsurf(&["oracle-compare", "--analytic", "trig_sum_3d"]), "E_CONFIG", 1);
}
