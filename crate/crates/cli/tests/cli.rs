use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use catsim_cli::config::{self, RunConfig};

fn catsim(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_catsim"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("CATSIM_THREADS", n),
        None => cmd.env_remove("CATSIM_THREADS"),
    };
    cmd.output().expect("spawn catsim")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn metadata(dir: &Path) -> RunConfig {
    RunConfig::from_toml(&fs::read_to_string(dir.join("run.toml")).unwrap()).unwrap()
}

fn result(meta: &RunConfig, key: &str) -> f64 {
    meta.run.as_ref().unwrap()["results"][key].as_float().unwrap()
}

fn tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

const QUICK_CAT: &[&str] = &["--param", "grid_points=[31, 25]"];

#[test]
fn amplitude_sweep_defaults_peak_at_4_243() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("amp");
    let o = catsim(&["amplitude_sweep", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = metadata(&out);
    assert!((result(&meta, "max_abs_alpha") - 4.243).abs() < 5e-4);
    let text = fs::read_to_string(out.join("fig1d_amplitude_vs_time.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "omega_b_t [rad],t [s],abs_alpha [1],re_alpha [1],im_alpha [1]"
    );
    assert_eq!(lines.count(), 400);
}

#[test]
fn empty_file_and_scenario_flag_give_the_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let out = tmp.path().join("o");
    let o = catsim(
        &["amplitude_sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = metadata(&out);
    assert_eq!(meta.params.omega_b, Some(2e5));
    assert_eq!(meta.params.g, Some(6e5));
    assert_eq!(meta.params.omega_sw, Some(0.0));
    assert_eq!(meta.overrides.t_points, Some(400));
    assert_eq!(meta.overrides.t_max, Some(2.0 * std::f64::consts::PI));
}

#[test]
fn param_flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "scenario = \"amplitude_sweep\"\n[params]\ng = 6e5\n").unwrap();
    let out = tmp.path().join("o");
    let o = catsim(
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--param",
            "g=3e5",
            "--param",
            "overrides.t_points=801",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = metadata(&out);
    assert_eq!(meta.params.g, Some(3e5));
    // √2 g/ω_b, hit exactly at ω_b t = π on the 801-point grid
    assert!((result(&meta, "max_abs_alpha") - 2f64.sqrt() * 1.5).abs() < 1e-12);
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = catsim(
        &["amplitude_sweep", "--param", "gg=1", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown parameter `gg`"), "{}", stderr(&o));

    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[overrides]\nmech_dims = 80\n").unwrap();
    let o = catsim(&["mech_cat", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mech_dims"), "{}", stderr(&o));

    let o = catsim(&["concurrence", "--param", "alpha0=2"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not apply"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn dimension_below_guard_exits_2_naming_the_guard() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = catsim(
        &["mech_cat", "--param", "mech_dim=20", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let msg = stderr(&o);
    assert!(msg.contains("displacement") && msg.contains("Fock levels"), "{msg}");
    assert!(!out.exists(), "nothing is written when validation fails");

    let o = catsim(&["lossy_cat", "--param", "mech_dim=30"], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn parameter_and_grid_guards_exit_2() {
    let o = catsim(&["amplitude_sweep", "--param", "omega_sw_ratio=-2"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("omega_sw"), "{}", stderr(&o));

    let o = catsim(&["amplitude_sweep", "--param", "sweep=[-2.5, 1]"], None);
    assert_eq!(o.status.code(), Some(2));

    let o = catsim(&["mech_cat", "--param", "grid_x=[-20, 20]"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wigner grid extent"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(catsim(&[], None).status.code(), Some(1));
    assert_eq!(catsim(&["no_such_scenario"], None).status.code(), Some(1));
    assert_eq!(catsim(&["amplitude_sweep"], Some("zero")).status.code(), Some(1));
}

#[test]
fn metadata_round_trips_to_an_equivalent_config() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let mut args = vec!["mech_cat", "--param", "omega_sw_ratio=0.5", "--param", "branch=-"];
    args.extend_from_slice(QUICK_CAT);
    args.extend_from_slice(&["--out", first.to_str().unwrap()]);
    let o = catsim(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));

    let meta_path = first.join("run.toml");
    let meta = metadata(&first);
    let reparsed = config::load(Some(&meta_path), None, &[], None).unwrap();
    assert_eq!(reparsed.params, meta.params);
    assert_eq!(reparsed.overrides, meta.overrides);
    assert_eq!(reparsed.overrides.branch.as_deref(), Some("-"));
    assert_eq!(meta.params.omega_sw, Some(1e5));
    let tables_meta = meta.run.as_ref().unwrap()["tables"].as_array().unwrap();
    assert!(tables_meta.iter().all(|t| t["figure"].as_str() == Some("2(c)")));

    let second = tmp.path().join("second");
    let o = catsim(
        &["--config", meta_path.to_str().unwrap(), "--out", second.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(tables(&first), tables(&second));
    let again = metadata(&second);
    assert_eq!(again.params, meta.params);
    assert_eq!(again.overrides, meta.overrides);
}

#[test]
fn tables_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (k, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let out = tmp.path().join(format!("r{k}"));
        let mut args = vec!["mech_cat"];
        args.extend_from_slice(QUICK_CAT);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        let o = catsim(&args, threads);
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(tables(&out));
    }
    assert_eq!(runs[0].len(), 2);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn every_table_names_its_figure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = catsim(
        &["concurrence", "--param", "t_points=40", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = metadata(&out);
    let listed = meta.run.as_ref().unwrap()["tables"].as_array().unwrap().clone();
    let files = tables(&out);
    assert_eq!(listed.len(), files.len());
    for t in &listed {
        assert_eq!(t["figure"].as_str(), Some("1(f)"));
        assert!(files.iter().any(|(f, _)| Some(f.as_str()) == t["file"].as_str()));
    }
    assert!(result(&meta, "max_abs_difference") < 1e-9);
}

#[test]
fn selfcheck_passes_and_reports_tolerance_failures_with_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let o = catsim(&["selfcheck", "--out", ok.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(ok.join("selfcheck.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")), "{text}");

    let bad = tmp.path().join("bad");
    let o = catsim(
        &["selfcheck", "--param", "check_scale=0", "--out", bad.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(bad.join("selfcheck.csv").exists());
}
