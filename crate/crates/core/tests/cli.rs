use std::fs;
use std::path::Path;
use std::process::Command;

use ergomix::cli::config::ExperimentBlock;
use ergomix::cli::presets::nse_viscosity;
use ergomix::cli::*;
use ergomix::Error;

const MINIMAL: &str = r#"
seed = 1

[domain]
geometry = "interval"
n = 8

[model]
kind = "heat"
nu = 1.0

[noise]
kind = "single_mode"
mode = 0
sigma = 0.1

[scheme]
dt = 1e-3

[experiment]
kind = "check"
"#;

fn problems(text: &str) -> Vec<String> {
    match load(text) {
        Err(Error::ConfigList(v)) => v,
        other => panic!("expected a problem list, got {other:?}"),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergomix"))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn minimal_heat_check_config_is_valid() {
    let r = load(MINIMAL).unwrap();
    assert_eq!(r.config.seed, 1);
    assert_eq!(r.config.checkpoint_stride, 1);
    assert_eq!(r.x.h_norm(), 1.0);
    assert!(r.constants.gamma.is_some());
}

#[test]
fn lambda_error_names_the_constants_section() {
    let text = format!("{MINIMAL}\n[constants]\nlambda = [0.5, 0.0, 0.0, 0.4]\n");
    let p = problems(&text);
    assert!(p.iter().any(|m| m.starts_with("[constants]") && m.contains("lambda must sum to 1")), "{p:?}");
}

#[test]
fn navier_stokes_on_interval_is_rejected() {
    let text = MINIMAL.replace("kind = \"heat\"", "kind = \"navier_stokes_2d\"");
    let p = problems(&text);
    assert!(p.iter().any(|m| m == "[model] model requires torus_2"), "{p:?}");
}

#[test]
fn every_problem_is_listed() {
    let text = MINIMAL
        .replace("kind = \"heat\"", "kind = \"navier_stokes_2d\"")
        .replace("dt = 1e-3", "dt = -1.0")
        .replace("kind = \"check\"", "kind = \"check\"\neps = [0.1, -2.0]")
        + "\n[constants]\nlambda = [0.5, 0.0, 0.0, 0.4]\n";
    let p = problems(&text);
    assert_eq!(p.len(), 4, "{p:?}");
    assert!(p.iter().any(|m| m.starts_with("[scheme]")));
    assert!(p.iter().any(|m| m.starts_with("[experiment]")));
}

#[test]
fn syntax_errors_report_line_and_column() {
    let text = MINIMAL.replace("n = 8", "n = 8\nwidth = 3");
    match parse_config(&text) {
        Err(Error::Config(m)) => assert!(m.starts_with("line 7, column 1"), "{m}"),
        other => panic!("{other:?}"),
    }
    let missing = MINIMAL.replace("seed = 1", "");
    assert!(matches!(parse_config(&missing), Err(Error::Config(m)) if m.contains("seed")));
}

#[test]
fn presets_resolve_and_round_trip_through_toml() {
    for name in PRESETS {
        let c = preset(name).unwrap();
        let back = parse_config(&c.to_toml()).unwrap();
        assert_eq!(back, c, "{name}");
        assert_eq!(back.hash(), c.hash());
        let r = resolve(c).unwrap();
        assert!(ergomix::checker::check_ergodicity(&r.constants).unwrap().ergodicity_pass, "{name}");
    }
    assert!(matches!(preset("nse_3d"), Err(Error::Config(m)) if m.contains("unknown preset")));
}

#[test]
fn heat_preset_satisfies_its_noise_condition() {
    let r = resolve(preset("heat_thm22").unwrap()).unwrap();
    let b2 = r.noise.hs_norm_h().powi(2);
    assert!((b2 - 0.01).abs() < 1e-15);
    assert!(b2 <= 0.5 * r.domain.c0().powi(2));
    assert_eq!(r.domain.c0(), std::f64::consts::PI);
}

#[test]
fn nse_preset_viscosity_leaves_factor_two() {
    let r = resolve(preset("nse_thm26").unwrap()).unwrap();
    let nu = nse_viscosity();
    assert_eq!(r.model.nu(), nu);
    let b2 = r.noise.hs_norm_h().powi(2);
    let c0 = r.domain.c0();
    let rhs = 0.25 * r.constants.lambda[0] * nu.powi(3) * c0 * c0;
    assert!((rhs / b2 - 2.0).abs() < 1e-12);
}

#[test]
fn hash_ignores_output_dir_but_not_seed() {
    let a = parse_config(MINIMAL).unwrap();
    let mut b = a.clone();
    b.out = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    b.seed = 2;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn check_on_navier_stokes_preset_exits_zero_with_report_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nse");
    let st = bin().args(["preset", "nse_thm26", "--kind", "check", "--out"]).arg(&out).output().unwrap().status;
    assert_eq!(st.code(), Some(0));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert!(lines[0].starts_with("config_hash,inequality"));
    // ratio, borderline, mixing and three NSE noise conditions
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.starts_with(hash) && l.ends_with(",pass")));
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["basis_tag"], ergomix::spectral::BASIS_TAG);
}

#[test]
fn heat_mixing_preset_writes_curve_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("heat");
    let st = bin().args(["preset", "heat_thm22", "--out"]).arg(&out).output().unwrap().status;
    assert_eq!(st.code(), Some(0));
    for f in ["w2.csv", "mixing.csv", "w2.svg", "manifest.json", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let svg = fs::read_to_string(out.join("w2.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    let rows = fs::read_to_string(out.join("mixing.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| l.ends_with(",pass")).count(), 3);
    let cfg = parse_config(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(cfg, preset("heat_thm22").unwrap());
}

#[test]
fn csv_outputs_are_byte_identical_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("burgers.toml");
    let mut c = preset("burgers_thm24").unwrap();
    c.experiment = ExperimentBlock::Moments {
        t: 0.2,
        paths: 64,
        checkpoints: 3,
        exp_moment: true,
        bootstrap: 50,
        occupation_r: Some(1.0),
    };
    fs::write(&cfg, c.to_toml()).unwrap();
    let mut outs = Vec::new();
    for (i, w) in ["1", "4", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let st = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out).args(["--workers", w]).output().unwrap().status;
        assert!(st.code().unwrap() <= 2);
        outs.push(csv_files(&out));
    }
    assert_eq!(outs[0].len(), 3);
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn worker_count_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env");
    let st = bin()
        .args(["preset", "burgers_thm24", "--kind", "check", "--out"])
        .arg(&out)
        .env("ERGOMIX_WORKERS", "3")
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["workers"], 3);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    bin().args(["preset", "heat_thm22", "--kind", "check", "--seed", "7", "--out"]).arg(&out).output().unwrap().status;
    let cfg = parse_config(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(cfg.seed, 7);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let st = bin().args(["preset", "heat_thm22", "--kind", "check", "--out"]).arg(blocker.join("sub")).output().unwrap().status;
    assert_eq!(st.code(), Some(EXIT_IO));
}

#[test]
fn bad_config_and_unknown_preset_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, MINIMAL.replace("kind = \"heat\"", "kind = \"navier_stokes_2d\"")).unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model requires torus_2"));
    let st = bin().args(["preset", "nope"]).output().unwrap().status;
    assert_eq!(st.code(), Some(EXIT_CONFIG));
}

#[test]
fn failing_certificate_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cvx");
    let cfg = tmp.path().join("cvx.toml");
    let text = MINIMAL.replace("kind = \"check\"", "kind = \"convexity\"\nalphas = [3.0]\nbetas = [0.0, 1.0]\nsamples = 2000");
    fs::write(&cfg, text).unwrap();
    let st = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(st.code(), Some(1));
    let rows = fs::read_to_string(out.join("convexity.csv")).unwrap();
    assert!(rows.lines().nth(1).unwrap().ends_with(",pass"));
    assert!(rows.lines().nth(2).unwrap().ends_with(",fail"));
}

#[test]
fn emit_prints_parseable_config() {
    let out = bin().args(["preset", "powerlaw_thm28", "--emit"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let c = parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(c, preset("powerlaw_thm28").unwrap());
}

#[test]
fn check_command_runs_checker_on_any_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.toml");
    fs::write(&cfg, MINIMAL.replace("kind = \"check\"", "kind = \"simulate\"\nt = 0.1")).unwrap();
    let out = tmp.path().join("o");
    let st = bin().arg("check").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(st.code(), Some(0));
    assert!(out.join("report.csv").exists());
    assert!(!out.join("path.csv").exists());
}

#[test]
fn simulate_and_smallball_experiments_run() {
    let tmp = tempfile::tempdir().unwrap();
    for (kind, file) in [
        ("kind = \"simulate\"\nt = 0.1", "path.csv"),
        ("kind = \"smallball\"\nt = 0.5\ndelta = 0.5\neps = 0.1\npaths = 50", "smallball.csv"),
        ("kind = \"couple\"\nt = 0.5", "contraction.csv"),
        ("kind = \"decay\"\nt = 0.5", "decay.csv"),
    ] {
        let cfg = tmp.path().join("c.toml");
        fs::write(&cfg, MINIMAL.replace("kind = \"check\"", kind)).unwrap();
        let out = tmp.path().join(file);
        let st = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
        assert_eq!(st.code(), Some(0), "{kind}");
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert!(text.starts_with("config_hash,"));
    }
}
