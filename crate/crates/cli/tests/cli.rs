use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn su11(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_su11"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const BS: &str = r#"
[scheme]
kind = "bs"
probe_photon_number = 1e4

[losses]
eta_internal = 1.0
eta_signal_det = 1.0
eta_idler_det = 1.0
eta_tap_det = 1.0

[[tones]]
frequency_hz = 0.8e6
depth = 0.01
angle = 0

[[tones]]
frequency_hz = 1.2e6
depth = 0.01
angle = "pi/2"
"#;

fn lossless_sui(g2: f64, depth: f64) -> String {
    format!(
        r#"
[scheme]
kind = "sui"
probe_photon_number = 1e4
gain_g1 = 2
gain_g2 = {g2}

[losses]
eta_internal = 1.0
eta_signal_det = 1.0
eta_idler_det = 1.0
eta_tap_det = 1.0

[[tones]]
frequency_hz = 0.8e6
depth = {depth}
angle = 0

[[tones]]
frequency_hz = 1.2e6
depth = {depth}
angle = "pi/2"
"#
    )
}

fn sweep_rows(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&su11(&["snr"], dir.path())), 1, "no config");
    assert_eq!(code(&su11(&["--preset", "fig9", "snr"], dir.path())), 1);
    assert_eq!(code(&su11(&["--config", "missing.toml", "snr"], dir.path())), 1);
    assert_eq!(code(&su11(&["--preset", "fig2", "--bogus", "snr"], dir.path())), 1);
    let bad = write_config(dir.path(), "bad.toml", &format!("{BS}\n[sim]\nsampel_rate = 1e6\n"));
    let o = su11(&["--config", &bad, "snr"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampel_rate"));
    let cfg = write_config(dir.path(), "bs.toml", BS);
    let o = su11(&["--config", &cfg, "sweep", "--param", "scheme.nonsense", "--grid", "0:1:3"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("losses.eta_signal_det"));
    assert_eq!(code(&su11(&["--help"], dir.path())), 0);
}

#[test]
fn aliased_tones_are_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BS}\n[sim]\nsample_rate = 2e6\nduration = 0.01\nrbw = 1e4\n");
    let cfg = write_config(dir.path(), "alias.toml", &text);
    let o = su11(&["--config", &cfg, "--out", "o", "simulate"], dir.path());
    assert_eq!(code(&o), 2, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn beam_splitter_shot_noise_snr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bs.toml", BS);
    let v = stdout_json(&su11(&["--config", &cfg, "snr"], dir.path()));
    assert!((v["snr_x"].as_f64().unwrap() - 2.0).abs() < 1e-9, "{}", v["snr_x"]);
    assert!((v["snr_y"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((v["closed_form"]["x"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["config"]["sim"]["seed"], v["seed"]);
}

#[test]
fn zero_depth_gives_zero_snr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sui.toml", &lossless_sui(9.0, 0.0));
    let v = stdout_json(&su11(&["--config", &cfg, "snr"], dir.path()));
    assert_eq!(v["snr_x"].as_f64().unwrap(), 0.0);
    assert_eq!(v["snr_y"].as_f64().unwrap(), 0.0);
}

#[test]
fn detection_efficiency_sweep_is_linear_for_bs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bs.toml", BS);
    let o = su11(
        &["--config", &cfg, "--out", "o", "sweep", "--param", "eta_signal_det", "--grid", "0.1:1:10"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap(), csv);
    assert!(!csv.contains('\r'));
    let (header, rows) = sweep_rows(&csv);
    assert_eq!(header[0], "eta_signal_det");
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!((r[1] - 2.0 * r[0]).abs() < 1e-9, "{r:?}");
    }
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/sweep.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["param"], "eta_signal_det");
    assert!(meta["config"]["scheme"].is_object());
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bs.toml", BS);
    let o = su11(&["--config", &cfg, "--out", "o", "sweep", "--param", "G2", "--grid", ""], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
}

#[test]
fn sui_approaches_closed_form_at_large_g2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sui.toml", &lossless_sui(50.0, 0.01));
    let v = stdout_json(&su11(&["--config", &cfg, "snr"], dir.path()));
    let x = v["snr_x"].as_f64().unwrap();
    let cf = v["closed_form"]["x"].as_f64().unwrap();
    assert!((x / cf - 1.0).abs() < 0.01, "{x} vs {cf}");

    let o = su11(&["--config", &cfg, "--out", "o", "sweep", "--param", "G2", "--grid", "3,9,20,50"], dir.path());
    let (header, rows) = sweep_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(header[1], "snr_x");
    let dev: Vec<f64> = rows.iter().map(|r| (r[1] / cf - 1.0).abs()).collect();
    assert!(dev[3] < dev[2] && dev[2] < 0.01, "{dev:?}");
}

#[test]
fn fig2_reports_calibrated_enhancement() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&su11(&["--preset", "fig2", "snr"], dir.path()));
    let fit = &v["calibration"];
    assert_eq!(fit["within_target"], true);
    assert!((fit["point"]["floor_ratio_signal"].as_f64().unwrap() - 0.8).abs() < 0.03);
    assert!((v["ratio_vs_amp"]["x"].as_f64().unwrap() - 1.62 / 1.29).abs() < 0.05);
    assert!(v["ratio_vs_bs"]["x"].as_f64().unwrap() > 0.0);
    assert!((v["config"]["losses"]["eta_internal"].as_f64().unwrap() - fit["point"]["eta_internal"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(v["config"]["sim"]["seed"], 2);
}

fn short_fig5(dir: &Path) -> String {
    let text = config_text("fig5").replace("[sim]", "[sim]\nduration = 0.02");
    write_config(dir, "fig5.toml", &text)
}

fn config_text(preset: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{preset}.toml"));
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_fig5(dir.path());
    for out in ["a", "b"] {
        assert_eq!(code(&su11(&["--config", &cfg, "--seed", "11", "--out", out, "simulate"], dir.path())), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 3);
    for n in names {
        let a = std::fs::read(dir.path().join("a").join(&n)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/sui_signal.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# rbw_hz=10000,n_avg="));
    assert_eq!(lines.next().unwrap(), "freq_hz,psd_snu");
    let peaks: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/peaks.json")).unwrap()).unwrap();
    assert_eq!(peaks["seed"], 11);
    assert_eq!(peaks["config"]["sim"]["seed"], 11);
}

#[test]
fn fig5_combination_steers_the_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_fig5(dir.path());
    let o = su11(&["--config", &cfg, "--out", "o", "simulate"], dir.path());
    let v = stdout_json(&o);
    let sui = &v["runs"][0];
    assert_eq!(sui["label"], "sui");
    let comb = &sui["combined"];
    assert!((comb["balance_gain_k"].as_f64().unwrap() - 0.84).abs() < 0.02, "{}", comb["balance_gain_k"]);
    let snr = |theta: usize, tone: usize| comb["spectra"][theta]["peaks"][tone]["snr"].as_f64().unwrap();
    // the pi/4 tone (index 1) peaks at theta = pi/4 and vanishes at 3pi/4
    for theta in [0, 2, 3] {
        assert!(snr(1, 1) > snr(theta, 1));
    }
    assert!(snr(3, 1) < 0.1 * snr(1, 1));
    let floors: Vec<f64> = (0..4).map(|t| comb["spectra"][t]["floor"].as_f64().unwrap()).collect();
    let spread = floors.iter().cloned().fold(f64::MIN, f64::max) / floors.iter().cloned().fold(f64::MAX, f64::min) - 1.0;
    assert!(spread < 0.03, "{floors:?}");
}

#[test]
fn fig2_floor_ratio_near_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_text("fig2").replace("duration = 0.2", "duration = 0.05");
    assert!(text.contains("duration = 0.05"));
    let cfg = write_config(dir.path(), "fig2.toml", &text);
    let v = stdout_json(&su11(&["--config", &cfg, "--out", "o", "simulate"], dir.path()));
    let fr = v["floor_ratios"].as_array().unwrap();
    let signal = fr.iter().find(|f| f["port"] == "signal" && f["baseline"] == "amp").unwrap();
    assert!((signal["measured"].as_f64().unwrap() - 0.8).abs() < 0.04, "{signal}");
    assert!((signal["measured"].as_f64().unwrap() / signal["analytic"].as_f64().unwrap() - 1.0).abs() < 0.03);
}
