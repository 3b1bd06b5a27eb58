use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn donorlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_donorlab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (
        header,
        lines
            .map(|l| l.split(',').map(String::from).collect())
            .collect(),
    )
}

fn schema_errors(name: &str, instance: &Value) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/schemas")
        .join(format!("{name}.schema.json"));
    let schema = read_json(path);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect()
}

fn assert_schema(name: &str, instance: &Value) {
    let errors = schema_errors(name, instance);
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

#[test]
fn spectrum_rejects_empty_field_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &["spectrum", "--b-min", "0", "--b-max", "0", "--steps", "2"],
    );
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("levels.csv").exists());
    let o = donorlab(
        dir.path(),
        &["spectrum", "--b-min", "0", "--b-max", "1", "--steps", "1"],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn spectrum_two_rows_start_at_zero_landau_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &["spectrum", "--b-min", "0", "--b-max", "1", "--steps", "2"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(dir.path().join("levels.csv"));
    assert_eq!(
        header,
        "B_tesla,E_1s_meV,E_2pminus_meV,E_2pzero_meV,E_2pplus_meV,LL0_meV,LL1_meV"
    );
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][5].parse::<f64>().unwrap(), 0.0);
    let e1s: f64 = rows[1][1].parse().unwrap();
    let e2p: f64 = rows[1][4].parse().unwrap();
    assert!(e1s < e2p);
}

#[test]
fn spectrum_default_sweep_has_81_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(dir.path(), &["spectrum"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(dir.path().join("levels.csv"));
    assert_eq!(rows.len(), 81);
    assert_eq!(rows[80][0].parse::<f64>().unwrap(), 4.0);
}

#[test]
fn resonance_output_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &[
            "resonance",
            "--frequency",
            "2.53",
            "--transition",
            "2p+",
            "--b-lo",
            "2",
            "--b-hi",
            "5",
        ],
    );
    assert_eq!(code(&o), 0);
    let doc = read_json(dir.path().join("resonance.json"));
    assert_schema("resonance", &doc);
    let b = doc["field_tesla"].as_f64().unwrap();
    assert!((b - 3.63).abs() < 0.05 * 3.63, "{b}");
}

#[test]
fn resonance_outside_range_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &[
            "resonance",
            "--frequency",
            "9",
            "--b-lo",
            "2",
            "--b-hi",
            "5",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn ideal_polarizer_scans_differ_by_pi() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(dir.path(), &["polscan"]);
    assert_eq!(code(&o), 0);
    let doc = read_json(dir.path().join("polscan_fit.json"));
    assert_schema("polscan_fit", &doc);
    assert!((doc["phase_difference_rad"].as_f64().unwrap() - PI).abs() < 1e-10);
    let (header, rows) = csv_rows(dir.path().join("polscan.csv"));
    assert_eq!(header, "spacing_mm,photocurrent,field_sign");
    assert_eq!(rows.iter().filter(|r| r[2] == "1").count(), 97);
    assert_eq!(rows.iter().filter(|r| r[2] == "-1").count(), 97);
    let (header, _) = csv_rows(dir.path().join("polarization_states.csv"));
    assert!(header.starts_with("spacing_mm,"));
}

#[test]
fn distorted_polarizer_scan_shifts_phase() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &[
            "polscan",
            "--retardance",
            "0.2",
            "--diattenuation",
            "0.2",
            "--distortion-axis",
            "0.3",
        ],
    );
    assert_eq!(code(&o), 0);
    let doc = read_json(dir.path().join("polscan_fit.json"));
    assert!((doc["phase_difference_rad"].as_f64().unwrap() - PI).abs() > 1e-3);
    assert!(doc["plus_z"]["offset"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_length_spacing_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &["polscan", "--spacing-min", "0.1", "--spacing-max", "0.1"],
    );
    assert_eq!(code(&o), 1);
}

fn trace_values(dir: &Path, label: &str) -> Vec<f64> {
    let (_, rows) = csv_rows(dir.join("rabi.csv"));
    rows.iter()
        .filter(|r| r[2] == label)
        .map(|r| r[1].parse().unwrap())
        .collect()
}

#[test]
fn ideal_sigma_minus_and_zero_field_traces_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(dir.path(), &["rabi", "--polarization", "sigma-"]);
    assert_eq!(code(&o), 0);
    assert!(trace_values(dir.path(), "sigma-").iter().all(|&v| v == 0.0));

    let o = donorlab(dir.path(), &["rabi", "--peak-field", "0"]);
    assert_eq!(code(&o), 0);
    for label in ["sigma+", "pi_x", "pi_y", "sigma-"] {
        let v = trace_values(dir.path(), label);
        assert_eq!(v.len(), 81);
        assert!(v.iter().all(|&x| x == 0.0), "{label}");
    }
}

#[test]
fn rabi_traces_follow_polarization_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(dir.path(), &["rabi"]);
    assert_eq!(code(&o), 0);
    assert_schema("rabi_meta", &read_json(dir.path().join("rabi_meta.json")));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let minimum = |label: &str| -> Option<f64> {
        let line = stdout
            .lines()
            .find(|l| l.starts_with(&format!("{label}:")))?;
        line.split("at ")
            .nth(1)?
            .trim_end_matches(" ps")
            .parse()
            .ok()
    };
    let circ = minimum("sigma+").unwrap();
    let lin = minimum("pi_x").unwrap();
    assert!((circ - 15.0).abs() < 1.0, "{circ}");
    assert!(lin > circ + 2.0, "{lin}");
    assert_eq!(minimum("pi_y"), Some(lin));
    let flat = trace_values(dir.path(), "sigma-");
    assert!(flat.iter().all(|&v| v == 0.0));
}

#[test]
fn explicit_jones_pairs_and_bad_labels() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(
        dir.path(),
        &["rabi", "--polarization", "jones:1,0,0,1", "--steps", "9"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(trace_values(dir.path(), "jones:1 0 0 1").len(), 9);
    let o = donorlab(dir.path(), &["rabi", "--polarization", "circular"]);
    assert_eq!(code(&o), 1);
    let o = donorlab(dir.path(), &["rabi", "--polarization", "jones:0,0,0,0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn fit_recovers_simulated_rates() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&donorlab(dir.path(), &["rabi", "--polarization", "sigma+"])),
        0
    );
    let trace = dir.path().join("rabi.csv");
    let meta = dir.path().join("rabi_meta.json");
    let o = donorlab(
        dir.path(),
        &[
            "fit",
            "--trace",
            trace.to_str().unwrap(),
            "--metadata",
            meta.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(dir.path().join("fit.json"));
    assert_schema("fit", &doc);
    let value = |name: &str| {
        doc["parameters"]
            .as_array()
            .unwrap()
            .iter()
            .find(|p| p["name"] == name)
            .unwrap()["value"]
            .as_f64()
            .unwrap()
    };
    assert!((value("gamma2") / 1.98e11 - 1.0).abs() < 0.01);
    assert!((value("gamma3") / 1.22e11 - 1.0).abs() < 0.01);
    assert!((value("omega_r") / (2.0 * PI / 15e-12) - 1.0).abs() < 0.01);
    assert!(doc["converged"].as_bool().unwrap());
}

#[test]
fn constant_trace_fails_to_fit() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("flat.csv");
    let mut text = String::from("pulse_width_ps,photocurrent,polarization\n");
    for k in 0..20 {
        text.push_str(&format!("{},0.3,sigma+\n", k as f64));
    }
    fs::write(&trace, text).unwrap();
    let o = donorlab(dir.path(), &["fit", "--trace", trace.to_str().unwrap()]);
    assert_ne!(code(&o), 0);
    assert!(!dir.path().join("fit.json").exists());
}

#[test]
fn malformed_trace_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.csv");
    fs::write(&trace, "width,signal\n1,2\n").unwrap();
    let o = donorlab(dir.path(), &["fit", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    fs::write(
        &trace,
        "pulse_width_ps,photocurrent,polarization\n0,abc,sigma+\n",
    )
    .unwrap();
    let o = donorlab(dir.path(), &["fit", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = donorlab(
        dir.path(),
        &[
            "fit",
            "--trace",
            dir.path().join("missing.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn unconverged_fit_exits_two_and_still_writes_result() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&donorlab(dir.path(), &["rabi", "--polarization", "sigma+"])),
        0
    );
    let trace = dir.path().join("rabi.csv");
    let o = donorlab(
        dir.path(),
        &[
            "fit",
            "--trace",
            trace.to_str().unwrap(),
            "--max-iterations",
            "5",
        ],
    );
    assert_eq!(code(&o), 2);
    let doc = read_json(dir.path().join("fit.json"));
    assert_schema("fit", &doc);
    assert!(!doc["converged"].as_bool().unwrap());
}

#[test]
fn flags_override_config_and_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\n[spectrum]\nb_min = 0.0\nb_max = 2.0\nsteps = 5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_donorlab"))
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "spectrum",
            "--steps",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(out.join("levels.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][0].parse::<f64>().unwrap(), 2.0);
    let echoed = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("seed = 5"));
    assert!(echoed.contains("steps = 3"));
    assert!(!echoed.contains("out ="));
}

#[test]
fn unknown_config_keys_and_flags_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[spectrum]\nbmax = 2.0\n").unwrap();
    let o = donorlab(dir.path(), &["--config", cfg.to_str().unwrap(), "spectrum"]);
    assert_eq!(code(&o), 1);
    let o = donorlab(dir.path(), &["spectrum", "--bogus"]);
    assert_eq!(code(&o), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_donorlab"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn selftest_outputs_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let o = donorlab(dir.path(), &["selftest", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for (file, schema) in [
        ("selftest.json", "selftest"),
        ("polscan_fit.json", "polscan_fit"),
        ("rabi_meta.json", "rabi_meta"),
    ] {
        assert_schema(schema, &read_json(dir.path().join(file)));
    }
    for csv in [
        "levels.csv",
        "polscan.csv",
        "polarization_states.csv",
        "rabi.csv",
    ] {
        let (header, rows) = csv_rows(dir.path().join(csv));
        assert!(
            header.chars().next().unwrap().is_ascii_alphabetic(),
            "{csv}"
        );
        let width = header.split(',').count();
        assert!(rows.iter().all(|r| r.len() == width), "{csv}");
    }
    assert_eq!(read_json(dir.path().join("selftest.json"))["seed"], 3);
}

#[test]
fn schemas_reject_malformed_documents() {
    let bad = serde_json::json!({"schema_version": 2, "frequency_THz": 2.53});
    assert!(!schema_errors("resonance", &bad).is_empty());
    let bad = serde_json::json!({"schema_version": 1, "frequency_THz": 2.54, "B_tesla": 3.62, "extra": 1});
    assert!(!schema_errors("rabi_meta", &bad).is_empty());
}
