mod common;

use std::fs;

use common::{code, coeff_norm, magcomp, stderr, CAL_CONFIG, NEAR_CONSTANT_CONFIG};
use magcomp_core::AnomalyMap;

#[test]
fn full_pipeline_is_exact_on_noiseless_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cal.cfg"), CAL_CONFIG).unwrap();
    let steps: [&[&str]; 4] = [
        &["simulate", "--config", "cal.cfg", "--out", "cal.csv", "--truth", "truth.csv"],
        &["calibrate", "--in", "cal.csv", "--mag", "UNCOMPMAG1", "--flux", "B", "--out", "UNCOMPMAG1.coef"],
        &["compensate", "--in", "cal.csv", "--coeffs", "UNCOMPMAG1.coef", "--mag", "UNCOMPMAG1", "--flux", "B", "--out", "comp.csv"],
        &["evaluate", "--in", "cal.csv", "--coeffs", "UNCOMPMAG1.coef", "--mag", "UNCOMPMAG1", "--truth", "stinger", "--report", "report.csv", "--plot", "plot.svg"],
    ];
    for args in steps {
        let out = magcomp(d, args, None);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }
    let report = fs::read_to_string(d.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "channel,truth_source,n,rmse_nT,rmse_detrended_nT");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["UNCOMPMAG1", "stinger", "6000"]);
    assert!(row[4].parse::<f64>().unwrap() < 0.01);

    let comp = fs::read_to_string(d.join("comp.csv")).unwrap();
    assert!(comp.lines().next().unwrap().split(',').any(|c| c == "COMPMAG1"));
    assert!(fs::read_to_string(d.join("plot.svg")).unwrap().contains("<polyline"));
    let truth = fs::read_to_string(d.join("truth.csv")).unwrap();
    assert!(truth.starts_with("TIME,ROLL_RAD,PITCH_RAD,YAW_RAD,H_ET_TRUE,H_AT_TRUE1"));
}

#[test]
fn calibrate_prints_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cal.cfg"), CAL_CONFIG).unwrap();
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "cal.cfg", "--out", "f.csv", "--truth", "t.csv"], None)), 0);
    let out = magcomp(d, &["calibrate", "--in", "f.csv", "--mag", "UNCOMPMAG1", "--flux", "c", "--lambda", "0.01"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("lambda=0.01\n"));
    assert!(coeff_norm(&text) > 0.0);
}

#[test]
fn evaluate_reads_a_coefficient_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = format!("{CAL_CONFIG}mag1.model_error_nT = 0.1\nmag2.model_error_nT = 1.0\n");
    fs::write(d.join("cal.cfg"), cfg).unwrap();
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "cal.cfg", "--out", "f.csv", "--truth", "t.csv"], None)), 0);
    fs::create_dir(d.join("coefs")).unwrap();
    for m in ["UNCOMPMAG1", "UNCOMPMAG2"] {
        let out_path = format!("coefs/{m}.coef");
        let out = magcomp(d, &["calibrate", "--in", "f.csv", "--mag", m, "--flux", "B", "--out", &out_path], None);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    fs::write(d.join("coefs/notes.txt"), "ignored").unwrap();
    let out = magcomp(d, &["evaluate", "--in", "f.csv", "--coeffs", "coefs", "--truth", "stinger", "--report", "r.csv"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(d.join("r.csv")).unwrap();
    let names: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["UNCOMPMAG1", "UNCOMPMAG2"]);
}

#[test]
fn survey_line_scored_against_map_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lon: Vec<f64> = (0..41).map(|i| -76.0 + 0.025 * i as f64).collect();
    let lat: Vec<f64> = (0..41).map(|i| 45.0 + 0.025 * i as f64).collect();
    let map = AnomalyMap::from_fn(lon, lat, 1960.0, 2780.0, 300.0, |lo, la| {
        150.0 * ((lo + 76.0) * 5.0).sin() + 90.0 * ((la - 45.0) * 4.0).cos()
    })
    .unwrap();
    fs::write(d.join("map.txt"), map.to_text()).unwrap();
    fs::write(d.join("cal.cfg"), CAL_CONFIG).unwrap();
    fs::write(d.join("line.cfg"), "pattern = straight\nmap = map.txt\ntrack = -75.9, 45.1, -75.1, 45.8\nline = 1003.02\n").unwrap();
    for args in [
        &["simulate", "--config", "cal.cfg", "--out", "cal.csv", "--truth", "ct.csv"][..],
        &["simulate", "--config", "line.cfg", "--out", "line.csv", "--truth", "lt.csv"],
        &["calibrate", "--in", "cal.csv", "--mag", "UNCOMPMAG1", "--flux", "B", "--out", "m1.coef"],
        &["evaluate", "--in", "line.csv", "--line", "1003.02", "--coeffs", "m1.coef", "--mag", "UNCOMPMAG1", "--truth", "map", "--map", "map.txt", "--report", "r.csv"],
    ] {
        let out = magcomp(d, args, None);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }
    let report = fs::read_to_string(d.join("r.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "map");
    assert!(row[4].parse::<f64>().unwrap() < 0.01, "{report}");

    let out = magcomp(d, &["evaluate", "--in", "line.csv", "--coeffs", "m1.coef", "--mag", "UNCOMPMAG1", "--truth", "map", "--report", "r.csv"], None);
    assert_eq!(code(&out), 1);
    let out = magcomp(d, &["evaluate", "--in", "line.csv", "--line", "1003.10", "--coeffs", "m1.coef", "--mag", "UNCOMPMAG1", "--truth", "stinger", "--report", "r.csv"], None);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn map_upward_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let axis: Vec<f64> = (0..16).map(|i| i as f64 * 0.001).collect();
    let map = AnomalyMap::from_fn(axis.clone(), axis, 100.0, 100.0, 250.0, |lo, la| (lo * 2000.0).sin() * 50.0 + la * 1000.0).unwrap();
    fs::write(d.join("m.txt"), map.to_text()).unwrap();
    let out = magcomp(d, &["map-upward", "--in", "m.txt", "--dz", "100", "--out", "up.txt", "--pad"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let up = AnomalyMap::<f64>::read(d.join("up.txt")).unwrap();
    assert_eq!(up.alt_m, 350.0);
    assert!((up.mean() - map.mean()).abs() < 1e-9);

    let out = magcomp(d, &["map-upward", "--in", "m.txt", "--dz", "-50", "--out", "down.txt"], None);
    assert_eq!(code(&out), 2);
    assert!(!d.join("down.txt").exists());
    let out = magcomp(d, &["map-upward", "--in", "m.txt", "--dz", "-50", "--out", "down.txt", "--allow-downward"], None);
    assert_eq!(code(&out), 1);
    let out = magcomp(d, &["map-upward", "--in", "m.txt", "--dz", "-50", "--out", "down.txt", "--allow-downward", "--kcut", "0.005"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = magcomp(d, &["calibrate", "--no-such-flag"], None);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"));
    assert_eq!(code(&magcomp(d, &["--help"], None)), 0);
    assert_eq!(code(&magcomp(d, &["--version"], None)), 0);
    assert_eq!(code(&magcomp(d, &[], None)), 1);

    let out = magcomp(d, &["calibrate", "--in", "missing.csv", "--mag", "UNCOMPMAG1", "--flux", "B"], None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.csv"));

    fs::write(d.join("bad.csv"), "TIME,UNCOMPMAG1\n0.0,1\n0.2,2\n0.1,3\n").unwrap();
    assert_eq!(code(&magcomp(d, &["calibrate", "--in", "bad.csv", "--mag", "UNCOMPMAG1", "--flux", "B"], None)), 2);

    fs::write(d.join("c.cfg"), NEAR_CONSTANT_CONFIG).unwrap();
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "c.cfg", "--out", "c.csv", "--truth", "ct.csv"], None)), 0);
    let out = magcomp(d, &["calibrate", "--in", "c.csv", "--mag", "UNCOMPMAG1", "--flux", "B", "--out", "c.coef"], None);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("condition"));
    assert!(!d.join("c.coef").exists());

    assert_eq!(code(&magcomp(d, &["calibrate", "--in", "c.csv", "--mag", "UNCOMPMAG1", "--flux", "B", "--pass2", "7"], None)), 1);
    fs::write(d.join("bad.cfg"), "roll_amp_deg = 45\n").unwrap();
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "bad.cfg", "--out", "x.csv", "--truth", "y.csv"], None)), 2);
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "c.cfg", "--out", "x.csv", "--truth", "y.csv"], Some("abc"))), 1);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("n.cfg"), format!("{CAL_CONFIG}scalar_sigma_nT = 0.5\nleg_length_s = 20\n")).unwrap();
    let run = |name: &str, extra: &[&str], env: Option<&str>| {
        let mut args = vec!["simulate", "--config", "n.cfg", "--out", name, "--truth", "t.csv"];
        args.extend_from_slice(extra);
        assert_eq!(code(&magcomp(d, &args, env)), 0);
        fs::read(d.join(name)).unwrap()
    };
    let config_seed = run("a.csv", &[], None);
    let env_seed = run("b.csv", &[], Some("77"));
    let flag_seed = run("c.csv", &["--seed", "77"], Some("5"));
    let explicit_one = run("d.csv", &["--seed", "1"], None);
    assert_ne!(config_seed, env_seed);
    assert_eq!(env_seed, flag_seed);
    assert_eq!(config_seed, explicit_one);
}

#[test]
fn model_error_flag_changes_only_the_scalar_channels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cal.cfg"), CAL_CONFIG).unwrap();
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "cal.cfg", "--out", "a.csv", "--truth", "ta.csv"], None)), 0);
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "cal.cfg", "--out", "b.csv", "--truth", "tb.csv", "--model-error", "3"], None)), 0);
    let a = magcomp_core::load_flight(d.join("a.csv"), None, None).unwrap();
    let b = magcomp_core::load_flight(d.join("b.csv"), None, None).unwrap();
    assert_eq!(a.channel("FLUXB_X"), b.channel("FLUXB_X"));
    assert_ne!(a.channel("UNCOMPMAG1"), b.channel("UNCOMPMAG1"));
    assert_eq!(code(&magcomp(d, &["simulate", "--config", "cal.cfg", "--out", "c.csv", "--truth", "tc.csv", "--model-error", "-1"], None)), 1);
}
