use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use zeromode::cli::RunConfig;

fn zeromode(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeromode"))
        .current_dir(dir)
        .env("ZEROMODE_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn record(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn print_config_round_trips_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = zeromode(dir.path(), &["--print-config", "--grid", "24", "--box", "6", "--t", "0.5:1.5:0.25", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!((cfg.grid.points, cfg.grid.half_width, cfg.seed), (24, 6.0, 7));
    assert_eq!((cfg.coupling.t_min, cfg.coupling.t_max, cfg.coupling.step), (0.5, 1.5, 0.25));
    assert!(cfg.solver.gap_tol.is_some(), "derived defaults are materialized");
}

#[test]
fn configuration_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = zeromode(dir.path(), &["gauge", "--grid", "33"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.points"));

    std::fs::write(dir.path().join("bad.toml"), "[solver]\neig_tol = -1.0\n").unwrap();
    let out = zeromode(dir.path(), &["spectrum", "--config", "bad.toml"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.eig_tol"));

    std::fs::write(dir.path().join("typo.toml"), "[grid]\npoint = 8\n").unwrap();
    let out = zeromode(dir.path(), &["gauge", "--config", "typo.toml"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("point"));

    let out = zeromode(dir.path(), &["sweep", "--t", "1:1:0.1"]);
    assert_eq!(code(&out), 1);
    let out = zeromode(dir.path(), &["frobnicate"]);
    assert_eq!(code(&out), 1);

    let out = Command::new(env!("CARGO_BIN_EXE_zeromode"))
        .current_dir(dir.path())
        .env("ZEROMODE_THREADS", "many")
        .arg("gauge")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ZEROMODE_THREADS"));
}

#[test]
fn gauge_record_for_loss_yau_and_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = zeromode(dir.path(), &["gauge", "--grid", "32", "--box", "8", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rec = record(&dir.path().join("r/gauge.json"));
    assert_eq!(rec["ok"], true);
    assert!(rec["payload"]["gauge"]["curl_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(rec["config"]["grid"]["points"], 32);
    assert!(rec["timings"]["biot_savart"].is_number());
    assert!(rec["version"].is_string());

    std::fs::write(dir.path().join("zero.toml"), "[field]\nscale = 0.0\n[grid]\npoints = 16\nhalf_width = 4.0\n").unwrap();
    let out = zeromode(dir.path(), &["gauge", "--config", "zero.toml", "--out", "r"]);
    assert_eq!(code(&out), 0);
    let rec = record(&dir.path().join("r/gauge-2.json"));
    let g = &rec["payload"]["gauge"];
    for key in ["div_residual", "curl_residual", "l3_norm", "max_abs"] {
        assert_eq!(g[key].as_f64().unwrap(), 0.0, "{key}");
    }
    // The first record is untouched.
    let first = record(&dir.path().join("r/gauge.json"));
    assert_eq!(first["config"]["grid"]["points"], 32);
    assert!(first["payload"]["gauge"]["l3_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn spectrum_at_zero_coupling_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = zeromode(dir.path(), &["spectrum", "--grid", "16", "--box", "4", "--t", "0", "--out", "r"]);
    assert_eq!(code(&out), 2);
    let rec = record(&dir.path().join("r/spectrum.json"));
    assert_eq!(rec["ok"], false);
    assert!(rec["message"].as_str().unwrap().contains("singular"));
}

#[test]
fn perturb_without_a_base_zero_mode_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("half.toml"), "[field]\nscale = 0.5\n[perturb]\ntrials = 1\n").unwrap();
    let out = zeromode(dir.path(), &["perturb", "--config", "half.toml", "--grid", "16", "--box", "8", "--out", "r"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stdout));
    let rec = record(&dir.path().join("r/perturb.json"));
    assert!(rec["message"].as_str().unwrap().contains("no confirmed zero mode"));
}

#[test]
fn corrupt_field_file_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("field.bin"), [1u8, 2, 3, 4, 5]).unwrap();
    std::fs::write(
        dir.path().join("v.toml"),
        "[field]\nkind = \"file\"\npath = \"field.bin\"\n[validate]\ncases = 3\noracle_contexts = 1\ngauge_shifts = 1\n",
    )
    .unwrap();
    let out = zeromode(dir.path(), &["validate", "--config", "v.toml", "--out", "r"]);
    assert_eq!(code(&out), 2);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL field-data"), "{stdout}");
    let rec = record(&dir.path().join("r/validate.json"));
    assert!(rec["message"].as_str().unwrap().contains("field-data"));
}

#[test]
fn sweep_writes_table_plot_and_is_reproducible() {
    let args = ["sweep", "--grid", "16", "--box", "8", "--t", "0.4:0.6:0.1", "--out", "r"];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let recs: Vec<Value> = dirs
        .iter()
        .map(|d| {
            let out = zeromode(d.path(), &args);
            assert!(code(&out) == 0 || code(&out) == 2, "{}", String::from_utf8_lossy(&out.stderr));
            record(&d.path().join("r/sweep.json"))
        })
        .collect();
    assert_eq!(recs[0]["payload"], recs[1]["payload"]);
    assert_eq!(recs[0]["payload"]["records"].as_array().unwrap().len(), 3);

    let r = dirs[0].path().join("r");
    let csv = std::fs::read_to_string(r.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,lambda_min,next_gap,bs_top_1,bs_top_2,bs_top_3,nullity,localization"
    );
    assert_eq!(lines.count(), 3);
    let script = std::fs::read_to_string(r.join("sweep.gp")).unwrap();
    assert!(script.contains("'sweep.csv'"));
    let files: Vec<String> = recs[0]["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert!(files.contains(&"sweep.csv".to_string()) && files.contains(&"sweep.gp".to_string()));
    for f in files {
        assert!(r.join(f).exists());
    }
}
