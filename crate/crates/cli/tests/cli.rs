use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alignflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
scenario = "generic"
seed = 4
[grid]
n = 64
[solver]
alpha = 1.0
t_end = 0.5
output_stride = 20
"#;

#[test]
fn run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    let o = bin(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("completed"));
    for f in ["manifest.json", "diagnostics.csv", "events.jsonl"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(fs::read_dir(out.join("snapshots")).unwrap().count() >= 2);

    let r = bin(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(summary["status"]["status"], "completed");
    assert!(summary["flocking"]["decay_rate_fit"].as_f64().unwrap() > 0.0);
    for f in ["summary.json", "v_t.csv", "moc_margins.csv"] {
        assert!(out.join("report").join(f).is_file(), "{f}");
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&bin(&["run", &cfg, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&bin(&["run", &cfg, "--out", b.to_str().unwrap()])), 0);
    for f in ["manifest.json", "diagnostics.csv", "events.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn burgers_blowup_exits_two_and_report_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "burgers.toml",
        r#"
scenario = "frozen_burgers"
[grid]
n = 256
[solver]
alpha = 0.5
t_end = 1.0
blowup_threshold = 2000.0
[data]
u_modes = [{ k = [1], amplitude = 50.0, phase = 1.5707963267948966 }]
"#,
    );
    let out = tmp.path().join("run");
    let o = bin(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let events = fs::read_to_string(out.join("events.jsonl")).unwrap();
    assert!(events.contains("\"kind\":\"blowup\""), "{events}");
    let r = bin(&["report", out.to_str().unwrap()]);
    let summary: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(summary["blowup_time"].as_f64().unwrap() > 0.0);
    assert!(summary["final_lip_u"].as_f64().unwrap() > 100.0);
}

#[test]
fn lemma_only_report_has_no_series() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lemmas");
    let o = bin(&["verify-lemmas", "--alpha", "0.5", "--dim", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = bin(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let summary: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(summary["records"], 0);
    assert!(summary["status"].is_null());
    assert_eq!(summary["lemmas"].as_array().unwrap().len(), 12);
}

#[test]
fn select_params_critical() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = write(
        tmp.path(),
        "inputs.json",
        r#"{"rho_lower":0.5,"rho_upper":1.5,"v0":2.0,"f0_norm":1.0,"grad_f0_norm":2.0,"h0_norm":3.0,"c0":0.5}"#,
    );
    let o = bin(&["select-params", "critical", &inputs]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(p["mu"], 0.5);
    assert!(p["kappa"].as_f64().unwrap() <= 1.0);
    let sup = bin(&["select-params", "supercritical", &inputs]);
    assert_eq!(code(&sup), 1);
}

#[test]
fn usage_and_missing_artifacts_exit_one() {
    assert_eq!(code(&bin(&["frobnicate"])), 1);
    assert_eq!(code(&bin(&["verify-lemmas", "--alpha", "2.5", "--dim", "1"])), 1);
    let tmp = tempfile::tempdir().unwrap();
    let r = bin(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("manifest.json") && err.contains("diagnostics.csv"), "{err}");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            alignflow::scenario::ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
