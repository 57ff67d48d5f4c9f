use super::*;

fn exec(args: &[&str]) -> (Result<(), CliError>, String) {
    let cli = Cli::try_parse_from(std::iter::once("awnbench").chain(args.iter().copied())).expect("valid arguments");
    let mut out = Vec::new();
    let r = dispatch(cli, &mut out);
    (r, String::from_utf8(out).expect("utf-8 output"))
}

fn code(r: &Result<(), CliError>) -> u8 {
    r.as_ref().err().map_or(0, CliError::code)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("awnbench-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn presets_lists_every_bundled_name() {
    let (r, out) = exec(&["presets"]);
    assert_eq!(code(&r), 0);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().any(|l| l == "table2-default"));
    let (_, shown) = exec(&["presets", "--show", "adhoc-wpa-loss70"]);
    assert!(shown.contains("0.7"));
}

#[test]
fn unknown_preset_is_a_validation_error() {
    assert_eq!(code(&exec(&["run", "--preset", "nope"]).0), 2);
    assert_eq!(code(&exec(&["presets", "--show", "nope"]).0), 2);
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = temp_dir("bad");
    let path = dir.join("bad.json");
    let text = preset_source("adhoc-loss20")
        .unwrap()
        .replace("\"loss_prob\": 0.2", "\"loss_prob\": 1.3")
        .replace("\"trials\": 100", "\"trials\": 0");
    std::fs::write(&path, text).unwrap();
    let (r, _) = exec(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    let msg = r.unwrap_err().to_string();
    assert!(msg.contains("link.loss_prob"), "{msg}");
    assert!(msg.contains("trials"), "{msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    assert_eq!(code(&exec(&["run", "--config", "/nonexistent/awn.json"]).0), 4);
}

#[test]
fn run_emits_csv_with_fixed_header() {
    let (r, out) = exec(&["run", "--preset", "table2-default", "--trials", "2"]);
    assert_eq!(code(&r), 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "protocol,trial,establishment_virtual_us,crypto_wallclock_us,messages_sent,retransmissions,bytes_on_air,completed"
    );
    assert_eq!(lines.count(), 12);
}

#[test]
fn overrides_from_flags_are_validated() {
    assert_eq!(code(&exec(&["run", "--preset", "table2-default", "--trials", "0"]).0), 2);
}

#[test]
fn ordering_check_fails_with_zero_costs_and_flat_latency() {
    let dir = temp_dir("zero");
    let path = dir.join("zero.json");
    let mut v: serde_json::Value = serde_json::from_str(preset_source("table2-default").unwrap()).unwrap();
    v["crypto_costs"] = "zero".into();
    v["link_overrides"] = serde_json::json!([]);
    v["trials"] = 2.into();
    std::fs::write(&path, v.to_string()).unwrap();
    let (r, out) = exec(&["run", "--config", path.to_str().unwrap(), "--check-ordering", "--format", "md"]);
    assert_eq!(code(&r), 3);
    assert!(out.contains("paper_ms"));
    assert!(r.unwrap_err().to_string().contains("is not below"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn default_preset_passes_the_ordering_check() {
    assert_eq!(code(&exec(&["run", "--preset", "table2-default", "--trials", "3", "--check-ordering"]).0), 0);
}

#[test]
fn insecure_variants_need_the_flag() {
    assert_eq!(code(&exec(&["attack", "--protocol", "tkdf-sym-unfixed", "--script", "replay-compromised"]).0), 2);
    let (r, out) = exec(&["attack", "--protocol", "tkdf-sym-unfixed", "--script", "replay-compromised", "--allow-insecure"]);
    assert_eq!(code(&r), 0);
    assert!(out.contains("attack succeeded"));
    let mut cfg: serde_json::Value = serde_json::from_str(preset_source("table2-default").unwrap()).unwrap();
    cfg["protocols"] = serde_json::json!(["tkdf-asym-unfixed"]);
    let dir = temp_dir("insecure");
    let path = dir.join("c.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    assert_eq!(code(&exec(&["run", "--config", path.to_str().unwrap()]).0), 2);
    assert_eq!(code(&exec(&["run", "--config", path.to_str().unwrap(), "--trials", "1", "--allow-insecure"]).0), 0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn inapplicable_attack_is_a_validation_error() {
    assert_eq!(code(&exec(&["attack", "--protocol", "psk-direct", "--script", "lowe-mitm"]).0), 2);
}

#[test]
fn attack_evidence_dumps_as_json() {
    let dir = temp_dir("evidence");
    let path = dir.join("e.json");
    let (r, _) = exec(&["attack", "--protocol", "tkdf-asym", "--script", "eavesdrop", "--dump-evidence", path.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["success"], false);
    assert!(!v["evidence"]["frames"].as_array().unwrap().is_empty());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn goals_all_prints_the_fixture() {
    let (r, out) = exec(&["goals", "--all"]);
    assert_eq!(code(&r), 0);
    assert_eq!(out, awn_core::goals::TABLE1_FIXTURE);
    let (_, js) = exec(&["goals", "--all", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&js).unwrap();
    assert_eq!(v[0]["verdicts"]["ssh"], "(*)");
}

#[test]
fn goal_report_for_one_column() {
    let (r, out) = exec(&["goals", "--protocol", "ssh", "--format", "json"]);
    assert_eq!(code(&r), 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 13);
    assert_eq!(v["protocol"], "on-demand-sts");
    assert!(v["discrepancies"].as_array().unwrap().is_empty());
    assert_eq!(code(&exec(&["goals", "--protocol", "nope"]).0), 2);
}

#[test]
fn calibrate_writes_a_cost_model() {
    let (r, out) = exec(&["calibrate", "--iterations", "2"]);
    assert_eq!(code(&r), 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["sign_us"].as_u64().unwrap() >= 1);
}
