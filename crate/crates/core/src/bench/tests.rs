use super::*;
use crate::netsim::{CryptoCostModel, LinkModel};
use crate::ProtocolKind;

fn single(kind: ProtocolKind, link: LinkModel, costs: CostSpec, trials: u32) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "t".into(),
        protocols: vec![kind],
        link,
        link_overrides: vec![],
        crypto_costs: costs,
        retransmit: Default::default(),
        trials,
        seed: 9,
        horizon_us: crate::netsim::DEFAULT_HORIZON_US,
    }
}

#[test]
fn every_preset_loads() {
    for name in preset_names() {
        let cfg = preset(name).unwrap();
        assert_eq!(cfg.name, name);
        assert!(cfg.check_insecure(false).is_ok());
    }
    assert_eq!(preset("adhoc-wpa-loss70").unwrap().link.loss_prob, 0.70);
    assert!(matches!(preset("nope"), Err(BenchError::UnknownPreset(_))));
}

#[test]
fn validation_aggregates_and_names_fields() {
    let mut v: serde_json::Value = serde_json::from_str(preset_source("table2-default").unwrap()).unwrap();
    v["link"]["loss_prob"] = 1.3.into();
    v["trials"] = 0.into();
    v["schema_version"] = 7.into();
    let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err();
    let BenchError::Validation(errs) = err else { panic!("{err}") };
    assert_eq!(errs.len(), 3, "{errs:?}");
    assert!(errs.iter().any(|e| e.starts_with("link.loss_prob")));
    assert!(errs.iter().any(|e| e.starts_with("trials")));
    assert!(errs.iter().any(|e| e.starts_with("schema_version")));
}

#[test]
fn parse_errors_carry_position() {
    let err = ScenarioConfig::from_json("{\n  \"schema_version\": 1,\n  \"bogus\": 2\n}").unwrap_err();
    assert!(matches!(err, BenchError::Parse { line: 3, .. }), "{err}");
}

#[test]
fn overrides_must_name_testbed_links() {
    let mut v: serde_json::Value = serde_json::from_str(preset_source("table2-default").unwrap()).unwrap();
    v["link_overrides"][0]["a"] = "carol".into();
    let BenchError::Validation(errs) = ScenarioConfig::from_json(&v.to_string()).unwrap_err() else { panic!() };
    assert!(errs[0].starts_with("link_overrides[0]"), "{errs:?}");
}

#[test]
fn insecure_variants_need_opt_in() {
    let cfg = single(ProtocolKind::TkdfSymUnfixed, LinkModel::lossless(1000), CostSpec::Named(CostPreset::Zero), 1);
    assert!(cfg.check_insecure(false).is_err());
    assert!(cfg.check_insecure(true).is_ok());
}

#[test]
fn psk_master_lossless_is_four_legs() {
    let cfg = single(ProtocolKind::PskMaster, LinkModel::lossless(1000), CostSpec::Named(CostPreset::Zero), 5);
    for r in run_benchmark(&cfg) {
        assert_eq!(r.establishment_virtual_us, Some(4000));
        assert!(r.completed);
        assert_eq!(r.crypto_wallclock_us, None);
    }
}

#[test]
fn incomplete_records_have_no_timings() {
    let cfg = single(ProtocolKind::PskDirect, LinkModel::lossless(1000).with_loss(1.0), CostSpec::Named(CostPreset::Zero), 2);
    for r in run_benchmark(&cfg) {
        assert!(!r.completed);
        assert_eq!(r.establishment_virtual_us, None);
        assert_eq!(r.crypto_wallclock_us, None);
    }
}

#[test]
fn asymmetric_tkdf_is_slower_than_symmetric() {
    let link = LinkModel::lossless(1000);
    let costs = CostSpec::Explicit(CryptoCostModel::reference());
    let mean = |k| summarize(&run_benchmark(&single(k, link, costs, 5)))[0].mean_us.unwrap();
    assert!(mean(ProtocolKind::TkdfAsym) > mean(ProtocolKind::TkdfSym));
}

#[test]
fn loss_raises_mean_time() {
    let base = LinkModel::default();
    let mut cfg = single(ProtocolKind::PskMaster, base, CostSpec::Named(CostPreset::Zero), 30);
    cfg.retransmit.max_retries = 200;
    let m0 = summarize(&run_benchmark(&cfg))[0].mean_us.unwrap();
    cfg.link.loss_prob = 0.5;
    let recs = run_benchmark(&cfg);
    assert!(recs.iter().all(|r| r.completed));
    assert!(summarize(&recs)[0].mean_us.unwrap() > m0);
}

#[test]
fn reports_are_stable_and_headed() {
    let cfg = single(ProtocolKind::PskDirect, LinkModel::default(), CostSpec::Named(CostPreset::Zero), 3);
    let recs = run_benchmark(&cfg);
    let a = emit_report(&recs, ReportFormat::Csv).unwrap();
    assert_eq!(a, emit_report(&recs, ReportFormat::Csv).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let md = String::from_utf8(emit_report(&recs, ReportFormat::Md).unwrap()).unwrap();
    assert!(md.contains("paper_ms"));
    assert!(md.lines().any(|l| l.starts_with("| WEP |") && l.ends_with("| 2.42 |")), "{md}");
    let json: serde_json::Value = serde_json::from_slice(&emit_report(&recs, ReportFormat::Json).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 3);
}

#[test]
fn ordering_reports_broken_links() {
    let cfg = ScenarioConfig {
        protocols: ProtocolKind::SECURE.to_vec(),
        ..single(ProtocolKind::PskDirect, LinkModel::lossless(1000), CostSpec::Named(CostPreset::Zero), 2)
    };
    let check = check_ordering(&summarize(&run_benchmark(&cfg))).unwrap();
    assert!(!check.pass);
    assert!(!check.broken.is_empty());
}

#[test]
fn ordering_needs_every_family() {
    let cfg = single(ProtocolKind::PskDirect, LinkModel::lossless(1000), CostSpec::Named(CostPreset::Zero), 1);
    assert!(matches!(check_ordering(&summarize(&run_benchmark(&cfg))), Err(BenchError::IncompleteSummary(_))));
}

#[test]
fn published_rows_satisfy_the_ordering() {
    assert!(check_reference_ordering().pass);
}
