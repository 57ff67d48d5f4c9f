use awn_core::adversary::{run_attack, verify_evidence, AttackScript};
use awn_core::bench::{emit_report, preset, run_benchmark, ReportFormat};
use awn_core::goals::{evaluate_dynamic, Goal};
use awn_core::protocols::Role;
use awn_core::{NodeId, ProtocolKind};
use proptest::prelude::*;

fn scripts() -> Vec<AttackScript> {
    let (a, b) = (NodeId::named("alice"), NodeId::named("bob"));
    vec![
        AttackScript::Eavesdrop,
        AttackScript::Replay { compromised_old_key: true },
        AttackScript::Replay { compromised_old_key: false },
        AttackScript::LoweMitm,
        AttackScript::KciImpersonation { compromised: a },
        AttackScript::CompromiseAndDecryptPast { compromised: vec![a] },
        AttackScript::CompromiseAndDecryptPast { compromised: vec![a, b] },
        AttackScript::UnknownKeyShare,
        AttackScript::PrivacyProbe,
        AttackScript::OutsiderImpersonation { target: Role::Initiator },
        AttackScript::OutsiderImpersonation { target: Role::Responder },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn claimed_keys_rebuild_from_evidence(k in 0usize..8, s in 0usize..11, seed in any::<u64>()) {
        let kind = ProtocolKind::ALL[k];
        let script = &scripts()[s];
        if let Ok(out) = run_attack(kind, script, seed) {
            if !out.evidence.derived_keys.is_empty() {
                prop_assert!(verify_evidence(&out.evidence));
            }
            let again = run_attack(kind, script, seed).unwrap();
            prop_assert_eq!(serde_json::to_string(&out).unwrap(), serde_json::to_string(&again).unwrap());
        }
    }

    #[test]
    fn eavesdropping_never_recovers_a_key(k in 0usize..8, seed in any::<u64>()) {
        let out = run_attack(ProtocolKind::ALL[k], &AttackScript::Eavesdrop, seed).unwrap();
        prop_assert!(!out.success);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn dynamic_verdicts_do_not_depend_on_seed(k in 0usize..6, seed in any::<u64>()) {
        let kind = ProtocolKind::SECURE[k];
        let base = evaluate_dynamic(kind, 1).unwrap();
        let other = evaluate_dynamic(kind, seed).unwrap();
        for g in Goal::DYNAMIC {
            prop_assert_eq!(base.get(&g).map(|o| o.verdict), other.get(&g).map(|o| o.verdict), "{:?}", g);
        }
    }

    #[test]
    fn csv_is_byte_identical_for_equal_config(seed in any::<u64>()) {
        let mut cfg = preset("ap-wpa-loss20").unwrap();
        cfg.seed = seed;
        cfg.trials = 3;
        let a = emit_report(&run_benchmark(&cfg), ReportFormat::Csv).unwrap();
        let b = emit_report(&run_benchmark(&cfg), ReportFormat::Csv).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mean_time_is_monotone_in_loss(seed in 0u64..1000) {
        let mut means = Vec::new();
        for loss in [0.0, 0.2, 0.5, 0.7] {
            let mut cfg = preset("adhoc-loss20").unwrap();
            cfg.seed = seed;
            cfg.trials = 40;
            cfg.protocols = vec![ProtocolKind::PskMaster];
            cfg.link.loss_prob = loss;
            let recs = run_benchmark(&cfg);
            prop_assert!(recs.iter().all(|r| r.completed));
            means.push(recs.iter().filter_map(|r| r.establishment_virtual_us).sum::<u64>() as f64 / recs.len() as f64);
        }
        prop_assert!(means.windows(2).all(|w| w[0] <= w[1]), "{:?}", means);
    }
}
