use super::*;
use crate::ProtocolKind;

#[test]
fn fixture_checksum_is_pinned() {
    use sha2::{Digest, Sha256};
    assert_eq!(hex::encode(Sha256::digest(TABLE1_FIXTURE.as_bytes())), TABLE1_FIXTURE_SHA256);
}

#[test]
fn rendered_matrix_equals_fixture() {
    assert_eq!(render_static_markdown(&static_matrix()), TABLE1_FIXTURE);
}

#[test]
fn symbols_round_trip() {
    for s in [Symbol::Meets, Symbol::Conditional, Symbol::Fails, Symbol::Implicit] {
        assert_eq!(Symbol::parse(s.as_str()), Some(s));
    }
    assert_eq!(Symbol::parse("x"), None);
}

#[test]
fn only_definite_symbols_conflict() {
    assert!(Symbol::Meets.conflicts_with(Symbol::Fails));
    assert!(Symbol::Fails.conflicts_with(Symbol::Meets));
    assert!(!Symbol::Implicit.conflicts_with(Symbol::Fails));
    assert!(!Symbol::Conditional.conflicts_with(Symbol::Fails));
    assert!(!Symbol::Meets.conflicts_with(Symbol::Meets));
}

#[test]
fn goals_parse() {
    assert_eq!("G10".parse::<Goal>().unwrap(), Goal::G10);
    assert_eq!("g1".parse::<Goal>().unwrap(), Goal::G1);
    assert!("G14".parse::<Goal>().is_err());
    assert!("G0".parse::<Goal>().is_err());
}

#[test]
fn every_secure_kind_has_a_column() {
    for k in ProtocolKind::SECURE {
        assert!(!Column::for_kind(k).is_empty(), "{k:?}");
    }
    assert!(Column::for_kind(ProtocolKind::TkdfSymUnfixed).is_empty());
}

#[test]
fn dynamic_and_structural_goals_partition_the_table() {
    let mut all: Vec<Goal> = Goal::DYNAMIC.iter().chain(Goal::STRUCTURAL.iter()).copied().collect();
    all.sort();
    assert_eq!(all, Goal::ALL.to_vec());
}

#[test]
fn structural_verdicts_never_contradict_claims() {
    for c in Column::ALL {
        let obs = evaluate_structural(c.representative(), 1);
        let (_, d) = reconcile(c, &obs);
        assert!(d.is_empty(), "{c:?}: {d:?}");
    }
}

#[test]
fn unfixed_variants_fail_the_goals_their_attacks_target() {
    let sym = evaluate_dynamic(ProtocolKind::TkdfSymUnfixed, 1).unwrap();
    assert_eq!(sym[&Goal::G5].verdict.symbol, Symbol::Fails);
    let asym = evaluate_dynamic(ProtocolKind::TkdfAsymUnfixed, 1).unwrap();
    assert_eq!(asym[&Goal::G1].verdict.symbol, Symbol::Fails);
    assert_eq!(asym[&Goal::G8].verdict.symbol, Symbol::Fails);
}

#[test]
fn report_covers_every_goal() {
    let r = goal_report(Column::Ssh, &[1, 2]).unwrap();
    assert_eq!(r.cells.len(), 13);
    assert!(r.cells.iter().all(|c| c.observed.is_some()));
    assert!(r.discrepancies.is_empty(), "{:?}", r.discrepancies);
}

#[test]
fn matrix_spot_checks() {
    let m = static_matrix();
    assert_eq!(m[Goal::G6.index()][Column::Wep.index()], Symbol::Meets);
    assert_eq!(m[Goal::G9.index()][Column::IpSec.index()], Symbol::Meets);
    assert_eq!(m[Goal::G9.index()][Column::WpaPsk.index()], Symbol::Fails);
    assert_eq!(m[Goal::G1.index()][Column::Ssh.index()], Symbol::Conditional);
}

#[test]
fn reconcile_flags_only_hard_conflicts() {
    let meets = |g| Observation {
        goal: g,
        verdict: Verdict { symbol: Symbol::Meets, origin: Origin::DynamicAttack },
        scripts: vec![],
        note: String::new(),
    };
    let agreeing: std::collections::BTreeMap<_, _> = [(Goal::G6, meets(Goal::G6))].into();
    assert!(reconcile(Column::Wep, &agreeing).1.is_empty());
    let conflicting: std::collections::BTreeMap<_, _> = [(Goal::G5, meets(Goal::G5))].into();
    let (_, d) = reconcile(Column::Wep, &conflicting);
    assert_eq!(d.len(), 1);
    assert_eq!((d[0].claimed, d[0].observed), (Symbol::Fails, Symbol::Meets));
    let implicit: std::collections::BTreeMap<_, _> = [(Goal::G13, meets(Goal::G13))].into();
    assert!(reconcile(Column::Wep, &implicit).1.is_empty());
}

#[test]
fn dynamic_examples() {
    let sts = evaluate_dynamic(ProtocolKind::OnDemandSts, 1).unwrap();
    assert_eq!(sts[&Goal::G10].verdict.symbol, Symbol::Meets);
    let wep = evaluate_dynamic(ProtocolKind::PskDirect, 1).unwrap();
    assert_eq!(wep[&Goal::G5].verdict.symbol, Symbol::Fails);
    assert!(!wep.contains_key(&Goal::G8));
    let sym = evaluate_dynamic(ProtocolKind::TkdfSym, 1).unwrap();
    assert_eq!(sym[&Goal::G6].verdict.symbol, Symbol::Meets);
    assert!(sym.values().all(|o| o.verdict.origin == Origin::DynamicAttack));
}
