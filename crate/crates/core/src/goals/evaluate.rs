use std::collections::BTreeMap;

use serde::Serialize;

use super::{static_matrix, Column, Goal, Origin, Symbol, Verdict};
use crate::adversary::{Knowledge, honest_keystore, honest_run, run_attack, AttackError, AttackScript};
use crate::protocols::{Contributors, Role};
use crate::{Family, NodeId, ProtocolKind};

/// One observed verdict with the runs behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub goal: Goal,
    pub verdict: Verdict,
    pub scripts: Vec<String>,
    pub note: String,
}

fn observe(goal: Goal, origin: Origin, meets: bool, scripts: Vec<String>, note: impl Into<String>) -> Observation {
    let symbol = if meets { Symbol::Meets } else { Symbol::Fails };
    Observation { goal, verdict: Verdict { symbol, origin }, scripts, note: note.into() }
}

fn attack(kind: ProtocolKind, script: AttackScript, seed: u64) -> Result<(String, bool), AttackError> {
    let out = run_attack(kind, &script, seed)?;
    Ok((script.name().to_string(), out.success))
}

fn attacks(kind: ProtocolKind, scripts: Vec<AttackScript>, seed: u64) -> Result<(Vec<String>, Vec<String>), AttackError> {
    let mut ran = Vec::new();
    let mut won = Vec::new();
    for s in scripts {
        let (name, success) = attack(kind, s, seed)?;
        if success {
            won.push(name.clone());
        }
        ran.push(name);
    }
    Ok((ran, won))
}

fn summary(won: &[String]) -> String {
    if won.is_empty() {
        "all attacks failed".into()
    } else {
        format!("succeeded: {}", won.join(", "))
    }
}

/// Runs the attack scripts bound to the dynamic goals. Goals with no
/// applicable script for `kind` are absent from the result.
pub fn evaluate_dynamic(kind: ProtocolKind, seed: u64) -> Result<BTreeMap<Goal, Observation>, AttackError> {
    let asym = kind.family() == Family::AsymmetricTkdf;
    let dynamic = |goal, scripts: Vec<AttackScript>| -> Result<Observation, AttackError> {
        let (ran, won) = attacks(kind, scripts, seed)?;
        Ok(observe(goal, Origin::DynamicAttack, won.is_empty(), ran, summary(&won)))
    };
    let mut out = BTreeMap::new();

    let mut g1 = vec![
        AttackScript::OutsiderImpersonation { target: Role::Initiator },
        AttackScript::OutsiderImpersonation { target: Role::Responder },
    ];
    if asym {
        g1.push(AttackScript::LoweMitm);
    }
    out.insert(Goal::G1, dynamic(Goal::G1, g1)?);

    let first = honest_run(kind, seed);
    let second = honest_run(kind, seed.wrapping_add(1));
    let alice = NodeId::named("alice");
    let bob = NodeId::named("bob");
    let key = |h: &crate::adversary::Harness, n| h.session_of(n).map(|m| m.key.as_bytes().to_vec());

    let mut fresh_scripts = vec!["honest-rerun".to_string()];
    let mut fresh_won = Vec::new();
    match (key(&first, alice), key(&second, alice)) {
        (Some(k1), Some(k2)) if k1 != k2 => {}
        (Some(_), Some(_)) => fresh_won.push("honest-rerun repeats the session key".to_string()),
        _ => fresh_won.push("honest-rerun did not establish".to_string()),
    }
    if kind.family() == Family::SymmetricTkdf {
        let (ran, won) = attacks(kind, vec![AttackScript::Replay { compromised_old_key: true }], seed)?;
        fresh_scripts.extend(ran);
        fresh_won.extend(won);
    }
    out.insert(Goal::G5, observe(Goal::G5, Origin::DynamicAttack, fresh_won.is_empty(), fresh_scripts, summary(&fresh_won)));

    let confirmed = matches!((key(&first, alice), key(&first, bob)), (Some(a), Some(b)) if a == b)
        && first.session_of(alice).map(|m| m.peer) == Some(bob)
        && first.session_of(bob).map(|m| m.peer) == Some(alice);
    let note = if confirmed { "both ends hold the same key for each other" } else { "honest run did not confirm" };
    out.insert(Goal::G6, observe(Goal::G6, Origin::DynamicAttack, confirmed, vec!["honest".into()], note));

    let mut g8 = Vec::new();
    if matches!(kind.family(), Family::AsymmetricTkdf | Family::OnDemand) {
        g8.push(AttackScript::UnknownKeyShare);
    }
    if asym {
        g8.push(AttackScript::LoweMitm);
    }
    if !g8.is_empty() {
        out.insert(Goal::G8, dynamic(Goal::G8, g8)?);
    }

    out.insert(Goal::G9, dynamic(Goal::G9, vec![AttackScript::KciImpersonation { compromised: alice }])?);
    out.insert(
        Goal::G10,
        dynamic(Goal::G10, vec![AttackScript::Eavesdrop, AttackScript::CompromiseAndDecryptPast { compromised: vec![alice, bob] }])?,
    );
    out.insert(Goal::G13, dynamic(Goal::G13, vec![AttackScript::PrivacyProbe])?);
    Ok(out)
}

/// Checks the goals that follow from protocol structure.
pub fn evaluate_structural(kind: ProtocolKind, seed: u64) -> BTreeMap<Goal, Observation> {
    let alice = NodeId::named("alice");
    let bob = NodeId::named("bob");
    let h = honest_run(kind, seed);
    let ks = honest_keystore(kind);
    let material = h.session_of(alice);
    let structural = |goal, meets, note: String| observe(goal, Origin::StaticStructural, meets, vec!["honest".into()], note);
    let mut out = BTreeMap::new();

    let asym_creds = ks.keypair.is_some();
    out.insert(Goal::G2, structural(Goal::G2, asym_creds, format!("public-key credentials: {asym_creds}")));

    let (both, who) = match material.map(|m| &m.contributors) {
        Some(Contributors::Fresh(set)) => {
            (set.contains(&alice) && set.contains(&bob), set.iter().map(|n| n.label()).collect::<Vec<_>>().join(", "))
        }
        Some(Contributors::PreProvisioned) => (false, "pre-provisioned".into()),
        None => (false, "no session".into()),
    };
    out.insert(Goal::G3, structural(Goal::G3, both, format!("contributors: {who}")));
    out.insert(Goal::G4, structural(Goal::G4, both, format!("contributors: {who}")));

    let reused = match material {
        Some(m) => {
            matches!(m.contributors, Contributors::PreProvisioned) || ks.symmetric.values().any(|k| k.as_slice() == m.key.as_bytes())
        }
        None => true,
    };
    out.insert(Goal::G7, structural(Goal::G7, !reused, format!("session key reuses long-term key: {reused}")));

    let signs = [alice, bob].iter().filter_map(|n| h.engine(*n)).all(|e| e.crypto_ops().sign > 0);
    let server_signs = h
        .engines()
        .any(|e| e.role() == Role::KeyServer && e.crypto_ops().sign > 0);
    let non_rep = asym_creds && (signs || server_signs);
    out.insert(Goal::G11, structural(Goal::G11, non_rep, format!("asymmetric credentials: {asym_creds}, signatures in run: {}", signs || server_signs)));

    let mut cleartext = Knowledge::new();
    for f in &h.captured {
        cleartext.observe(&f.bytes);
    }
    cleartext.close();
    let unbiased = match material.map(|m| (&m.contributors, m.key.as_bytes())) {
        Some((Contributors::PreProvisioned, _)) => true,
        Some((Contributors::Fresh(set), key)) => {
            let peers = set.iter().filter(|n| **n == alice || **n == bob).count();
            peers == 0 || (set.len() > 1 && !cleartext.knows(key))
        }
        None => false,
    };
    out.insert(Goal::G12, structural(Goal::G12, unbiased, "no single contribution is the key".into()));
    out
}

/// One table cell: the claim and what was observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoalCell {
    pub goal: Goal,
    pub title: &'static str,
    pub claimed: Verdict,
    pub observed: Option<Observation>,
}

/// A definite claim contradicted by a definite observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub column: Column,
    pub goal: Goal,
    pub claimed: Symbol,
    pub observed: Symbol,
    pub origin: Origin,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoalReport {
    pub column: Column,
    pub protocol: ProtocolKind,
    pub seeds: Vec<u64>,
    pub cells: Vec<GoalCell>,
    pub discrepancies: Vec<Discrepancy>,
}

/// Pairs each claimed verdict of `column` with its observation.
pub fn reconcile(column: Column, observed: &BTreeMap<Goal, Observation>) -> (Vec<GoalCell>, Vec<Discrepancy>) {
    let matrix = static_matrix();
    let mut cells = Vec::new();
    let mut discrepancies = Vec::new();
    for goal in Goal::ALL {
        let claimed = matrix[goal.index()][column.index()];
        let obs = observed.get(&goal).cloned();
        if let Some(o) = &obs {
            if claimed.conflicts_with(o.verdict.symbol) {
                discrepancies.push(Discrepancy {
                    column,
                    goal,
                    claimed,
                    observed: o.verdict.symbol,
                    origin: o.verdict.origin,
                    note: o.note.clone(),
                });
            }
        }
        cells.push(GoalCell {
            goal,
            title: goal.title(),
            claimed: Verdict { symbol: claimed, origin: Origin::StaticPaper },
            observed: obs,
        });
    }
    (cells, discrepancies)
}

/// Evaluates `column` under every seed. A dynamic goal is observed as
/// failing if any seed lets an attack through.
pub fn goal_report(column: Column, seeds: &[u64]) -> Result<GoalReport, AttackError> {
    let kind = column.representative();
    let first = seeds.first().copied().unwrap_or(0);
    let mut observed = evaluate_structural(kind, first);
    let mut dynamic: BTreeMap<Goal, Observation> = BTreeMap::new();
    for &seed in seeds {
        for (goal, obs) in evaluate_dynamic(kind, seed)? {
            match dynamic.get(&goal) {
                Some(prev) if prev.verdict.symbol == Symbol::Fails => {}
                _ => {
                    dynamic.insert(goal, obs);
                }
            }
        }
    }
    observed.extend(dynamic);
    let (cells, discrepancies) = reconcile(column, &observed);
    Ok(GoalReport { column, protocol: kind, seeds: seeds.to_vec(), cells, discrepancies })
}

impl GoalReport {
    pub fn to_markdown(&self) -> String {
        use std::fmt::Write;
        let mut out = format!("## {} ({})\n\n", self.column.header(), self.protocol.name());
        out.push_str("| Goal | Title | Claimed | Observed | Origin | Note |\n|---|---|---|---|---|---|\n");
        for c in &self.cells {
            let (sym, origin, note) = match &c.observed {
                Some(o) => (o.verdict.symbol.as_str(), serde_json::to_value(o.verdict.origin).ok(), o.note.as_str()),
                None => ("-", None, "not evaluated"),
            };
            let origin = origin.and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_else(|| "-".into());
            writeln!(out, "| {} | {} | {} | {sym} | {origin} | {note} |", c.goal, c.title, c.claimed.symbol).expect("string write");
        }
        if self.discrepancies.is_empty() {
            out.push_str("\nNo hard contradictions.\n");
        } else {
            out.push_str("\nHard contradictions:\n");
            for d in &self.discrepancies {
                writeln!(out, "- {}: claimed {}, observed {} ({})", d.goal, d.claimed, d.observed, d.note).expect("string write");
            }
        }
        out
    }
}
