//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use awn_core::adversary::{honest_run, run_attack, AttackScript};
use awn_core::bench::{check_ordering, datagram_transmissions, preset, run_campaign, summarize};
use awn_core::goals::{goal_report, Column, Goal, Symbol, TABLE1_FIXTURE_SHA256};
use awn_core::{NodeId, ProtocolKind};
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_awnbench"))
}

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    if took > limit {
        Err(format!("{detail}; took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(format!("{detail} ({took:.2?})"))
    }
}

fn table_cells(md: &str) -> Vec<Vec<String>> {
    md.lines()
        .skip(2)
        .map(|l| l.trim().trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
        .collect()
}

fn table_fidelity() -> Outcome {
    let t = Instant::now();
    let out = bin().args(["goals", "--all"]).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit status {}", out.status));
    }
    let fixture = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/table1.md")).map_err(|e| e.to_string())?;
    let digest = hex::encode(Sha256::digest(fixture.as_bytes()));
    if digest != TABLE1_FIXTURE_SHA256 {
        return Err(format!("fixture checksum {digest} differs from the pinned value"));
    }
    let got = table_cells(&String::from_utf8_lossy(&out.stdout));
    let want = table_cells(&fixture);
    if got.len() != 13 || want.len() != 13 {
        return Err(format!("expected 13 goal rows, got {} and {}", got.len(), want.len()));
    }
    let mut matched = 0;
    for (g, w) in got.iter().zip(&want) {
        if g.len() != 8 || w.len() != 8 || g[0] != w[0] {
            return Err(format!("malformed row {g:?}"));
        }
        for (a, b) in g[1..].iter().zip(&w[1..]) {
            if a != b || Symbol::parse(a).is_none() {
                return Err(format!("{} cell {a:?} differs from fixture {b:?}", g[0]));
            }
            matched += 1;
        }
    }
    within(Duration::from_secs(1), t, format!("{matched}/91 cells match the fixture"))
}

fn reconciliation() -> Outcome {
    let t = Instant::now();
    let seeds = [1u64, 2, 3, 4, 5];
    let mut conflicts = Vec::new();
    let mut variance = Vec::new();
    for column in Column::ALL {
        let mut per_seed: BTreeMap<Goal, BTreeSet<&str>> = BTreeMap::new();
        for seed in seeds {
            let report = goal_report(column, &[seed]).map_err(|e| e.to_string())?;
            for d in &report.discrepancies {
                conflicts.push(format!("{} {} seed {seed}: claimed {}, observed {}", column.header(), d.goal, d.claimed, d.observed));
            }
            for cell in &report.cells {
                if let Some(o) = &cell.observed {
                    per_seed.entry(cell.goal).or_default().insert(o.verdict.symbol.as_str());
                }
            }
        }
        for (goal, symbols) in per_seed {
            if symbols.len() > 1 {
                variance.push(format!("{} {goal} varies across seeds", column.header()));
            }
        }
    }
    if !variance.is_empty() {
        return Err(variance.join("; "));
    }
    if !conflicts.is_empty() {
        return Err(format!("{} hard contradictions: {}", conflicts.len(), conflicts.join("; ")));
    }
    within(Duration::from_secs(30), t, "7 columns x 5 seeds, no hard contradictions".into())
}

fn negative_controls() -> Outcome {
    let t = Instant::now();
    let cases = [
        (ProtocolKind::TkdfAsymUnfixed, AttackScript::LoweMitm, true),
        (ProtocolKind::TkdfAsym, AttackScript::LoweMitm, false),
        (ProtocolKind::TkdfSymUnfixed, AttackScript::Replay { compromised_old_key: true }, true),
        (ProtocolKind::TkdfSym, AttackScript::Replay { compromised_old_key: true }, false),
    ];
    for (kind, script, expected) in cases {
        for seed in 1..=3 {
            let a = run_attack(kind, &script, seed).map_err(|e| e.to_string())?;
            let b = run_attack(kind, &script, seed).map_err(|e| e.to_string())?;
            if a.success != expected {
                return Err(format!("{script} vs {} seed {seed}: success = {}", kind.name(), a.success));
            }
            if serde_json::to_string(&a).ok() != serde_json::to_string(&b).ok() {
                return Err(format!("{script} vs {} seed {seed} is not deterministic", kind.name()));
            }
        }
    }
    within(Duration::from_secs(10), t, "Lowe and replay succeed only against the unfixed flows".into())
}

fn ordering() -> Outcome {
    let t = Instant::now();
    let cfg = preset("table2-default").map_err(|e| e.to_string())?;
    if cfg.trials != 100 || cfg.link.loss_prob != 0.0 || cfg.link.latency_jitter_us != 0 {
        return Err("table2-default is not a 100-trial loss-free jitter-free preset".into());
    }
    let records: Vec<_> = run_campaign(&cfg).into_iter().map(|r| r.record).collect();
    let check = check_ordering(&summarize(&records)).map_err(|e| e.to_string())?;
    let chain: Vec<String> = check.chain.iter().map(|(l, v)| format!("{l} {:.3} ms", v / 1000.0)).collect();
    if !check.pass {
        return Err(format!("{}: {}", chain.join(" < "), check.broken.join("; ")));
    }
    within(Duration::from_secs(60), t, chain.join(" < "))
}

fn monte_carlo_transmissions(p: f64, datagrams: u32) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6c6f7373);
    let mut sent = 0u64;
    for _ in 0..datagrams {
        loop {
            sent += 1;
            if rng.gen::<f64>() >= p {
                break;
            }
        }
    }
    sent as f64 / datagrams as f64
}

fn loss_survival() -> Outcome {
    let t = Instant::now();
    let presets = [("adhoc-ipsec-loss0", 0.0), ("adhoc-loss20", 0.2), ("adhoc-wep-loss50", 0.5), ("adhoc-wpa-loss70", 0.7)];
    let mut means: BTreeMap<ProtocolKind, Vec<f64>> = BTreeMap::new();
    let mut ratio_at_half = None;
    for (name, loss) in presets {
        let cfg = preset(name).map_err(|e| e.to_string())?;
        if cfg.link.loss_prob != loss || cfg.trials != 100 {
            return Err(format!("{name} does not carry loss {loss} over 100 trials"));
        }
        let runs = run_campaign(&cfg);
        let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
        for s in summarize(&records) {
            if s.completed != 100 {
                return Err(format!("{name}: {} completed {}/100", s.protocol.name(), s.completed));
            }
            means.entry(s.protocol).or_default().push(s.mean_us.unwrap_or(f64::NAN));
        }
        if loss == 0.5 {
            let (sent, delivered) = runs.iter().map(|r| datagram_transmissions(&r.transcript)).fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            ratio_at_half = Some(sent as f64 / delivered as f64);
        }
    }
    for (kind, m) in &means {
        if m.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("{} means not monotone in loss: {m:?}", kind.name()));
        }
    }
    let expected = 1.0 / (1.0 - 0.5);
    let oracle = monte_carlo_transmissions(0.5, 200_000);
    if (oracle - expected).abs() > 0.02 {
        return Err(format!("Monte Carlo oracle {oracle:.4} disagrees with 1/(1-p) = {expected}"));
    }
    let ratio = ratio_at_half.ok_or("no loss-0.5 run")?;
    if (ratio - oracle).abs() / oracle > 0.25 {
        return Err(format!("transmissions per datagram {ratio:.3} outside 25% of {oracle:.3}"));
    }
    within(
        Duration::from_secs(60),
        t,
        format!("600/600 per preset, means monotone, {ratio:.3} transmissions per datagram at p = 0.5 (oracle {oracle:.3})"),
    )
}

fn correctness() -> Outcome {
    let t = Instant::now();
    let (alice, bob) = (NodeId::named("alice"), NodeId::named("bob"));
    for kind in ProtocolKind::ALL {
        let mut keys = BTreeSet::new();
        for seed in 0..1_000u64 {
            let h = honest_run(kind, seed);
            let (a, b) = match (h.session_of(alice), h.session_of(bob)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(format!("{} seed {seed} did not establish", kind.name())),
            };
            if a.key != b.key || a.peer != bob || b.peer != alice {
                return Err(format!("{} seed {seed}: keys or peers disagree", kind.name()));
            }
            keys.insert(a.key.as_bytes().to_vec());
        }
        let expected = if matches!(kind, ProtocolKind::PskDirect | ProtocolKind::PskNetLayer) { 1 } else { 1_000 };
        if keys.len() != expected {
            return Err(format!("{}: {} distinct keys, expected {expected}", kind.name(), keys.len()));
        }
        for seed in [3u64, 17, 99] {
            let x = honest_run(kind, seed).captured;
            let y = honest_run(kind, seed).captured;
            if x != y {
                return Err(format!("{} seed {seed}: action sequences differ", kind.name()));
            }
        }
    }
    within(Duration::from_secs(60), t, "8 kinds x 1000 runs agree; freshness and determinism hold".into())
}

fn reproducibility() -> Outcome {
    let t = Instant::now();
    let dir = std::env::temp_dir().join(format!("awnbench-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for name in ["table2-default", "ap-wpa-loss20"] {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let csv = dir.join(format!("{name}-{round}.csv"));
            let tr = dir.join(format!("{name}-{round}.jsonl"));
            let status = bin()
                .args(["run", "--preset", name, "--seed", "42", "--format", "csv", "--out"])
                .arg(&csv)
                .arg("--dump-transcript")
                .arg(&tr)
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("{name}: exit status {status}"));
            }
            let c = std::fs::read(&csv).map_err(|e| e.to_string())?;
            let j = std::fs::read(&tr).map_err(|e| e.to_string())?;
            outputs.push((c, j));
        }
        if outputs[0].0 != outputs[1].0 {
            return Err(format!("{name}: CSV reports differ"));
        }
        if outputs[0].1 != outputs[1].1 {
            return Err(format!("{name}: transcripts differ"));
        }
        if outputs[0].0.is_empty() || outputs[0].1.is_empty() {
            return Err(format!("{name}: empty output"));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    within(Duration::from_secs(60), t, "two runs per campaign are byte-identical".into())
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("table fidelity", table_fidelity),
        ("static/dynamic reconciliation", reconciliation),
        ("negative controls", negative_controls),
        ("ordering reproduction", ordering),
        ("loss-scenario survival", loss_survival),
        ("protocol correctness properties", correctness),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
