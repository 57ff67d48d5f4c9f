use rayon::prelude::*;
use serde::Serialize;

use super::ScenarioConfig;
use crate::netsim::Simulator;
use crate::protocols::SessionIds;
use crate::wire::{FrameKind, Transcript};
use crate::{NodeId, ProtocolKind};

/// One handshake attempt. Establishment fields are absent unless completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasurementRecord {
    pub protocol: ProtocolKind,
    pub trial: u32,
    pub establishment_virtual_us: Option<u64>,
    pub crypto_wallclock_us: Option<u64>,
    pub messages_sent: u64,
    pub retransmissions: u64,
    pub bytes_on_air: u64,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRun {
    pub record: MeasurementRecord,
    pub transcript: Transcript,
}

pub fn testbed_ids(kind: ProtocolKind) -> SessionIds {
    SessionIds::new(NodeId::named("alice"), NodeId::named("bob"), kind.needs_server().then(|| NodeId::named("server")))
}

/// Runs one trial with seed `config.seed + trial`.
pub fn run_trial(config: &ScenarioConfig, kind: ProtocolKind, trial: u32) -> TrialRun {
    let seed = config.seed.wrapping_add(trial as u64);
    let costs = config.costs();
    let mut sim = Simulator::new(config.topology(), costs, seed).with_horizon(config.horizon_us);
    let ids = testbed_ids(kind);
    let report = sim.bind_session(kind, ids, seed, config.retransmit).and_then(|_| sim.run_until_idle());
    let stats = sim.stats();
    let done = report.ok().and_then(|r| if r.failures.is_empty() { r.completion_us(ids.initiator, ids.responder) } else { None });
    let record = MeasurementRecord {
        protocol: kind,
        trial,
        establishment_virtual_us: done,
        crypto_wallclock_us: (done.is_some() && costs.measure_wallclock).then_some(stats.wallclock.as_micros() as u64),
        messages_sent: stats.messages_sent,
        retransmissions: stats.retransmissions,
        bytes_on_air: sim.bytes_on_air(),
        completed: done.is_some(),
    };
    TrialRun { record, transcript: sim.transcript().clone() }
}

/// Every (protocol, trial) pair of the campaign, ordered by protocol as
/// listed and then by trial index.
pub fn run_campaign(config: &ScenarioConfig) -> Vec<TrialRun> {
    let jobs: Vec<(usize, ProtocolKind, u32)> = config
        .protocols
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| (0..config.trials).map(move |t| (i, k, t)))
        .collect();
    let mut runs: Vec<(usize, TrialRun)> = jobs.into_par_iter().map(|(i, k, t)| (i, run_trial(config, k, t))).collect();
    runs.sort_by_key(|(i, r)| (*i, r.record.trial));
    runs.into_iter().map(|(_, r)| r).collect()
}

pub fn run_benchmark(config: &ScenarioConfig) -> Vec<MeasurementRecord> {
    run_campaign(config).into_iter().map(|r| r.record).collect()
}

/// Datagram hop transmissions and how many of them were delivered.
pub fn datagram_transmissions(transcript: &Transcript) -> (u64, u64) {
    transcript
        .entries()
        .iter()
        .filter(|e| e.frame == FrameKind::Datagram)
        .fold((0, 0), |(sent, ok), e| (sent + 1, ok + e.delivered as u64))
}

/// All trials' transcripts as JSON lines, each trial preceded by a header
/// line.
pub fn transcripts_json_lines(runs: &[TrialRun]) -> String {
    let mut out = String::new();
    for r in runs {
        let header = serde_json::json!({ "protocol": r.record.protocol, "trial": r.record.trial });
        out.push_str(&header.to_string());
        out.push('\n');
        out.push_str(&r.transcript.to_json_lines());
    }
    out
}
