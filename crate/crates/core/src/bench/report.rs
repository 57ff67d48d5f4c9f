use std::fmt::Write;

use serde::Serialize;

use super::{BenchError, MeasurementRecord};
use crate::{Family, ProtocolKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

/// A published establishment-time row. Used for ordering only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub protocol: &'static str,
    pub key_type: &'static str,
    pub key_bits: u16,
    pub establishment_ms: f64,
    pub analog: ProtocolKind,
}

pub const REFERENCE_ROWS: [ReferenceRow; 7] = [
    ReferenceRow { protocol: "WEP", key_type: "RC4", key_bits: 128, establishment_ms: 2.42, analog: ProtocolKind::PskDirect },
    ReferenceRow { protocol: "WPA", key_type: "AES", key_bits: 128, establishment_ms: 2.55, analog: ProtocolKind::PskMaster },
    ReferenceRow { protocol: "IPSec", key_type: "AES", key_bits: 256, establishment_ms: 2.67, analog: ProtocolKind::PskNetLayer },
    ReferenceRow {
        protocol: "Symmetric TKDF",
        key_type: "AES",
        key_bits: 256,
        establishment_ms: 5092.88,
        analog: ProtocolKind::TkdfSym,
    },
    ReferenceRow {
        protocol: "Asymmetric TKDF",
        key_type: "RSA",
        key_bits: 2048,
        establishment_ms: 14447.63,
        analog: ProtocolKind::TkdfAsym,
    },
    ReferenceRow { protocol: "SSH", key_type: "RSA", key_bits: 2048, establishment_ms: 911.21, analog: ProtocolKind::OnDemandSts },
    ReferenceRow { protocol: "SSL", key_type: "RSA", key_bits: 2048, establishment_ms: 1310.93, analog: ProtocolKind::OnDemandSts },
];

/// Per-protocol statistics over completed trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSummary {
    pub protocol: ProtocolKind,
    pub trials: usize,
    pub completed: usize,
    pub mean_us: Option<f64>,
    pub std_us: Option<f64>,
    pub min_us: Option<u64>,
    pub max_us: Option<u64>,
}

/// Summaries in first-appearance order of each protocol.
pub fn summarize(records: &[MeasurementRecord]) -> Vec<ProtocolSummary> {
    let mut order: Vec<ProtocolKind> = Vec::new();
    for r in records {
        if !order.contains(&r.protocol) {
            order.push(r.protocol);
        }
    }
    order
        .into_iter()
        .map(|protocol| {
            let mine: Vec<&MeasurementRecord> = records.iter().filter(|r| r.protocol == protocol).collect();
            let times: Vec<u64> = mine.iter().filter_map(|r| r.establishment_virtual_us).collect();
            let n = times.len();
            let mean = (n > 0).then(|| times.iter().map(|&t| t as f64).sum::<f64>() / n as f64);
            let std = mean.map(|m| {
                if n < 2 {
                    0.0
                } else {
                    (times.iter().map(|&t| (t as f64 - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            ProtocolSummary {
                protocol,
                trials: mine.len(),
                completed: n,
                mean_us: mean,
                std_us: std,
                min_us: times.iter().min().copied(),
                max_us: times.iter().max().copied(),
            }
        })
        .collect()
}

pub const CSV_COLUMNS: [&str; 8] = [
    "protocol",
    "trial",
    "establishment_virtual_us",
    "crypto_wallclock_us",
    "messages_sent",
    "retransmissions",
    "bytes_on_air",
    "completed",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn ms(us: Option<f64>) -> String {
    us.map(|u| format!("{:.3}", u / 1_000.0)).unwrap_or_else(|| "-".into())
}

pub fn emit_report(records: &[MeasurementRecord], format: ReportFormat) -> Result<Vec<u8>, BenchError> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_COLUMNS)?;
            for r in records {
                w.write_record([
                    r.protocol.name().to_string(),
                    r.trial.to_string(),
                    opt(r.establishment_virtual_us),
                    opt(r.crypto_wallclock_us),
                    r.messages_sent.to_string(),
                    r.retransmissions.to_string(),
                    r.bytes_on_air.to_string(),
                    r.completed.to_string(),
                ])?;
            }
            w.into_inner().map_err(|e| BenchError::Report(e.to_string()))
        }
        ReportFormat::Json => {
            let body = serde_json::json!({ "records": records, "summary": summarize(records) });
            let mut out = serde_json::to_vec_pretty(&body).map_err(|e| BenchError::Report(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Md => Ok(render_markdown(&summarize(records)).into_bytes()),
    }
}

fn render_markdown(summary: &[ProtocolSummary]) -> String {
    let mut out = String::from(
        "| Reference row | Implementation | Key type | Key size (bits) | Trials | Completed | mean_ms | std_ms | paper_ms |\n\
         |---|---|---|---|---|---|---|---|---|\n",
    );
    for s in summary {
        let refs: Vec<&ReferenceRow> = REFERENCE_ROWS.iter().filter(|r| r.analog == s.protocol).collect();
        let line = |out: &mut String, row: &str, ktype: &str, kbits: String, published: String| {
            writeln!(
                out,
                "| {row} | {} | {ktype} | {kbits} | {} | {} | {} | {} | {published} |",
                s.protocol.name(),
                s.trials,
                s.completed,
                ms(s.mean_us),
                ms(s.std_us),
            )
            .expect("string write");
        };
        if refs.is_empty() {
            line(&mut out, "-", "-", "-".into(), "-".into());
        }
        for r in refs {
            line(&mut out, r.protocol, r.key_type, r.key_bits.to_string(), format!("{:.2}", r.establishment_ms));
        }
    }
    out
}

/// The strict chain PSK group < on-demand < symmetric TKDF < asymmetric TKDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub pass: bool,
    pub chain: Vec<(String, f64)>,
    /// Every adjacent pair that is not strictly increasing.
    pub broken: Vec<String>,
}

fn strict_chain(chain: Vec<(String, f64)>) -> OrderingCheck {
    let broken: Vec<String> = chain
        .windows(2)
        .filter(|w| w[0].1 >= w[1].1)
        .map(|w| format!("{} ({:.3}) is not below {} ({:.3})", w[0].0, w[0].1, w[1].0, w[1].1))
        .collect();
    OrderingCheck { pass: broken.is_empty(), chain, broken }
}

const CHAIN: [(Family, &str); 4] = [
    (Family::PreShared, "PSK group"),
    (Family::OnDemand, "on-demand STS"),
    (Family::SymmetricTkdf, "symmetric TKDF"),
    (Family::AsymmetricTkdf, "asymmetric TKDF"),
];

/// Pooled mean establishment time per family, secure variants only.
pub fn check_ordering(summary: &[ProtocolSummary]) -> Result<OrderingCheck, BenchError> {
    let mut chain = Vec::new();
    let mut missing = Vec::new();
    for (family, label) in CHAIN {
        let (sum, n) = summary
            .iter()
            .filter(|s| s.protocol.family() == family && ProtocolKind::SECURE.contains(&s.protocol))
            .filter_map(|s| Some((s.mean_us? * s.completed as f64, s.completed)))
            .fold((0.0, 0usize), |(a, b), (x, y)| (a + x, b + y));
        if n == 0 {
            missing.push(label.to_string());
        } else {
            chain.push((label.to_string(), sum / n as f64));
        }
    }
    if !missing.is_empty() {
        return Err(BenchError::IncompleteSummary(missing));
    }
    Ok(strict_chain(chain))
}

/// The same chain over the published rows, with SSH and SSL kept apart.
pub fn check_reference_ordering() -> OrderingCheck {
    let get = |p: &str| REFERENCE_ROWS.iter().find(|r| r.protocol == p).expect("known row").establishment_ms;
    let psk = REFERENCE_ROWS.iter().filter(|r| r.analog.family() == Family::PreShared).map(|r| r.establishment_ms).fold(f64::MIN, f64::max);
    strict_chain(vec![
        ("PSK group".into(), psk),
        ("SSH".into(), get("SSH")),
        ("SSL".into(), get("SSL")),
        ("Symmetric TKDF".into(), get("Symmetric TKDF")),
        ("Asymmetric TKDF".into(), get("Asymmetric TKDF")),
    ])
}
