use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::netsim::{CryptoCostModel, LinkModel, Topology, DEFAULT_HORIZON_US};
use crate::protocols::RetransmitPolicy;
use crate::{NodeId, ProtocolKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostPreset {
    Reference,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Named(CostPreset),
    Explicit(CryptoCostModel),
}

impl CostSpec {
    pub fn resolve(self) -> CryptoCostModel {
        match self {
            CostSpec::Named(CostPreset::Reference) => CryptoCostModel::reference(),
            CostSpec::Named(CostPreset::Zero) => CryptoCostModel::zero(),
            CostSpec::Explicit(m) => m,
        }
    }
}

/// Replaces the default channel on one testbed link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub a: NodeId,
    pub b: NodeId,
    pub link: LinkModel,
}

/// A benchmark campaign over the alice/bob/server testbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub protocols: Vec<ProtocolKind>,
    /// Channel on every link; its mode picks ad-hoc mesh or access point.
    pub link: LinkModel,
    #[serde(default)]
    pub link_overrides: Vec<LinkOverride>,
    pub crypto_costs: CostSpec,
    #[serde(default)]
    pub retransmit: RetransmitPolicy,
    pub trials: u32,
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon_us: u64,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON_US
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| BenchError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        let errors = cfg.violations();
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(BenchError::Validation(errors))
        }
    }

    /// Every violated constraint, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(format!("schema_version: expected {SCHEMA_VERSION}, found {}", self.schema_version));
        }
        if self.protocols.is_empty() {
            v.push("protocols: at least one protocol is required".into());
        }
        for (i, p) in self.protocols.iter().enumerate() {
            if self.protocols[..i].contains(p) {
                v.push(format!("protocols[{i}]: {} listed twice", p.name()));
            }
        }
        if self.trials == 0 {
            v.push("trials: must be at least 1".into());
        }
        if self.horizon_us == 0 {
            v.push("horizon_us: must be positive".into());
        }
        v.extend(self.link.violations("link"));
        let base = Topology::testbed(self.link);
        for (i, o) in self.link_overrides.iter().enumerate() {
            let at = format!("link_overrides[{i}]");
            if base.link(o.a, o.b).is_none() {
                v.push(format!("{at}: no {}-{} link in the {:?} testbed", o.a, o.b, self.link.mode));
            }
            v.extend(o.link.violations(&format!("{at}.link")));
        }
        let r = &self.retransmit;
        for (field, value) in [
            ("one_way_estimate_us", r.one_way_estimate_us),
            ("timeout_factor", r.timeout_factor),
            ("backoff_factor", r.backoff_factor),
            ("backoff_cap", r.backoff_cap),
        ] {
            if value == 0 {
                v.push(format!("retransmit.{field}: must be positive"));
            }
        }
        v
    }

    /// Refuses the unfixed negative-control variants unless allowed.
    pub fn check_insecure(&self, allow_insecure: bool) -> Result<(), BenchError> {
        if allow_insecure {
            return Ok(());
        }
        let bad: Vec<String> = self
            .protocols
            .iter()
            .enumerate()
            .filter(|(_, p)| !ProtocolKind::SECURE.contains(p))
            .map(|(i, p)| format!("protocols[{i}]: {} is an insecure variant; pass --allow-insecure", p.name()))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(BenchError::Validation(bad))
        }
    }

    pub fn topology(&self) -> Topology {
        let mut t = Topology::testbed(self.link);
        for o in &self.link_overrides {
            if let Some(l) = t.link_mut(o.a, o.b) {
                *l = LinkModel { mode: self.link.mode, ..o.link };
            }
        }
        t
    }

    pub fn costs(&self) -> CryptoCostModel {
        self.crypto_costs.resolve()
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io { path: path.display().to_string(), message: e.to_string() })?;
    ScenarioConfig::from_json(&text)
}

const PRESET_SOURCES: [(&str, &str); 6] = [
    ("table2-default", include_str!("../../presets/table2-default.json")),
    ("adhoc-ipsec-loss0", include_str!("../../presets/adhoc-ipsec-loss0.json")),
    ("adhoc-loss20", include_str!("../../presets/adhoc-loss20.json")),
    ("adhoc-wep-loss50", include_str!("../../presets/adhoc-wep-loss50.json")),
    ("adhoc-wpa-loss70", include_str!("../../presets/adhoc-wpa-loss70.json")),
    ("ap-wpa-loss20", include_str!("../../presets/ap-wpa-loss20.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESET_SOURCES.iter().map(|(n, _)| *n)
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESET_SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<ScenarioConfig, BenchError> {
    let src = preset_source(name).ok_or_else(|| BenchError::UnknownPreset(name.to_string()))?;
    ScenarioConfig::from_json(src)
}
