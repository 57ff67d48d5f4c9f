use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkMode {
    AdHoc,
    AccessPoint,
}

/// Per-hop channel behaviour. Latencies are virtual microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    pub loss_prob: f64,
    pub latency_base_us: u64,
    #[serde(default)]
    pub latency_jitter_us: u64,
    #[serde(default = "default_mode")]
    pub mode: LinkMode,
}

fn default_mode() -> LinkMode {
    LinkMode::AdHoc
}

impl Default for LinkModel {
    fn default() -> Self {
        Self { loss_prob: 0.0, latency_base_us: 1_000, latency_jitter_us: 100, mode: LinkMode::AdHoc }
    }
}

impl LinkModel {
    pub fn lossless(latency_base_us: u64) -> Self {
        Self { loss_prob: 0.0, latency_base_us, latency_jitter_us: 0, mode: LinkMode::AdHoc }
    }

    pub fn with_loss(mut self, loss_prob: f64) -> Self {
        self.loss_prob = loss_prob;
        self
    }

    /// Every violated invariant, prefixed with `at`.
    pub fn violations(&self, at: &str) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.loss_prob) || self.loss_prob.is_nan() {
            v.push(format!("{at}.loss_prob: {} is outside [0, 1]", self.loss_prob));
        }
        if self.latency_base_us == 0 {
            v.push(format!("{at}.latency_base_us: must be positive"));
        }
        if self.latency_jitter_us >= self.latency_base_us && self.latency_base_us > 0 {
            v.push(format!(
                "{at}.latency_jitter_us: {} must be below latency_base_us {}",
                self.latency_jitter_us, self.latency_base_us
            ));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Peer,
    KeyServer,
    Relay,
}

/// Nodes and the radio links between them. Links are undirected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<NodeId, NodeRole>,
    links: BTreeMap<(NodeId, NodeId), LinkModel>,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b { (a, b) } else { (b, a) }
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, role: NodeRole) -> &mut Self {
        self.nodes.insert(id, role);
        self
    }

    pub fn connect(&mut self, a: NodeId, b: NodeId, link: LinkModel) -> Result<&mut Self, SimError> {
        for n in [a, b] {
            if !self.nodes.contains_key(&n) {
                return Err(SimError::UnknownNode(n));
            }
        }
        if a == b {
            return Err(SimError::Topology(format!("self-link on {a}")));
        }
        self.links.insert(key(a, b), link);
        Ok(self)
    }

    pub fn role(&self, id: NodeId) -> Option<NodeRole> {
        self.nodes.get(&id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, NodeRole)> + '_ {
        self.nodes.iter().map(|(k, v)| (*k, *v))
    }

    pub fn links(&self) -> impl Iterator<Item = ((NodeId, NodeId), &LinkModel)> {
        self.links.iter().map(|(k, v)| (*k, v))
    }

    pub fn link(&self, a: NodeId, b: NodeId) -> Option<&LinkModel> {
        self.links.get(&key(a, b))
    }

    pub fn link_mut(&mut self, a: NodeId, b: NodeId) -> Option<&mut LinkModel> {
        self.links.get_mut(&key(a, b))
    }

    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.links.keys().filter_map(move |&(x, y)| {
            if x == n {
                Some(y)
            } else if y == n {
                Some(x)
            } else {
                None
            }
        })
    }

    /// Fewest-hop route, ties broken by node order. Only relays and key
    /// servers forward traffic for others.
    pub fn path(&self, src: NodeId, dst: NodeId) -> Option<Vec<NodeId>> {
        if !self.nodes.contains_key(&src) || !self.nodes.contains_key(&dst) {
            return None;
        }
        let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut seen = BTreeSet::from([src]);
        let mut queue = VecDeque::from([src]);
        while let Some(n) = queue.pop_front() {
            if n == dst {
                let mut path = vec![dst];
                let mut cur = dst;
                while let Some(p) = prev.get(&cur) {
                    path.push(*p);
                    cur = *p;
                }
                path.reverse();
                return Some(path);
            }
            if n != src && self.role(n) == Some(NodeRole::Peer) {
                continue;
            }
            let mut next: Vec<NodeId> = self.neighbors(n).collect();
            next.sort();
            for m in next {
                if seen.insert(m) {
                    prev.insert(m, n);
                    queue.push_back(m);
                }
            }
        }
        None
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for ((a, b), link) in &self.links {
            v.extend(link.violations(&format!("links[{a}-{b}]")));
        }
        v
    }

    /// Two peers and a key server. Ad-hoc links are direct; access-point
    /// mode routes every frame through a relay named `ap`.
    pub fn testbed(link: LinkModel) -> Self {
        let (a, b, s) = (NodeId::named("alice"), NodeId::named("bob"), NodeId::named("server"));
        let mut t = Topology::new();
        t.add_node(a, NodeRole::Peer).add_node(b, NodeRole::Peer).add_node(s, NodeRole::KeyServer);
        match link.mode {
            LinkMode::AdHoc => {
                for (x, y) in [(a, b), (a, s), (b, s)] {
                    t.connect(x, y, link).expect("nodes exist");
                }
            }
            LinkMode::AccessPoint => {
                let ap = NodeId::named("ap");
                t.add_node(ap, NodeRole::Relay);
                for x in [a, b, s] {
                    t.connect(x, ap, link).expect("nodes exist");
                }
            }
        }
        t
    }
}
