use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::kernel::SimTime;
use crate::mac::queue::{DEFAULT_MAX_RETRIES, DEFAULT_QUEUE_CAPACITY};
use crate::mac::HoppingSequence;
use crate::medium::{Position, DEFAULT_RANGE_M};
use crate::network::{NetworkConfig, NodeSpec, Role, ScenarioAction};
use crate::rpl::{LossConfig, RankConfig, TrickleConfig};
use crate::scheduling::{MinimalConfig, OrchestraConfig, SchedulerConfig};
use crate::NodeId;

const REFERENCE_JSON: &str = include_str!("../../scenarios/reference.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Orchestra,
    Minimal,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 2] = [SchedulerKind::Orchestra, SchedulerKind::Minimal];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Orchestra => "orchestra",
            SchedulerKind::Minimal => "minimal",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orchestra" => Ok(SchedulerKind::Orchestra),
            "minimal" => Ok(SchedulerKind::Minimal),
            other => Err(format!(
                "unknown scheduler {other:?} (expected orchestra or minimal)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerChoice {
    Orchestra,
    Minimal,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventEntry {
    RemoveNode {
        at: SimTime,
        node: NodeId,
    },
    ResetEnergy {
        at: SimTime,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl EventEntry {
    pub fn at(&self) -> SimTime {
        match self {
            EventEntry::RemoveNode { at, .. } | EventEntry::ResetEnergy { at, .. } => *at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacParams {
    pub queue_capacity: usize,
    pub max_retries: u8,
    /// Defaults to the beacon slotframe length under Orchestra, 397 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eb_period_slots: Option<u64>,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            max_retries: DEFAULT_MAX_RETRIES,
            eb_period_slots: None,
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}

fn default_range() -> f64 {
    DEFAULT_RANGE_M
}

fn default_app_period() -> u64 {
    1000
}

fn default_dis_interval() -> u64 {
    30_000
}

/// A complete experiment description, loaded from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub scheduler: SchedulerChoice,
    #[serde(default)]
    pub orchestra: OrchestraConfig,
    #[serde(default)]
    pub minimal: MinimalConfig,
    #[serde(default)]
    pub hopping_sequence: HoppingSequence,
    #[serde(default = "default_range")]
    pub tx_range_m: f64,
    #[serde(default = "default_range")]
    pub interference_range_m: f64,
    #[serde(default = "default_app_period")]
    pub app_period_ms: u64,
    /// DIS period while joined but unrouted; 0 disables solicitation.
    #[serde(default = "default_dis_interval")]
    pub dis_interval_ms: u64,
    pub duration_ms: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub events: Vec<EventEntry>,
    #[serde(default)]
    pub trickle: TrickleConfig,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub mac: MacParams,
}

impl Scenario {
    /// The bundled six-node scenario: node 3 as root, node 2 sending once a
    /// second, node 10 removed and energy reset at minute 3, eight minutes long.
    pub fn reference() -> Scenario {
        Scenario::from_json(REFERENCE_JSON).expect("bundled scenario is valid")
    }

    pub fn from_json(text: &str) -> Result<Scenario, ConfigError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn duration(&self) -> SimTime {
        SimTime(self.duration_ms)
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn root(&self) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|n| n.role == Role::Root)
            .map(|n| n.id)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes.is_empty() {
            return Err(ConfigError::invalid("scenario has no nodes"));
        }
        let roots = self.nodes.iter().filter(|n| n.role == Role::Root).count();
        if roots != 1 {
            return Err(ConfigError::invalid(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(ConfigError::invalid(format!("duplicate node id {}", n.id)));
            }
            if !Position::new(n.x, n.y).is_finite() {
                return Err(ConfigError::invalid(format!(
                    "node {} has a non-finite position",
                    n.id
                )));
            }
        }
        if self.duration_ms == 0 {
            return Err(ConfigError::invalid("duration_ms must be positive"));
        }
        if self.app_period_ms == 0 {
            return Err(ConfigError::invalid("app_period_ms must be positive"));
        }
        if !(self.tx_range_m > 0.0 && self.tx_range_m.is_finite()) {
            return Err(ConfigError::invalid("tx_range_m must be a positive number"));
        }
        if !(self.interference_range_m >= self.tx_range_m && self.interference_range_m.is_finite())
        {
            return Err(ConfigError::invalid(
                "interference_range_m must be at least tx_range_m",
            ));
        }
        for e in &self.events {
            if e.at().0 > self.duration_ms {
                return Err(ConfigError::invalid(format!(
                    "event at {} ms lies beyond the duration of {} ms",
                    e.at().0,
                    self.duration_ms
                )));
            }
            if let EventEntry::RemoveNode { node, .. } = e {
                if !ids.contains(node) {
                    return Err(ConfigError::invalid(format!(
                        "event removes unknown node {node}"
                    )));
                }
            }
        }
        if self.trickle.i_min_ms == 0 || self.trickle.k == 0 || self.trickle.doublings > 32 {
            return Err(ConfigError::invalid(
                "trickle needs i_min_ms > 0, k > 0 and at most 32 doublings",
            ));
        }
        if self.rank.rank_increment == 0 {
            return Err(ConfigError::invalid("rank_increment must be positive"));
        }
        if self.loss.max_missed_acks == 0 || self.loss.silence_ms == 0 {
            return Err(ConfigError::invalid(
                "loss detection thresholds must be positive",
            ));
        }
        if self.mac.queue_capacity == 0 || self.mac.max_retries == 0 {
            return Err(ConfigError::invalid(
                "queue_capacity and max_retries must be positive",
            ));
        }
        if self.mac.eb_period_slots == Some(0) {
            return Err(ConfigError::invalid("eb_period_slots must be positive"));
        }
        if self.minimal.slotframe_length == 0 {
            return Err(ConfigError::invalid(
                "minimal slotframe_length must be positive",
            ));
        }
        self.orchestra
            .validate(self.hopping_sequence.len())
            .map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// The scheduler a single run uses: the override if given, else the
    /// scenario's own choice when it names exactly one.
    pub fn resolve_scheduler(
        &self,
        requested: Option<SchedulerKind>,
    ) -> Result<SchedulerKind, ConfigError> {
        match (requested, self.scheduler) {
            (Some(k), _) => Ok(k),
            (None, SchedulerChoice::Orchestra) => Ok(SchedulerKind::Orchestra),
            (None, SchedulerChoice::Minimal) => Ok(SchedulerKind::Minimal),
            (None, SchedulerChoice::Both) => Err(ConfigError::invalid(
                "scenario does not pick a scheduler; pass one explicitly",
            )),
        }
    }

    pub fn scheduler_config(&self, kind: SchedulerKind) -> SchedulerConfig {
        match kind {
            SchedulerKind::Orchestra => SchedulerConfig::Orchestra(self.orchestra.clone()),
            SchedulerKind::Minimal => SchedulerConfig::Minimal(self.minimal),
        }
    }

    pub fn network_config(&self, kind: SchedulerKind) -> NetworkConfig {
        let mut cfg = NetworkConfig::new(self.scheduler_config(kind));
        cfg.hopping = self.hopping_sequence.clone();
        cfg.tx_range_m = self.tx_range_m;
        cfg.interference_range_m = self.interference_range_m;
        cfg.app_period_ms = self.app_period_ms;
        cfg.trickle = self.trickle;
        cfg.rank = self.rank;
        cfg.loss = self.loss;
        cfg.dis_interval_ms = self.dis_interval_ms;
        cfg.queue_capacity = self.mac.queue_capacity;
        cfg.max_retries = self.mac.max_retries;
        if let Some(p) = self.mac.eb_period_slots {
            cfg.eb_period_slots = p;
        }
        cfg
    }

    pub fn node_specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id,
                position: Position::new(n.x, n.y),
                role: n.role,
            })
            .collect()
    }

    /// Scripted actions in time order. Unlabelled energy resets are numbered.
    pub fn timed_actions(&self) -> Vec<(SimTime, ScenarioAction)> {
        let mut events: Vec<&EventEntry> = self.events.iter().collect();
        events.sort_by_key(|e| e.at());
        let mut resets = 0;
        events
            .into_iter()
            .map(|e| match e {
                EventEntry::RemoveNode { at, node } => (*at, ScenarioAction::RemoveNode(*node)),
                EventEntry::ResetEnergy { at, label } => {
                    resets += 1;
                    let label = label.clone().unwrap_or_else(|| format!("window{resets}"));
                    (*at, ScenarioAction::ResetEnergy { label })
                }
            })
            .collect()
    }

    /// Label of the window opened by the first energy reset.
    pub fn first_reset_label(&self) -> Option<String> {
        self.timed_actions().into_iter().find_map(|(_, a)| match a {
            ScenarioAction::ResetEnergy { label } => Some(label),
            ScenarioAction::RemoveNode(_) => None,
        })
    }

    pub fn removals(&self) -> Vec<(SimTime, NodeId)> {
        self.timed_actions()
            .into_iter()
            .filter_map(|(t, a)| match a {
                ScenarioAction::RemoveNode(n) => Some((t, n)),
                ScenarioAction::ResetEnergy { .. } => None,
            })
            .collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.orchestra.warnings(&self.node_ids())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json(extra: &str) -> String {
        format!(
            r#"{{"nodes":[{{"id":1,"x":0,"y":0,"role":"root"}},{{"id":2,"x":10,"y":0,"role":"sender"}}],
                "duration_ms":1000{extra}}}"#
        )
    }

    #[test]
    fn reference_scenario_loads() {
        let s = Scenario::reference();
        assert_eq!(s.root(), Some(3));
        assert_eq!(s.nodes.len(), 6);
        assert_eq!(s.duration_ms, 480_000);
        assert_eq!(s.removals(), vec![(SimTime(180_000), 10)]);
        assert_eq!(s.scheduler, SchedulerChoice::Both);
    }

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::from_json(&minimal_json("")).unwrap();
        assert_eq!(s.app_period_ms, 1000);
        assert_eq!(s.hopping_sequence.len(), 16);
        assert!(s.events.is_empty());
    }

    #[test]
    fn rejects_two_roots() {
        let j = r#"{"nodes":[{"id":1,"x":0,"y":0,"role":"root"},{"id":2,"x":1,"y":0,"role":"root"}],"duration_ms":10}"#;
        assert!(matches!(
            Scenario::from_json(j),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_event_after_end() {
        let j = minimal_json(r#","events":[{"action":"reset_energy","at":5000}]"#);
        assert!(matches!(
            Scenario::from_json(&j),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_unknown_fields() {
        let j = minimal_json(r#","bogus":1"#);
        assert!(matches!(Scenario::from_json(&j), Err(ConfigError::Json(_))));
    }

    #[test]
    fn resolves_scheduler() {
        let s = Scenario::from_json(&minimal_json("")).unwrap();
        assert!(s.resolve_scheduler(None).is_err());
        assert_eq!(
            s.resolve_scheduler(Some(SchedulerKind::Minimal)).unwrap(),
            SchedulerKind::Minimal
        );
        let s = Scenario::from_json(&minimal_json(r#","scheduler":"orchestra""#)).unwrap();
        assert_eq!(s.resolve_scheduler(None).unwrap(), SchedulerKind::Orchestra);
    }

    #[test]
    fn unlabelled_resets_are_numbered() {
        let j = minimal_json(
            r#","events":[{"action":"reset_energy","at":500},{"action":"reset_energy","at":100}]"#,
        );
        let s = Scenario::from_json(&j).unwrap();
        assert_eq!(s.first_reset_label().as_deref(), Some("window1"));
    }
}
