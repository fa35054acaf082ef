//! The simulated network: per-node TSCH/RPL stacks driven by the event kernel.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyLedger, EnergyRow, RadioState};
use crate::kernel::{Kernel, RngStream, SimTime, Target};
use crate::mac::queue::{DEFAULT_MAX_RETRIES, DEFAULT_QUEUE_CAPACITY};
use crate::mac::{
    plan_slot, EnhancedBeacon, Frame, FrameKind, HoppingSequence, Payload, Peer, QueueKey,
    Schedule, SlotAction, SlotOutcome, TrafficClass, TschState, TxQueues, TxResult, SLOT_MS,
};
use crate::medium::{Position, RadioMedium, Transmission, DEFAULT_RANGE_M};
use crate::rpl::{
    DodagState, LossConfig, NeighborHealth, RankConfig, RplAction, TrickleConfig, TrickleEvent,
    TrickleTimer,
};
use crate::scheduling::{
    install_rules, on_neighbor_change, CellDelta, Relation, RuleNeighbors, SchedulerConfig,
};
use crate::trace::{ScheduleCause, Trace, TraceEvent};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Root,
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub position: Position,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub scheduler: SchedulerConfig,
    pub hopping: HoppingSequence,
    pub tx_range_m: f64,
    pub interference_range_m: f64,
    pub app_period_ms: u64,
    pub trickle: TrickleConfig,
    pub rank: RankConfig,
    pub loss: LossConfig,
    pub queue_capacity: usize,
    pub max_retries: u8,
    /// Slots between EB attempts; also sets the join-scan dwell.
    pub eb_period_slots: u64,
    pub housekeeping_ms: u64,
    /// Period of DIS solicitations while joined but unrouted; 0 disables them.
    pub dis_interval_ms: u64,
}

impl NetworkConfig {
    pub fn new(scheduler: SchedulerConfig) -> Self {
        let eb_period_slots = match &scheduler {
            SchedulerConfig::Orchestra(o) => o
                .rule(TrafficClass::Beacon)
                .map_or(397, |r| u64::from(r.length)),
            SchedulerConfig::Minimal(_) => 397,
        };
        NetworkConfig {
            scheduler,
            hopping: HoppingSequence::default(),
            tx_range_m: DEFAULT_RANGE_M,
            interference_range_m: DEFAULT_RANGE_M,
            app_period_ms: 1000,
            trickle: TrickleConfig::default(),
            rank: RankConfig::default(),
            loss: LossConfig::default(),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            max_retries: DEFAULT_MAX_RETRIES,
            eb_period_slots,
            housekeeping_ms: 1000,
            dis_interval_ms: 30_000,
        }
    }

    /// Dwell per channel while scanning: a full EB cycle on every channel.
    pub fn scan_dwell_slots(&self) -> u64 {
        self.eb_period_slots * self.hopping.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioAction {
    RemoveNode(NodeId),
    ResetEnergy { label: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Slot(u64),
    TrickleFire(u64),
    TrickleEnd(u64),
    EbTimer,
    DisTimer,
    AppTimer,
    Housekeeping,
    Scenario(usize),
}

/// Counts of application frames and MAC outcomes over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FrameCounts {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_no_route: u64,
    pub dropped_queue_full: u64,
    pub dropped_retries: u64,
    pub dropped_flushed: u64,
    pub tx_unicast: u64,
    pub tx_broadcast: u64,
    pub collisions: u64,
    /// Frames whose only purpose is negotiating cells. No scheduler here sends any.
    pub negotiation: u64,
}

/// Application frame delivered at the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub time: SimTime,
    pub origin: NodeId,
    pub seq: u32,
}

#[derive(Debug)]
struct Node {
    id: NodeId,
    role: Role,
    alive: bool,
    tsch: TschState,
    schedule: Schedule,
    queues: TxQueues,
    dodag: DodagState,
    trickle: TrickleTimer,
    health: NeighborHealth,
    rng: ChaCha8Rng,
    dio_count: u32,
    data_seq: u32,
    eb_started: bool,
    mac_join: Option<SimTime>,
    rpl_join: Option<SimTime>,
    outcomes: BTreeMap<SlotOutcome, u64>,
}

impl Node {
    fn neighbors(&self) -> RuleNeighbors {
        RuleNeighbors {
            time_source: self.tsch.time_source,
            parent: self.dodag.parent(),
            children: self.dodag.children().clone(),
        }
    }
}

/// Per-node summary at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub id: NodeId,
    pub role: Role,
    pub alive: bool,
    pub mac_join_ms: Option<u64>,
    pub rpl_join_ms: Option<u64>,
    pub parent: Option<NodeId>,
    pub rank: u16,
    pub dio_triggered: u32,
    pub slots: BTreeMap<SlotOutcome, u64>,
}

pub struct Network {
    cfg: NetworkConfig,
    kernel: Kernel<Action>,
    medium: RadioMedium,
    nodes: BTreeMap<NodeId, Node>,
    ledger: EnergyLedger,
    window_label: String,
    energy_rows: Vec<EnergyRow>,
    actions: Vec<ScenarioAction>,
    trace: Trace,
    counts: FrameCounts,
    deliveries: Vec<Delivery>,
    next_frame_id: u64,
    duration: SimTime,
}

impl Network {
    /// Builds the network and arms its initial timers. `events` are applied
    /// at their timestamps before any slot scheduled at the same instant.
    pub fn new(
        cfg: NetworkConfig,
        specs: &[NodeSpec],
        events: &[(SimTime, ScenarioAction)],
        seed: u64,
        duration: SimTime,
    ) -> Self {
        let rngs = RngStream::new(seed);
        let mut medium = RadioMedium::new(cfg.tx_range_m, cfg.interference_range_m);
        let mut nodes = BTreeMap::new();
        for s in specs {
            medium.add_node(s.id, s.position);
            let mut rng = rngs.for_node(s.id);
            let (tsch, dodag) = if s.role == Role::Root {
                (
                    TschState::coordinator(),
                    DodagState::new_root(s.id, cfg.rank),
                )
            } else {
                let tsch = TschState {
                    scan_start: rng.gen_range(0..cfg.hopping.len()),
                    ..TschState::default()
                };
                (tsch, DodagState::new_node(s.id, cfg.rank))
            };
            nodes.insert(
                s.id,
                Node {
                    id: s.id,
                    role: s.role,
                    alive: true,
                    tsch,
                    schedule: Schedule::new(),
                    queues: TxQueues::new(cfg.queue_capacity, cfg.max_retries),
                    dodag,
                    trickle: TrickleTimer::new(cfg.trickle),
                    health: NeighborHealth::new(cfg.loss),
                    rng,
                    dio_count: 0,
                    data_seq: 0,
                    eb_started: false,
                    mac_join: None,
                    rpl_join: None,
                    outcomes: BTreeMap::new(),
                },
            );
        }
        let mut net = Network {
            ledger: EnergyLedger::new(nodes.keys().copied()),
            cfg,
            kernel: Kernel::new(),
            medium,
            nodes,
            window_label: "warmup".to_string(),
            energy_rows: Vec::new(),
            actions: Vec::new(),
            trace: Trace::default(),
            counts: FrameCounts::default(),
            deliveries: Vec::new(),
            next_frame_id: 0,
            duration,
        };
        for (i, (at, action)) in events.iter().enumerate() {
            net.actions.push(action.clone());
            net.at(*at, Target::Medium, Action::Scenario(i));
        }
        net.init_nodes();
        net.at(SimTime::ZERO, Target::Medium, Action::Slot(0));
        net
    }

    fn at(&mut self, t: SimTime, target: Target, action: Action) {
        if t <= self.duration {
            self.kernel
                .schedule(t, target, action)
                .expect("timers are never armed in the past");
        }
    }

    fn init_nodes(&mut self) {
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for id in ids {
            let now = SimTime::ZERO;
            let role = self.nodes[&id].role;
            self.trace.push(now, id, TraceEvent::Boot { role });
            self.at(
                now + self.cfg.housekeeping_ms,
                Target::Node(id),
                Action::Housekeeping,
            );
            if role == Role::Sender {
                self.at(
                    now + self.cfg.app_period_ms,
                    Target::Node(id),
                    Action::AppTimer,
                );
            }
            if role == Role::Root {
                let node = self.nodes.get_mut(&id).expect("node exists");
                node.mac_join = Some(now);
                node.rpl_join = Some(now);
                node.schedule = install_rules(id, &self.cfg.scheduler, &node.neighbors());
                let added = node.schedule.cell_count();
                self.trace.push(
                    now,
                    id,
                    TraceEvent::Schedule {
                        cause: ScheduleCause::Install,
                        added,
                        removed: 0,
                    },
                );
                self.apply_rpl(id, vec![RplAction::Trickle(TrickleEvent::Start)]);
                self.start_eb(id);
            }
        }
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    /// Runs every event up to and including the configured duration.
    pub fn run(&mut self) {
        let end = self.duration;
        self.run_until(end);
        self.close_window(end);
    }

    /// Advances to `t_end` (inclusive) without closing the energy window.
    pub fn run_until(&mut self, t_end: SimTime) {
        let t_end = t_end.min(self.duration);
        if self.kernel.check_run_target(t_end).is_err() {
            return;
        }
        while let Some(ev) = self.kernel.pop_until(t_end) {
            self.handle(ev.target, ev.payload);
        }
        self.kernel.advance_to(t_end);
    }

    fn handle(&mut self, target: Target, action: Action) {
        match (target, action) {
            (_, Action::Slot(asn)) => self.run_slot(asn),
            (_, Action::Scenario(i)) => {
                let a = self.actions[i].clone();
                self.apply_scenario(a);
            }
            (Target::Node(id), a) => {
                if !self.nodes.get(&id).is_some_and(|n| n.alive) {
                    return;
                }
                match a {
                    Action::TrickleFire(g) => self.trickle_fire(id, g),
                    Action::TrickleEnd(g) => self.trickle_end(id, g),
                    Action::EbTimer => self.eb_timer(id),
                    Action::DisTimer => self.dis_timer(id),
                    Action::AppTimer => self.app_timer(id),
                    Action::Housekeeping => self.housekeeping(id),
                    Action::Slot(_) | Action::Scenario(_) => unreachable!(),
                }
            }
            (Target::Medium, _) => unreachable!("node timers always target a node"),
        }
    }

    fn apply_scenario(&mut self, action: ScenarioAction) {
        let now = self.now();
        match action {
            ScenarioAction::RemoveNode(id) => {
                let Some(node) = self.nodes.get_mut(&id) else {
                    return;
                };
                if !node.alive {
                    return;
                }
                node.alive = false;
                self.medium.remove_node(id);
                self.ledger
                    .kill(id, now)
                    .expect("removal happens at the current time");
                self.trace.push(now, id, TraceEvent::Removed);
                log::info!("{now}: removed node {id}");
            }
            ScenarioAction::ResetEnergy { label } => {
                self.close_window(now);
                self.ledger.reset(now);
                self.window_label = label;
            }
        }
    }

    fn close_window(&mut self, at: SimTime) {
        if at > self.ledger.window_start() {
            let rows = self.ledger.rows(&self.window_label, at);
            self.energy_rows.extend(rows);
        }
    }

    fn new_frame(&mut self, src: NodeId, dest: Peer, payload: Payload) -> Frame {
        let id = self.next_frame_id;
        self.next_frame_id += 1;
        Frame {
            id,
            src,
            dest,
            payload,
        }
    }

    fn start_eb(&mut self, id: NodeId) {
        let node = self.nodes.get_mut(&id).expect("node exists");
        if node.eb_started {
            return;
        }
        node.eb_started = true;
        self.eb_timer(id);
    }

    /// Keeps one EB pending. The jittered period is never longer than an EB
    /// cycle, so Orchestra's beacon cell always finds one.
    fn eb_timer(&mut self, id: NodeId) {
        let now = self.now();
        let period = self.cfg.eb_period_slots * SLOT_MS;
        let node = &self.nodes[&id];
        if node.queues.len_for(QueueKey::Beacon) == 0 {
            let eb = EnhancedBeacon {
                sender: id,
                asn: now.0 / SLOT_MS,
                join_metric: node.dodag.hops().unwrap_or(u16::MAX),
            };
            let f = self.new_frame(id, Peer::Broadcast, Payload::Beacon(eb));
            self.nodes
                .get_mut(&id)
                .expect("node exists")
                .queues
                .enqueue(f);
        }
        let node = self.nodes.get_mut(&id).expect("node exists");
        let jitter = node.rng.gen_range(0..=period / 4);
        self.at(
            now + (period - jitter).max(SLOT_MS),
            Target::Node(id),
            Action::EbTimer,
        );
    }

    /// Solicits DIOs until the node has a parent.
    fn dis_timer(&mut self, id: NodeId) {
        let now = self.now();
        if self.nodes[&id].dodag.is_routed() || self.cfg.dis_interval_ms == 0 {
            return;
        }
        let f = self.new_frame(id, Peer::Broadcast, Payload::Dis);
        self.enqueue(id, f);
        self.at(
            now + self.cfg.dis_interval_ms,
            Target::Node(id),
            Action::DisTimer,
        );
    }

    fn app_timer(&mut self, id: NodeId) {
        let now = self.now();
        self.counts.generated += 1;
        let node = self.nodes.get_mut(&id).expect("node exists");
        node.data_seq += 1;
        let seq = node.data_seq;
        match node.dodag.parent().filter(|_| node.tsch.joined) {
            Some(p) => {
                let f = self.new_frame(id, Peer::Node(p), Payload::Data { origin: id, seq });
                self.enqueue(id, f);
            }
            None => {
                self.counts.dropped_no_route += 1;
                self.trace.push(
                    now,
                    id,
                    TraceEvent::Drop {
                        kind: FrameKind::Data,
                        reason: "no_route",
                    },
                );
            }
        }
        self.at(
            now + self.cfg.app_period_ms,
            Target::Node(id),
            Action::AppTimer,
        );
    }

    fn enqueue(&mut self, id: NodeId, f: Frame) {
        let now = self.now();
        let kind = f.payload.kind();
        let node = self.nodes.get_mut(&id).expect("node exists");
        if !node.queues.enqueue(f) {
            if kind == FrameKind::Data {
                self.counts.dropped_queue_full += 1;
            }
            self.trace.push(
                now,
                id,
                TraceEvent::Drop {
                    kind,
                    reason: "queue_full",
                },
            );
        }
    }

    fn housekeeping(&mut self, id: NodeId) {
        let now = self.now();
        let node = &self.nodes[&id];
        if node.tsch.joined {
            let watched: BTreeSet<NodeId> = node
                .dodag
                .parent()
                .into_iter()
                .chain(node.dodag.children().iter().copied())
                .collect();
            let silent: Vec<NodeId> = watched
                .into_iter()
                .filter(|&n| node.health.is_silent(n, now))
                .collect();
            for n in silent {
                self.neighbor_lost(id, n);
            }
        }
        self.at(
            now + self.cfg.housekeeping_ms,
            Target::Node(id),
            Action::Housekeeping,
        );
    }

    fn neighbor_lost(&mut self, id: NodeId, n: NodeId) {
        let now = self.now();
        self.trace
            .push(now, id, TraceEvent::LossDetected { neighbor: n });
        let node = self.nodes.get_mut(&id).expect("node exists");
        node.health.forget(n);
        let actions = node.dodag.detect_loss(n);
        let flushed = node.queues.flush_peer(n) as u64;
        self.counts.dropped_flushed += flushed;
        self.apply_rpl(id, actions);
    }

    fn trickle_fire(&mut self, id: NodeId, generation: u64) {
        let now = self.now();
        let node = self.nodes.get_mut(&id).expect("node exists");
        if node.trickle.generation() != generation {
            return;
        }
        let step = node
            .trickle
            .step(TrickleEvent::TReached, now, &mut node.rng);
        if step.trigger {
            node.dio_count += 1;
            let index = node.dio_count;
            let dio = node.dodag.dio();
            self.trace.push(now, id, TraceEvent::DioTriggered { index });
            let f = self.new_frame(id, Peer::Broadcast, Payload::Dio(dio));
            self.enqueue(id, f);
        }
    }

    fn trickle_end(&mut self, id: NodeId, generation: u64) {
        if self.nodes[&id].trickle.generation() == generation {
            self.trickle_step(id, TrickleEvent::IntervalEnd);
        }
    }

    fn trickle_step(&mut self, id: NodeId, ev: TrickleEvent) {
        let now = self.now();
        let node = self.nodes.get_mut(&id).expect("node exists");
        let step = node.trickle.step(ev, now, &mut node.rng);
        if let Some(plan) = step.new_interval {
            self.trace.push(
                now,
                id,
                TraceEvent::TrickleInterval {
                    interval_ms: plan.interval_ms,
                },
            );
            self.at(
                plan.fire_at,
                Target::Node(id),
                Action::TrickleFire(plan.generation),
            );
            self.at(
                plan.ends_at,
                Target::Node(id),
                Action::TrickleEnd(plan.generation),
            );
        }
    }

    fn record_delta(&mut self, id: NodeId, cause: ScheduleCause, delta: CellDelta) {
        if !delta.is_empty() {
            let now = self.now();
            self.trace.push(
                now,
                id,
                TraceEvent::Schedule {
                    cause,
                    added: delta.added.len(),
                    removed: delta.removed.len(),
                },
            );
        }
    }

    fn neighbor_change(&mut self, id: NodeId, neighbor: NodeId, relation: Relation, added: bool) {
        let node = self.nodes.get_mut(&id).expect("node exists");
        let delta = on_neighbor_change(
            &mut node.schedule,
            &self.cfg.scheduler,
            neighbor,
            relation,
            added,
        );
        self.record_delta(id, ScheduleCause::NeighborChange { neighbor, added }, delta);
    }

    fn apply_rpl(&mut self, id: NodeId, actions: Vec<RplAction>) {
        let now = self.now();
        for a in actions {
            match a {
                RplAction::ParentChanged { old, new } => {
                    self.trace
                        .push(now, id, TraceEvent::ParentChanged { old, new });
                    if let Some(o) = old {
                        self.neighbor_change(id, o, Relation::Parent, false);
                        let node = self.nodes.get_mut(&id).expect("node exists");
                        self.counts.dropped_flushed += node.queues.flush_peer(o) as u64;
                    }
                    if let Some(n) = new {
                        self.nodes
                            .get_mut(&id)
                            .expect("node exists")
                            .tsch
                            .time_source = Some(n);
                        self.neighbor_change(id, n, Relation::Parent, true);
                        let node = self.nodes.get_mut(&id).expect("node exists");
                        if node.rpl_join.is_none() {
                            node.rpl_join = Some(now);
                            log::debug!("{now}: node {id} joined the DODAG via {n}");
                        }
                        self.start_eb(id);
                    }
                }
                RplAction::ChildAdded(c) => self.neighbor_change(id, c, Relation::Child, true),
                RplAction::ChildRemoved(c) => {
                    if self.nodes[&id].dodag.parent() != Some(c) {
                        self.neighbor_change(id, c, Relation::Child, false);
                    }
                }
                RplAction::Trickle(ev) => self.trickle_step(id, ev),
            }
        }
    }

    fn run_slot(&mut self, asn: u64) {
        let now = self.now();
        let dwell = self.cfg.scan_dwell_slots();
        let mut plans: Vec<(NodeId, SlotAction)> = Vec::new();
        for (&id, node) in self.nodes.iter_mut().filter(|(_, n)| n.alive) {
            let mut a = plan_slot(
                &node.tsch,
                &node.schedule,
                &mut node.queues,
                asn,
                &self.cfg.hopping,
                dwell,
            );
            if let SlotAction::Transmit { frame, .. } = &mut a {
                if let Payload::Beacon(eb) = &mut frame.payload {
                    eb.asn = asn;
                }
            }
            plans.push((id, a));
        }
        for (id, a) in &plans {
            let state = if a.radio_on() {
                RadioState::On
            } else {
                RadioState::Off
            };
            self.ledger
                .record(*id, state, now)
                .expect("slots are processed in time order");
        }

        let txs: Vec<Transmission<usize>> = plans
            .iter()
            .enumerate()
            .filter_map(|(i, (id, a))| match a {
                SlotAction::Transmit { channel, .. } => Some(Transmission {
                    sender: *id,
                    channel: *channel,
                    frame: i,
                }),
                _ => None,
            })
            .collect();
        let on_channel = |c: u8| -> Vec<Transmission<usize>> {
            txs.iter().filter(|t| t.channel == c).cloned().collect()
        };

        // receptions: listener index -> transmitter index
        let mut received: BTreeMap<usize, usize> = BTreeMap::new();
        let mut collided: Vec<(NodeId, u8)> = Vec::new();
        for (li, (lid, a)) in plans.iter().enumerate() {
            let channel = match a {
                SlotAction::Listen { channel } | SlotAction::Scan { channel } => *channel,
                _ => continue,
            };
            let set = on_channel(channel);
            if set.is_empty() {
                continue;
            }
            match self.medium.deliver(&set, *lid) {
                Some(t) => {
                    received.insert(li, t.frame);
                }
                None if self.medium.collided(&set, *lid) => collided.push((*lid, channel)),
                None => {}
            }
        }

        // acks from addressees that got their unicast frame
        let mut acks: Vec<Transmission<usize>> = Vec::new();
        for (&li, &ti) in &received {
            let (lid, la) = &plans[li];
            if let SlotAction::Transmit { frame, channel, .. } = &plans[ti].1 {
                if frame.dest == Peer::Node(*lid) && matches!(la, SlotAction::Listen { .. }) {
                    acks.push(Transmission {
                        sender: *lid,
                        channel: *channel,
                        frame: ti,
                    });
                }
            }
        }

        let mut outcomes: BTreeMap<NodeId, SlotOutcome> = plans
            .iter()
            .map(|(id, a)| {
                let o = if a.radio_on() {
                    SlotOutcome::IdleListen
                } else {
                    SlotOutcome::Sleep
                };
                (*id, o)
            })
            .collect();

        for (lid, channel) in collided {
            self.counts.collisions += 1;
            self.trace.push(now, lid, TraceEvent::Collision { channel });
        }

        for (ti, (sid, a)) in plans.iter().enumerate() {
            let SlotAction::Transmit {
                channel,
                key,
                frame,
                shared,
            } = a
            else {
                continue;
            };
            let acked = match frame.dest {
                Peer::Broadcast => true,
                Peer::Node(_) => {
                    let set: Vec<Transmission<usize>> = acks
                        .iter()
                        .filter(|t| t.channel == *channel)
                        .cloned()
                        .collect();
                    self.medium
                        .deliver(&set, *sid)
                        .is_some_and(|t| t.frame == ti)
                }
            };
            self.complete_tx(*sid, *key, frame, *shared, acked);
            outcomes.insert(
                *sid,
                if acked {
                    SlotOutcome::TxOk
                } else {
                    SlotOutcome::TxFail
                },
            );
        }

        for (&li, &ti) in &received {
            let lid = plans[li].0;
            if let SlotAction::Transmit { frame, .. } = &plans[ti].1 {
                if self.receive(lid, frame) {
                    outcomes.insert(lid, SlotOutcome::RxOk);
                }
            }
        }

        for (id, o) in outcomes {
            if let Some(n) = self.nodes.get_mut(&id) {
                *n.outcomes.entry(o).or_default() += 1;
            }
        }
        // a slot starting at the end of the run would lie entirely outside it
        let next = SimTime((asn + 1) * SLOT_MS);
        if next < self.duration {
            self.at(next, Target::Medium, Action::Slot(asn + 1));
        }
    }

    fn complete_tx(&mut self, id: NodeId, key: QueueKey, frame: &Frame, shared: bool, acked: bool) {
        let now = self.now();
        let kind = frame.payload.kind();
        match frame.dest {
            Peer::Broadcast => self.counts.tx_broadcast += 1,
            Peer::Node(_) => self.counts.tx_unicast += 1,
        }
        self.trace.push(
            now,
            id,
            TraceEvent::Tx {
                dest: frame.dest,
                kind,
                ok: acked,
            },
        );
        let node = self.nodes.get_mut(&id).expect("node exists");
        let (res, _) = node.queues.complete(key, acked, shared, &mut node.rng);
        let Peer::Node(dest) = frame.dest else {
            return;
        };
        if acked {
            node.health.heard(dest, now);
            return;
        }
        let lost = node.health.missed_ack(dest, now);
        if res == TxResult::Dropped {
            if kind == FrameKind::Data {
                self.counts.dropped_retries += 1;
            }
            self.trace.push(
                now,
                id,
                TraceEvent::Drop {
                    kind,
                    reason: "retries",
                },
            );
        }
        if lost {
            self.neighbor_lost(id, dest);
        }
    }

    /// Handles a frame that reached `id`. Returns whether it was meant for it.
    fn receive(&mut self, id: NodeId, frame: &Frame) -> bool {
        let now = self.now();
        let kind = frame.payload.kind();
        let node = self.nodes.get_mut(&id).expect("node exists");
        if !node.tsch.joined {
            let Payload::Beacon(eb) = &frame.payload else {
                return false;
            };
            node.tsch.join(eb);
            node.mac_join = Some(now);
            node.health.heard(frame.src, now);
            node.schedule = install_rules(id, &self.cfg.scheduler, &node.neighbors());
            let added = node.schedule.cell_count();
            let dis_delay = node.rng.gen_range(0..1000);
            self.at(now + dis_delay, Target::Node(id), Action::DisTimer);
            self.trace.push(
                now,
                id,
                TraceEvent::Joined {
                    time_source: Some(eb.sender),
                },
            );
            self.trace.push(
                now,
                id,
                TraceEvent::Schedule {
                    cause: ScheduleCause::Install,
                    added,
                    removed: 0,
                },
            );
            log::debug!("{now}: node {id} synchronised to {}", eb.sender);
            return true;
        }
        let for_me = match frame.dest {
            Peer::Broadcast => true,
            Peer::Node(d) => d == id,
        };
        node.health.heard(frame.src, now);
        if !for_me {
            return false;
        }
        self.trace.push(
            now,
            id,
            TraceEvent::Rx {
                from: frame.src,
                kind,
            },
        );
        match &frame.payload {
            Payload::Beacon(_) => {}
            Payload::Dis => {
                let actions = node.dodag.process_dis();
                self.apply_rpl(id, actions);
            }
            Payload::Dio(dio) => {
                let actions = node.dodag.process_dio(dio, now);
                self.apply_rpl(id, actions);
            }
            Payload::Data { origin, seq } => {
                if let Some(a) = node.dodag.note_child(frame.src) {
                    self.apply_rpl(id, vec![a]);
                }
                let node = &self.nodes[&id];
                if node.role == Role::Root {
                    self.counts.delivered += 1;
                    self.deliveries.push(Delivery {
                        time: now,
                        origin: *origin,
                        seq: *seq,
                    });
                } else if let Some(p) = node.dodag.parent() {
                    let f = self.new_frame(
                        id,
                        Peer::Node(p),
                        Payload::Data {
                            origin: *origin,
                            seq: *seq,
                        },
                    );
                    self.enqueue(id, f);
                } else {
                    self.counts.dropped_no_route += 1;
                    self.trace.push(
                        now,
                        id,
                        TraceEvent::Drop {
                            kind,
                            reason: "no_route",
                        },
                    );
                }
            }
        }
        true
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn energy_rows(&self) -> &[EnergyRow] {
        &self.energy_rows
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn counts(&self) -> FrameCounts {
        self.counts
    }

    pub fn deliveries(&self) -> &[Delivery] {
        &self.deliveries
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.nodes.get(&id).is_some_and(|n| n.alive)
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.nodes.get(&id).and_then(|n| n.dodag.parent())
    }

    pub fn children_of(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.nodes
            .get(&id)
            .map(|n| n.dodag.children().clone())
            .unwrap_or_default()
    }

    pub fn schedule_of(&self, id: NodeId) -> Option<&Schedule> {
        self.nodes.get(&id).map(|n| &n.schedule)
    }

    pub fn trickle_interval_of(&self, id: NodeId) -> Option<u64> {
        let n = self.nodes.get(&id)?;
        n.trickle.is_running().then(|| n.trickle.interval_ms())
    }

    pub fn summaries(&self) -> Vec<NodeSummary> {
        self.nodes
            .values()
            .map(|n| NodeSummary {
                id: n.id,
                role: n.role,
                alive: n.alive,
                mac_join_ms: n.mac_join.map(|t| t.0),
                rpl_join_ms: n.rpl_join.map(|t| t.0),
                parent: n.dodag.parent(),
                rank: n.dodag.rank(),
                dio_triggered: n.dio_count,
                slots: n.outcomes.clone(),
            })
            .collect()
    }
}
