//! Fixed-step simulation loop.
//!
//! Each tick runs, in order: TTL purge, movement, contact detection,
//! contact dispatch, transfer progress, traffic generation. A run is a pure
//! function of its configuration and seed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, MapSource, ScenarioConfig};
use crate::events::{EventKind, EventLog};
use crate::link::{ContactDetector, ContactEvent, ContactKind, NodeId, NodePair, Payload, TransferJob};
use crate::map::{load_map, MapError, PathGraph, Point};
use crate::metrics::RunReport;
use crate::mobility::{MovementArea, NodePose};
use crate::routing::{self, Admission, Host, Message, MessageId, Router};
use crate::traffic::{ScheduledMessage, TrafficGenerator};

const EPS: f64 = 1e-9;
const TRAFFIC_STREAM: u64 = 1;
const MOBILITY_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("cannot read map {path}: {message}")]
    MapFile { path: String, message: String },
    #[error("{0}")]
    Input(String),
    #[error("invariant violated: {}", .0.join("; "))]
    Invariant(Vec<String>),
}

static BUILTIN_MAP: OnceLock<Arc<PathGraph>> = OnceLock::new();

/// Text of the bundled river and town map.
pub const BUILTIN_MAP_TEXT: &str = include_str!("../assets/river_town.map");

pub fn builtin_map() -> Arc<PathGraph> {
    BUILTIN_MAP.get_or_init(|| Arc::new(load_map(BUILTIN_MAP_TEXT).expect("bundled map is valid"))).clone()
}

/// Loads the graph a configuration refers to.
pub fn resolve_map(source: &MapSource) -> Result<Arc<PathGraph>, SimError> {
    match source {
        MapSource::Builtin => Ok(builtin_map()),
        MapSource::File(path) => read_map(path),
    }
}

fn read_map(path: &Path) -> Result<Arc<PathGraph>, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::MapFile { path: path.display().to_string(), message: e.to_string() })?;
    Ok(Arc::new(load_map(&text)?))
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Mover {
    pose: NodePose,
    area: usize,
    pause_time: f64,
    rng: ChaCha8Rng,
}

/// All mobile nodes on a shared graph. Every node draws from its own RNG
/// stream so trajectories do not depend on the tick length or on each other.
pub struct World {
    graph: Arc<PathGraph>,
    areas: Vec<MovementArea>,
    movers: Vec<Mover>,
}

impl World {
    pub fn new(cfg: &ScenarioConfig, graph: Arc<PathGraph>) -> Result<World, SimError> {
        let mut areas = Vec::with_capacity(cfg.groups.len());
        let mut movers = Vec::with_capacity(cfg.node_count());
        for (gi, g) in cfg.groups.iter().enumerate() {
            areas.push(MovementArea::new(graph.clone(), g.terrain)?);
            for _ in 0..g.count {
                let node = movers.len();
                let mut rng = stream(cfg.seed, MOBILITY_STREAM_BASE + node as u64);
                let pose = NodePose::place(node, &areas[gi], g.speed, &mut rng);
                movers.push(Mover { pose, area: gi, pause_time: g.pause_time, rng });
            }
        }
        Ok(World { graph, areas, movers })
    }

    pub fn advance(&mut self, dt: f64) {
        for m in &mut self.movers {
            m.pose.advance(&self.areas[m.area], dt, m.pause_time, &mut m.rng);
        }
    }

    pub fn positions_into(&self, out: &mut Vec<Point>) {
        out.clear();
        out.extend(self.movers.iter().map(|m| m.pose.position(&self.graph)));
    }

    pub fn poses(&self) -> impl Iterator<Item = &NodePose> {
        self.movers.iter().map(|m| &m.pose)
    }

    pub fn graph(&self) -> &PathGraph {
        &self.graph
    }
}

enum Contacts {
    Mobility { world: World, detector: ContactDetector, positions: Vec<Point> },
    Trace { events: Vec<ContactEvent>, next: usize, detector: ContactDetector },
}

enum Traffic {
    Random(Box<TrafficGenerator>),
    Scheduled(VecDeque<ScheduledMessage>),
}

struct Link {
    job: Option<TransferJob>,
    /// Snapshot of the copy being sent, taken at transfer start.
    carrying: Option<Message>,
    bytes: u64,
    first: NodeId,
    /// Node versions at the last fruitless scheduling attempt.
    quiet: Option<(u64, u64)>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub report: RunReport,
    /// Contact events in processing order (empty unless recording was on).
    pub contacts: Vec<ContactEvent>,
    /// Messages as created, with their creation tick as the time.
    pub messages: Vec<ScheduledMessage>,
    /// Copies still resident in some buffer at the end, per message.
    pub buffered: BTreeSet<MessageId>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    hosts: Vec<Host>,
    versions: Vec<u64>,
    contacts: Contacts,
    links: BTreeMap<NodePair, Link>,
    /// Messages each node is currently receiving.
    incoming: Vec<BTreeSet<MessageId>>,
    /// Messages each node is currently sending, with multiplicity.
    outgoing: Vec<BTreeMap<MessageId, u32>>,
    busy: Vec<u32>,
    traffic: Traffic,
    log: EventLog,
    created: Vec<ScheduledMessage>,
    next_id: u64,
    record_contacts: bool,
    recorded: Vec<ContactEvent>,
    tick_index: u64,
    now: f64,
    violations: Vec<String>,
    started: bool,
}

impl Simulation {
    /// Map-driven run with random traffic.
    pub fn new(cfg: &ScenarioConfig) -> Result<Simulation, SimError> {
        cfg.validate()?;
        let graph = resolve_map(&cfg.map)?;
        Self::with_graph(cfg, graph)
    }

    pub fn with_graph(cfg: &ScenarioConfig, graph: Arc<PathGraph>) -> Result<Simulation, SimError> {
        cfg.validate()?;
        let world = World::new(cfg, graph)?;
        let n = cfg.node_count();
        let contacts = Contacts::Mobility {
            world,
            detector: ContactDetector::new(cfg.link.range),
            positions: Vec::with_capacity(n),
        };
        let traffic = random_traffic(cfg, n);
        Ok(Self::assemble(cfg, n, contacts, traffic))
    }

    /// Trace-driven run. Without `messages`, random traffic is generated
    /// among the nodes the trace and schedule mention.
    pub fn from_trace(
        cfg: &ScenarioConfig,
        trace: Vec<ContactEvent>,
        messages: Option<Vec<ScheduledMessage>>,
    ) -> Result<Simulation, SimError> {
        cfg.validate()?;
        let mut n = crate::trace::trace_node_count(&trace);
        if let Some(ms) = &messages {
            for m in ms {
                if m.source == m.destination || m.size == 0 {
                    return Err(SimError::Input(format!("invalid scheduled message at t={}", m.time)));
                }
                n = n.max(m.source + 1).max(m.destination + 1);
            }
        }
        if n < 2 {
            return Err(SimError::Input("a replay needs at least two nodes".into()));
        }
        let contacts = Contacts::Trace { events: trace, next: 0, detector: ContactDetector::new(cfg.link.range) };
        let traffic = match messages {
            Some(ms) => Traffic::Scheduled(ms.into()),
            None => random_traffic(cfg, n),
        };
        Ok(Self::assemble(cfg, n, contacts, traffic))
    }

    fn assemble(cfg: &ScenarioConfig, n: usize, contacts: Contacts, traffic: Traffic) -> Simulation {
        let hosts = (0..n).map(|i| Host::new(i, cfg.buffer_size, Router::new(cfg.router, i, &cfg.prophet))).collect();
        Simulation {
            cfg: cfg.clone(),
            hosts,
            versions: vec![0; n],
            contacts,
            links: BTreeMap::new(),
            incoming: vec![BTreeSet::new(); n],
            outgoing: vec![BTreeMap::new(); n],
            busy: vec![0; n],
            traffic,
            log: EventLog::new(),
            created: Vec::new(),
            next_id: 1,
            record_contacts: false,
            recorded: Vec::new(),
            tick_index: 0,
            now: 0.0,
            violations: Vec::new(),
            started: false,
        }
    }

    /// Keep every processed contact event for export.
    pub fn record_contacts(&mut self, on: bool) {
        self.record_contacts = on;
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn world(&self) -> Option<&World> {
        match &self.contacts {
            Contacts::Mobility { world, .. } => Some(world),
            Contacts::Trace { .. } => None,
        }
    }

    /// Runs every remaining tick and finalizes.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let ticks = self.cfg.tick_count();
        while self.tick_index < ticks {
            self.step();
        }
        self.finish()
    }

    /// Advances one tick (the first call also creates messages due at t=0).
    pub fn step(&mut self) {
        if !self.started {
            self.started = true;
            self.generate_traffic();
        }
        self.tick_index += 1;
        self.now = self.tick_index as f64 * self.cfg.tick;
        if self.cfg.traffic.ttl.is_some() {
            self.purge_expired();
        }
        let events = self.move_and_detect();
        for e in events {
            self.dispatch(e);
        }
        self.progress_transfers();
        self.generate_traffic();
    }

    fn move_and_detect(&mut self) -> Vec<ContactEvent> {
        let now = self.now;
        match &mut self.contacts {
            Contacts::Mobility { world, detector, positions } => {
                world.advance(self.cfg.tick);
                world.positions_into(positions);
                detector.detect(positions, now)
            }
            Contacts::Trace { events, next, detector } => {
                let mut out = Vec::new();
                while *next < events.len() && events[*next].time <= now + EPS {
                    let e = events[*next];
                    *next += 1;
                    if e.pair.high() >= self.hosts.len() {
                        continue;
                    }
                    let is_up = detector.is_up(e.pair);
                    if (e.kind == ContactKind::Up) == is_up {
                        continue;
                    }
                    detector.apply(&e);
                    out.push(ContactEvent { time: now, ..e });
                }
                out
            }
        }
    }

    fn bump(&mut self, n: NodeId) {
        self.versions[n] += 1;
    }

    fn record(
        &mut self,
        kind: EventKind,
        id: MessageId,
        from: Option<NodeId>,
        to: Option<NodeId>,
        size: u64,
        hops: u32,
    ) {
        if let Err(e) = self.log.record(self.now, kind, id, from, to, size, hops) {
            self.violations.push(e);
        }
    }

    fn check_buffer(&mut self, n: NodeId) {
        if let Err(e) = self.hosts[n].buffer.check() {
            self.violations.push(format!("node {n} at t={}: {e}", self.now));
        }
    }

    fn dispatch(&mut self, e: ContactEvent) {
        if self.record_contacts {
            self.recorded.push(e);
        }
        let (a, b) = (e.pair.low(), e.pair.high());
        match e.kind {
            ContactKind::Up => {
                let (ha, hb) = pair_mut(&mut self.hosts, a, b);
                let purged = routing::contact_up(ha, hb, self.now);
                // purged copies are acknowledged deliveries, not drops
                drop(purged);
                self.links.insert(
                    e.pair,
                    Link {
                        job: Some(TransferJob::control(e.pair, self.now, &self.cfg.link)),
                        carrying: None,
                        bytes: 0,
                        first: a,
                        quiet: None,
                    },
                );
                self.bump(a);
                self.bump(b);
            }
            ContactKind::Down => {
                let Some(mut link) = self.links.remove(&e.pair) else { return };
                if let Some(job) = link.job.take() {
                    if let (Payload::Data { message, size }, Some(copy)) = (&job.payload, link.carrying.take()) {
                        self.record(
                            EventKind::Aborted,
                            *message,
                            Some(job.sender),
                            Some(job.receiver),
                            *size,
                            copy.hop_count,
                        );
                        self.end_data_job(&job, *message);
                    }
                }
                routing::contact_down(&mut self.hosts[a], link.bytes);
                routing::contact_down(&mut self.hosts[b], link.bytes);
                self.bump(a);
                self.bump(b);
            }
        }
    }

    fn end_data_job(&mut self, job: &TransferJob, id: MessageId) {
        self.incoming[job.receiver].remove(&id);
        if let Some(c) = self.outgoing[job.sender].get_mut(&id) {
            *c -= 1;
            if *c == 0 {
                self.outgoing[job.sender].remove(&id);
            }
        }
        self.busy[job.sender] -= 1;
        self.busy[job.receiver] -= 1;
    }

    fn progress_transfers(&mut self) {
        loop {
            let mut progressed = false;
            let due: Vec<NodePair> = self
                .links
                .iter()
                .filter(|(_, l)| l.job.as_ref().is_some_and(|j| j.finish <= self.now + EPS))
                .map(|(p, _)| *p)
                .collect();
            for pair in due {
                self.complete(pair);
                progressed = true;
            }
            let idle: Vec<NodePair> = self.links.iter().filter(|(_, l)| l.job.is_none()).map(|(p, _)| *p).collect();
            for pair in idle {
                if self.try_start(pair) {
                    let link = &self.links[&pair];
                    if link.job.as_ref().is_some_and(|j| j.finish <= self.now + EPS) {
                        progressed = true;
                    }
                }
            }
            if !progressed {
                break;
            }
        }
    }

    fn complete(&mut self, pair: NodePair) {
        let link = self.links.get_mut(&pair).expect("due link exists");
        let job = link.job.take().expect("due link has a job");
        let carrying = link.carrying.take();
        let Payload::Data { message: id, size } = job.payload else { return };
        link.bytes += size;
        self.end_data_job(&job, id);
        let (sender, receiver) = (job.sender, job.receiver);
        self.bump(sender);
        self.bump(receiver);
        let copy = carrying.expect("data job carries a copy").relayed();
        self.record(EventKind::Relayed, id, Some(sender), Some(receiver), size, copy.hop_count);
        if copy.is_expired(self.now) {
            return;
        }
        if copy.destination == receiver {
            if !self.hosts[receiver].delivered.contains(&id) {
                self.record(EventKind::Delivered, id, Some(sender), Some(receiver), size, copy.hop_count);
                let (dest, snd) = pair_mut(&mut self.hosts, receiver, sender);
                routing::on_delivered(dest, snd, &copy);
            }
            return;
        }
        if !routing::accepts(&self.hosts[receiver], &copy) {
            return;
        }
        self.store(receiver, copy);
    }

    /// Offers `msg` to `node`'s buffer, logging evictions and refusals.
    fn store(&mut self, node: NodeId, msg: Message) {
        let (id, size, hops) = (msg.id, msg.size, msg.hop_count);
        let order = routing::eviction_order(&mut self.hosts[node]);
        let protected: BTreeSet<MessageId> = self.outgoing[node].keys().copied().collect();
        let before = self.resident_meta(node);
        match self.hosts[node].buffer.admit(msg, self.now, &order, &protected) {
            Admission::Accept { evicted } => self.log_evictions(node, &evicted, &before),
            Admission::Reject => self.record(EventKind::Dropped, id, Some(node), None, size, hops),
        }
        self.check_buffer(node);
        self.bump(node);
    }

    fn resident_meta(&self, node: NodeId) -> BTreeMap<MessageId, (u64, u32)> {
        self.hosts[node].buffer.iter().map(|s| (s.message.id, (s.message.size, s.message.hop_count))).collect()
    }

    fn log_evictions(&mut self, node: NodeId, evicted: &[MessageId], before: &BTreeMap<MessageId, (u64, u32)>) {
        for v in evicted {
            let (size, hops) = before[v];
            self.record(EventKind::Dropped, *v, Some(node), None, size, hops);
        }
    }

    /// Starts the best pending transfer on an idle link, alternating which
    /// end goes first.
    fn try_start(&mut self, pair: NodePair) -> bool {
        let (a, b) = (pair.low(), pair.high());
        let sig = (self.versions[a], self.versions[b]);
        let link = &self.links[&pair];
        if link.quiet == Some(sig) {
            return false;
        }
        if self.cfg.link.single_transfer_per_node && (self.busy[a] > 0 || self.busy[b] > 0) {
            return false;
        }
        let first = link.first;
        for sender in [first, pair.other(first)] {
            let receiver = pair.other(sender);
            if self.start_from(pair, sender, receiver) {
                let link = self.links.get_mut(&pair).expect("link exists");
                link.first = receiver;
                link.quiet = None;
                return true;
            }
        }
        let sig = (self.versions[a], self.versions[b]);
        self.links.get_mut(&pair).expect("link exists").quiet = Some(sig);
        false
    }

    fn start_from(&mut self, pair: NodePair, sender: NodeId, receiver: NodeId) -> bool {
        let now = self.now;
        let order = {
            let (s, r) = pair_mut(&mut self.hosts, sender, receiver);
            routing::forward_order(s, r, now)
        };
        for id in order {
            if self.incoming[receiver].contains(&id) {
                continue;
            }
            let Some(stored) = self.hosts[sender].buffer.get(id) else { continue };
            let msg = stored.message.clone();
            if msg.destination != receiver {
                if !routing::accepts(&self.hosts[receiver], &msg) {
                    continue;
                }
                let order = routing::eviction_order(&mut self.hosts[receiver]);
                let protected: BTreeSet<MessageId> = self.outgoing[receiver].keys().copied().collect();
                let before = self.resident_meta(receiver);
                let Some(evicted) = self.hosts[receiver].buffer.make_room(msg.size, &order, &protected) else {
                    continue;
                };
                if !evicted.is_empty() {
                    self.log_evictions(receiver, &evicted, &before);
                    self.bump(receiver);
                }
            } else if self.hosts[receiver].delivered.contains(&id) {
                continue;
            }
            let job = TransferJob::data(id, msg.size, sender, receiver, now, &self.cfg.link);
            *self.outgoing[sender].entry(id).or_insert(0) += 1;
            self.incoming[receiver].insert(id);
            self.busy[sender] += 1;
            self.busy[receiver] += 1;
            let link = self.links.get_mut(&pair).expect("link exists");
            link.job = Some(job);
            link.carrying = Some(msg);
            return true;
        }
        false
    }

    fn purge_expired(&mut self) {
        let now = self.now;
        for n in 0..self.hosts.len() {
            let expired: Vec<Message> =
                self.hosts[n].buffer.iter().filter(|s| s.message.is_expired(now)).map(|s| s.message.clone()).collect();
            for m in &expired {
                self.hosts[n].buffer.remove(m.id);
                self.record(EventKind::Expired, m.id, Some(n), None, m.size, m.hop_count);
            }
            if !expired.is_empty() {
                self.bump(n);
            }
            routing::expire_state(&mut self.hosts[n], now);
        }
    }

    fn generate_traffic(&mut self) {
        let now = self.now;
        let due = match &mut self.traffic {
            Traffic::Random(g) => g.due(now),
            Traffic::Scheduled(q) => {
                let mut out = Vec::new();
                while q.front().is_some_and(|m| m.time <= now + EPS) {
                    out.push(q.pop_front().expect("checked non-empty"));
                }
                out
            }
        };
        for s in due {
            self.create(s);
        }
    }

    fn create(&mut self, s: ScheduledMessage) {
        let id = MessageId(self.next_id);
        self.next_id += 1;
        let msg = match Message::new(id, s.source, s.destination, s.size, self.now, self.cfg.traffic.ttl) {
            Ok(m) => m,
            Err(e) => {
                self.violations.push(e.to_string());
                return;
            }
        };
        self.created.push(ScheduledMessage { time: self.now, ..s });
        self.record(EventKind::Created, id, Some(s.source), Some(s.destination), s.size, 0);
        self.store(s.source, msg);
    }

    /// Final invariant checks and report.
    pub fn finish(mut self) -> Result<RunOutput, SimError> {
        let mut buffered = BTreeSet::new();
        for h in &self.hosts {
            buffered.extend(h.buffer.ids());
            if let Err(e) = h.buffer.check() {
                self.violations.push(format!("node {}: {e}", h.id));
            }
        }
        let mut delivered = BTreeSet::new();
        let mut lost = BTreeSet::new();
        let mut created = BTreeSet::new();
        for e in self.log.events() {
            match e.kind {
                EventKind::Created => {
                    created.insert(e.message);
                }
                EventKind::Delivered => {
                    if !created.contains(&e.message) {
                        self.violations.push(format!("{} delivered without a creation record", e.message));
                    }
                    if !delivered.insert(e.message) {
                        self.violations.push(format!("{} delivered twice", e.message));
                    }
                }
                EventKind::Dropped | EventKind::Expired => {
                    lost.insert(e.message);
                }
                _ => {}
            }
        }
        let unaccounted: Vec<String> = created
            .iter()
            .filter(|id| !delivered.contains(id) && !buffered.contains(id) && !lost.contains(id))
            .map(|id| id.to_string())
            .collect();
        if !unaccounted.is_empty() {
            self.violations.push(format!("messages with no final status: {}", unaccounted.join(" ")));
        }
        if !self.violations.is_empty() {
            return Err(SimError::Invariant(self.violations));
        }
        let report = RunReport::from_log(&self.log, self.cfg.count_aborts);
        Ok(RunOutput { log: self.log, report, contacts: self.recorded, messages: self.created, buffered })
    }
}

fn random_traffic(cfg: &ScenarioConfig, nodes: usize) -> Traffic {
    Traffic::Random(Box::new(TrafficGenerator::new(
        cfg.traffic.clone(),
        nodes,
        cfg.duration,
        stream(cfg.seed, TRAFFIC_STREAM),
    )))
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = v.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

/// Runs a map-driven scenario to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    Simulation::new(cfg)?.run()
}

/// Runs a trace-driven scenario to completion.
pub fn replay(
    cfg: &ScenarioConfig,
    trace: Vec<ContactEvent>,
    messages: Option<Vec<ScheduledMessage>>,
) -> Result<RunOutput, SimError> {
    Simulation::from_trace(cfg, trace, messages)?.run()
}
