//! Deterministic discrete-event network simulator.
//!
//! A [`Topology`] is consumers, routers, and producers joined by latency
//! links. [`Sim`] runs packets over it with a microsecond clock: every
//! transmission becomes a heap event ordered by `(time, sequence)`, every
//! router runs the [`crate::forwarding`] pipeline, and every decision lands
//! in an append-only trace. Identical topology, schedule, and seed produce a
//! byte-identical trace — randomness (link jitter, placement policies) comes
//! only from seeded generators.
//!
//! Timing model, all in microseconds:
//! - routers charge a processing constant once per packet they emit — an
//!   interest forwarded at `t` departs at `t + proc`; relayed data likewise;
//!   a store hit pays twice (interest handling plus data handling) and then
//!   whatever hold the reply policy adds;
//! - consumers and producers are endpoints and charge nothing;
//! - a link adds its latency (plus jitter when configured) to every
//!   traversal.
//!
//! Routes are built from the producers' catalogs: each first name component
//! is a routable prefix, and every node points it along the lowest-latency
//! path (ties broken toward the smaller node id). Two producers may not
//! share a first component.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::defenses::{ContentMeta, Partition};
use crate::forwarding::{Action, DropReason, FaceId, FibTable, PartitionConfig, RouterState};
use crate::names::{is_prefix_of, matches_interest, ContentObject, Interest, Name};

/// Index of a node in its topology.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeKind {
    Consumer,
    Router,
    Producer,
}

/// Static shape of the network: labeled nodes and weighted links.
#[derive(Clone, Debug, Default)]
pub struct Topology {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    links: Vec<(NodeId, NodeId, u64)>,
}

fn valid_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Topology {
    pub fn new() -> Topology {
        Topology::default()
    }

    /// Adds a node. Labels are unique handles made of `[A-Za-z0-9_.-]`.
    pub fn add_node(&mut self, label: &str, kind: NodeKind) -> NodeId {
        assert!(valid_label(label), "bad node label {label:?}");
        assert!(
            self.labels.iter().all(|l| l != label),
            "duplicate node label {label:?}"
        );
        let id = NodeId(self.labels.len() as u32);
        self.labels.push(label.to_string());
        self.kinds.push(kind);
        id
    }

    pub fn add_consumer(&mut self, label: &str) -> NodeId {
        self.add_node(label, NodeKind::Consumer)
    }

    pub fn add_router(&mut self, label: &str) -> NodeId {
        self.add_node(label, NodeKind::Router)
    }

    pub fn add_producer(&mut self, label: &str) -> NodeId {
        self.add_node(label, NodeKind::Producer)
    }

    /// Joins two distinct nodes with a symmetric link of `latency_us`.
    pub fn link(&mut self, a: NodeId, b: NodeId, latency_us: u64) {
        assert!(a != b, "self link on {}", self.label(a));
        assert!(latency_us > 0, "zero-latency link");
        assert!(
            !self.links.iter().any(|(x, y, _)| (*x, *y) == (a, b) || (*x, *y) == (b, a)),
            "duplicate link {} - {}",
            self.label(a),
            self.label(b)
        );
        self.links.push((a, b, latency_us));
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.0 as usize]
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.0 as usize]
    }

    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label).map(|i| NodeId(i as u32))
    }

    fn adjacency(&self) -> Vec<Vec<(NodeId, u64)>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for &(a, b, w) in &self.links {
            adj[a.0 as usize].push((b, w));
            adj[b.0 as usize].push((a, w));
        }
        for list in &mut adj {
            list.sort();
        }
        adj
    }

    /// For every node, the neighbor to step to on a lowest-latency path
    /// toward `source` (ties toward the smaller node id), or `None` if
    /// unreachable. Paths never transit endpoints: only routers and the
    /// source itself are expanded.
    fn shortest_toward(&self, source: NodeId) -> Vec<Option<NodeId>> {
        let n = self.labels.len();
        let adj = self.adjacency();
        let mut dist = vec![u64::MAX; n];
        dist[source.0 as usize] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, source.0)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            let transit = v == source.0 || self.kinds[v as usize] == NodeKind::Router;
            if !transit {
                continue;
            }
            for &(u, w) in &adj[v as usize] {
                let nd = d + w;
                if nd < dist[u.0 as usize] {
                    dist[u.0 as usize] = nd;
                    heap.push(Reverse((nd, u.0)));
                }
            }
        }
        (0..n)
            .map(|v| {
                if v == source.0 as usize || dist[v] == u64::MAX {
                    return None;
                }
                adj[v]
                    .iter()
                    .filter(|(u, w)| {
                        dist[u.0 as usize] != u64::MAX
                            && dist[u.0 as usize].saturating_add(*w) == dist[v]
                    })
                    .map(|(u, _)| *u)
                    .min()
            })
            .collect()
    }
}

#[derive(thiserror::Error, Clone, Debug, PartialEq, Eq)]
pub enum SimError {
    #[error("content prefix {prefix} is served by both {a} and {b}")]
    AmbiguousPrefix { prefix: String, a: String, b: String },
}

/// Knobs shared by every node; per-router state (policies, capacities) is
/// adjusted on the built [`Sim`].
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// Router per-packet processing charge.
    pub proc_delay_us: u64,
    /// Pending-interest lifetime at routers.
    pub pit_lifetime_us: u64,
    /// Content-store capacity every router starts with.
    pub cs_capacity: usize,
    /// How long a consumer waits before declaring a fetch dead.
    /// `None` means the pending-interest lifetime.
    pub fetch_timeout_us: Option<u64>,
    /// Half-width of the uniform jitter applied to each link traversal.
    pub jitter_us: u64,
    /// Master seed; every random stream in the run derives from it.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            proc_delay_us: 100,
            pit_lifetime_us: 4_000_000,
            cs_capacity: 64,
            fetch_timeout_us: None,
            jitter_us: 0,
            seed: 0,
        }
    }
}

/// Handle for one consumer fetch.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct RequestId(pub u64);

#[derive(Clone, Debug)]
pub enum FetchOutcome {
    Data { object: ContentObject, rtt_us: u64 },
    Timeout,
}

impl FetchOutcome {
    pub fn rtt(&self) -> Option<u64> {
        match self {
            FetchOutcome::Data { rtt_us, .. } => Some(*rtt_us),
            FetchOutcome::Timeout => None,
        }
    }

    pub fn object(&self) -> Option<&ContentObject> {
        match self {
            FetchOutcome::Data { object, .. } => Some(object),
            FetchOutcome::Timeout => None,
        }
    }
}

/// One line of the simulation log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub time_us: u64,
    pub node: String,
    pub action: &'static str,
    pub name: String,
    pub face: Option<u32>,
    pub detail: String,
}

/// Renders rows as CSV with the fixed header
/// `time_us,node,action,name,face,detail`.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("time_us,node,action,name,face,detail\n");
    for r in rows {
        let face = r.face.map(|f| f.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.time_us, r.node, r.action, r.name, face, r.detail
        ));
    }
    out
}

#[derive(Clone, Debug)]
enum Packet {
    Interest(Interest),
    Data { object: ContentObject, path_len: u32 },
}

#[derive(Debug)]
enum EventKind {
    Arrival { node: NodeId, from_face: FaceId, packet: Packet },
    StartFetch { request: RequestId },
    TimeoutCheck { request: RequestId },
}

#[derive(Debug)]
struct Event {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Event) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Event) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Event) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Clone, Debug)]
struct LinkEnd {
    peer: NodeId,
    latency: u64,
    peer_face: FaceId,
}

enum NodeState {
    Consumer { fib: FibTable },
    Router(RouterState),
    Producer { catalog: BTreeMap<Name, ContentObject> },
}

struct RequestState {
    consumer: NodeId,
    interest: Interest,
    sent_at: Option<u64>,
    outcome: Option<FetchOutcome>,
}

/// A running simulation over one topology.
pub struct Sim {
    topo: Topology,
    config: SimConfig,
    nodes: Vec<NodeState>,
    faces: Vec<Vec<LinkEnd>>,
    face_by_peer: Vec<BTreeMap<NodeId, FaceId>>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: u64,
    rng: ChaCha8Rng,
    requests: BTreeMap<RequestId, RequestState>,
    next_request: u64,
    next_nonce: u64,
    trace: Vec<TraceRow>,
    routes_built: bool,
}

impl Sim {
    pub fn new(topo: Topology, config: SimConfig) -> Sim {
        let n = topo.node_count();
        let mut faces = vec![Vec::new(); n];
        let mut face_by_peer = vec![BTreeMap::new(); n];
        for &(a, b, latency) in &topo.links {
            let fa = FaceId(faces[a.0 as usize].len() as u32);
            let fb = FaceId(faces[b.0 as usize].len() as u32);
            faces[a.0 as usize].push(LinkEnd { peer: b, latency, peer_face: fb });
            faces[b.0 as usize].push(LinkEnd { peer: a, latency, peer_face: fa });
            face_by_peer[a.0 as usize].insert(b, fa);
            face_by_peer[b.0 as usize].insert(a, fb);
        }
        let nodes = (0..n)
            .map(|i| match topo.kinds[i] {
                NodeKind::Consumer => NodeState::Consumer { fib: FibTable::default() },
                NodeKind::Producer => NodeState::Producer { catalog: BTreeMap::new() },
                NodeKind::Router => NodeState::Router(RouterState::new(
                    config.cs_capacity,
                    config.pit_lifetime_us,
                    config.proc_delay_us,
                    // distinct stream per router, all derived from the master seed
                    config.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1),
                )),
            })
            .collect();
        Sim {
            topo,
            config,
            nodes,
            faces,
            face_by_peer,
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0xA5A5_A5A5_5A5A_5A5A),
            requests: BTreeMap::new(),
            next_request: 0,
            next_nonce: 1,
            trace: Vec::new(),
            routes_built: false,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Node handle by label; panics on unknown labels.
    pub fn node(&self, label: &str) -> NodeId {
        self.topo
            .find(label)
            .unwrap_or_else(|| panic!("no node labeled {label:?}"))
    }

    fn fetch_timeout(&self) -> u64 {
        self.config.fetch_timeout_us.unwrap_or(self.config.pit_lifetime_us)
    }

    fn router(&self, id: NodeId) -> &RouterState {
        match &self.nodes[id.0 as usize] {
            NodeState::Router(r) => r,
            _ => panic!("{} is not a router", self.topo.label(id)),
        }
    }

    /// Direct access to a router's pipeline state, for configuring policies
    /// and inspecting caches.
    pub fn router_mut(&mut self, id: NodeId) -> &mut RouterState {
        match &mut self.nodes[id.0 as usize] {
            NodeState::Router(r) => r,
            _ => panic!("{} is not a router", self.topo.label(id)),
        }
    }

    /// Names currently cached at `router`, in lexicographic order.
    pub fn cs_names(&self, router: NodeId) -> Vec<Name> {
        self.router(router).cs.names()
    }

    /// Per-name bookkeeping (`t_m`, serve counts) at `router`.
    pub fn content_meta(&self, router: NodeId, name: &Name) -> Option<ContentMeta> {
        self.router(router).meta_for(name).cloned()
    }

    /// Adds an object to a producer's catalog. Routes rebuild lazily.
    pub fn add_content(&mut self, producer: NodeId, object: ContentObject) {
        assert!(!object.name.is_empty(), "catalog names need at least one component");
        match &mut self.nodes[producer.0 as usize] {
            NodeState::Producer { catalog } => {
                catalog.insert(object.name.clone(), object);
                self.routes_built = false;
            }
            _ => panic!("{} is not a producer", self.topo.label(producer)),
        }
    }

    /// Plants an object in a router's store directly (scenario setup).
    pub fn seed_cache(&mut self, router: NodeId, object: ContentObject) {
        let now = self.now;
        let name = object.name.clone();
        let (inserted, evicted) = self.router_mut(router).cs.insert(object, now);
        if let Some(victim) = evicted {
            self.push_trace(now, router, "cache_evict", &victim, None, String::new());
        }
        if inserted {
            self.push_trace(now, router, "cache_insert", &name, None, "seed".to_string());
        }
    }

    /// Makes `members` (routers) a collaborative cache: the 64-bit digest
    /// space is split evenly among them in ascending node-id order, each
    /// stores only names it owns, and non-owners hand interests to the owner
    /// over direct member links. Member pairs without a direct link fall
    /// back to solo caching for the names involved.
    pub fn set_partition(&mut self, members: &[NodeId]) {
        assert!(!members.is_empty(), "empty partition");
        let mut sorted: Vec<NodeId> = members.to_vec();
        sorted.sort();
        sorted.dedup();
        let partition = Partition::equal_split(sorted.iter().map(|m| m.0).collect())
            .expect("non-empty member list");
        for &m in &sorted {
            let mut member_faces = BTreeMap::new();
            for &o in &sorted {
                if o != m {
                    if let Some(&face) = self.face_by_peer[m.0 as usize].get(&o) {
                        member_faces.insert(o.0, face);
                    }
                }
            }
            self.router_mut(m).partition = Some(PartitionConfig {
                partition: partition.clone(),
                self_member: m.0,
                member_faces,
            });
        }
    }

    /// Computes every node's routes from the producers' catalogs. Runs
    /// automatically before traffic; call it directly to surface errors.
    pub fn build_routes(&mut self) -> Result<(), SimError> {
        let mut owner: BTreeMap<Name, NodeId> = BTreeMap::new();
        let mut served: BTreeMap<NodeId, BTreeSet<Name>> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeState::Producer { catalog } = node {
                let id = NodeId(i as u32);
                for name in catalog.keys() {
                    let prefix = name.prefix(1);
                    if let Some(&other) = owner.get(&prefix) {
                        if other != id {
                            return Err(SimError::AmbiguousPrefix {
                                prefix: prefix.to_string(),
                                a: self.topo.label(other).to_string(),
                                b: self.topo.label(id).to_string(),
                            });
                        }
                    }
                    owner.insert(prefix.clone(), id);
                    served.entry(id).or_default().insert(prefix);
                }
            }
        }
        for node in &mut self.nodes {
            match node {
                NodeState::Router(r) => r.fib = FibTable::default(),
                NodeState::Consumer { fib } => *fib = FibTable::default(),
                NodeState::Producer { .. } => {}
            }
        }
        for (&producer, prefixes) in &served {
            let toward = self.topo.shortest_toward(producer);
            for v in 0..self.nodes.len() {
                let Some(next) = toward[v] else { continue };
                let face = self.face_by_peer[v][&next];
                match &mut self.nodes[v] {
                    NodeState::Router(r) => {
                        for p in prefixes {
                            r.fib.add(p.clone(), face);
                        }
                    }
                    NodeState::Consumer { fib } => {
                        for p in prefixes {
                            fib.add(p.clone(), face);
                        }
                    }
                    NodeState::Producer { .. } => {}
                }
            }
        }
        // Consumers are stub nodes: whatever the name, traffic leaves
        // through the access link, so each gets a default (root-prefix)
        // route out its cheapest face. Scoped enumeration probes, whose
        // names no producer prefix covers, depend on it; for everything
        // else the longer producer prefixes win the match.
        for v in 0..self.nodes.len() {
            if !matches!(self.nodes[v], NodeState::Consumer { .. }) {
                continue;
            }
            let default = self.faces[v]
                .iter()
                .enumerate()
                .min_by_key(|(i, end)| (end.latency, *i))
                .map(|(i, _)| FaceId(i as u32));
            if let (Some(face), NodeState::Consumer { fib }) = (default, &mut self.nodes[v]) {
                fib.add(Name::root(), face);
            }
        }
        self.routes_built = true;
        Ok(())
    }

    fn ensure_routes(&mut self) {
        if !self.routes_built {
            self.build_routes().expect("route build failed");
        }
    }

    /// Consumers whose interests can traverse `router` on the way to some
    /// producer — the crowd a cache observation at that router hides in.
    pub fn anonymity_set(&self, router: NodeId) -> BTreeSet<NodeId> {
        let mut set = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let NodeState::Producer { catalog } = node else { continue };
            if catalog.is_empty() {
                continue;
            }
            let producer = NodeId(i as u32);
            let toward = self.topo.shortest_toward(producer);
            for c in 0..self.nodes.len() {
                if self.topo.kind(NodeId(c as u32)) != NodeKind::Consumer {
                    continue;
                }
                let mut v = NodeId(c as u32);
                while let Some(next) = toward[v.0 as usize] {
                    if next == router {
                        set.insert(NodeId(c as u32));
                        break;
                    }
                    if next == producer {
                        break;
                    }
                    v = next;
                }
            }
        }
        set
    }

    /// Routers an interest for `name` would traverse from `from`, in hop
    /// order, following longest-prefix routes until the producer (or a dead
    /// end). The first entry is `from`'s edge router.
    pub fn forwarding_path(&mut self, from: NodeId, name: &Name) -> Vec<NodeId> {
        self.ensure_routes();
        let mut path = Vec::new();
        let mut cur = from;
        loop {
            let fib = match &self.nodes[cur.0 as usize] {
                NodeState::Consumer { fib } => fib,
                NodeState::Router(r) => &r.fib,
                NodeState::Producer { .. } => break,
            };
            let Some(face) = fib.lpm(name) else { break };
            let next = self.faces[cur.0 as usize][face.0 as usize].peer;
            if self.topo.kind(next) == NodeKind::Router {
                if path.contains(&next) {
                    break; // a routing loop would spin forever; bail
                }
                path.push(next);
            }
            cur = next;
        }
        path
    }

    fn push_event(&mut self, time: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    fn push_trace(&mut self, time: u64, node: NodeId, action: &'static str, name: &Name,
                  face: Option<FaceId>, detail: String) {
        self.trace.push(TraceRow {
            time_us: time,
            node: self.topo.label(node).to_string(),
            action,
            name: name.to_string(),
            face: face.map(|f| f.0),
            detail,
        });
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn trace_csv(&self) -> String {
        trace_to_csv(&self.trace)
    }

    /// Schedules a fetch to start at absolute time `at` (≥ now). The result
    /// is observable via [`Sim::outcome`] once simulated time passes; nobody
    /// has to wait on it.
    pub fn request_at(&mut self, consumer: NodeId, interest: Interest, at: u64) -> RequestId {
        assert!(
            matches!(self.topo.kind(consumer), NodeKind::Consumer),
            "{} is not a consumer",
            self.topo.label(consumer)
        );
        assert!(at >= self.now, "cannot schedule a fetch in the past");
        self.ensure_routes();
        let id = RequestId(self.next_request);
        self.next_request += 1;
        self.requests.insert(id, RequestState {
            consumer,
            interest,
            sent_at: None,
            outcome: None,
        });
        self.push_event(at, EventKind::StartFetch { request: id });
        self.push_event(at + self.fetch_timeout(), EventKind::TimeoutCheck { request: id });
        id
    }

    /// Runs the clock until `request` resolves. Always terminates: every
    /// request carries a timeout event.
    pub fn wait(&mut self, request: RequestId) -> FetchOutcome {
        loop {
            if let Some(out) = &self.requests[&request].outcome {
                return out.clone();
            }
            if !self.step() {
                unreachable!("request {request:?} has no pending timeout event");
            }
        }
    }

    /// Sends an interest now and blocks until data or timeout.
    pub fn fetch(&mut self, consumer: NodeId, interest: Interest) -> FetchOutcome {
        let id = self.request_at(consumer, interest, self.now);
        self.wait(id)
    }

    /// [`Sim::fetch`], reduced to the round-trip time (`None` on timeout).
    pub fn measure_rtt(&mut self, consumer: NodeId, interest: Interest) -> Option<u64> {
        self.fetch(consumer, interest).rtt()
    }

    pub fn outcome(&self, request: RequestId) -> Option<FetchOutcome> {
        self.requests.get(&request).and_then(|r| r.outcome.clone())
    }

    /// Processes every event scheduled at or before `t`, then advances the
    /// clock to `t`.
    pub fn run_until(&mut self, t: u64) {
        while matches!(self.heap.peek(), Some(Reverse(ev)) if ev.time <= t) {
            self.step();
        }
        self.now = self.now.max(t);
    }

    /// Drains every scheduled event.
    pub fn run_all(&mut self) {
        while self.step() {}
    }

    fn step(&mut self) -> bool {
        let Some(Reverse(ev)) = self.heap.pop() else {
            return false;
        };
        self.now = ev.time;
        match ev.kind {
            EventKind::StartFetch { request } => self.start_fetch(request),
            EventKind::TimeoutCheck { request } => {
                let state = self.requests.get_mut(&request).expect("request exists");
                if state.outcome.is_none() {
                    state.outcome = Some(FetchOutcome::Timeout);
                    let consumer = state.consumer;
                    let name = state.interest.name.clone();
                    self.push_trace(self.now, consumer, "timeout", &name, None, String::new());
                }
            }
            EventKind::Arrival { node, from_face, packet } => match self.topo.kind(node) {
                NodeKind::Router => self.router_arrival(node, from_face, packet),
                NodeKind::Producer => self.producer_arrival(node, from_face, packet),
                NodeKind::Consumer => self.consumer_arrival(node, from_face, packet),
            },
        }
        true
    }

    fn start_fetch(&mut self, request: RequestId) {
        let now = self.now;
        let (consumer, mut interest) = {
            let state = self.requests.get_mut(&request).expect("request exists");
            state.sent_at = Some(now);
            (state.consumer, state.interest.clone())
        };
        interest.nonce = self.next_nonce;
        self.next_nonce += 1;
        let NodeState::Consumer { fib } = &self.nodes[consumer.0 as usize] else {
            unreachable!("requests only target consumers");
        };
        match fib.lpm(&interest.name) {
            Some(face) => {
                let mut parts = Vec::new();
                if let Some(s) = interest.scope {
                    parts.push(format!("scope={s}"));
                }
                if !interest.exclusions.is_empty() {
                    parts.push(format!("excl={}", interest.exclusions.len()));
                }
                self.push_trace(now, consumer, "send_interest", &interest.name.clone(),
                                Some(face), parts.join(" "));
                // consumers charge nothing: the interest departs immediately
                self.transmit(consumer, face, Packet::Interest(interest), now);
            }
            None => {
                self.push_trace(now, consumer, "drop_interest", &interest.name, None,
                                DropReason::NoRoute.to_string());
            }
        }
    }

    fn transmit(&mut self, from: NodeId, face: FaceId, packet: Packet, depart: u64) {
        let end = self.faces[from.0 as usize][face.0 as usize].clone();
        let mut latency = end.latency;
        if self.config.jitter_us > 0 {
            let j = self.config.jitter_us as i64;
            latency = (latency as i64 + self.rng.gen_range(-j..=j)).max(1) as u64;
        }
        self.push_event(depart + latency, EventKind::Arrival {
            node: end.peer,
            from_face: end.peer_face,
            packet,
        });
    }

    fn router_arrival(&mut self, node: NodeId, from_face: FaceId, packet: Packet) {
        let now = self.now;
        let actions = {
            let NodeState::Router(router) = &mut self.nodes[node.0 as usize] else {
                unreachable!()
            };
            match &packet {
                Packet::Interest(i) => router.on_interest(i, from_face, now),
                Packet::Data { object, path_len } => router.on_data(object, *path_len, now),
            }
        };
        let proc = self.config.proc_delay_us;
        for act in actions {
            match act {
                Action::ForwardInterest { interest, face, relay } => {
                    let action = if relay { "relay_interest" } else { "forward_interest" };
                    self.push_trace(now, node, action, &interest.name, Some(face), String::new());
                    self.transmit(node, face, Packet::Interest(interest), now + proc);
                }
                Action::SendData { object, face, delay, from_cache, path_len } => {
                    // a store hit pays the processing charge twice: once for
                    // the interest, once for the data it emits
                    let (action, depart) = if from_cache {
                        ("cs_hit", now + 2 * proc + delay)
                    } else {
                        ("forward_data", now + proc)
                    };
                    let detail =
                        if from_cache { format!("delay={delay}") } else { String::new() };
                    self.push_trace(now, node, action, &object.name, Some(face), detail);
                    self.transmit(node, face, Packet::Data { object, path_len }, depart);
                }
                Action::CollapsePit { name, face } => {
                    self.push_trace(now, node, "collapse_pit", &name, Some(face), String::new());
                }
                Action::DropInterest { name, reason } => {
                    self.push_trace(now, node, "drop_interest", &name, None, reason.to_string());
                }
                Action::DropData { name, reason } => {
                    self.push_trace(now, node, "drop_data", &name, None, reason.to_string());
                }
                Action::Cached { name } => {
                    self.push_trace(now, node, "cache_insert", &name, None, String::new());
                }
                Action::Evicted { name } => {
                    self.push_trace(now, node, "cache_evict", &name, None, String::new());
                }
                Action::SoloFallback { name } => {
                    self.push_trace(now, node, "solo_fallback", &name, None, String::new());
                }
            }
        }
    }

    fn producer_arrival(&mut self, node: NodeId, from_face: FaceId, packet: Packet) {
        let now = self.now;
        match packet {
            Packet::Interest(i) => {
                let NodeState::Producer { catalog } = &self.nodes[node.0 as usize] else {
                    unreachable!()
                };
                // smallest-named catalog entry satisfying the interest
                let found = catalog
                    .range(i.name.clone()..)
                    .take_while(|(name, _)| is_prefix_of(&i.name, name))
                    .map(|(_, o)| o)
                    .find(|o| matches_interest(&i, o))
                    .cloned();
                match found {
                    Some(object) => {
                        self.push_trace(now, node, "producer_reply", &object.name,
                                        Some(from_face), String::new());
                        // producers are endpoints: no processing charge
                        self.transmit(node, from_face,
                                      Packet::Data { object, path_len: i.hops }, now);
                    }
                    None => {
                        self.push_trace(now, node, "drop_interest", &i.name, None,
                                        "no_content".to_string());
                    }
                }
            }
            Packet::Data { object, .. } => {
                self.push_trace(now, node, "drop_data", &object.name, None,
                                DropReason::UnsolicitedData.to_string());
            }
        }
    }

    fn consumer_arrival(&mut self, node: NodeId, from_face: FaceId, packet: Packet) {
        let now = self.now;
        match packet {
            Packet::Interest(i) => {
                self.push_trace(now, node, "drop_interest", &i.name, None,
                                "consumer".to_string());
            }
            Packet::Data { object, .. } => {
                let mut matched = Vec::new();
                for (&id, state) in &self.requests {
                    if state.consumer == node
                        && state.sent_at.is_some()
                        && state.outcome.is_none()
                        && matches_interest(&state.interest, &object)
                    {
                        matched.push(id);
                    }
                }
                if matched.is_empty() {
                    self.push_trace(now, node, "drop_data", &object.name, None,
                                    "unmatched".to_string());
                    return;
                }
                for id in matched {
                    let state = self.requests.get_mut(&id).expect("request exists");
                    let rtt_us = now - state.sent_at.expect("matched requests were sent");
                    state.outcome = Some(FetchOutcome::Data { object: object.clone(), rtt_us });
                    self.push_trace(now, node, "deliver", &object.name, Some(from_face),
                                    format!("rtt={rtt_us}"));
                }
            }
        }
    }
}
