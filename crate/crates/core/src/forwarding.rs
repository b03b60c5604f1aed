//! Router state and the forwarding pipeline: content store, pending-interest
//! table, and longest-prefix-match routes.
//!
//! [`RouterState::on_interest`] and [`RouterState::on_data`] are the only
//! mutation points; both are pure state machines that return [`Action`]s for
//! the transport (the simulator) to execute, so the pipeline is testable
//! without any network machinery.
//!
//! The interest path runs content store → PIT → FIB:
//!
//! 1. a store hit answers directly (smallest matching name, exclusions
//!    honored), after whatever delay the reply policy imposes;
//! 2. an exact-name pending entry collapses the interest — the new face is
//!    recorded, nothing goes upstream;
//! 3. otherwise the interest is forwarded along the longest matching route
//!    and a pending entry is created — unless its scope is spent or no route
//!    exists, in which case it is dropped.
//!
//! Returning data consumes every pending entry whose name is a prefix of the
//! data name, feeds the downstream faces, and is offered to the cache policy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::defenses::{ContentMeta, Partition};
use crate::names::{matches_interest, ContentObject, Interest, Name};

/// Local interface index on a node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FaceId(pub u32);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct CsEntry {
    pub object: ContentObject,
    pub inserted_at: u64,
    pub last_access: u64,
}

/// Fixed-capacity object cache with LRU replacement. Entries are keyed by
/// full name in lexicographic order, which fixes the enumeration order a
/// prefix lookup walks.
#[derive(Debug, Default)]
pub struct ContentStore {
    capacity: usize,
    entries: BTreeMap<Name, CsEntry>,
}

impl ContentStore {
    pub fn new(capacity: usize) -> ContentStore {
        ContentStore { capacity, entries: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Occupancy in [0, 1]; a zero-capacity store counts as full.
    pub fn fill(&self) -> f64 {
        if self.capacity == 0 {
            1.0
        } else {
            self.entries.len() as f64 / self.capacity as f64
        }
    }

    /// Smallest-named stored object that satisfies `i`, refreshing its
    /// recency. Names sharing a prefix are contiguous in the map, so the scan
    /// stops at the first name past the prefix region.
    pub fn lookup(&mut self, i: &Interest, now: u64) -> Option<ContentObject> {
        let mut found: Option<Name> = None;
        for (name, entry) in self.entries.range(i.name.clone()..) {
            if !crate::names::is_prefix_of(&i.name, name) {
                break;
            }
            if matches_interest(i, &entry.object) {
                found = Some(name.clone());
                break;
            }
        }
        let name = found?;
        let entry = self.entries.get_mut(&name).expect("entry just found");
        entry.last_access = now;
        Some(entry.object.clone())
    }

    /// Non-mutating variant of [`ContentStore::lookup`] for inspection.
    pub fn peek(&self, i: &Interest) -> Option<&ContentObject> {
        self.entries
            .range(i.name.clone()..)
            .take_while(|(name, _)| crate::names::is_prefix_of(&i.name, name))
            .map(|(_, e)| &e.object)
            .find(|o| matches_interest(i, o))
    }

    /// Inserts (or refreshes) an object, evicting the least recently accessed
    /// entry if at capacity. Returns whether a new entry was added and the
    /// name evicted, if any. A zero-capacity store stores nothing.
    pub fn insert(&mut self, object: ContentObject, now: u64) -> (bool, Option<Name>) {
        if self.capacity == 0 {
            return (false, None);
        }
        if let Some(entry) = self.entries.get_mut(&object.name) {
            entry.object = object;
            entry.last_access = now;
            return (false, None);
        }
        let mut evicted = None;
        if self.entries.len() >= self.capacity {
            // least recently accessed; ties broken by smallest name so
            // eviction order never depends on map iteration internals
            let victim = self
                .entries
                .iter()
                .min_by_key(|(name, e)| (e.last_access, (*name).clone()))
                .map(|(name, _)| name.clone())
                .expect("store is non-empty");
            self.entries.remove(&victim);
            evicted = Some(victim);
        }
        self.entries.insert(
            object.name.clone(),
            CsEntry { object, inserted_at: now, last_access: now },
        );
        (true, evicted)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    /// Stored names in lexicographic order (a stable snapshot).
    pub fn names(&self) -> Vec<Name> {
        self.entries.keys().cloned().collect()
    }
}

#[derive(Clone, Debug)]
pub struct PitEntry {
    pub faces: BTreeSet<FaceId>,
    pub created: u64,
    /// When the interest left this router upstream; upstream round trips
    /// (`t_m`) are measured from here.
    pub forwarded_at: u64,
    pub expiry: u64,
    /// Routers the interest had traversed on arrival here (this one included).
    pub interest_hops: u32,
}

/// Pending-interest table keyed by exact interest name.
#[derive(Debug)]
pub struct PitTable {
    lifetime: u64,
    entries: BTreeMap<Name, PitEntry>,
}

impl PitTable {
    pub fn new(lifetime: u64) -> PitTable {
        PitTable { lifetime, entries: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lifetime(&self) -> u64 {
        self.lifetime
    }

    /// Drops every entry whose lifetime has elapsed. Runs before any lookup.
    pub fn purge_expired(&mut self, now: u64) {
        self.entries.retain(|_, e| e.expiry > now);
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    pub fn insert_new(&mut self, name: Name, face: FaceId, now: u64, forwarded_at: u64,
                      interest_hops: u32) {
        let mut faces = BTreeSet::new();
        faces.insert(face);
        self.entries.insert(name, PitEntry {
            faces,
            created: now,
            forwarded_at,
            expiry: now + self.lifetime,
            interest_hops,
        });
    }

    /// Records one more downstream face on an existing entry.
    pub fn add_face(&mut self, name: &Name, face: FaceId) -> bool {
        match self.entries.get_mut(name) {
            Some(e) => {
                e.faces.insert(face);
                true
            }
            None => false,
        }
    }

    /// Removes and returns every entry whose name is a prefix of (or equal
    /// to) `data_name`, shortest first. Prefixes are directly enumerable, so
    /// this is a handful of exact lookups, not a scan.
    pub fn consume_matching(&mut self, data_name: &Name) -> Vec<(Name, PitEntry)> {
        let mut consumed = Vec::new();
        for len in 0..=data_name.len() {
            let prefix = data_name.prefix(len);
            if let Some(entry) = self.entries.remove(&prefix) {
                consumed.push((prefix, entry));
            }
        }
        consumed
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    pub face: FaceId,
}

/// Longest-prefix-match routing table.
#[derive(Debug, Default)]
pub struct FibTable {
    entries: Vec<FibEntry>,
}

impl FibTable {
    pub fn add(&mut self, prefix: Name, face: FaceId) {
        self.entries.push(FibEntry { prefix, face });
    }

    pub fn entries(&self) -> &[FibEntry] {
        &self.entries
    }

    /// Face of the longest matching prefix; among equally long matches the
    /// lowest face id wins, so route choice is deterministic.
    pub fn lpm(&self, name: &Name) -> Option<FaceId> {
        self.entries
            .iter()
            .filter(|e| crate::names::is_prefix_of(&e.prefix, name))
            .min_by_key(|e| (std::cmp::Reverse(e.prefix.len()), e.face))
            .map(|e| e.face)
    }
}

/// Why the pipeline refused a packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    DuplicateNonce,
    ScopeExhausted,
    NoRoute,
    UnsolicitedData,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::DuplicateNonce => "duplicate_nonce",
            DropReason::ScopeExhausted => "scope_exhausted",
            DropReason::NoRoute => "no_route",
            DropReason::UnsolicitedData => "unsolicited_data",
        };
        f.write_str(s)
    }
}

/// What a router decided; the transport executes these.
#[derive(Clone, Debug)]
pub enum Action {
    /// Send the interest upstream on `face`. `relay` marks a partition
    /// detour to the owning cache member rather than a route toward the
    /// producer.
    ForwardInterest { interest: Interest, face: FaceId, relay: bool },
    /// Send `object` out on `face`. `delay` is the reply policy's hold (only
    /// ever non-zero for store hits); `from_cache` distinguishes a store hit
    /// from relaying upstream data; `path_len` is the router count between
    /// this data's origin and the consumer, carried for placement decisions
    /// downstream.
    SendData { object: ContentObject, face: FaceId, delay: u64, from_cache: bool, path_len: u32 },
    /// Interest joined an existing pending entry; nothing goes upstream.
    CollapsePit { name: Name, face: FaceId },
    DropInterest { name: Name, reason: DropReason },
    DropData { name: Name, reason: DropReason },
    /// Bookkeeping notifications so traces can show cache churn.
    Cached { name: Name },
    Evicted { name: Name },
    /// Partition relay was configured but the owner is unreachable; the
    /// router fell back to caching solo for this name.
    SoloFallback { name: Name },
}

/// Decision inputs for a cache-placement policy.
#[derive(Clone, Copy, Debug)]
pub struct CacheContext {
    /// Router hops between this router and the consumer (0 = edge).
    pub path_position: u32,
    /// Total routers on the data's path.
    pub path_len: u32,
    /// Store occupancy in [0, 1] before this insert.
    pub fill: f64,
}

/// Should this router store a passing object?
pub trait CachePolicy {
    fn decide(&mut self, object: &ContentObject, ctx: &CacheContext,
              rng: &mut ChaCha8Rng) -> bool;
}

/// Store everything (the classic leave-copy-everywhere default).
pub struct AlwaysCache;

impl CachePolicy for AlwaysCache {
    fn decide(&mut self, _: &ContentObject, _: &CacheContext, _: &mut ChaCha8Rng) -> bool {
        true
    }
}

/// How long to sit on a content-store hit before replying, microseconds.
pub trait ReplyPolicy {
    fn delay(&mut self, meta: &mut ContentMeta, rng: &mut ChaCha8Rng) -> u64;
}

/// Reply to hits immediately.
pub struct NoDelay;

impl ReplyPolicy for NoDelay {
    fn delay(&mut self, _: &mut ContentMeta, _: &mut ChaCha8Rng) -> u64 {
        0
    }
}

/// Collaborative-caching wiring for one partition member: who owns what, and
/// which local face reaches each fellow member.
#[derive(Clone, Debug)]
pub struct PartitionConfig {
    pub partition: Partition,
    /// This router's member id within the partition.
    pub self_member: u32,
    /// Member id → local face that reaches it directly.
    pub member_faces: BTreeMap<u32, FaceId>,
}

/// All forwarding state of one router.
pub struct RouterState {
    pub cs: ContentStore,
    pub pit: PitTable,
    pub fib: FibTable,
    pub meta: BTreeMap<Name, ContentMeta>,
    pub cache_policy: Box<dyn CachePolicy>,
    pub reply_policy: Box<dyn ReplyPolicy>,
    pub partition: Option<PartitionConfig>,
    /// Per-packet processing constant, microseconds; used to stamp when a
    /// forwarded interest actually leaves, so upstream round trips are
    /// measured from departure rather than arrival.
    proc_delay: u64,
    seen_nonces: BTreeSet<(Name, u64)>,
    rng: ChaCha8Rng,
}

impl RouterState {
    pub fn new(cs_capacity: usize, pit_lifetime: u64, proc_delay: u64, rng_seed: u64)
        -> RouterState
    {
        RouterState {
            cs: ContentStore::new(cs_capacity),
            pit: PitTable::new(pit_lifetime),
            fib: FibTable::default(),
            meta: BTreeMap::new(),
            cache_policy: Box::new(AlwaysCache),
            reply_policy: Box::new(NoDelay),
            partition: None,
            proc_delay,
            seen_nonces: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    /// Plants an object directly in the store (test and scenario setup;
    /// simulation traffic goes through [`RouterState::on_data`]).
    pub fn seed_cs(&mut self, object: ContentObject, now: u64) {
        self.cs.insert(object, now);
    }

    pub fn meta_for(&self, name: &Name) -> Option<&ContentMeta> {
        self.meta.get(name)
    }

    /// Runs the interest pipeline. `i` is the packet as it arrived; scope and
    /// hop accounting for this traversal happen here.
    pub fn on_interest(&mut self, i: &Interest, in_face: FaceId, now: u64) -> Vec<Action> {
        let mut i = i.clone();
        i.scope = i.scope.map(|s| s.saturating_sub(1));
        i.hops += 1;

        self.pit.purge_expired(now);

        if !self.seen_nonces.insert((i.name.clone(), i.nonce)) {
            return vec![Action::DropInterest {
                name: i.name,
                reason: DropReason::DuplicateNonce,
            }];
        }

        if let Some(object) = self.cs.lookup(&i, now) {
            let meta = self.meta.entry(object.name.clone()).or_default();
            let delay = self.reply_policy.delay(meta, &mut self.rng);
            meta.served_count += 1;
            return vec![Action::SendData {
                object,
                face: in_face,
                delay,
                from_cache: true,
                path_len: i.hops,
            }];
        }

        if self.pit.contains(&i.name) {
            self.pit.add_face(&i.name, in_face);
            return vec![Action::CollapsePit { name: i.name, face: in_face }];
        }

        if i.scope == Some(0) {
            return vec![Action::DropInterest {
                name: i.name,
                reason: DropReason::ScopeExhausted,
            }];
        }

        let mut actions = Vec::new();

        // partition detour: a non-owner member hands the interest to the
        // owner instead of routing upstream (never bounce one that already
        // came from a member)
        if let Some(pc) = &self.partition {
            let owner = pc.partition.owner(&i.name);
            let from_member = pc.member_faces.values().any(|f| *f == in_face);
            if let Some(owner) = owner.filter(|o| *o != pc.self_member) {
                if !from_member {
                    match pc.member_faces.get(&owner) {
                        Some(&face) => {
                            self.pit.insert_new(
                                i.name.clone(), in_face, now, now + self.proc_delay, i.hops);
                            return vec![Action::ForwardInterest {
                                interest: i,
                                face,
                                relay: true,
                            }];
                        }
                        None => actions.push(Action::SoloFallback { name: i.name.clone() }),
                    }
                }
            }
        }

        match self.fib.lpm(&i.name) {
            Some(face) => {
                self.pit.insert_new(i.name.clone(), in_face, now, now + self.proc_delay, i.hops);
                actions.push(Action::ForwardInterest { interest: i, face, relay: false });
            }
            None => actions.push(Action::DropInterest {
                name: i.name,
                reason: DropReason::NoRoute,
            }),
        }
        actions
    }

    /// Runs the data pipeline for an object arriving from upstream.
    /// `path_len` is the router count the data's origin stamped on it.
    pub fn on_data(&mut self, object: &ContentObject, path_len: u32, now: u64) -> Vec<Action> {
        self.pit.purge_expired(now);

        let consumed = self.pit.consume_matching(&object.name);
        if consumed.is_empty() {
            return vec![Action::DropData {
                name: object.name.clone(),
                reason: DropReason::UnsolicitedData,
            }];
        }

        // upstream round trip, measured from when the most specific pending
        // interest left this router
        let specific = &consumed[consumed.len() - 1].1;
        let sample = now.saturating_sub(specific.forwarded_at);
        self.meta.entry(object.name.clone()).or_default().observe_fetch(sample);

        let mut actions = Vec::new();

        // a partition member only stores names it owns — except when the
        // owner is unreachable, where it acts solo for that name
        let owner_ok = match &self.partition {
            Some(pc) => match pc.partition.owner(&object.name) {
                Some(o) => o == pc.self_member || !pc.member_faces.contains_key(&o),
                None => true,
            },
            None => true,
        };
        if owner_ok && self.cs.capacity() > 0 {
            let ctx = CacheContext {
                path_position: specific.interest_hops.saturating_sub(1),
                path_len,
                fill: self.cs.fill(),
            };
            if self.cache_policy.decide(object, &ctx, &mut self.rng) {
                let (inserted, evicted) = self.cs.insert(object.clone(), now);
                if let Some(name) = evicted {
                    actions.push(Action::Evicted { name });
                }
                if inserted {
                    actions.push(Action::Cached { name: object.name.clone() });
                }
            }
        }

        let mut faces: BTreeSet<FaceId> = BTreeSet::new();
        for (_, entry) in &consumed {
            faces.extend(&entry.faces);
        }
        let meta = self.meta.entry(object.name.clone()).or_default();
        meta.served_count += faces.len() as u64;
        for face in faces {
            actions.push(Action::SendData {
                object: object.clone(),
                face,
                delay: 0,
                from_cache: false,
                path_len,
            });
        }
        actions
    }
}
