//! Cache probing from a consumer's seat: timing classification of where a
//! name is cached, periodic monitoring of a neighbor's fetches, and
//! exclusion-driven enumeration of an edge cache.
//!
//! Everything here works through the normal consumer interface of a
//! [`Sim`] — send interests, read round-trip times. The three primitives:
//!
//! - [`calibrate`] + [`classify`]: build reference timings (cached at the
//!   closest router vs. answered by the producer) and sort a probe's RTT
//!   into [`CacheVerdict`] buckets;
//! - [`monitor_content`]: probe one name on a fixed period with scope-1
//!   interests, which touch only the shared edge cache and — crucially —
//!   never plant anything, so a hit can only mean someone nearby fetched it;
//! - [`dump_cache`]: grow an exclusion set until the edge cache runs out of
//!   answers, recovering its contents under a prefix in lexicographic order.

use std::collections::BTreeSet;
use std::fmt;

use crate::names::{Interest, Name};
use crate::simnet::{FetchOutcome, NodeId, Sim};

/// Reference timings a probe RTT is judged against, all in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimingCalibration {
    /// Round trip when the closest router answers from its store.
    pub rtt_cached: u64,
    /// Round trip when the producer answers.
    pub rtt_server: u64,
    /// Half-width of the acceptance band around the reference timings.
    pub epsilon: u64,
    /// Round-trip cost of one extra router hop, for placing upstream copies.
    pub per_hop_rtt: u64,
}

/// Where a probed name appears to live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheVerdict {
    /// Answered at the closest router's store.
    CachedAtClosest,
    /// Answered from a store `hops` routers above the closest one.
    CachedUpstream { hops: u32 },
    /// Answered by the producer — or, if `anomalous`, by nothing the
    /// calibration explains (slower than the producer or faster than the
    /// near cache).
    NotCached { anomalous: bool },
}

impl fmt::Display for CacheVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheVerdict::CachedAtClosest => write!(f, "cached_at_closest"),
            CacheVerdict::CachedUpstream { hops } => write!(f, "cached_upstream({hops})"),
            CacheVerdict::NotCached { anomalous: false } => write!(f, "not_cached"),
            CacheVerdict::NotCached { anomalous: true } => write!(f, "anomalous"),
        }
    }
}

#[derive(thiserror::Error, Clone, Debug, PartialEq, Eq)]
pub enum AttackError {
    #[error("calibration needs at least one source name")]
    NoCalibrationSources,
    #[error("calibration failed: cached {rtt_cached:?}us is not faster than server {rtt_server:?}us")]
    CalibrationFailed { rtt_cached: Option<u64>, rtt_server: Option<u64> },
}

/// Lower median of the samples (deterministic for even counts).
fn median(samples: &mut Vec<u64>) -> u64 {
    samples.sort_unstable();
    samples[(samples.len() - 1) / 2]
}

/// Measures reference timings by fetching `sources` the attacker knows the
/// producer serves: the first fetch of each name is a server round trip and
/// plants the name at the closest router, so the immediate refetch is a
/// cached round trip. Uses medians across sources. `epsilon` and
/// `per_hop_rtt` are the attacker's prior knowledge of the deployment.
///
/// Fails unless the cached timing is strictly faster than the server timing
/// — if the two are indistinguishable (a countermeasure, or no cache), no
/// verdict is possible.
pub fn calibrate(sim: &mut Sim, consumer: NodeId, sources: &[Name], epsilon: u64,
                 per_hop_rtt: u64) -> Result<TimingCalibration, AttackError> {
    if sources.is_empty() {
        return Err(AttackError::NoCalibrationSources);
    }
    let mut server = Vec::new();
    let mut cached = Vec::new();
    for name in sources {
        let miss = sim.measure_rtt(consumer, Interest::new(name.clone()));
        let hit = sim.measure_rtt(consumer, Interest::new(name.clone()));
        match (miss, hit) {
            (Some(m), Some(h)) => {
                server.push(m);
                cached.push(h);
            }
            _ => {
                return Err(AttackError::CalibrationFailed {
                    rtt_cached: hit,
                    rtt_server: miss,
                })
            }
        }
    }
    let rtt_server = median(&mut server);
    let rtt_cached = median(&mut cached);
    if rtt_cached >= rtt_server {
        return Err(AttackError::CalibrationFailed {
            rtt_cached: Some(rtt_cached),
            rtt_server: Some(rtt_server),
        });
    }
    Ok(TimingCalibration { rtt_cached, rtt_server, epsilon, per_hop_rtt })
}

/// Sorts one probe round trip into a verdict. Rules, in order:
/// within `epsilon` of the cached reference → at the closest router;
/// strictly between the references → upstream, with the hop count read off
/// the per-hop cost (at least 1); within `epsilon` of the server reference →
/// not cached; anything else is anomalous.
pub fn classify(cal: &TimingCalibration, rtt: u64) -> CacheVerdict {
    if rtt.abs_diff(cal.rtt_cached) < cal.epsilon {
        return CacheVerdict::CachedAtClosest;
    }
    if cal.rtt_cached < rtt && rtt < cal.rtt_server {
        let hops = ((rtt - cal.rtt_cached) as f64 / cal.per_hop_rtt as f64).round() as u32;
        return CacheVerdict::CachedUpstream { hops: hops.max(1) };
    }
    if rtt.abs_diff(cal.rtt_server) < cal.epsilon {
        return CacheVerdict::NotCached { anomalous: false };
    }
    CacheVerdict::NotCached { anomalous: true }
}

/// One unscoped probe of `name`, classified. The probe itself plants the
/// name on its return path, so probe each name at most once per experiment.
pub fn probe(sim: &mut Sim, attacker: NodeId, name: &Name, cal: &TimingCalibration)
    -> (Option<u64>, CacheVerdict)
{
    match sim.measure_rtt(attacker, Interest::new(name.clone())) {
        Some(rtt) => (Some(rtt), classify(cal, rtt)),
        None => (None, CacheVerdict::NotCached { anomalous: true }),
    }
}

/// One probe of a monitoring run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonitorSample {
    pub probe_time: u64,
    /// Round trip if the probe was answered within its period.
    pub rtt: Option<u64>,
    /// Whether the shared edge cache answered.
    pub hit: bool,
}

/// Probes `name` every `period` microseconds, `count` times, starting at
/// `start`. Probes carry scope 1: they can only be answered by the first
/// router (or ride along on its pending interests), never travel further,
/// and never plant the name — so the first hit pins a neighbor's fetch of
/// `name` to one period.
///
/// The clock ends up at the last probe's deadline; anything else scheduled
/// on the simulator (the victim's traffic) runs on the way.
pub fn monitor_content(sim: &mut Sim, attacker: NodeId, name: &Name, start: u64,
                       period: u64, count: usize) -> Vec<MonitorSample> {
    let mut samples = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let t = start + k * period;
        let req = sim.request_at(attacker, Interest::new(name.clone()).with_scope(1), t);
        sim.run_until(t + period);
        let rtt = sim.outcome(req).and_then(|o| o.rtt());
        samples.push(MonitorSample { probe_time: t, rtt, hit: rtt.is_some() });
    }
    samples
}

/// Time of the first probe the edge cache answered.
pub fn first_hit(samples: &[MonitorSample]) -> Option<u64> {
    samples.iter().find(|s| s.hit).map(|s| s.probe_time)
}

/// What a cache dump recovered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpReport {
    /// Names recovered, in the order the cache yielded them (lexicographic).
    pub recovered: Vec<Name>,
    /// Probes spent, the final unanswered one included.
    pub probes_sent: usize,
}

/// Enumerates the closest router's cached names under `prefix` by repeated
/// scope-1 probes, excluding every name already seen until the cache has
/// nothing left to answer. Costs one probe per recovered name plus the final
/// unanswered probe, which waits out the full interest lifetime.
///
/// `probe_cap` bounds the loop against caches being refilled mid-dump.
pub fn dump_cache(sim: &mut Sim, attacker: NodeId, prefix: &Name, probe_cap: usize)
    -> DumpReport
{
    let mut exclusions: BTreeSet<Name> = BTreeSet::new();
    let mut recovered = Vec::new();
    let mut probes_sent = 0;
    while probes_sent < probe_cap {
        let interest = Interest::new(prefix.clone())
            .with_scope(1)
            .with_exclusions(exclusions.clone());
        probes_sent += 1;
        match sim.fetch(attacker, interest) {
            FetchOutcome::Data { object, .. } => {
                exclusions.insert(object.name.clone());
                recovered.push(object.name);
            }
            FetchOutcome::Timeout => break,
        }
    }
    DumpReport { recovered, probes_sent }
}

/// Ground truth a timing trial is scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundTruth {
    AtClosest,
    Upstream { hops: u32 },
    NotCached,
}

impl GroundTruth {
    pub fn class(&self) -> &'static str {
        match self {
            GroundTruth::AtClosest => "at_closest",
            GroundTruth::Upstream { .. } => "upstream",
            GroundTruth::NotCached => "not_cached",
        }
    }
}

fn verdict_class(v: &CacheVerdict) -> &'static str {
    match v {
        CacheVerdict::CachedAtClosest => "at_closest",
        CacheVerdict::CachedUpstream { .. } => "upstream",
        CacheVerdict::NotCached { .. } => "not_cached",
    }
}

/// Exact agreement: class matches, and for upstream verdicts the hop count
/// matches too.
pub fn verdict_matches(truth: &GroundTruth, verdict: &CacheVerdict) -> bool {
    match (truth, verdict) {
        (GroundTruth::AtClosest, CacheVerdict::CachedAtClosest) => true,
        (GroundTruth::Upstream { hops: a }, CacheVerdict::CachedUpstream { hops: b }) => a == b,
        (GroundTruth::NotCached, CacheVerdict::NotCached { .. }) => true,
        _ => false,
    }
}

/// Per-class tallies of a trial batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassStats {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ClassStats {
    pub fn precision(&self) -> f64 {
        let denom = self.true_pos + self.false_pos;
        if denom == 0 { 0.0 } else { self.true_pos as f64 / denom as f64 }
    }

    pub fn recall(&self) -> f64 {
        let denom = self.true_pos + self.false_neg;
        if denom == 0 { 0.0 } else { self.true_pos as f64 / denom as f64 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreReport {
    pub total: usize,
    pub correct: usize,
    pub classes: std::collections::BTreeMap<&'static str, ClassStats>,
}

impl ScoreReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 { 0.0 } else { self.correct as f64 / self.total as f64 }
    }
}

/// Confusion summary over (truth, verdict) pairs. A pair counts as correct
/// under [`verdict_matches`]; class tallies use the three coarse classes.
pub fn score_trials(pairs: &[(GroundTruth, CacheVerdict)]) -> ScoreReport {
    let mut report = ScoreReport::default();
    for class in ["at_closest", "upstream", "not_cached"] {
        report.classes.insert(class, ClassStats::default());
    }
    for (truth, verdict) in pairs {
        report.total += 1;
        let t = truth.class();
        let v = verdict_class(verdict);
        if verdict_matches(truth, verdict) {
            report.correct += 1;
        }
        if t == v {
            report.classes.get_mut(t).unwrap().true_pos += 1;
        } else {
            report.classes.get_mut(t).unwrap().false_neg += 1;
            report.classes.get_mut(v).unwrap().false_pos += 1;
        }
    }
    report
}

/// |a ∩ b| / |a ∪ b|; 1.0 for two empty sets.
pub fn jaccard(a: &BTreeSet<Name>, b: &BTreeSet<Name>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    inter as f64 / union as f64
}
