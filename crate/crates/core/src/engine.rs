//! Streaming simulation: draw i.i.d. samples at scale and maintain the
//! range-renewal counters, the trace graph and the small-world quantities in
//! a single pass. Memory is O(distinct atoms + distinct edges), never O(n).
//!
//! Sampling is exact: materialized atoms go through an alias table, and the
//! analytic tail beyond the truncation point is inverted against the
//! closed-form tail CDF. Draws that land beyond the inversion cap (possible
//! only for very heavy tails) receive fresh synthetic ids; at that depth the
//! per-run collision probability is below 1e-9, so distinctness statistics
//! are unaffected at any feasible sample size.

use crate::dist::{AtomId, DistributionSpec, FRESH_ID_BASE};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("stream length must be at least 1")]
    EmptyStream,
    #[error("checkpoints must be strictly increasing and at most n")]
    BadCheckpoints,
    #[error("anchor atom has zero mass")]
    AnchorMassZero,
    #[error("cannot merge counters built from different specs")]
    SpecMismatch,
    #[error("graph and counters are at different stream positions ({0} vs {1})")]
    PositionMismatch(u64, u64),
    #[error("counters are empty")]
    EmptyCounters,
    #[error("failed to build alias table: {0}")]
    AliasTable(String),
}

// ---------------------------------------------------------------------------
// sampler
// ---------------------------------------------------------------------------

/// Deterministic sampler for a spec: identical (spec, seed) pairs yield
/// identical streams.
pub struct Sampler {
    spec: Arc<DistributionSpec>,
    rng: ChaCha8Rng,
    alias: WeightedAliasIndex<f64>,
    tail_index: Option<usize>,
    seed: u64,
    fresh_count: u64,
}

impl Sampler {
    pub fn new(spec: Arc<DistributionSpec>, seed: u64) -> Result<Self, EngineError> {
        let mut weights: Vec<f64> = spec.materialized().to_vec();
        let tail_index = if spec.tail_mass() > 0.0 {
            weights.push(spec.tail_mass());
            Some(weights.len() - 1)
        } else {
            None
        };
        let alias =
            WeightedAliasIndex::new(weights).map_err(|e| EngineError::AliasTable(e.to_string()))?;
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            alias,
            tail_index,
            seed,
            fresh_count: 0,
        })
    }

    pub fn spec(&self) -> &Arc<DistributionSpec> {
        &self.spec
    }

    /// Number of draws that fell beyond the tail-inversion cap so far.
    pub fn fresh_draws(&self) -> u64 {
        self.fresh_count
    }

    fn fresh_id(&mut self) -> AtomId {
        self.fresh_count += 1;
        // splitmix64 of (seed, counter): stable per stream, disjoint across
        // seeds up to the 63-bit birthday bound
        let mut z = self.seed ^ self.fresh_count.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        FRESH_ID_BASE | z
    }

    pub fn next_atom(&mut self) -> AtomId {
        let idx = self.alias.sample(&mut self.rng);
        if Some(idx) == self.tail_index {
            let u: f64 = self.rng.random();
            match self.spec.tail_quantile(u) {
                Some(x) => x,
                None => self.fresh_id(),
            }
        } else {
            idx as AtomId + 1
        }
    }
}

// ---------------------------------------------------------------------------
// range counters
// ---------------------------------------------------------------------------

const DENSE_ATOMS: usize = 4096;
const DENSE_HIST: usize = 4096;

fn spec_fingerprint(spec: &DistributionSpec) -> u64 {
    let head = spec.mass(1).unwrap_or(0.0).to_bits();
    head ^ spec.truncation().rotate_left(17) ^ (spec.materialized().len() as u64)
}

/// Streaming occupancy state: per-atom visit counts N_n(x) and the
/// count-of-counts histogram R_{n,ell}, maintained in O(1) per sample.
#[derive(Debug, Clone)]
pub struct RangeCounters {
    n: u64,
    r_n: u64,
    fingerprint: u64,
    visits_dense: Vec<u64>,
    visits_sparse: HashMap<AtomId, u64>,
    hist_dense: Vec<u64>,
    hist_sparse: BTreeMap<u64, u64>,
}

impl RangeCounters {
    pub fn new(spec: &DistributionSpec) -> Self {
        Self {
            n: 0,
            r_n: 0,
            fingerprint: spec_fingerprint(spec),
            visits_dense: vec![0; DENSE_ATOMS + 1],
            visits_sparse: HashMap::new(),
            hist_dense: vec![0; DENSE_HIST + 1],
            hist_sparse: BTreeMap::new(),
        }
    }

    #[inline]
    fn hist_add(&mut self, ell: u64, delta: i64) {
        if ell as usize <= DENSE_HIST {
            let slot = &mut self.hist_dense[ell as usize];
            *slot = slot.wrapping_add_signed(delta);
        } else {
            let e = self.hist_sparse.entry(ell).or_insert(0);
            *e = e.wrapping_add_signed(delta);
            if *e == 0 {
                self.hist_sparse.remove(&ell);
            }
        }
    }

    #[inline]
    pub fn step(&mut self, atom: AtomId) {
        self.n += 1;
        let old = if (atom as usize) <= DENSE_ATOMS && atom >= 1 {
            let slot = &mut self.visits_dense[atom as usize];
            let old = *slot;
            *slot += 1;
            old
        } else {
            let slot = self.visits_sparse.entry(atom).or_insert(0);
            let old = *slot;
            *slot += 1;
            old
        };
        if old == 0 {
            self.r_n += 1;
        } else {
            self.hist_add(old, -1);
        }
        self.hist_add(old + 1, 1);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// R_n, the number of distinct atoms seen.
    pub fn r_n(&self) -> u64 {
        self.r_n
    }

    pub fn visits(&self, atom: AtomId) -> u64 {
        if (atom as usize) <= DENSE_ATOMS && atom >= 1 {
            self.visits_dense[atom as usize]
        } else {
            self.visits_sparse.get(&atom).copied().unwrap_or(0)
        }
    }

    /// R_{n,ell}: atoms visited exactly ell times.
    pub fn r_ell(&self, ell: u64) -> u64 {
        if ell as usize <= DENSE_HIST {
            self.hist_dense[ell as usize]
        } else {
            self.hist_sparse.get(&ell).copied().unwrap_or(0)
        }
    }

    /// Full histogram ell -> R_{n,ell} (non-zero entries only).
    pub fn hist(&self) -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for (ell, &c) in self.hist_dense.iter().enumerate().skip(1) {
            if c > 0 {
                out.insert(ell as u64, c);
            }
        }
        for (&ell, &c) in &self.hist_sparse {
            if c > 0 {
                out.insert(ell, c);
            }
        }
        out
    }

    pub fn iter_atoms(&self) -> impl Iterator<Item = (AtomId, u64)> + '_ {
        self.visits_dense
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &c)| c > 0)
            .map(|(x, &c)| (x as AtomId, c))
            .chain(self.visits_sparse.iter().map(|(&x, &c)| (x, c)))
    }

    pub fn snapshot(&self) -> IntensitySnapshot {
        IntensitySnapshot { n: self.n, r_n: self.r_n, hist: self.hist() }
    }

    /// Combine counters from disjoint streams of the same spec (per-atom
    /// visit counts add; the histogram is rebuilt). Used for cross-replica
    /// moment estimation only, never to emulate a longer stream.
    pub fn merge(a: &RangeCounters, b: &RangeCounters) -> Result<RangeCounters, EngineError> {
        if a.fingerprint != b.fingerprint {
            return Err(EngineError::SpecMismatch);
        }
        let mut out = RangeCounters {
            n: a.n + b.n,
            r_n: 0,
            fingerprint: a.fingerprint,
            visits_dense: vec![0; DENSE_ATOMS + 1],
            visits_sparse: HashMap::new(),
            hist_dense: vec![0; DENSE_HIST + 1],
            hist_sparse: BTreeMap::new(),
        };
        for (x, c) in a.iter_atoms().chain(b.iter_atoms()) {
            if (x as usize) <= DENSE_ATOMS {
                out.visits_dense[x as usize] += c;
            } else {
                *out.visits_sparse.entry(x).or_insert(0) += c;
            }
        }
        let counts: Vec<u64> = out.iter_atoms().map(|(_, c)| c).collect();
        for c in counts {
            out.r_n += 1;
            out.hist_add(c, 1);
        }
        Ok(out)
    }
}

/// Immutable view of the intensity statistics at one stream position.
#[derive(Debug, Clone, Serialize)]
pub struct IntensitySnapshot {
    pub n: u64,
    pub r_n: u64,
    pub hist: BTreeMap<u64, u64>,
}

/// The three intensity ratios at level ell; entries without a positive
/// denominator come back as NaN.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntensityRatios {
    /// R_{n,ell} / R_n
    pub over_range: f64,
    /// R_{n,ell} / R_{n,ell+}
    pub escape: f64,
    /// R_{n,ell} / R_{n,2+}
    pub over_two_plus: f64,
}

impl IntensitySnapshot {
    pub fn r_ell(&self, ell: u64) -> u64 {
        self.hist.get(&ell).copied().unwrap_or(0)
    }

    /// R_{n,ell+} = sum_{j >= ell} R_{n,j}.
    pub fn r_ell_plus(&self, ell: u64) -> u64 {
        self.hist.range(ell..).map(|(_, &c)| c).sum()
    }

    pub fn r_two_plus(&self) -> u64 {
        self.r_n - self.r_ell(1)
    }

    /// Exact ratio triple per level; errors if the counters are empty.
    pub fn ratios(&self, ells: &[u64]) -> Result<BTreeMap<u64, IntensityRatios>, EngineError> {
        if self.r_n == 0 {
            return Err(EngineError::EmptyCounters);
        }
        let two_plus = self.r_two_plus();
        let mut out = BTreeMap::new();
        for &ell in ells {
            let r = self.r_ell(ell) as f64;
            let plus = self.r_ell_plus(ell) as f64;
            out.insert(
                ell,
                IntensityRatios {
                    over_range: r / self.r_n as f64,
                    escape: if plus > 0.0 { r / plus } else { f64::NAN },
                    over_two_plus: if two_plus > 0 { r / two_plus as f64 } else { f64::NAN },
                },
            );
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// trace graph
// ---------------------------------------------------------------------------

/// Directed multigraph of consecutive-sample edges xi_i -> xi_{i+1}, plus the
/// induced undirected adjacency.
#[derive(Debug, Clone, Default)]
pub struct TraceGraph {
    n: u64,
    first: Option<AtomId>,
    last: Option<AtomId>,
    out: HashMap<AtomId, HashMap<AtomId, u64>>,
    undir: HashMap<AtomId, HashSet<AtomId>>,
}

impl TraceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, atom: AtomId) {
        self.n += 1;
        if let Some(prev) = self.last {
            *self.out.entry(prev).or_default().entry(atom).or_insert(0) += 1;
            self.undir.entry(prev).or_default().insert(atom);
            self.undir.entry(atom).or_default().insert(prev);
        } else {
            self.first = Some(atom);
            self.undir.entry(atom).or_default();
        }
        self.last = Some(atom);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn first(&self) -> Option<AtomId> {
        self.first
    }

    pub fn last(&self) -> Option<AtomId> {
        self.last
    }

    pub fn vertex_count(&self) -> usize {
        self.undir.len()
    }

    /// D_n(x): number of distinct out-neighbors (self-loops count).
    pub fn out_degree(&self, x: AtomId) -> u64 {
        self.out.get(&x).map_or(0, |m| m.len() as u64)
    }

    /// Undirected degree of x in the induced graph.
    pub fn undirected_degree(&self, x: AtomId) -> u64 {
        self.undir.get(&x).map_or(0, |s| s.len() as u64)
    }

    /// d_n(x, y): multiplicity of the directed edge x -> y.
    pub fn edge_multiplicity(&self, x: AtomId, y: AtomId) -> u64 {
        self.out.get(&x).and_then(|m| m.get(&y)).copied().unwrap_or(0)
    }

    /// Sum over edges of d_n(x,y); always n - 1.
    pub fn total_multiplicity(&self) -> u64 {
        self.out.values().map(|m| m.values().sum::<u64>()).sum()
    }

    pub fn distinct_directed_edges(&self) -> u64 {
        self.out.values().map(|m| m.len() as u64).sum()
    }

    /// Exact diameter of the undirected trace graph by BFS from every
    /// vertex. The trace graph is connected by construction; a single vertex
    /// (or empty graph) has diameter 0.
    pub fn diameter(&self) -> u64 {
        let ids: Vec<AtomId> = self.undir.keys().copied().collect();
        if ids.len() <= 1 {
            return 0;
        }
        let index: HashMap<AtomId, u32> =
            ids.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
        let adj: Vec<Vec<u32>> =
            ids.iter().map(|x| self.undir[x].iter().map(|y| index[y]).collect()).collect();
        let mut best = 0u64;
        let mut dist = vec![u32::MAX; ids.len()];
        let mut queue = std::collections::VecDeque::new();
        for start in 0..ids.len() as u32 {
            dist.fill(u32::MAX);
            dist[start as usize] = 0;
            queue.clear();
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                let d = dist[v as usize];
                best = best.max(d as u64);
                for &w in &adj[v as usize] {
                    if dist[w as usize] == u32::MAX {
                        dist[w as usize] = d + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        best
    }
}

/// Joint (degree, intensity) histograms of the trace graph at one stream
/// position, using the intensity coordinates the degree laws call for:
/// N_{n-1}(x) for the directed graph, N_x([2, n-1]) for the undirected one.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeSnapshot {
    pub n: u64,
    pub r_n: u64,
    /// R_{n-1}: vertices carrying at least one out-edge
    pub r_prev: u64,
    /// ell -> R_{n,ell}
    pub hist: BTreeMap<u64, u64>,
    /// ell -> R_{n-1,ell}
    pub prev_hist: BTreeMap<u64, u64>,
    /// (k, N_{n-1}(x)) -> count of vertices with D_n(x) = k
    pub joint_out: BTreeMap<(u64, u64), u64>,
    /// k -> number of vertices with D_n(x) = k (over vertices seen before n)
    pub out_hist: BTreeMap<u64, u64>,
    /// (k, N_x([2,n-1])) -> count of vertices with undirected degree k
    pub joint_undir: BTreeMap<(u64, u64), u64>,
    /// k -> number of vertices with undirected degree k
    pub undir_hist: BTreeMap<u64, u64>,
}

impl DegreeSnapshot {
    /// Build the joint tables from a graph and counters at the same stream
    /// position.
    pub fn compute(graph: &TraceGraph, counters: &RangeCounters) -> Result<Self, EngineError> {
        if graph.n() != counters.n() {
            return Err(EngineError::PositionMismatch(graph.n(), counters.n()));
        }
        let first = graph.first();
        let last = graph.last();
        let mut prev_hist: BTreeMap<u64, u64> = BTreeMap::new();
        let mut joint_out: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        let mut out_hist: BTreeMap<u64, u64> = BTreeMap::new();
        let mut joint_undir: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        let mut undir_hist: BTreeMap<u64, u64> = BTreeMap::new();
        let mut r_prev = 0u64;
        for (x, n_visits) in counters.iter_atoms() {
            let n_prev = n_visits - u64::from(last == Some(x));
            let interior = n_prev.saturating_sub(u64::from(first == Some(x)));
            let k_undir = graph.undirected_degree(x);
            *undir_hist.entry(k_undir).or_insert(0) += 1;
            if interior >= 1 {
                *joint_undir.entry((k_undir, interior)).or_insert(0) += 1;
            }
            if n_prev >= 1 {
                r_prev += 1;
                *prev_hist.entry(n_prev).or_insert(0) += 1;
                let k = graph.out_degree(x);
                *out_hist.entry(k).or_insert(0) += 1;
                *joint_out.entry((k, n_prev)).or_insert(0) += 1;
            }
        }
        Ok(Self {
            n: counters.n(),
            r_n: counters.r_n(),
            r_prev,
            hist: counters.hist(),
            prev_hist,
            joint_out,
            out_hist,
            joint_undir,
            undir_hist,
        })
    }

    pub fn r_ell(&self, ell: u64) -> u64 {
        self.hist.get(&ell).copied().unwrap_or(0)
    }

    pub fn r_two_plus(&self) -> u64 {
        self.r_n - self.r_ell(1)
    }

    /// R~_{n,k,ell} / R_{n,ell}
    pub fn out_joint_ratio(&self, k: u64, ell: u64) -> f64 {
        let denom = self.r_ell(ell);
        if denom == 0 {
            return f64::NAN;
        }
        self.joint_out.get(&(k, ell)).copied().unwrap_or(0) as f64 / denom as f64
    }

    /// R~_{n,k} / R_n
    pub fn out_ratio_over_range(&self, k: u64) -> f64 {
        self.out_hist.get(&k).copied().unwrap_or(0) as f64 / self.r_n as f64
    }

    /// R~_{n,k} / R_{n,2+}
    pub fn out_ratio_over_two_plus(&self, k: u64) -> f64 {
        let denom = self.r_two_plus();
        if denom == 0 {
            return f64::NAN;
        }
        self.out_hist.get(&k).copied().unwrap_or(0) as f64 / denom as f64
    }

    /// R^_{n,k,ell} / R_{n,ell}
    pub fn undir_joint_ratio(&self, k: u64, ell: u64) -> f64 {
        let denom = self.r_ell(ell);
        if denom == 0 {
            return f64::NAN;
        }
        self.joint_undir.get(&(k, ell)).copied().unwrap_or(0) as f64 / denom as f64
    }

    /// R^_{n,k} / R_n
    pub fn undir_ratio_over_range(&self, k: u64) -> f64 {
        self.undir_hist.get(&k).copied().unwrap_or(0) as f64 / self.r_n as f64
    }

    pub fn out_joint_count(&self, k: u64, ell: u64) -> u64 {
        self.joint_out.get(&(k, ell)).copied().unwrap_or(0)
    }

    pub fn prev_r_ell(&self, ell: u64) -> u64 {
        self.prev_hist.get(&ell).copied().unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// return gaps
// ---------------------------------------------------------------------------

/// Tracks inter-visit gaps to a fixed anchor atom. Gap k is T_k - T_{k-1}
/// with T_0 = 0; the final censored gap n - T_last is included in the
/// maximum, giving N_n(x0) + 1 gaps in total.
#[derive(Debug, Clone)]
pub struct ReturnGapTracker {
    anchor: AtomId,
    visit_count: u64,
    last_pos: u64,
    max_gap: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReturnGapStats {
    pub anchor: AtomId,
    pub visits: u64,
    pub tau_max: u64,
    /// true when the anchor was never visited (tau_max = n is censored)
    pub censored_only: bool,
}

impl ReturnGapTracker {
    pub fn new(anchor: AtomId) -> Self {
        Self { anchor, visit_count: 0, last_pos: 0, max_gap: 0 }
    }

    #[inline]
    pub fn step(&mut self, pos: u64, atom: AtomId) {
        if atom == self.anchor {
            let gap = pos - self.last_pos;
            self.max_gap = self.max_gap.max(gap);
            self.last_pos = pos;
            self.visit_count += 1;
        }
    }

    pub fn stats(&self, n: u64) -> ReturnGapStats {
        let censored = n - self.last_pos;
        ReturnGapStats {
            anchor: self.anchor,
            visits: self.visit_count,
            tau_max: self.max_gap.max(censored),
            censored_only: self.visit_count == 0,
        }
    }
}

// ---------------------------------------------------------------------------
// stream orchestration
// ---------------------------------------------------------------------------

/// Which consumers to attach to a stream and where to snapshot.
#[derive(Debug, Clone, Default)]
pub struct StreamConfig {
    pub graph: bool,
    pub anchor: Option<AtomId>,
    /// strictly increasing positions (each <= n) where snapshots are taken
    pub checkpoints: Vec<u64>,
    /// also compute the (costlier) degree tables and diameter per checkpoint
    pub degree_at_checkpoints: bool,
}

#[derive(Debug, Clone)]
pub struct CheckpointRecord {
    pub n: u64,
    pub intensity: IntensitySnapshot,
    pub degrees: Option<DegreeSnapshot>,
    pub gaps: Option<ReturnGapStats>,
    pub diameter: Option<u64>,
    /// largest materialized-range atom seen so far (fresh ids excluded)
    pub max_atom: AtomId,
}

#[derive(Debug)]
pub struct StreamOutcome {
    pub counters: RangeCounters,
    pub graph: Option<TraceGraph>,
    pub gaps: Option<ReturnGapStats>,
    pub records: Vec<CheckpointRecord>,
    pub max_atom: AtomId,
    pub fresh_draws: u64,
}

/// Push n samples through the configured consumers in one pass.
pub fn run_stream(
    spec: &Arc<DistributionSpec>,
    seed: u64,
    n: u64,
    cfg: &StreamConfig,
) -> Result<StreamOutcome, EngineError> {
    if n == 0 {
        return Err(EngineError::EmptyStream);
    }
    let sorted = cfg.checkpoints.clone();
    if sorted.windows(2).any(|w| w[0] >= w[1]) || sorted.iter().any(|&c| c == 0 || c > n) {
        return Err(EngineError::BadCheckpoints);
    }
    if let Some(anchor) = cfg.anchor {
        if spec.mass(anchor).map(|p| p <= 0.0).unwrap_or(true) {
            return Err(EngineError::AnchorMassZero);
        }
    }
    let mut sampler = Sampler::new(Arc::clone(spec), seed)?;
    let mut counters = RangeCounters::new(spec);
    let mut graph = cfg.graph.then(TraceGraph::new);
    let mut gaps = cfg.anchor.map(ReturnGapTracker::new);
    let mut records = Vec::with_capacity(sorted.len());
    let mut next_checkpoint = sorted.iter().copied().peekable();
    let mut max_atom: AtomId = 0;
    for pos in 1..=n {
        let atom = sampler.next_atom();
        if atom < FRESH_ID_BASE {
            max_atom = max_atom.max(atom);
        }
        counters.step(atom);
        if let Some(g) = graph.as_mut() {
            g.step(atom);
        }
        if let Some(t) = gaps.as_mut() {
            t.step(pos, atom);
        }
        if next_checkpoint.peek() == Some(&pos) {
            next_checkpoint.next();
            let degrees = match (&graph, cfg.degree_at_checkpoints) {
                (Some(g), true) => Some(DegreeSnapshot::compute(g, &counters)?),
                _ => None,
            };
            records.push(CheckpointRecord {
                n: pos,
                intensity: counters.snapshot(),
                degrees,
                gaps: gaps.as_ref().map(|t| t.stats(pos)),
                diameter: graph
                    .as_ref()
                    .filter(|_| cfg.degree_at_checkpoints)
                    .map(|g| g.diameter()),
                max_atom,
            });
        }
    }
    let final_gaps = gaps.as_ref().map(|t| t.stats(n));
    Ok(StreamOutcome {
        counters,
        graph,
        gaps: final_gaps,
        records,
        max_atom,
        fresh_draws: sampler.fresh_draws(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn arc(spec: DistributionSpec) -> Arc<DistributionSpec> {
        Arc::new(spec)
    }

    fn feed(seq: &[AtomId], spec: &DistributionSpec) -> (RangeCounters, TraceGraph) {
        let mut c = RangeCounters::new(spec);
        let mut g = TraceGraph::new();
        for &x in seq {
            c.step(x);
            g.step(x);
        }
        (c, g)
    }

    #[test]
    fn determinism_bit_identical() {
        let spec = arc(DistributionSpec::power_law(2.0, 10_000).unwrap());
        let cfg = StreamConfig::default();
        let a = run_stream(&spec, 7, 10_000, &cfg).unwrap();
        let b = run_stream(&spec, 7, 10_000, &cfg).unwrap();
        assert_eq!(a.counters.r_n(), b.counters.r_n());
        assert_eq!(a.counters.hist(), b.counters.hist());
        assert_eq!(a.counters.visits(1), b.counters.visits(1));
        let c = run_stream(&spec, 8, 10_000, &cfg).unwrap();
        assert_ne!(a.counters.hist(), c.counters.hist());
    }

    #[test]
    fn single_sample_and_degenerate_law() {
        let spec = arc(DistributionSpec::power_law(2.0, 100).unwrap());
        let out =
            run_stream(&spec, 1, 1, &StreamConfig { graph: true, ..Default::default() }).unwrap();
        assert_eq!(out.counters.r_n(), 1);
        assert_eq!(out.counters.hist().get(&1), Some(&1));
        assert_eq!(out.graph.as_ref().unwrap().total_multiplicity(), 0);
        // one-atom law: R_10 = 1, N_10(1) = 10, D_10(1) = 1, diameter 0
        let one = arc(DistributionSpec::explicit(vec![1.0]).unwrap());
        let out =
            run_stream(&one, 5, 10, &StreamConfig { graph: true, ..Default::default() }).unwrap();
        assert_eq!(out.counters.r_n(), 1);
        assert_eq!(out.counters.visits(1), 10);
        let g = out.graph.unwrap();
        assert_eq!(g.out_degree(1), 1); // self-loop
        assert_eq!(g.diameter(), 0);
        assert!(matches!(
            run_stream(&one, 5, 0, &StreamConfig::default()),
            Err(EngineError::EmptyStream)
        ));
    }

    #[test]
    fn conservation_invariants() {
        let spec = arc(DistributionSpec::power_law(1.5, 10_000).unwrap());
        let out = run_stream(&spec, 99, 50_000, &StreamConfig::default()).unwrap();
        let hist = out.counters.hist();
        let total: u64 = hist.values().sum();
        let weighted: u64 = hist.iter().map(|(l, c)| l * c).sum();
        assert_eq!(total, out.counters.r_n());
        assert_eq!(weighted, out.counters.n());
        // R_{n,l+} non-increasing in l
        let snap = out.counters.snapshot();
        let mut prev = u64::MAX;
        for l in 1..=20 {
            let plus = snap.r_ell_plus(l);
            assert!(plus <= prev);
            prev = plus;
        }
    }

    #[test]
    fn monotone_r_ell_plus_in_n() {
        let spec = arc(DistributionSpec::power_law(2.0, 1000).unwrap());
        let cfg =
            StreamConfig { checkpoints: vec![100, 500, 1000, 5000, 10_000], ..Default::default() };
        let out = run_stream(&spec, 3, 10_000, &cfg).unwrap();
        for ell in [1u64, 2, 3] {
            let mut prev = 0;
            for rec in &out.records {
                let plus = rec.intensity.r_ell_plus(ell);
                assert!(plus >= prev, "R_{{n,{ell}+}} decreased");
                prev = plus;
            }
        }
    }

    #[test]
    fn graph_edge_conservation() {
        let spec = arc(DistributionSpec::power_law(2.0, 1000).unwrap());
        let out =
            run_stream(&spec, 11, 20_000, &StreamConfig { graph: true, ..Default::default() })
                .unwrap();
        let g = out.graph.unwrap();
        assert_eq!(g.total_multiplicity(), 20_000 - 1);
        // out-degree bounded by prior visit count, and positive where due
        for (x, n_visits) in out.counters.iter_atoms() {
            let n_prev = n_visits - u64::from(g.last() == Some(x));
            let d = g.out_degree(x);
            assert!(d <= n_prev || (d == 0 && n_prev == 0), "x={x}: D={d}, N_prev={n_prev}");
            if n_prev >= 1 {
                assert!(d >= 1);
            }
        }
    }

    #[test]
    fn degree_snapshot_identities() {
        let spec = arc(DistributionSpec::power_law(2.0, 1000).unwrap());
        let out =
            run_stream(&spec, 21, 10_000, &StreamConfig { graph: true, ..Default::default() })
                .unwrap();
        let snap = DegreeSnapshot::compute(out.graph.as_ref().unwrap(), &out.counters).unwrap();
        // R~_{n,1,1} = R_{n-1,1}
        assert_eq!(snap.out_joint_count(1, 1), snap.prev_r_ell(1));
        // sum_k R~_{n,k} = R_{n-1}
        let total: u64 = snap.out_hist.values().sum();
        assert_eq!(total, snap.r_prev);
        // joint tables supported on k <= ell (directed), k <= 2 ell + 2 (undirected)
        for (&(k, ell), _) in &snap.joint_out {
            assert!(k <= ell, "directed support violated: k={k}, ell={ell}");
        }
        for (&(k, ell), _) in &snap.joint_undir {
            assert!(k <= 2 * ell + 2, "undirected support violated: k={k}, ell={ell}");
        }
    }

    #[test]
    fn position_mismatch_rejected() {
        let spec = DistributionSpec::explicit(vec![0.5, 0.5]).unwrap();
        let (c, _) = feed(&[1, 2, 1], &spec);
        let mut g = TraceGraph::new();
        g.step(1);
        assert!(matches!(
            DegreeSnapshot::compute(&g, &c),
            Err(EngineError::PositionMismatch(1, 3))
        ));
    }

    #[test]
    fn engine_matches_naive_stats_on_enumeration() {
        // every length-6 sequence over a 2-atom law: streaming == naive
        let spec = DistributionSpec::explicit(vec![0.7, 0.3]).unwrap();
        let mut total_weight = 0.0;
        oracle::for_each_sequence(&[0.7, 0.3], 6, |seq, p| {
            total_weight += p;
            let (c, g) = feed(seq, &spec);
            let naive = oracle::naive_seq_stats(seq);
            assert_eq!(c.r_n(), naive.r_n);
            assert_eq!(c.hist().get(&1).copied().unwrap_or(0), naive.r_n1);
            let mut engine_out: BTreeMap<u64, u64> = BTreeMap::new();
            for (x, _) in c.iter_atoms() {
                let d = g.out_degree(x);
                if d > 0 {
                    *engine_out.entry(d).or_insert(0) += 1;
                }
            }
            assert_eq!(engine_out, naive.out_degree_hist);
        });
        assert!((total_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diameter_small_cases() {
        let spec = DistributionSpec::explicit(vec![0.4, 0.3, 0.3]).unwrap();
        let (_, g) = feed(&[1, 2, 1], &spec);
        assert_eq!(g.diameter(), 1);
        let (_, g) = feed(&[1, 2, 3], &spec);
        assert_eq!(g.diameter(), 2);
        let (_, g) = feed(&[1], &spec);
        assert_eq!(g.diameter(), 0);
    }

    #[test]
    fn return_gaps_basic() {
        let spec = DistributionSpec::explicit(vec![0.5, 0.5]).unwrap();
        let mut t = ReturnGapTracker::new(1);
        for (i, &x) in [1u64, 2, 1].iter().enumerate() {
            t.step(i as u64 + 1, x);
        }
        let s = t.stats(3);
        assert_eq!(s.tau_max, 2);
        assert_eq!(s.visits, 2);
        assert!(!s.censored_only);
        // never-visited anchor: censored at n
        let t = ReturnGapTracker::new(2);
        let s = t.stats(10);
        assert_eq!(s.tau_max, 10);
        assert!(s.censored_only);
        // anchor with zero mass rejected by the runner
        let spec = Arc::new(spec);
        let cfg = StreamConfig { anchor: Some(99), ..Default::default() };
        assert!(matches!(run_stream(&spec, 1, 5, &cfg), Err(EngineError::AnchorMassZero)));
    }

    #[test]
    fn merge_identity_commute_and_mismatch() {
        let spec = arc(DistributionSpec::power_law(2.0, 1000).unwrap());
        let a = run_stream(&spec, 1, 2000, &StreamConfig::default()).unwrap().counters;
        let b = run_stream(&spec, 2, 3000, &StreamConfig::default()).unwrap().counters;
        let empty = RangeCounters::new(&spec);
        let m1 = RangeCounters::merge(&a, &empty).unwrap();
        assert_eq!(m1.hist(), a.hist());
        assert_eq!(m1.n(), a.n());
        let ab = RangeCounters::merge(&a, &b).unwrap();
        let ba = RangeCounters::merge(&b, &a).unwrap();
        assert_eq!(ab.hist(), ba.hist());
        assert_eq!(ab.n(), a.n() + b.n());
        assert_eq!(ab.visits(1), a.visits(1) + b.visits(1));
        let other = DistributionSpec::geometric(std::f64::consts::LN_2).unwrap();
        let c = RangeCounters::new(&other);
        assert!(matches!(RangeCounters::merge(&a, &c), Err(EngineError::SpecMismatch)));
    }

    #[test]
    fn sampler_frequencies_match_mass() {
        // small truncation forces regular tail draws through the inverter
        let spec = arc(DistributionSpec::power_law(2.0, 50).unwrap());
        let mut sampler = Sampler::new(Arc::clone(&spec), 424_242).unwrap();
        let n = 200_000usize;
        let mut counts: HashMap<AtomId, u64> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sampler.next_atom()).or_insert(0) += 1;
        }
        for x in [1u64, 2, 10, 60, 200] {
            let p = spec.mass(x).unwrap();
            let expected = p * n as f64;
            let got = counts.get(&x).copied().unwrap_or(0) as f64;
            let se = (expected * (1.0 - p)).sqrt();
            assert!(
                (got - expected).abs() <= 5.0 * se + 3.0,
                "atom {x}: got {got}, expected {expected} (se {se})"
            );
        }
        // deep tail frequency: beyond 10x the truncation point
        let tail_p = spec.tail_mass_beyond(500);
        let got: u64 = counts.iter().filter(|(&x, _)| x > 500).map(|(_, &c)| c).sum();
        let expected = tail_p * n as f64;
        assert!((got as f64 - expected).abs() <= 5.0 * expected.sqrt() + 3.0);
    }

    #[test]
    fn checkpoint_validation() {
        let spec = arc(DistributionSpec::power_law(2.0, 100).unwrap());
        let bad = StreamConfig { checkpoints: vec![10, 5], ..Default::default() };
        assert!(matches!(run_stream(&spec, 1, 20, &bad), Err(EngineError::BadCheckpoints)));
        let bad = StreamConfig { checkpoints: vec![30], ..Default::default() };
        assert!(matches!(run_stream(&spec, 1, 20, &bad), Err(EngineError::BadCheckpoints)));
    }
}
