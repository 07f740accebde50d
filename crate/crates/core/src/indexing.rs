//! Equivariant injective index on points, the pair index, the
//! independent-set selection, and the 2^k-separated nets.
//!
//! The index of a point encodes its sorted distances to its k nearest
//! neighbors, with k growing until all profiles are distinct: lexicographic
//! order of profiles maps to numeric order of indices. Profiles depend only
//! on torus-invariant quantities, never on raw coordinates or ids, so the
//! whole construction commutes with torus translations. Distances are
//! quantized to 12 fractional decimal digits; profiles that collide at that
//! precision raise `NonInjectiveIndex` rather than silently merging --
//! a shifted lattice, whose translation symmetry forces equal profiles,
//! always trips this.

use std::cmp::Ordering;
use thiserror::Error;

use crate::geometry::{GeometryError, PointId};
use crate::process::PointConfig;

/// Fractional decimal digits retained by the index encoding.
pub const INDEX_FRACTIONAL_DIGITS: u32 = 12;

const QUANTUM: f64 = 1e12;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(
        "NonInjectiveIndex: points {a} and {b} share the same distance profile \
         through k = {k} at 12-digit precision (symmetric configuration?)"
    )]
    NonInjectiveIndex { a: u32, b: u32, k: usize },
    #[error("EqualIndices: the pair index needs two distinct indices")]
    EqualIndices,
}

// ---------------------------------------------------------------------------
// Index values and the pair index
// ---------------------------------------------------------------------------

/// A nonnegative fixed-precision decimal, stored as digit strings.
///
/// Integer digits are kept most-significant first without leading zeros;
/// fractional digits tenths-first without trailing zeros. Point indices are
/// plain integers (profile ranks); pair indices interleave digits and can
/// carry fractional parts of any length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexValue {
    int: Vec<u8>,
    frac: Vec<u8>,
}

impl IndexValue {
    pub fn from_u64(mut v: u64) -> Self {
        let mut int = Vec::new();
        while v > 0 {
            int.push((v % 10) as u8);
            v /= 10;
        }
        int.reverse();
        IndexValue { int, frac: Vec::new() }
    }

    fn canonical(mut int: Vec<u8>, mut frac: Vec<u8>) -> Self {
        while int.first() == Some(&0) {
            int.remove(0);
        }
        while frac.last() == Some(&0) {
            frac.pop();
        }
        IndexValue { int, frac }
    }

    /// Decimal rendering, e.g. `"1023"` or `"12.0403"`.
    pub fn to_decimal_string(&self) -> String {
        let mut s = String::new();
        if self.int.is_empty() {
            s.push('0');
        } else {
            for d in &self.int {
                s.push((b'0' + d) as char);
            }
        }
        if !self.frac.is_empty() {
            s.push('.');
            for d in &self.frac {
                s.push((b'0' + d) as char);
            }
        }
        s
    }

    /// Digit at decimal position `n` (units are `n = 0`, tenths `n = -1`).
    fn digit(&self, n: i64) -> u8 {
        if n >= 0 {
            let i = self.int.len() as i64 - 1 - n;
            if i < 0 {
                0
            } else {
                self.int[i as usize]
            }
        } else {
            let i = (-n - 1) as usize;
            self.frac.get(i).copied().unwrap_or(0)
        }
    }
}

impl Ord for IndexValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.int
            .len()
            .cmp(&other.int.len())
            .then_with(|| self.int.cmp(&other.int))
            .then_with(|| {
                let n = self.frac.len().max(other.frac.len());
                for i in 0..n {
                    let a = self.frac.get(i).copied().unwrap_or(0);
                    let b = other.frac.get(i).copied().unwrap_or(0);
                    match a.cmp(&b) {
                        Ordering::Equal => {}
                        ord => return ord,
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for IndexValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for IndexValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

/// Digits of `even` moved to even decimal positions and digits of `odd` to
/// odd positions, on both sides of the decimal point.
pub(crate) fn interleave(even: &IndexValue, odd: &IndexValue) -> IndexValue {
    let int_positions = even.int.len().max(odd.int.len());
    let mut int_le = vec![0u8; 2 * int_positions + 1];
    for n in 0..int_positions as i64 {
        int_le[2 * n as usize] = even.digit(n);
        int_le[2 * n as usize + 1] = odd.digit(n);
    }
    int_le.reverse();
    let frac_positions = even.frac.len().max(odd.frac.len());
    let mut frac = vec![0u8; 2 * frac_positions];
    for m in 1..=frac_positions as i64 {
        // even input digit 10^-m lands at 10^-2m, odd at 10^-(2m-1)
        frac[(2 * m - 1) as usize] = even.digit(-m);
        frac[(2 * m - 2) as usize] = odd.digit(-m);
    }
    IndexValue::canonical(int_le, frac)
}

/// The symmetric pair index: the greater of the two digit interleavings of
/// the pair. Injective on unordered pairs of distinct indices with the same
/// fractional precision.
pub fn pair_index(a: &IndexValue, b: &IndexValue) -> Result<IndexValue, IndexError> {
    if a == b {
        return Err(IndexError::EqualIndices);
    }
    let ab = interleave(a, b);
    let ba = interleave(b, a);
    Ok(if ab >= ba { ab } else { ba })
}

// ---------------------------------------------------------------------------
// The point index
// ---------------------------------------------------------------------------

/// The injective equivariant index over a configuration.
///
/// Numerically an index is the rank of the point's quantized distance
/// profile in lexicographic order; the profiles themselves are retained for
/// audit.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexAssignment {
    ranks: Vec<u32>,
    order: Vec<PointId>,
    profiles: Vec<Vec<u64>>,
    k_used: usize,
}

impl IndexAssignment {
    /// Wraps externally supplied ranks (a permutation of `0..n`).
    ///
    /// `build_index` is the equivariant constructor; this exists for
    /// callers that bring their own injective index, and for the
    /// two-point structures a distance profile cannot separate.
    pub fn from_ranks(ranks: Vec<u32>) -> IndexAssignment {
        let n = ranks.len();
        let mut order = vec![PointId(0); n];
        let mut seen = vec![false; n];
        for (id, &r) in ranks.iter().enumerate() {
            assert!((r as usize) < n && !seen[r as usize], "ranks must be a permutation");
            seen[r as usize] = true;
            order[r as usize] = PointId(id as u32);
        }
        IndexAssignment {
            ranks,
            order,
            profiles: vec![Vec::new(); n],
            k_used: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Rank of the point's profile (0 = smallest index).
    pub fn rank(&self, id: PointId) -> u32 {
        self.ranks[id.index()]
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    /// The index as a fixed-precision decimal, ready for pair interleaving.
    pub fn value(&self, id: PointId) -> IndexValue {
        IndexValue::from_u64(self.rank(id) as u64)
    }

    /// Point holding the given rank.
    pub fn by_rank(&self, rank: u32) -> PointId {
        self.order[rank as usize]
    }

    /// The point of globally maximal index.
    pub fn max_point(&self) -> PointId {
        *self.order.last().expect("assignment is nonempty")
    }

    /// Quantized sorted k-NN distance profile retained for audit.
    pub fn profile(&self, id: PointId) -> &[u64] {
        &self.profiles[id.index()]
    }

    /// Number of neighbor distances each profile uses.
    pub fn k_used(&self) -> usize {
        self.k_used
    }
}

fn quantize(dist: f64) -> u64 {
    debug_assert!(dist >= 0.0 && dist * QUANTUM < 9.0e15);
    (dist * QUANTUM).floor() as u64
}

/// Builds the index, growing k from `k0` until all profiles are distinct.
pub fn build_index(config: &PointConfig, k0: usize) -> Result<IndexAssignment, IndexError> {
    let n = config.len();
    let dom = &config.domain;
    let mut lists: Vec<Vec<u64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut ds: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| dom.dist2(&config.points[i].coords, &config.points[j].coords))
            .collect();
        ds.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        lists.push(ds.into_iter().map(|d2| quantize(d2.sqrt())).collect());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lists[a].cmp(&lists[b]).then(a.cmp(&b)));
    let mut needed = 0usize;
    for w in order.windows(2) {
        let (x, y) = (&lists[w[0]], &lists[w[1]]);
        if x == y {
            return Err(IndexError::NonInjectiveIndex {
                a: config.points[w[0]].id.0.min(config.points[w[1]].id.0),
                b: config.points[w[0]].id.0.max(config.points[w[1]].id.0),
                k: n - 1,
            });
        }
        let lcp = x.iter().zip(y.iter()).take_while(|(p, q)| p == q).count();
        needed = needed.max(lcp + 1);
    }
    let k_used = k0.min(n.saturating_sub(1)).max(needed);
    let mut ranks = vec![0u32; n];
    let mut order_ids = Vec::with_capacity(n);
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank as u32;
        order_ids.push(config.points[i].id);
    }
    let profiles = lists
        .into_iter()
        .map(|mut l| {
            l.truncate(k_used);
            l
        })
        .collect();
    Ok(IndexAssignment {
        ranks,
        order: order_ids,
        profiles,
        k_used,
    })
}

// ---------------------------------------------------------------------------
// Independent sets
// ---------------------------------------------------------------------------

/// A finite undirected loop-free graph on point ids `0..n`.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    adj: Vec<Vec<u32>>,
    edges: usize,
}

impl AdjacencyGraph {
    pub fn new(n: usize) -> Self {
        AdjacencyGraph {
            adj: vec![Vec::new(); n],
            edges: 0,
        }
    }

    /// Adds an undirected edge; self-loops and duplicates are ignored.
    pub fn add_edge(&mut self, a: u32, b: u32) {
        if a == b || self.adj[a as usize].contains(&b) {
            return;
        }
        self.push_edge(a, b);
    }

    /// Duplicate-free fast path for builders that enumerate each pair once.
    fn push_edge(&mut self, a: u32, b: u32) {
        self.adj[a as usize].push(b);
        self.adj[b as usize].push(a);
        self.edges += 1;
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn is_complete(&self) -> bool {
        let n = self.adj.len();
        self.edges == n * (n.saturating_sub(1)) / 2
    }
}

/// Selects `N(q*)` for the first enumerated rational `q*` with a nonempty
/// selection, where `N(q) = {v : |idx(v) - q| < |idx(w) - q| for all
/// neighbors w}`. Always nonempty: any q at or below the minimum index
/// selects the index minima; isolated vertices qualify vacuously.
pub fn independent_set(graph: &AdjacencyGraph, idx: &IndexAssignment) -> Vec<PointId> {
    debug_assert_eq!(graph.n(), idx.len());
    let n = graph.n();
    for (num, scale_log2) in enumerate_rationals(n) {
        let picked = selection_at(graph, idx, num, scale_log2);
        if !picked.is_empty() {
            return picked;
        }
    }
    unreachable!("q = 0 already selects the rank minima")
}

fn selection_at(
    graph: &AdjacencyGraph,
    idx: &IndexAssignment,
    num: i64,
    scale_log2: u32,
) -> Vec<PointId> {
    // |rank - num/2^s| comparisons done exactly on integers.
    let scale = 1i128 << scale_log2;
    let gap = |rank: u32| ((rank as i128) * scale - num as i128).abs();
    let mut picked = Vec::new();
    for v in 0..graph.n() as u32 {
        let gv = gap(idx.ranks()[v as usize]);
        if graph
            .neighbors(v)
            .iter()
            .all(|&w| gv < gap(idx.ranks()[w as usize]))
        {
            picked.push(PointId(v));
        }
    }
    picked
}

/// The pinned rational enumeration: integers 0, 1, -1, 2, -2, ... over the
/// observed index range, then dyadic midpoints of consecutive already
/// enumerated values, level by level.
fn enumerate_rationals(n: usize) -> impl Iterator<Item = (i64, u32)> {
    let hi = n as i64 + 1;
    let integers = (0..=hi).flat_map(|j| {
        if j == 0 {
            vec![(0i64, 0u32)]
        } else {
            vec![(j, 0), (-j, 0)]
        }
    });
    let refinements = (1..=40u32).flat_map(move |s| {
        let top = hi << s;
        (0..=top)
            .filter(|num| num % 2 == 1)
            .flat_map(move |num| [(num, s), (-num, s)])
    });
    integers.chain(refinements)
}

// ---------------------------------------------------------------------------
// Separated nets
// ---------------------------------------------------------------------------

/// One level of the net hierarchy: sites pairwise at least `threshold`
/// apart.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLevel {
    pub level: usize,
    pub threshold: f64,
    pub sites: Vec<PointId>,
}

/// The hierarchy of 2^k-separated subsets, one per level, each computed on
/// the full configuration independently (levels are not nested).
#[derive(Debug, Clone, PartialEq)]
pub struct NetHierarchy {
    pub unit: f64,
    pub levels: Vec<NetLevel>,
}

impl NetHierarchy {
    pub fn max_level(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> Option<&NetLevel> {
        self.levels.get(k.checked_sub(1)?)
    }
}

/// Default base separation unit, scaled so level counts stay meaningful at
/// any density: `L / 2^(ceil(log2 N^(1/d)) + 2)`.
pub fn default_unit(config: &PointConfig) -> f64 {
    let n = config.len() as f64;
    let d = config.domain.dimension() as f64;
    let exp = n.powf(1.0 / d).log2().ceil().max(0.0) as i32;
    config.domain.side() / 2f64.powi(exp + 2)
}

/// Builds the nets: for each k, joins points at distance below `2^k * unit`
/// and takes the equivariant independent set, stopping at the first level
/// whose candidate graph is complete.
pub fn build_nets(
    config: &PointConfig,
    idx: &IndexAssignment,
    unit: f64,
) -> Result<NetHierarchy, GeometryError> {
    if unit <= 0.0 || !unit.is_finite() {
        return Err(GeometryError::BadParameters(
            "net separation unit must be positive".into(),
        ));
    }
    let n = config.len();
    let dom = &config.domain;
    let mut levels = Vec::new();
    for k in 1..=64usize {
        let threshold = unit * 2f64.powi(k as i32);
        let t2 = threshold * threshold;
        let mut graph = AdjacencyGraph::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if dom.dist2(&config.points[i].coords, &config.points[j].coords) < t2 {
                    graph.push_edge(i as u32, j as u32);
                }
            }
        }
        let complete = graph.is_complete();
        let mut sites = independent_set(&graph, idx);
        sites.sort_unstable();
        levels.push(NetLevel {
            level: k,
            threshold,
            sites,
        });
        if complete {
            break;
        }
    }
    Ok(NetHierarchy { unit, levels })
}
