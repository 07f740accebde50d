//! Connected clumping with clumps of size exactly 2^i, built by iterated
//! two-phase pairing and contraction on the one-ended tree.
//!
//! Each contraction level runs pairing rounds on frozen snapshots until the
//! working tree empties. Phase 1 pairs sibling leaves greedily by
//! descending index (the two highest first). Phase 2, computed on the
//! post-phase-1 snapshot, pairs a leaf with its parent only when it is the
//! parent's sole remaining child; the restriction keeps the working graph a
//! single tree after every deletion and still guarantees progress, because
//! after phase 1 the deepest leaf is always its parent's only child left.
//! Identifying the pairs halves the tree: intra-pair edges become loops
//! (deleted), sibling pairs leave parallel edges (deduplicated).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::clumping::{Clumping, ClumpingKind, Partition};
use crate::geometry::PointId;
use crate::indexing::{interleave, pair_index, IndexAssignment, IndexValue};
use crate::treefactor::{FactorGraph, RootedTree, TreeError};

#[derive(Debug, Error)]
pub enum DyadicError {
    #[error("PowerOfTwoRequired: exact dyadic sizes need N = 2^m, got N = {0}")]
    PowerOfTwoRequired(usize),
    #[error("ImperfectPairing: vertex {0} left unpaired")]
    ImperfectPairing(u32),
    #[error("NotATree: {0}")]
    NotATree(String),
    #[error("BadSchedule: {0}")]
    BadSchedule(String),
}

impl From<TreeError> for DyadicError {
    fn from(e: TreeError) -> Self {
        DyadicError::NotATree(e.to_string())
    }
}

/// A vertex of the working tree: a clump of point ids with a representative
/// index (iterated pair index of its members).
#[derive(Debug, Clone, PartialEq)]
pub struct ClumpVertex {
    pub members: Vec<PointId>,
    pub rep: IndexValue,
}

/// The working tree at some contraction level. Vertices are kept in
/// canonical order (by smallest member id) so rebuilds are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractedTree {
    pub level: usize,
    pub vertices: Vec<ClumpVertex>,
    pub parent: Vec<Option<u32>>,
    pub root: u32,
}

impl ContractedTree {
    /// Level-0 tree: singletons carrying the point indices, rooted at the
    /// global maximum.
    pub fn from_factor_graph(
        tree: &FactorGraph,
        idx: &IndexAssignment,
    ) -> Result<Self, DyadicError> {
        if !tree.is_spanning_tree() {
            return Err(DyadicError::NotATree(format!(
                "{} edges on {} vertices is not a spanning tree",
                tree.edge_count(),
                tree.n
            )));
        }
        let rooted = RootedTree::from_graph(tree, idx.max_point())?;
        let vertices = (0..tree.n)
            .map(|i| ClumpVertex {
                members: vec![PointId(i as u32)],
                rep: idx.value(PointId(i as u32)),
            })
            .collect();
        Ok(ContractedTree {
            level: 0,
            vertices,
            parent: rooted.parent,
            root: rooted.root.0,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// How a pair was formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    SiblingLeaves,
    LeafParent,
}

/// One pairing round over a frozen snapshot of the working tree. Pair
/// entries index into the level's `ContractedTree`.
#[derive(Debug, Clone)]
pub struct PairingRound {
    pub pairs: Vec<(u32, u32, PairKind)>,
    pub vertices_before: usize,
    pub vertices_after: usize,
}

/// The live view of a level tree while rounds delete paired vertices.
#[derive(Debug, Clone)]
pub struct WorkingTree<'a> {
    tree: &'a ContractedTree,
    alive: Vec<bool>,
    child_count: Vec<u32>,
    alive_count: usize,
}

impl<'a> WorkingTree<'a> {
    pub fn new(tree: &'a ContractedTree) -> Self {
        let n = tree.len();
        let mut child_count = vec![0u32; n];
        for v in 0..n {
            if let Some(p) = tree.parent[v] {
                child_count[p as usize] += 1;
            }
        }
        WorkingTree {
            tree,
            alive: vec![true; n],
            child_count,
            alive_count: n,
        }
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    /// The single remaining vertex, when the rounds ended one short.
    pub fn survivor(&self) -> Option<u32> {
        if self.alive_count != 1 {
            return None;
        }
        self.alive.iter().position(|&a| a).map(|v| v as u32)
    }

    fn remove(&mut self, v: u32) {
        debug_assert!(self.alive[v as usize]);
        self.alive[v as usize] = false;
        self.alive_count -= 1;
        if let Some(p) = self.tree.parent[v as usize] {
            if self.alive[p as usize] {
                self.child_count[p as usize] -= 1;
            }
        }
    }
}

/// Runs one two-phase round. Phase 1 pairs sibling leaves of the round's
/// snapshot by descending representative index; phase 2, on the
/// post-phase-1 snapshot, pairs each surviving snapshot leaf with its
/// parent when it is the sole remaining child.
pub fn pairing_round(w: &mut WorkingTree<'_>) -> PairingRound {
    let tree = w.tree;
    let before = w.alive_count;
    let mut snapshot_leaves: Vec<u32> = (0..tree.len() as u32)
        .filter(|&v| w.alive[v as usize] && w.child_count[v as usize] == 0)
        .collect();
    // deterministic processing order: descending representative index
    snapshot_leaves.sort_by(|&a, &b| tree.vertices[b as usize].rep.cmp(&tree.vertices[a as usize].rep));
    let mut pairs: Vec<(u32, u32, PairKind)> = Vec::new();
    // phase 1: sibling leaves, highest indices first
    let mut by_parent: std::collections::BTreeMap<u32, Vec<u32>> = std::collections::BTreeMap::new();
    for &leaf in &snapshot_leaves {
        if let Some(p) = tree.parent[leaf as usize] {
            by_parent.entry(p).or_default().push(leaf);
        }
    }
    for (_, leaves) in by_parent {
        // already in descending rep order (stable from snapshot_leaves)
        for chunk in leaves.chunks(2) {
            if let [a, b] = *chunk {
                pairs.push((a, b, PairKind::SiblingLeaves));
                w.remove(a);
                w.remove(b);
            }
        }
    }
    // phase 2 on the post-phase-1 snapshot
    for &x in &snapshot_leaves {
        if !w.alive[x as usize] {
            continue;
        }
        let Some(y) = tree.parent[x as usize] else {
            continue;
        };
        if w.alive[y as usize] && w.child_count[y as usize] == 1 {
            pairs.push((x, y, PairKind::LeafParent));
            w.remove(x);
            w.remove(y);
        }
    }
    PairingRound {
        pairs,
        vertices_before: before,
        vertices_after: w.alive_count,
    }
}

/// Contracts a perfect pairing: pairs fuse into single vertices, loops are
/// deleted and parallel edges deduplicated. Errors with `ImperfectPairing`
/// if any vertex is unpaired.
pub fn contract(tree: &ContractedTree, pairs: &[(u32, u32)]) -> Result<ContractedTree, DyadicError> {
    contract_inner(tree, pairs, None)
}

fn contract_inner(
    tree: &ContractedTree,
    pairs: &[(u32, u32)],
    leftover: Option<u32>,
) -> Result<ContractedTree, DyadicError> {
    let n = tree.len();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut proto: Vec<ClumpVertex> = Vec::with_capacity(n / 2 + 1);
    for &(a, b) in pairs {
        for v in [a, b] {
            if assignment[v as usize].is_some() {
                return Err(DyadicError::ImperfectPairing(v));
            }
            assignment[v as usize] = Some(proto.len());
        }
        let va = &tree.vertices[a as usize];
        let vb = &tree.vertices[b as usize];
        let mut members = va.members.clone();
        members.extend_from_slice(&vb.members);
        members.sort_unstable();
        let rep = pair_index(&va.rep, &vb.rep)
            .expect("representative indices are distinct within a level");
        proto.push(ClumpVertex { members, rep });
    }
    if let Some(v) = leftover {
        if assignment[v as usize].is_some() {
            return Err(DyadicError::ImperfectPairing(v));
        }
        assignment[v as usize] = Some(proto.len());
        let vv = &tree.vertices[v as usize];
        // re-encode so the passed-through representative stays distinct
        // from every fused pair index at this level
        proto.push(ClumpVertex {
            members: vv.members.clone(),
            rep: interleave(&vv.rep, &vv.rep),
        });
    }
    if let Some(unpaired) = assignment.iter().position(|a| a.is_none()) {
        return Err(DyadicError::ImperfectPairing(unpaired as u32));
    }
    // canonical order by smallest member
    let mut order: Vec<usize> = (0..proto.len()).collect();
    order.sort_by_key(|&i| proto[i].members[0]);
    let mut place = vec![0usize; proto.len()];
    for (new_pos, &old_pos) in order.iter().enumerate() {
        place[old_pos] = new_pos;
    }
    let map = |v: u32| place[assignment[v as usize].expect("assigned")] as u32;
    // surviving edges
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    for v in 0..n as u32 {
        if let Some(p) = tree.parent[v as usize] {
            let (a, b) = (map(v), map(p));
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    let m = proto.len();
    if edges.len() != m.saturating_sub(1) {
        return Err(DyadicError::NotATree(format!(
            "contraction left {} edges on {} vertices",
            edges.len(),
            m
        )));
    }
    // re-root at the image of the old root
    let root = map(tree.root);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); m];
    for &(a, b) in &edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut parent: Vec<Option<u32>> = vec![None; m];
    let mut visited = vec![false; m];
    let mut queue = std::collections::VecDeque::new();
    visited[root as usize] = true;
    queue.push_back(root);
    let mut reached = 0usize;
    while let Some(v) = queue.pop_front() {
        reached += 1;
        for &w in &adj[v as usize] {
            if !visited[w as usize] {
                visited[w as usize] = true;
                parent[w as usize] = Some(v);
                queue.push_back(w);
            }
        }
    }
    if reached != m {
        return Err(DyadicError::NotATree(
            "contraction disconnected the tree".into(),
        ));
    }
    let mut vertices_sorted: Vec<ClumpVertex> = Vec::with_capacity(m);
    for &old_pos in &order {
        vertices_sorted.push(proto[old_pos].clone());
    }
    Ok(ContractedTree {
        level: tree.level + 1,
        vertices: vertices_sorted,
        parent,
        root,
    })
}

/// Whether undersized clumps are tolerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderMode {
    /// N must be a power of two; every clump at level i has exactly 2^i
    /// points.
    Strict,
    /// Any N; each level's rounds leave at most one vertex unpaired, which
    /// passes through unfused. Levels that saw a leftover are flagged in
    /// the clumping metadata, and clumps that absorbed one stay below the
    /// 2^i target from there on.
    AllowRemainder,
}

/// Snapshot of one contraction step for audit: the tree it started from,
/// the rounds run on it, and the leftover vertex if the count was odd.
#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub tree_before: ContractedTree,
    pub rounds: Vec<PairingRound>,
    pub leftover: Option<u32>,
}

/// The dyadic clumping plus its audit trail.
#[derive(Debug, Clone)]
pub struct DyadicOutcome {
    pub clumping: Clumping,
    pub trace: Vec<LevelTrace>,
    /// Cumulative doubling count n_i behind each recorded partition.
    pub doublings: Vec<usize>,
}

/// Builds the dyadic clumping over a spanning tree. `schedule` lists how
/// many contraction steps each recorded level takes (default: one per
/// level, sizes 2^i); if the schedule runs out before the tree is a single
/// vertex, single steps continue to the top.
pub fn dyadic_clumping(
    tree: &FactorGraph,
    idx: &IndexAssignment,
    schedule: Option<&[usize]>,
    mode: RemainderMode,
) -> Result<DyadicOutcome, DyadicError> {
    let n = tree.n;
    if n == 0 {
        return Err(DyadicError::NotATree("empty graph".into()));
    }
    if mode == RemainderMode::Strict && !n.is_power_of_two() {
        return Err(DyadicError::PowerOfTwoRequired(n));
    }
    if let Some(steps) = schedule {
        if steps.contains(&0) {
            return Err(DyadicError::BadSchedule(
                "schedule entries must be positive".into(),
            ));
        }
    }
    let rank_of = |id: PointId| idx.rank(id);
    let mut working = ContractedTree::from_factor_graph(tree, idx)?;
    let mut partitions = vec![Partition::build(
        n,
        (0..n as u32).map(|i| vec![PointId(i)]).collect(),
        rank_of,
    )];
    let mut doublings = vec![0usize];
    let mut trace = Vec::new();
    let mut remainder_levels = Vec::new();
    let mut schedule_steps: Vec<usize> = schedule.map(|s| s.to_vec()).unwrap_or_default();
    let mut step_index = 0usize;
    let mut total_doublings = 0usize;
    while working.len() > 1 {
        let step = if step_index < schedule_steps.len() {
            schedule_steps[step_index]
        } else {
            1
        };
        step_index += 1;
        let mut saw_remainder = false;
        for _ in 0..step {
            if working.len() <= 1 {
                break;
            }
            let tree_before = working.clone();
            let mut w = WorkingTree::new(&working);
            let mut rounds = Vec::new();
            let mut all_pairs: Vec<(u32, u32)> = Vec::new();
            while w.alive_count() >= 2 {
                let round = pairing_round(&mut w);
                if round.pairs.is_empty() {
                    return Err(DyadicError::NotATree(
                        "pairing made no progress on a nonempty tree".into(),
                    ));
                }
                all_pairs.extend(round.pairs.iter().map(|&(a, b, _)| (a, b)));
                rounds.push(round);
            }
            let leftover = w.survivor();
            if let Some(v) = leftover {
                match mode {
                    RemainderMode::Strict => {
                        return Err(DyadicError::ImperfectPairing(v));
                    }
                    RemainderMode::AllowRemainder => saw_remainder = true,
                }
            }
            let next = contract_inner(&working, &all_pairs, leftover)?;
            trace.push(LevelTrace {
                tree_before,
                rounds,
                leftover,
            });
            working = next;
            total_doublings += 1;
        }
        partitions.push(Partition::build(
            n,
            working
                .vertices
                .iter()
                .map(|v| v.members.clone())
                .collect(),
            rank_of,
        ));
        doublings.push(total_doublings);
        if saw_remainder {
            remainder_levels.push(partitions.len() - 1);
        }
    }
    schedule_steps.clear();
    let mut clumping = Clumping::new(ClumpingKind::Dyadic, n, partitions);
    clumping.remainder_levels = remainder_levels;
    Ok(DyadicOutcome {
        clumping,
        trace,
        doublings,
    })
}
