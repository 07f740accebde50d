//! One-ended tree factor from a connected clumping, the two-ended path
//! factor derived from it, and tree statistics.
//!
//! Level by level, every forest component inside a clump attaches its
//! max-index vertex to the clump's max-index vertex. The result is a
//! spanning tree whose upward paths climb through the clump maxima --
//! the finite-window rendering of one-endedness, checked by `tree_stats`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clumping::{verify_clumping, Clumping};
use crate::geometry::PointId;
use crate::indexing::IndexAssignment;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("DisconnectedClumping: {0}")]
    DisconnectedClumping(String),
    #[error("NotATree: {0}")]
    NotATree(String),
}

/// What a factor graph is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Tree,
    Path,
    Grid,
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Tree => "tree",
            GraphKind::Path => "path",
            GraphKind::Grid => "grid",
        }
    }
}

/// An undirected graph on the point ids of a configuration. Edges are kept
/// normalized (small id first) and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub kind: GraphKind,
    pub n: usize,
    pub edges: Vec<(PointId, PointId)>,
}

impl FactorGraph {
    pub fn new(kind: GraphKind, n: usize, edges: Vec<(PointId, PointId)>) -> Self {
        let mut edges: Vec<(PointId, PointId)> = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        FactorGraph { kind, n, edges }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a.index()] += 1;
            deg[b.index()] += 1;
        }
        deg
    }

    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for d in self.degrees() {
            *hist.entry(d).or_insert(0) += 1;
        }
        hist
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a.index()].push(b.0);
            adj[b.index()].push(a.0);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Connected, acyclic, exactly n - 1 edges.
    pub fn is_spanning_tree(&self) -> bool {
        if self.n == 0 || self.edges.len() != self.n - 1 {
            return false;
        }
        let mut uf = UnionFind::new(self.n);
        for &(a, b) in &self.edges {
            if !uf.union(a.index(), b.index()) {
                return false; // cycle
            }
        }
        (0..self.n).map(|i| uf.find(i)).collect::<std::collections::HashSet<_>>().len() == 1
    }
}

/// Union-find with path compression and union by rank.
#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Returns false if the two nodes were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return false;
        }
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        if self.rank[ra] == self.rank[rb] {
            self.rank[ra] += 1;
        }
        true
    }
}

/// Builds the spanning tree of a connected clumping: within each clump of
/// each partition, every maximal already-built subtree connects its
/// max-index vertex to the clump's max-index vertex (never to itself). At
/// the first partition components are singletons, so every vertex simply
/// joins its clump maximum.
pub fn tree_from_clumping(
    c: &Clumping,
    idx: &IndexAssignment,
) -> Result<FactorGraph, TreeError> {
    let report = verify_clumping(c);
    if !report.pass() {
        let why = report
            .first_failure()
            .map(|f| {
                format!(
                    "{} check failed{}",
                    f.name,
                    f.witness
                        .as_ref()
                        .map(|w| format!(" ({w})"))
                        .unwrap_or_default()
                )
            })
            .unwrap_or_else(|| "clumping verification failed".into());
        return Err(TreeError::DisconnectedClumping(why));
    }
    let n = c.n_points;
    if n != idx.len() {
        return Err(TreeError::DisconnectedClumping(format!(
            "clumping covers {n} points but the index covers {}",
            idx.len()
        )));
    }
    if n == 0 {
        return Ok(FactorGraph::new(GraphKind::Tree, 0, Vec::new()));
    }
    let mut uf = UnionFind::new(n);
    // max-index member per component root
    let mut comp_max: Vec<PointId> = (0..n).map(|i| PointId(i as u32)).collect();
    let mut edges: Vec<(PointId, PointId)> = Vec::with_capacity(n - 1);
    for part in &c.partitions {
        for clump in &part.clumps {
            let top = clump.max_member;
            // snapshot the distinct components before adding this clump's edges
            let mut reps: Vec<PointId> = Vec::new();
            let mut seen_roots: Vec<usize> = Vec::new();
            for m in &clump.members {
                let root = uf.find(m.index());
                if !seen_roots.contains(&root) {
                    seen_roots.push(root);
                    reps.push(comp_max[root]);
                }
            }
            for rep in reps {
                if rep != top {
                    edges.push((rep, top));
                    let ra = uf.find(rep.index());
                    let rb = uf.find(top.index());
                    uf.union(ra, rb);
                    let new_root = uf.find(top.index());
                    comp_max[new_root] = if idx.rank(rep) > idx.rank(top) { rep } else { top };
                }
            }
        }
    }
    let tree = FactorGraph::new(GraphKind::Tree, n, edges);
    if !tree.is_spanning_tree() && n > 1 {
        return Err(TreeError::DisconnectedClumping(
            "construction did not produce a spanning tree".into(),
        ));
    }
    Ok(tree)
}

/// A tree with parent pointers hung from a chosen root.
#[derive(Debug, Clone)]
pub struct RootedTree {
    pub root: PointId,
    pub parent: Vec<Option<u32>>,
    pub children: Vec<Vec<u32>>,
    pub depth: Vec<u32>,
}

impl RootedTree {
    pub fn from_graph(t: &FactorGraph, root: PointId) -> Result<Self, TreeError> {
        if t.n == 0 {
            return Err(TreeError::NotATree("empty graph".into()));
        }
        if t.edges.len() != t.n - 1 {
            return Err(TreeError::NotATree(format!(
                "{} edges on {} vertices",
                t.edges.len(),
                t.n
            )));
        }
        let adj = t.adjacency();
        let mut parent = vec![None; t.n];
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); t.n];
        let mut depth = vec![0u32; t.n];
        let mut visited = vec![false; t.n];
        let mut queue = std::collections::VecDeque::new();
        visited[root.index()] = true;
        queue.push_back(root.0);
        let mut reached = 0usize;
        while let Some(v) = queue.pop_front() {
            reached += 1;
            for &w in &adj[v as usize] {
                if !visited[w as usize] {
                    visited[w as usize] = true;
                    parent[w as usize] = Some(v);
                    children[v as usize].push(w);
                    depth[w as usize] = depth[v as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        if reached != t.n {
            return Err(TreeError::NotATree(format!(
                "only {reached} of {} vertices reachable from the root",
                t.n
            )));
        }
        Ok(RootedTree {
            root,
            parent,
            children,
            depth,
        })
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0) as usize
    }

    /// `v, parent(v), ..., root`.
    pub fn path_to_root(&self, v: PointId) -> Vec<PointId> {
        let mut path = vec![v];
        let mut cur = v.0;
        while let Some(p) = self.parent[cur as usize] {
            path.push(PointId(p));
            cur = p;
        }
        path
    }
}

/// A Hamiltonian path plus the total order that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFactor {
    pub graph: FactorGraph,
    pub order: Vec<PointId>,
}

/// Depth-first path factor: post-order traversal from the max-index root,
/// visiting child subtrees in increasing order of their max-index vertex;
/// consecutive visited vertices become path edges.
pub fn path_from_tree(t: &FactorGraph, idx: &IndexAssignment) -> Result<PathFactor, TreeError> {
    if t.n == 0 {
        return Err(TreeError::NotATree("empty graph".into()));
    }
    let root = idx.max_point();
    let rooted = RootedTree::from_graph(t, root)?;
    // max index rank within each subtree
    let mut sub_max: Vec<u32> = (0..t.n).map(|i| idx.rank(PointId(i as u32))).collect();
    let post = post_order(&rooted);
    for &v in &post {
        if let Some(p) = rooted.parent[v as usize] {
            sub_max[p as usize] = sub_max[p as usize].max(sub_max[v as usize]);
        }
    }
    // order children by ascending subtree maximum
    let mut rooted = rooted;
    for list in &mut rooted.children {
        list.sort_by_key(|&c| sub_max[c as usize]);
    }
    let order: Vec<PointId> = post_order(&rooted)
        .into_iter()
        .map(PointId)
        .collect();
    let edges = order.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(PathFactor {
        graph: FactorGraph::new(GraphKind::Path, t.n, edges),
        order,
    })
}

fn post_order(rooted: &RootedTree) -> Vec<u32> {
    let mut out = Vec::with_capacity(rooted.parent.len());
    // (vertex, next child position)
    let mut stack: Vec<(u32, usize)> = vec![(rooted.root.0, 0)];
    while let Some((v, pos)) = stack.pop() {
        if pos < rooted.children[v as usize].len() {
            stack.push((v, pos + 1));
            stack.push((rooted.children[v as usize][pos], 0));
        } else {
            out.push(v);
        }
    }
    out
}

/// Tree statistics and the one-endedness check.
#[derive(Debug, Clone)]
pub struct TreeStats {
    pub root: PointId,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub height: usize,
    /// Vertices whose upward path deviates from their trunk; empty when the
    /// one-end property holds.
    pub trunk_violations: Vec<PointId>,
}

/// The trunk of `v`: the max-index vertex of the clump containing `v`,
/// level by level.
pub fn trunk_of(c: &Clumping, v: PointId) -> Vec<PointId> {
    c.partitions
        .iter()
        .map(|part| {
            let pos = part.clump_of(v).expect("v belongs to every level");
            part.clump(pos).max_member
        })
        .collect()
}

/// Computes root, degree histogram, height, and checks for every vertex
/// that its upward path is exactly the strictly climbing part of its trunk.
pub fn tree_stats(
    t: &FactorGraph,
    c: &Clumping,
    idx: &IndexAssignment,
) -> Result<TreeStats, TreeError> {
    let root = idx.max_point();
    let rooted = RootedTree::from_graph(t, root)?;
    let mut violations = Vec::new();
    for i in 0..t.n {
        let v = PointId(i as u32);
        let trunk = trunk_of(c, v);
        let mut expected: Vec<PointId> = Vec::new();
        for m in trunk {
            if idx.rank(m) > idx.rank(v) && expected.last() != Some(&m) {
                expected.push(m);
            }
        }
        let actual = rooted.path_to_root(v);
        if actual[1..] != expected[..] {
            violations.push(v);
        }
    }
    Ok(TreeStats {
        root,
        degree_histogram: t.degree_histogram(),
        height: rooted.height(),
        trunk_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clumping::{build_voronoi_clumping, ClumpingKind, Partition};
    use crate::geometry::{Domain, Point};
    use crate::indexing::{build_index, build_nets, default_unit};
    use crate::process::{sample, PointConfig, ProcessKind, SamplerSpec};

    /// Four asymmetric points on a circle, relabeled so ids follow index
    /// rank: rank(i) == i, matching the hand traces below.
    fn four_point_setup() -> (PointConfig, IndexAssignment) {
        let coords = [0.0f64, 1.0, 2.5, 5.0];
        let cfg = PointConfig {
            domain: Domain::torus(1, 10.0).unwrap(),
            points: coords
                .iter()
                .enumerate()
                .map(|(i, &c)| Point::new(i as u32, vec![c]))
                .collect(),
            provenance: SamplerSpec::new(ProcessKind::Binomial { points: 4 }, 0),
        };
        let idx = build_index(&cfg, 1).unwrap();
        let relabeled = PointConfig {
            domain: cfg.domain,
            points: (0..4u32)
                .map(|r| {
                    let old = idx.by_rank(r);
                    Point::new(r, cfg.points[old.index()].coords.clone())
                })
                .collect(),
            provenance: cfg.provenance.clone(),
        };
        let idx = build_index(&relabeled, 1).unwrap();
        (relabeled, idx)
    }

    fn clumping_from_groups(
        n: usize,
        levels: Vec<Vec<Vec<u32>>>,
        idx: &IndexAssignment,
    ) -> Clumping {
        let parts = levels
            .into_iter()
            .map(|groups| {
                Partition::build(
                    n,
                    groups
                        .into_iter()
                        .map(|g| g.into_iter().map(PointId).collect())
                        .collect(),
                    |id| idx.rank(id),
                )
            })
            .collect();
        Clumping::new(ClumpingKind::Voronoi, n, parts)
    }

    #[test]
    fn four_point_ranks_are_id_ordered() {
        let (_, idx) = four_point_setup();
        for i in 0..4 {
            assert_eq!(idx.rank(PointId(i)), i, "rank of point {i}");
        }
    }

    #[test]
    fn tree_follows_the_two_level_hand_trace() {
        // P1 = {{a,b},{c,d}}, P2 = {{a,b,c,d}} with ranks a<b<c<d
        let (_, idx) = four_point_setup();
        let c = clumping_from_groups(
            4,
            vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1, 2, 3]]],
            &idx,
        );
        let tree = tree_from_clumping(&c, &idx).unwrap();
        assert_eq!(
            tree.edges,
            vec![
                (PointId(0), PointId(1)),
                (PointId(1), PointId(3)),
                (PointId(2), PointId(3)),
            ]
        );
        assert!(tree.is_spanning_tree());
    }

    #[test]
    fn single_clump_gives_a_star() {
        let (_, idx) = four_point_setup();
        let c = clumping_from_groups(4, vec![vec![vec![0, 1, 2, 3]]], &idx);
        let tree = tree_from_clumping(&c, &idx).unwrap();
        // everyone connects to the max-index vertex 3
        assert_eq!(
            tree.edges,
            vec![
                (PointId(0), PointId(3)),
                (PointId(1), PointId(3)),
                (PointId(2), PointId(3)),
            ]
        );
        let stats = tree_stats(&tree, &c, &idx).unwrap();
        assert_eq!(stats.height, 1);
        assert_eq!(stats.degree_histogram[&1], 3);
        assert_eq!(stats.degree_histogram[&3], 1);
        assert!(stats.trunk_violations.is_empty());
    }

    #[test]
    fn single_vertex_tree_is_empty() {
        let cfg = PointConfig {
            domain: Domain::torus(1, 10.0).unwrap(),
            points: vec![Point::new(0, vec![4.0])],
            provenance: SamplerSpec::new(ProcessKind::Binomial { points: 1 }, 0),
        };
        let idx = build_index(&cfg, 0).unwrap();
        let nets = build_nets(&cfg, &idx, 1.0).unwrap();
        let c = build_voronoi_clumping(&cfg, &nets, &idx);
        let tree = tree_from_clumping(&c, &idx).unwrap();
        assert_eq!(tree.edge_count(), 0);
        assert!(tree.is_spanning_tree());
    }

    #[test]
    fn disconnected_clumping_is_rejected() {
        let (_, idx) = four_point_setup();
        // no level joins everyone
        let c = clumping_from_groups(4, vec![vec![vec![0, 1], vec![2, 3]]], &idx);
        assert!(matches!(
            tree_from_clumping(&c, &idx),
            Err(TreeError::DisconnectedClumping(_))
        ));
    }

    #[test]
    fn path_from_star_visits_in_index_order() {
        let (_, idx) = four_point_setup();
        let c = clumping_from_groups(4, vec![vec![vec![0, 1, 2, 3]]], &idx);
        let tree = tree_from_clumping(&c, &idx).unwrap();
        let path = path_from_tree(&tree, &idx).unwrap();
        assert_eq!(
            path.order,
            vec![PointId(0), PointId(1), PointId(2), PointId(3)]
        );
        assert_eq!(
            path.graph.edges,
            vec![
                (PointId(0), PointId(1)),
                (PointId(1), PointId(2)),
                (PointId(2), PointId(3)),
            ]
        );
        let degs = path.graph.degrees();
        assert!(degs.iter().all(|&d| d <= 2));
        assert_eq!(path.graph.edge_count(), 3);
    }

    #[test]
    fn path_of_single_edge_is_that_edge() {
        // two points: ranks supplied directly (no separating profile)
        let idx = IndexAssignment::from_ranks(vec![0, 1]);
        let tree = FactorGraph::new(
            GraphKind::Tree,
            2,
            vec![(PointId(0), PointId(1))],
        );
        let path = path_from_tree(&tree, &idx).unwrap();
        assert_eq!(path.graph.edges, tree.edges);
        assert_eq!(path.order.len(), 2);
    }

    #[test]
    fn trunk_of_the_hand_trace_matches() {
        let (_, idx) = four_point_setup();
        let c = clumping_from_groups(
            4,
            vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1, 2, 3]]],
            &idx,
        );
        let tree = tree_from_clumping(&c, &idx).unwrap();
        // trunk of a: clump maxima (b, d); upward path a -> b -> d
        assert_eq!(trunk_of(&c, PointId(0)), vec![PointId(1), PointId(3)]);
        let stats = tree_stats(&tree, &c, &idx).unwrap();
        assert!(stats.trunk_violations.is_empty());
        // trunk of the root is the root repeated
        assert_eq!(trunk_of(&c, PointId(3)), vec![PointId(3), PointId(3)]);
    }

    #[test]
    fn pipeline_spans_for_poisson_input() {
        let dom = Domain::torus(2, 1.0).unwrap();
        for seed in [4u64, 9] {
            let spec = SamplerSpec::new(ProcessKind::Poisson { intensity: 48.0 }, seed);
            let cfg = sample(&spec, &dom).unwrap();
            let idx = build_index(&cfg, 1).unwrap();
            let nets = build_nets(&cfg, &idx, default_unit(&cfg)).unwrap();
            let c = build_voronoi_clumping(&cfg, &nets, &idx);
            let tree = tree_from_clumping(&c, &idx).unwrap();
            assert!(tree.is_spanning_tree());
            let stats = tree_stats(&tree, &c, &idx).unwrap();
            assert!(stats.trunk_violations.is_empty());
        }
    }

    #[test]
    fn pipeline_spans_for_random_configs() {
        for (d, n) in [(1usize, 32usize), (2, 64), (3, 32)] {
            let dom = Domain::torus(d, 1.0).unwrap();
            for seed in [2u64, 3, 11] {
                let spec = SamplerSpec::new(ProcessKind::Binomial { points: n }, seed);
                let cfg = sample(&spec, &dom).unwrap();
                let idx = build_index(&cfg, 1).unwrap();
                let nets = build_nets(&cfg, &idx, default_unit(&cfg)).unwrap();
                let c = build_voronoi_clumping(&cfg, &nets, &idx);
                let tree = tree_from_clumping(&c, &idx).unwrap();
                assert!(tree.is_spanning_tree(), "d={d} n={n} seed={seed}");
                let stats = tree_stats(&tree, &c, &idx).unwrap();
                assert!(
                    stats.trunk_violations.is_empty(),
                    "trunk violations at d={d} n={n} seed={seed}: {:?}",
                    stats.trunk_violations
                );
                let path = path_from_tree(&tree, &idx).unwrap();
                assert_eq!(path.graph.edge_count(), n - 1);
                assert!(path.graph.degrees().iter().all(|&deg| deg <= 2));
            }
        }
    }

    #[test]
    fn tree_is_translation_equivariant() {
        let dom = Domain::torus(2, 1.0).unwrap();
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 64 }, 77);
        let cfg = sample(&spec, &dom).unwrap();
        let build = |cfg: &PointConfig| {
            let idx = build_index(cfg, 1).unwrap();
            let nets = build_nets(cfg, &idx, default_unit(cfg)).unwrap();
            let c = build_voronoi_clumping(cfg, &nets, &idx);
            tree_from_clumping(&c, &idx).unwrap()
        };
        let t0 = build(&cfg);
        let t1 = build(&cfg.translated(&[0.413, 0.129]).unwrap());
        assert_eq!(t0, t1);
    }
}
