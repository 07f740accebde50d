//! Grid embeddings over the dyadic clumping: each doubling level glues two
//! half-blocks along a hyperface, cycling the doubled axis.
//!
//! Level 1 places the lower-index point of each pair at coordinate 1 and
//! the higher at 2 on axis 1. At every later merge the block with the
//! larger representative index keeps its coordinates and the other block
//! is translated by `2^(k div n)` along axis `(k mod n) + 1`; the edge set
//! is exactly the pairs at L1 distance 1, so the gluing is canonical
//! (identity orientation, translation only) and rebuilds reproduce the
//! embedding bit for bit.

use std::collections::HashMap;

use thiserror::Error;

use crate::clumping::{Clumping, ClumpingKind};
use crate::geometry::PointId;
use crate::indexing::{pair_index, IndexAssignment, IndexValue};
use crate::treefactor::{FactorGraph, GraphKind};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("NotDyadic: {0}")]
    NotDyadic(String),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
}

/// One gluing step: at `level`, the block keeping its coordinates and the
/// block translated by `offset` along `axis` (0-based), as positions into
/// the previous partition's clump list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGlue {
    pub level: usize,
    pub kept: usize,
    pub moved: usize,
    pub axis: usize,
    pub offset: u32,
}

/// A bijective embedding of the points onto a box of the integer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEmbedding {
    /// Target grid dimension.
    pub n: usize,
    /// Top dyadic level: the configuration has 2^m points.
    pub m: usize,
    /// 1-based coordinate tuples, indexed by point id.
    pub coords: Vec<Vec<u32>>,
    /// Exactly the pairs at L1 distance 1 within the box.
    pub graph: FactorGraph,
    /// The gluing steps that produced the coordinates, for audit.
    pub glues: Vec<BlockGlue>,
}

impl GridEmbedding {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Box side per axis after m doublings of n axes.
    pub fn dims(&self) -> Vec<u32> {
        expected_dims(self.m, self.n)
    }
}

/// Axis sizes of the box reached after `m` doublings in dimension `n`:
/// axis a (0-based) has been doubled `ceil((m - a) / n)` times.
pub fn expected_dims(m: usize, n: usize) -> Vec<u32> {
    (0..n)
        .map(|a| {
            let diff = m.saturating_sub(a);
            1u32 << diff.div_ceil(n)
        })
        .collect()
}

/// Builds the grid embedding from a strict dyadic clumping.
pub fn grid_factor(
    dc: &Clumping,
    idx: &IndexAssignment,
    n: usize,
) -> Result<GridEmbedding, GridError> {
    if n < 1 {
        return Err(GridError::DimensionMismatch(
            "grid dimension must be at least 1".into(),
        ));
    }
    if dc.kind != ClumpingKind::Dyadic {
        return Err(GridError::NotDyadic("clumping is not dyadic".into()));
    }
    let points = dc.n_points;
    if points == 0 || !points.is_power_of_two() {
        return Err(GridError::NotDyadic(format!(
            "point count {points} is not a power of two"
        )));
    }
    let m = points.trailing_zeros() as usize;
    if dc.levels() != m + 1 {
        return Err(GridError::NotDyadic(format!(
            "expected {} partition levels for N = 2^{m}, found {}",
            m + 1,
            dc.levels()
        )));
    }
    for (i, part) in dc.partitions.iter().enumerate() {
        for clump in &part.clumps {
            if clump.size() != 1usize << i {
                return Err(GridError::NotDyadic(format!(
                    "level {i} clump of size {} (expected {})",
                    clump.size(),
                    1usize << i
                )));
            }
        }
    }
    // representative index per clump, level by level
    let mut reps: Vec<Vec<IndexValue>> = Vec::with_capacity(m + 1);
    reps.push(
        dc.partitions[0]
            .clumps
            .iter()
            .map(|c| idx.value(c.members[0]))
            .collect(),
    );
    // children[i][c] = the two level-(i-1) clump positions forming clump c
    let mut children: Vec<Vec<[usize; 2]>> = Vec::with_capacity(m + 1);
    children.push(Vec::new());
    for i in 1..=m {
        let fine = &dc.partitions[i - 1];
        let coarse = &dc.partitions[i];
        let mut pairs: Vec<Vec<usize>> = vec![Vec::new(); coarse.len()];
        for (pos, clump) in fine.clumps.iter().enumerate() {
            let parent = coarse
                .clump_of(clump.members[0])
                .ok_or_else(|| GridError::NotDyadic(format!("level {i}: orphan clump")))?;
            pairs[parent].push(pos);
        }
        let mut level_children = Vec::with_capacity(coarse.len());
        let mut level_reps = Vec::with_capacity(coarse.len());
        for (c, kids) in pairs.into_iter().enumerate() {
            if kids.len() != 2 {
                return Err(GridError::NotDyadic(format!(
                    "level {i} clump {c} merges {} children (expected 2)",
                    kids.len()
                )));
            }
            let rep = pair_index(&reps[i - 1][kids[0]], &reps[i - 1][kids[1]])
                .map_err(|_| GridError::NotDyadic("equal representative indices".into()))?;
            level_children.push([kids[0], kids[1]]);
            level_reps.push(rep);
        }
        children.push(level_children);
        reps.push(level_reps);
    }
    // coordinates: every merge translates one block along the doubling axis
    let mut coords: Vec<Vec<u32>> = vec![vec![1; n]; points];
    let mut glues = Vec::new();
    for k in 1..=m {
        let axis = (k - 1) % n;
        let offset = 1u32 << ((k - 1) / n);
        for kids in &children[k] {
            let [a, b] = *kids;
            let (ra, rb) = (&reps[k - 1][a], &reps[k - 1][b]);
            // level 1: the lower-index point keeps coordinate 1;
            // later levels: the block of larger representative keeps.
            let shifted = if k == 1 {
                if ra > rb {
                    a
                } else {
                    b
                }
            } else if ra < rb {
                a
            } else {
                b
            };
            let kept = if shifted == a { b } else { a };
            glues.push(BlockGlue {
                level: k,
                kept,
                moved: shifted,
                axis,
                offset,
            });
            for member in &dc.partitions[k - 1].clumps[shifted].members {
                coords[member.index()][axis] += offset;
            }
        }
    }
    let graph = grid_adjacency(&coords);
    Ok(GridEmbedding {
        n,
        m,
        coords,
        graph,
        glues,
    })
}

/// The graph of all pairs at L1 distance 1 in the given coordinates.
pub fn grid_adjacency(coords: &[Vec<u32>]) -> FactorGraph {
    let lookup: HashMap<&[u32], u32> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i as u32))
        .collect();
    let mut edges = Vec::new();
    let mut probe = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        for axis in 0..c.len() {
            probe.clone_from(c);
            probe[axis] += 1;
            if let Some(&j) = lookup.get(probe.as_slice()) {
                edges.push((PointId(i as u32), PointId(j)));
            }
        }
    }
    FactorGraph::new(GraphKind::Grid, coords.len(), edges)
}

/// Outcome of the structural grid checks.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub dims: Vec<u32>,
    pub bijection_ok: bool,
    pub adjacency_ok: bool,
    pub deficient_count: usize,
    pub expected_deficient: usize,
    pub failures: Vec<String>,
}

impl GridReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that the coordinates are a bijection onto the expected box, that
/// the edge set equals the grid adjacency exactly, and that the number of
/// deficient vertices (degree below 2n) equals the box boundary count.
pub fn verify_grid(g: &GridEmbedding) -> GridReport {
    let dims = expected_dims(g.m, g.n);
    let mut failures = Vec::new();
    let total: u64 = dims.iter().map(|&d| d as u64).product();
    let mut bijection_ok = total == g.coords.len() as u64;
    if !bijection_ok {
        failures.push(format!(
            "box holds {total} vertices but the embedding has {}",
            g.coords.len()
        ));
    }
    let mut seen = std::collections::HashSet::with_capacity(g.coords.len());
    for (i, c) in g.coords.iter().enumerate() {
        if c.len() != g.n || c.iter().zip(&dims).any(|(&x, &d)| x < 1 || x > d) {
            bijection_ok = false;
            failures.push(format!("point {i} at {c:?} outside the box {dims:?}"));
            break;
        }
        if !seen.insert(c.clone()) {
            bijection_ok = false;
            failures.push(format!("coordinate {c:?} assigned twice"));
            break;
        }
    }
    let expected_edges = grid_adjacency(&g.coords);
    let adjacency_ok = expected_edges.edges == g.graph.edges;
    if !adjacency_ok {
        failures.push(format!(
            "edge set has {} edges, grid adjacency has {}",
            g.graph.edge_count(),
            expected_edges.edge_count()
        ));
    }
    let two_n = 2 * g.n;
    let deficient_count = g
        .graph
        .degrees()
        .iter()
        .filter(|&&d| d < two_n)
        .count();
    let interior: u64 = dims.iter().map(|&d| (d as u64).saturating_sub(2)).product();
    let expected_deficient = (total - interior) as usize;
    if deficient_count != expected_deficient {
        failures.push(format!(
            "{deficient_count} deficient vertices, boundary count is {expected_deficient}"
        ));
    }
    GridReport {
        dims,
        bijection_ok,
        adjacency_ok,
        deficient_count,
        expected_deficient,
        failures,
    }
}

/// Totals of the boundary mass transport on the finite box.
#[derive(Debug, Clone)]
pub struct DeficiencyReport {
    pub sent_total: u64,
    pub received_total: u64,
    pub max_received: u64,
    /// (vertex, axis, direction) triples that send mass.
    pub deficient_directions: usize,
    /// Vertices of degree below 2n.
    pub deficient_vertices: usize,
    pub fraction_deficient: f64,
    pub mean_sent_per_vertex: f64,
}

/// Every (vertex, axis, direction) with an edge ahead and none behind
/// sends mass 1 to each vertex on the maximal straight grid path in the
/// available direction. Computed exactly over all vertices; interior
/// vertices send nothing, and each vertex receives at most once per
/// (axis, direction), so received mass never exceeds 2n.
pub fn deficiency_transport(g: &GridEmbedding) -> DeficiencyReport {
    deficiency_transport_inner(&g.coords, g.n, &expected_dims(g.m, g.n), false)
}

/// Same transport with the box wrapped toroidally: no vertex is deficient,
/// so no mass moves at all.
pub fn deficiency_transport_wrapped(g: &GridEmbedding) -> DeficiencyReport {
    deficiency_transport_inner(&g.coords, g.n, &expected_dims(g.m, g.n), true)
}

fn deficiency_transport_inner(
    coords: &[Vec<u32>],
    n: usize,
    dims: &[u32],
    wrap: bool,
) -> DeficiencyReport {
    let lookup: HashMap<&[u32], u32> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i as u32))
        .collect();
    let neighbor = |c: &[u32], axis: usize, dir: i32| -> Option<u32> {
        let d = dims[axis];
        let cur = c[axis];
        let next = if dir > 0 {
            if cur < d {
                cur + 1
            } else if wrap && d > 1 {
                1
            } else {
                return None;
            }
        } else if cur > 1 {
            cur - 1
        } else if wrap && d > 1 {
            d
        } else {
            return None;
        };
        if next == cur {
            return None;
        }
        let mut probe = c.to_vec();
        probe[axis] = next;
        lookup.get(probe.as_slice()).copied()
    };
    let mut received = vec![0u64; coords.len()];
    let mut sent_total = 0u64;
    let mut deficient_directions = 0usize;
    for (i, c) in coords.iter().enumerate() {
        for axis in 0..n {
            for dir in [1i32, -1] {
                let ahead = neighbor(c, axis, dir);
                let behind = neighbor(c, axis, -dir);
                if ahead.is_some() && behind.is_none() {
                    deficient_directions += 1;
                    // walk the maximal straight path ahead
                    let mut cur_coords = c.clone();
                    while let Some(next) = neighbor(&cur_coords, axis, dir) {
                        received[next as usize] += 1;
                        sent_total += 1;
                        if wrap && next == i as u32 {
                            break;
                        }
                        cur_coords.clone_from(&coords[next as usize]);
                    }
                }
            }
        }
    }
    let received_total: u64 = received.iter().sum();
    let max_received = received.iter().copied().max().unwrap_or(0);
    let two_n = 2 * n;
    let deficient_vertices = {
        let graph = grid_adjacency(coords);
        graph.degrees().iter().filter(|&&d| d < two_n).count()
    };
    DeficiencyReport {
        sent_total,
        received_total,
        max_received,
        deficient_directions,
        deficient_vertices,
        fraction_deficient: deficient_vertices as f64 / coords.len() as f64,
        mean_sent_per_vertex: sent_total as f64 / coords.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{dyadic_clumping, RemainderMode};
    use crate::geometry::Domain;
    use crate::indexing::IndexAssignment;
    use crate::pipeline::build_grid_pipeline;
    use crate::process::{sample, ProcessKind, SamplerSpec};
    use crate::treefactor::FactorGraph;

    fn four_point_dyadic() -> (Clumping, IndexAssignment) {
        let idx = IndexAssignment::from_ranks(vec![0, 1, 2, 3]);
        let t = FactorGraph::new(
            crate::treefactor::GraphKind::Tree,
            4,
            vec![
                (PointId(0), PointId(1)),
                (PointId(2), PointId(3)),
                (PointId(1), PointId(3)),
            ],
        );
        let out = dyadic_clumping(&t, &idx, None, RemainderMode::Strict).unwrap();
        (out.clumping, idx)
    }

    #[test]
    fn one_dimensional_gluing_matches_hand_trace() {
        let (dc, idx) = four_point_dyadic();
        let g = grid_factor(&dc, &idx, 1).unwrap();
        // {c,d} has the larger pair index: it keeps 1,2; {a,b} shifts to 3,4
        assert_eq!(g.coords[2], vec![1]);
        assert_eq!(g.coords[3], vec![2]);
        assert_eq!(g.coords[0], vec![3]);
        assert_eq!(g.coords[1], vec![4]);
        // path c - d - a - b
        assert_eq!(
            g.graph.edges,
            vec![
                (PointId(0), PointId(1)),
                (PointId(0), PointId(3)),
                (PointId(2), PointId(3)),
            ]
        );
        let report = verify_grid(&g);
        assert!(report.pass(), "{:?}", report.failures);
        assert_eq!(report.deficient_count, 2); // the two path ends
    }

    #[test]
    fn two_dimensional_square_on_four_points() {
        let (dc, idx) = four_point_dyadic();
        let g = grid_factor(&dc, &idx, 2).unwrap();
        assert_eq!(g.dims(), vec![2, 2]);
        let degrees = g.graph.degrees();
        assert!(degrees.iter().all(|&d| d == 2));
        let report = verify_grid(&g);
        assert!(report.pass());
        // all four corners are deficient in a 2x2 box
        assert_eq!(report.deficient_count, 4);
    }

    #[test]
    fn k3_box_shape_in_two_dimensions() {
        // m = 3, n = 2: the box has 8 vertices with sides {4, 2}
        assert_eq!(expected_dims(3, 2), vec![4, 2]);
        assert_eq!(expected_dims(8, 2), vec![16, 16]);
        assert_eq!(expected_dims(9, 3), vec![8, 8, 8]);
        assert_eq!(expected_dims(1, 2), vec![2, 1]);
    }

    #[test]
    fn rejects_non_dyadic_inputs() {
        let (dc, idx) = four_point_dyadic();
        let mut not_dyadic = dc.clone();
        not_dyadic.kind = ClumpingKind::Voronoi;
        assert!(matches!(
            grid_factor(&not_dyadic, &idx, 1),
            Err(GridError::NotDyadic(_))
        ));
        assert!(matches!(
            grid_factor(&dc, &idx, 0),
            Err(GridError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn full_pipeline_embeds_256_points_onto_a_square() {
        let dom = Domain::torus(2, 1.0).unwrap();
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 256 }, 2026);
        let cfg = sample(&spec, &dom).unwrap();
        let (_, _, g) = build_grid_pipeline(&cfg, 1, None, 2, None).unwrap();
        assert_eq!(g.dims(), vec![16, 16]);
        let report = verify_grid(&g);
        assert!(report.pass(), "{:?}", report.failures);
        assert_eq!(report.deficient_count, 60); // 4*16 - 4 boundary vertices
    }

    #[test]
    fn embedding_is_rigid_and_equivariant() {
        let dom = Domain::torus(2, 1.0).unwrap();
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 64 }, 3);
        let cfg = sample(&spec, &dom).unwrap();
        let (_, _, g0) = build_grid_pipeline(&cfg, 1, None, 2, None).unwrap();
        let (_, _, g1) = build_grid_pipeline(&cfg, 1, None, 2, None).unwrap();
        assert_eq!(g0, g1);
        let moved = cfg.translated(&[0.143, 0.757]).unwrap();
        let (_, _, g2) = build_grid_pipeline(&moved, 1, None, 2, None).unwrap();
        assert_eq!(g0, g2);
    }

    #[test]
    fn seam_edges_cross_only_the_glue_axis() {
        // every final edge between the two blocks of a merge differs by
        // exactly 1 on that merge's doubling axis
        let dom = Domain::torus(2, 1.0).unwrap();
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 128 }, 31);
        let cfg = sample(&spec, &dom).unwrap();
        let (tp, dyadic, g) = build_grid_pipeline(&cfg, 1, None, 2, None).unwrap();
        let _ = tp;
        assert_eq!(g.glues.len(), 127); // one merge per non-root clump pair
        for glue in &g.glues {
            let part = &dyadic.clumping.partitions[glue.level - 1];
            let kept = &part.clumps[glue.kept].members;
            let moved = &part.clumps[glue.moved].members;
            let moved_set: std::collections::HashSet<_> = moved.iter().collect();
            let mut seam_edges = 0usize;
            for &(a, b) in &g.graph.edges {
                let (ka, kb) = (kept.contains(&a), kept.contains(&b));
                let (ma, mb) = (moved_set.contains(&a), moved_set.contains(&b));
                if (ka && mb) || (ma && kb) {
                    seam_edges += 1;
                    let ca = &g.coords[a.index()];
                    let cb = &g.coords[b.index()];
                    for axis in 0..g.n {
                        let diff = ca[axis].abs_diff(cb[axis]);
                        assert_eq!(
                            diff,
                            u32::from(axis == glue.axis),
                            "level {} seam edge {a}-{b} differs on axis {axis}",
                            glue.level
                        );
                    }
                }
            }
            assert!(seam_edges > 0, "glue at level {} added no seam", glue.level);
        }
    }

    #[test]
    fn deficiency_on_the_square_sends_eight_units() {
        let (dc, idx) = four_point_dyadic();
        let g = grid_factor(&dc, &idx, 2).unwrap();
        let rep = deficiency_transport(&g);
        // every (vertex, axis) pair is deficient; each path has one receiver
        assert_eq!(rep.sent_total, 8);
        assert_eq!(rep.received_total, 8);
        assert_eq!(rep.deficient_directions, 8);
        assert!(rep.max_received <= 4);
    }

    #[test]
    fn deficiency_on_a_path_of_four() {
        let (dc, idx) = four_point_dyadic();
        let g = grid_factor(&dc, &idx, 1).unwrap();
        let rep = deficiency_transport(&g);
        // the two ends each send along 3 vertices
        assert_eq!(rep.sent_total, 6);
        assert_eq!(rep.deficient_directions, 2);
        assert_eq!(rep.max_received, 2);
    }

    #[test]
    fn interior_vertices_send_nothing() {
        let dom = Domain::torus(2, 1.0).unwrap();
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 256 }, 8);
        let cfg = sample(&spec, &dom).unwrap();
        let (_, _, g) = build_grid_pipeline(&cfg, 1, None, 2, None).unwrap();
        let rep = deficiency_transport(&g);
        // 16x16: each border line sends 15 units from each end
        assert_eq!(rep.deficient_directions, 64);
        assert_eq!(rep.sent_total, 64 * 15);
        assert!(rep.max_received <= 4);
        assert_eq!(rep.sent_total, rep.received_total);
    }

    #[test]
    fn toroidal_wrap_moves_no_mass() {
        let (dc, idx) = four_point_dyadic();
        for n in [1usize, 2] {
            let g = grid_factor(&dc, &idx, n).unwrap();
            let rep = deficiency_transport_wrapped(&g);
            assert_eq!(rep.sent_total, 0);
            assert_eq!(rep.deficient_directions, 0);
        }
    }
}
