//! Nested partitions of a configuration (clumpings) and their diagnostics.
//!
//! The Voronoi-refinement clumping groups two points at level k exactly when
//! they share the nearest net site at every level i >= k. Membership is
//! decided through nearest-site key vectors: the key at level k+1 is a
//! suffix of the key at level k, so nesting holds by construction. A final
//! virtual level keeps the clumping connected in a finite window.

use std::collections::BTreeMap;

use crate::geometry::{two_nearest_of, Point, PointId};
use crate::indexing::{IndexAssignment, NetHierarchy};
use crate::process::PointConfig;

/// Which construction produced the clumping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClumpingKind {
    Voronoi,
    Dyadic,
}

/// One class of a partition. Members are sorted ascending by id;
/// `max_member` is the member of greatest index.
#[derive(Debug, Clone, PartialEq)]
pub struct Clump {
    pub members: Vec<PointId>,
    pub max_member: PointId,
}

impl Clump {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// A partition of the point ids, with a reverse membership map.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub clumps: Vec<Clump>,
    assignment: Vec<u32>,
}

impl Partition {
    /// Builds a partition from groups. Clumps are sorted by smallest member
    /// so the layout is canonical; `rank_of` picks each clump's max member.
    pub fn build(
        n_points: usize,
        groups: Vec<Vec<PointId>>,
        rank_of: impl Fn(PointId) -> u32,
    ) -> Partition {
        let mut clumps: Vec<Clump> = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|mut members| {
                members.sort_unstable();
                let max_member = *members
                    .iter()
                    .max_by_key(|&&m| rank_of(m))
                    .expect("clump is nonempty");
                Clump {
                    members,
                    max_member,
                }
            })
            .collect();
        clumps.sort_by_key(|c| c.members[0]);
        let mut assignment = vec![u32::MAX; n_points];
        for (pos, clump) in clumps.iter().enumerate() {
            for m in &clump.members {
                if m.index() < n_points {
                    assignment[m.index()] = pos as u32;
                }
            }
        }
        Partition { clumps, assignment }
    }

    pub fn len(&self) -> usize {
        self.clumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clumps.is_empty()
    }

    /// Position of the clump containing `id`, if assigned.
    pub fn clump_of(&self, id: PointId) -> Option<usize> {
        let pos = *self.assignment.get(id.index())?;
        (pos != u32::MAX).then_some(pos as usize)
    }

    pub fn clump(&self, pos: usize) -> &Clump {
        &self.clumps[pos]
    }

    pub fn max_clump_size(&self) -> usize {
        self.clumps.iter().map(Clump::size).max().unwrap_or(0)
    }
}

/// A sequence of coarser and coarser partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Clumping {
    pub kind: ClumpingKind,
    pub n_points: usize,
    pub partitions: Vec<Partition>,
    /// Dyadic remainder mode: levels carrying one undersized clump.
    pub remainder_levels: Vec<usize>,
}

impl Clumping {
    pub fn new(kind: ClumpingKind, n_points: usize, partitions: Vec<Partition>) -> Self {
        Clumping {
            kind,
            n_points,
            partitions,
            remainder_levels: Vec::new(),
        }
    }

    pub fn levels(&self) -> usize {
        self.partitions.len()
    }
}

/// The Voronoi-refinement clumping over the net hierarchy, with a final
/// virtual single-clump level enforcing connectivity.
pub fn build_voronoi_clumping(
    config: &PointConfig,
    nets: &NetHierarchy,
    idx: &IndexAssignment,
) -> Clumping {
    let n = config.len();
    let levels = nets.levels.len();
    // Site coordinates per level, ordered by descending index so that exact
    // distance ties resolve to the site of larger index.
    let site_order: Vec<Vec<PointId>> = nets
        .levels
        .iter()
        .map(|lv| {
            let mut sites = lv.sites.clone();
            sites.sort_by_key(|&s| std::cmp::Reverse(idx.rank(s)));
            sites
        })
        .collect();
    let site_coords: Vec<Vec<&[f64]>> = site_order
        .iter()
        .map(|sites| {
            sites
                .iter()
                .map(|s| config.points[s.index()].coords.as_slice())
                .collect()
        })
        .collect();
    // Full key vector per point: nearest site id at every level.
    let keys: Vec<Vec<PointId>> = config
        .points
        .iter()
        .map(|p| {
            (0..levels)
                .map(|li| {
                    let (pos, _) =
                        crate::geometry::nearest_of(&config.domain, &p.coords, &site_coords[li])
                            .expect("levels are nonempty");
                    site_order[li][pos]
                })
                .collect()
        })
        .collect();
    let rank_of = |id: PointId| idx.rank(id);
    let mut partitions = Vec::with_capacity(levels + 1);
    for k in 0..levels {
        let mut groups: BTreeMap<&[PointId], Vec<PointId>> = BTreeMap::new();
        for (i, key) in keys.iter().enumerate() {
            groups
                .entry(&key[k..])
                .or_default()
                .push(config.points[i].id);
        }
        partitions.push(Partition::build(
            n,
            groups.into_values().collect(),
            rank_of,
        ));
    }
    // Final virtual level: one clump of all points.
    let all: Vec<PointId> = config.points.iter().map(|p| p.id).collect();
    partitions.push(Partition::build(n, vec![all], rank_of));
    Clumping::new(ClumpingKind::Voronoi, n, partitions)
}

/// Per-level bisector-gap test against the Voronoi boundary of the
/// level's net: fires when the distances to the nearest and second nearest
/// sites differ by less than `2 * delta`.
///
/// Any point within `delta` of the boundary complex fires the test; the
/// converse holds up to a bounded geometry factor (the gap equals twice
/// the boundary distance only when the two sites and the origin align), so
/// the hit set is a conservative thickening with the same decay in the
/// level. No polygons are needed.
pub fn thickened_boundary_hits(
    config: &PointConfig,
    nets: &NetHierarchy,
    delta: f64,
    origin: &Point,
) -> Vec<bool> {
    nets.levels
        .iter()
        .map(|lv| {
            if lv.sites.len() < 2 {
                return false;
            }
            let coords: Vec<&[f64]> = lv
                .sites
                .iter()
                .map(|s| config.points[s.index()].coords.as_slice())
                .collect();
            let ((_, d1), second) = two_nearest_of(&config.domain, &origin.coords, &coords)
                .expect("at least two sites");
            let (_, d2) = second.expect("at least two sites");
            d2 - d1 < 2.0 * delta
        })
        .collect()
}

/// One verification check with an optional witness.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub witness: Option<String>,
}

/// Outcome of `verify_clumping`: failures are report entries, not errors.
#[derive(Debug, Clone)]
pub struct ClumpingReport {
    pub checks: Vec<CheckOutcome>,
    pub notes: Vec<String>,
}

impl ClumpingReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.pass)
    }
}

/// Checks coverage, nesting, finiteness, and connectivity (the final
/// partition must be a single clump).
pub fn verify_clumping(c: &Clumping) -> ClumpingReport {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    if c.partitions.is_empty() {
        notes.push("trivially connected: no levels".into());
        return ClumpingReport { checks, notes };
    }
    // coverage: each level partitions exactly the n points
    let mut coverage = CheckOutcome {
        name: "coverage",
        pass: true,
        witness: None,
    };
    for (k, part) in c.partitions.iter().enumerate() {
        let mut seen = vec![false; c.n_points];
        let mut total = 0usize;
        for clump in &part.clumps {
            for m in &clump.members {
                if m.index() >= c.n_points || seen[m.index()] {
                    coverage.pass = false;
                    coverage.witness =
                        Some(format!("level {k}: point {m} repeated or out of range"));
                }
                if m.index() < c.n_points {
                    seen[m.index()] = true;
                }
                total += 1;
            }
        }
        if total != c.n_points || !seen.iter().all(|&s| s) {
            coverage.pass = false;
            coverage
                .witness
                .get_or_insert_with(|| format!("level {k}: covers {total} of {} points", c.n_points));
        }
    }
    checks.push(coverage);
    // nesting: every clump of level k is contained in one clump of level k+1
    let mut nesting = CheckOutcome {
        name: "nesting",
        pass: true,
        witness: None,
    };
    for k in 0..c.partitions.len().saturating_sub(1) {
        let fine = &c.partitions[k];
        let coarse = &c.partitions[k + 1];
        for clump in &fine.clumps {
            let target = coarse.clump_of(clump.members[0]);
            for m in &clump.members[1..] {
                if coarse.clump_of(*m) != target {
                    nesting.pass = false;
                    nesting.witness.get_or_insert_with(|| {
                        format!(
                            "level {k}: points {} and {} share a clump but split at level {}",
                            clump.members[0],
                            m,
                            k + 1
                        )
                    });
                }
            }
        }
    }
    checks.push(nesting);
    // finiteness: trivially true in a finite window; record the statistic
    let max_size = c
        .partitions
        .iter()
        .map(Partition::max_clump_size)
        .max()
        .unwrap_or(0);
    notes.push(format!("max clump size {max_size}"));
    checks.push(CheckOutcome {
        name: "finiteness",
        pass: true,
        witness: None,
    });
    // connectivity: the last partition is one clump
    let last = c.partitions.last().expect("nonempty");
    checks.push(CheckOutcome {
        name: "connectivity",
        pass: last.len() == 1,
        witness: (last.len() != 1).then(|| format!("final partition has {} clumps", last.len())),
    });
    ClumpingReport { checks, notes }
}
