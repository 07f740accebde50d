//! Periodic-box metric space, nearest-neighbor queries, and 2D Voronoi
//! cell diagnostics.
//!
//! The window is a d-dimensional box of side `L`, by default with torus
//! topology: distances wrap around, and Voronoi cells are computed against
//! the 3x3 tiling of site images. All values are immutable after
//! construction and all operations are pure, so everything here is safe to
//! share across workers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Window topology. `Torus` wraps distances; `Box` does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Torus,
    Box,
}

/// Errors raised by geometric queries.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("DimensionUnsupported: operation requires d = {required}, domain has d = {actual}")]
    DimensionUnsupported { required: usize, actual: usize },
    #[error("DegenerateSites: sites {a} and {b} share coordinates")]
    DegenerateSites { a: u32, b: u32 },
    #[error("WrappedCell: cell of site {site} wraps the torus, convexity flag unavailable")]
    WrappedCell { site: u32 },
    #[error("NotEnoughPoints: query needs k < {n}, got k = {k}")]
    NotEnoughPoints { k: usize, n: usize },
    #[error("BadParameters: {0}")]
    BadParameters(String),
}

/// Stable identifier of a point within a configuration.
///
/// Ids are bookkeeping only: constructions may use them solely as
/// deterministic tie-breaks, never as geometric input.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct PointId(pub u32);

impl PointId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of a configuration: stable id plus coordinates in `[0, L)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: PointId,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: u32, coords: Vec<f64>) -> Self {
        Point {
            id: PointId(id),
            coords,
        }
    }
}

/// The periodic (or plain) box the process lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    dimension: usize,
    side: f64,
    topology: Topology,
}

impl Domain {
    pub fn new(dimension: usize, side: f64, topology: Topology) -> Result<Self, GeometryError> {
        if dimension < 1 {
            return Err(GeometryError::BadParameters(
                "dimension must be at least 1".into(),
            ));
        }
        if side <= 0.0 || !side.is_finite() {
            return Err(GeometryError::BadParameters(
                "side length must be positive and finite".into(),
            ));
        }
        Ok(Domain {
            dimension,
            side,
            topology,
        })
    }

    /// Torus window, the default topology.
    pub fn torus(dimension: usize, side: f64) -> Result<Self, GeometryError> {
        Self::new(dimension, side, Topology::Torus)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dimension as i32)
    }

    /// True if every coordinate lies in `[0, L)`.
    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dimension
            && coords
                .iter()
                .all(|&c| c.is_finite() && c >= 0.0 && c < self.side)
    }

    /// Squared distance between two coordinate tuples.
    pub fn dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dimension);
        debug_assert_eq!(b.len(), self.dimension);
        let mut acc = 0.0;
        match self.topology {
            Topology::Torus => {
                for i in 0..self.dimension {
                    let mut delta = (a[i] - b[i]).abs();
                    if delta > self.side - delta {
                        delta = self.side - delta;
                    }
                    acc += delta * delta;
                }
            }
            Topology::Box => {
                for i in 0..self.dimension {
                    let delta = a[i] - b[i];
                    acc += delta * delta;
                }
            }
        }
        acc
    }

    /// Distance between two coordinate tuples; on the torus this is the
    /// minimum over integer shifts of the Euclidean distance.
    pub fn distance_coords(&self, a: &[f64], b: &[f64]) -> f64 {
        self.dist2(a, b).sqrt()
    }

    /// Wraps a coordinate tuple back into the window.
    pub fn wrap(&self, coords: &mut [f64]) {
        for c in coords.iter_mut() {
            *c = c.rem_euclid(self.side);
            // rem_euclid can land exactly on `side` for tiny negative inputs
            if *c >= self.side {
                *c = 0.0;
            }
        }
    }
}

/// Distance between two points of a configuration.
pub fn distance(p: &Point, q: &Point, dom: &Domain) -> f64 {
    dom.distance_coords(&p.coords, &q.coords)
}

/// Position (into `coords`) and distance of the nearest tuple to `x`,
/// minimizing `(distance, position)`. Returns `None` on an empty slice.
pub fn nearest_of(dom: &Domain, x: &[f64], coords: &[&[f64]]) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize)> = None;
    for (pos, c) in coords.iter().enumerate() {
        let d2 = dom.dist2(x, c);
        match best {
            Some((bd, _)) if bd <= d2 => {}
            _ => best = Some((d2, pos)),
        }
    }
    best.map(|(d2, pos)| (pos, d2.sqrt()))
}

/// Position and distance of a nearest-tuple query hit.
pub type NearestHit = (usize, f64);

/// The two nearest tuples to `x` by `(distance, position)` order.
pub fn two_nearest_of(
    dom: &Domain,
    x: &[f64],
    coords: &[&[f64]],
) -> Option<(NearestHit, Option<NearestHit>)> {
    let mut first: Option<(f64, usize)> = None;
    let mut second: Option<(f64, usize)> = None;
    for (pos, c) in coords.iter().enumerate() {
        let d2 = dom.dist2(x, c);
        let cand = (d2, pos);
        match first {
            Some(f) if f <= cand => match second {
                Some(s) if s <= cand => {}
                _ => second = Some(cand),
            },
            _ => {
                second = first;
                first = Some(cand);
            }
        }
    }
    first.map(|(d2, pos)| {
        (
            (pos, d2.sqrt()),
            second.map(|(sd2, spos)| (spos, sd2.sqrt())),
        )
    })
}

/// The `k` nearest other points to `x`, ordered by `(distance, id)`.
pub fn k_nearest(
    x: &Point,
    points: &[Point],
    dom: &Domain,
    k: usize,
) -> Result<Vec<(PointId, f64)>, GeometryError> {
    let n = points.len();
    if k >= n {
        return Err(GeometryError::NotEnoughPoints { k, n });
    }
    let mut cands: Vec<(f64, PointId)> = points
        .iter()
        .filter(|p| p.id != x.id)
        .map(|p| (dom.dist2(&x.coords, &p.coords), p.id))
        .collect();
    cands.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    cands.truncate(k);
    Ok(cands.into_iter().map(|(d2, id)| (id, d2.sqrt())).collect())
}

/// A 2D Voronoi cell polygon.
///
/// Vertices are ordered counter-clockwise in the plane around the site
/// (unwrapped: on the torus they may extend outside `[0, L)^2`). Cells with
/// diameter at least `L / 2` wrap the torus and are flagged; their torus
/// convexity is not guaranteed, though the plane polygon stays convex.
#[derive(Debug, Clone)]
pub struct CellPolygon {
    pub site: PointId,
    pub site_coords: [f64; 2],
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
    pub perimeter: f64,
    pub wrapped: bool,
}

impl CellPolygon {
    /// Maximum vertex-to-vertex plane distance.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in self.vertices.iter().skip(i + 1) {
                let dx = a[0] - b[0];
                let dy = a[1] - b[1];
                best = best.max((dx * dx + dy * dy).sqrt());
            }
        }
        best
    }

    /// Plane membership test against the convex polygon (boundary counts
    /// as inside).
    pub fn contains_plane(&self, x: [f64; 2]) -> bool {
        let m = self.vertices.len();
        if m < 3 {
            return false;
        }
        for i in 0..m {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % m];
            let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
            if cross < -1e-12 {
                return false;
            }
        }
        true
    }
}

/// Outcome of the volume/surface lower-bound check on a convex cell.
#[derive(Debug, Clone, Copy)]
pub struct VolumeSurfaceCheck {
    pub ratio: f64,
    pub pass: bool,
}

/// Checks `area / perimeter >= r/2 - 1e-9` for an unwrapped convex cell,
/// where `r` is the inradius guaranteed about the site (half the distance
/// to the nearest other site). The constant 1/2 is the exact 2D value from
/// the pyramid decomposition about an interior ball center.
pub fn volume_surface_check(
    cell: &CellPolygon,
    r: f64,
) -> Result<VolumeSurfaceCheck, GeometryError> {
    if cell.wrapped {
        return Err(GeometryError::WrappedCell { site: cell.site.0 });
    }
    let ratio = cell.area / cell.perimeter;
    Ok(VolumeSurfaceCheck {
        ratio,
        pass: ratio >= r / 2.0 - 1e-9,
    })
}

/// Voronoi cells of every site, in site order.
///
/// Torus topology replicates sites into the 3x3 tiling and clips each cell
/// within the fundamental square centered on its own site.
pub fn voronoi_2d(sites: &[Point], dom: &Domain) -> Result<Vec<CellPolygon>, GeometryError> {
    if dom.dimension() != 2 {
        return Err(GeometryError::DimensionUnsupported {
            required: 2,
            actual: dom.dimension(),
        });
    }
    if sites.len() < 2 {
        return Err(GeometryError::NotEnoughPoints {
            k: 1,
            n: sites.len(),
        });
    }
    check_degenerate(sites)?;
    (0..sites.len())
        .map(|i| voronoi_cell_2d(i, sites, dom))
        .collect()
}

/// The single Voronoi cell of `sites[which]`.
pub fn voronoi_cell_2d(
    which: usize,
    sites: &[Point],
    dom: &Domain,
) -> Result<CellPolygon, GeometryError> {
    if dom.dimension() != 2 {
        return Err(GeometryError::DimensionUnsupported {
            required: 2,
            actual: dom.dimension(),
        });
    }
    let l = dom.side();
    let s = [sites[which].coords[0], sites[which].coords[1]];
    let mut poly = match dom.topology() {
        // Fundamental square centered on the site: the Voronoi cell of the
        // site among its own lattice images.
        Topology::Torus => vec![
            [s[0] - l / 2.0, s[1] - l / 2.0],
            [s[0] + l / 2.0, s[1] - l / 2.0],
            [s[0] + l / 2.0, s[1] + l / 2.0],
            [s[0] - l / 2.0, s[1] + l / 2.0],
        ],
        Topology::Box => vec![[0.0, 0.0], [l, 0.0], [l, l], [0.0, l]],
    };
    let images: &[[f64; 2]] = match dom.topology() {
        Topology::Torus => &[
            [-1.0, -1.0],
            [-1.0, 0.0],
            [-1.0, 1.0],
            [0.0, -1.0],
            [0.0, 0.0],
            [0.0, 1.0],
            [1.0, -1.0],
            [1.0, 0.0],
            [1.0, 1.0],
        ],
        Topology::Box => &[[0.0, 0.0]],
    };
    for (j, q) in sites.iter().enumerate() {
        if j == which {
            continue;
        }
        for shift in images {
            let img = [q.coords[0] + shift[0] * l, q.coords[1] + shift[1] * l];
            let dx = img[0] - s[0];
            let dy = img[1] - s[1];
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 {
                return Err(GeometryError::DegenerateSites {
                    a: sites[which].id.0,
                    b: q.id.0,
                });
            }
            // Bisectors of images farther than the square diagonal cannot cut.
            if d2 > 2.0 * l * l + 1e-9 {
                continue;
            }
            let c = 0.5 * (img[0] * img[0] + img[1] * img[1] - s[0] * s[0] - s[1] * s[1]);
            poly = clip_half_plane(&poly, [dx, dy], c);
            if poly.len() < 3 {
                // Cannot happen for distinct sites: the site itself stays
                // strictly inside every kept half-plane.
                return Err(GeometryError::DegenerateSites {
                    a: sites[which].id.0,
                    b: q.id.0,
                });
            }
        }
    }
    let area = polygon_area(&poly);
    let perimeter = polygon_perimeter(&poly);
    let mut cell = CellPolygon {
        site: sites[which].id,
        site_coords: s,
        vertices: poly,
        area,
        perimeter,
        wrapped: false,
    };
    cell.wrapped = dom.topology() == Topology::Torus && cell.diameter() >= l / 2.0;
    Ok(cell)
}

/// Erodes a convex polygon inward by `delta` (intersection of its own
/// edge half-planes shifted inward) and returns the remaining area, zero
/// when the erosion is empty.
pub fn eroded_area(vertices: &[[f64; 2]], delta: f64) -> f64 {
    let m = vertices.len();
    if m < 3 {
        return 0.0;
    }
    let ccw = polygon_signed_area(vertices) >= 0.0;
    let mut poly = vertices.to_vec();
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        let ex = b[0] - a[0];
        let ey = b[1] - a[1];
        let len = (ex * ex + ey * ey).sqrt();
        if len == 0.0 {
            continue;
        }
        // Outward normal: right of the directed edge for CCW orientation.
        let (nx, ny) = if ccw {
            (ey / len, -ex / len)
        } else {
            (-ey / len, ex / len)
        };
        let c = nx * a[0] + ny * a[1] - delta;
        poly = clip_half_plane(&poly, [nx, ny], c);
        if poly.len() < 3 {
            return 0.0;
        }
    }
    polygon_area(&poly)
}

/// Distance from a plane point to the boundary of a polygon (minimum over
/// edge segments).
pub fn point_to_polygon_boundary(x: [f64; 2], vertices: &[[f64; 2]]) -> f64 {
    let m = vertices.len();
    let mut best = f64::INFINITY;
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        let ex = b[0] - a[0];
        let ey = b[1] - a[1];
        let len2 = ex * ex + ey * ey;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((x[0] - a[0]) * ex + (x[1] - a[1]) * ey) / len2).clamp(0.0, 1.0)
        };
        let dx = x[0] - (a[0] + t * ex);
        let dy = x[1] - (a[1] + t * ey);
        best = best.min((dx * dx + dy * dy).sqrt());
    }
    best
}

/// Representative of a torus point in the plane chart centered at `site`:
/// each coordinate offset is wrapped into `[-L/2, L/2)`.
pub fn chart_rep(dom: &Domain, site: &[f64], x: &[f64]) -> [f64; 2] {
    debug_assert_eq!(dom.dimension(), 2);
    let l = dom.side();
    let mut rep = [0.0; 2];
    for i in 0..2 {
        let mut delta = (x[i] - site[i]).rem_euclid(l);
        if delta >= l / 2.0 {
            delta -= l;
        }
        rep[i] = site[i] + delta;
    }
    rep
}

/// Shoelace area (absolute value).
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    polygon_signed_area(vertices).abs()
}

fn polygon_signed_area(vertices: &[[f64; 2]]) -> f64 {
    let m = vertices.len();
    if m < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / 2.0
}

/// Sum of edge lengths.
pub fn polygon_perimeter(vertices: &[[f64; 2]]) -> f64 {
    let m = vertices.len();
    if m < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        acc += (dx * dx + dy * dy).sqrt();
    }
    acc
}

fn check_degenerate(sites: &[Point]) -> Result<(), GeometryError> {
    let mut sorted: Vec<usize> = (0..sites.len()).collect();
    sorted.sort_unstable_by(|&a, &b| {
        sites[a]
            .coords
            .partial_cmp(&sites[b].coords)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in sorted.windows(2) {
        if sites[w[0]].coords == sites[w[1]].coords {
            return Err(GeometryError::DegenerateSites {
                a: sites[w[0]].id.0,
                b: sites[w[1]].id.0,
            });
        }
    }
    Ok(())
}

/// Sutherland-Hodgman clip of a convex polygon against `n . x <= c`.
fn clip_half_plane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    if m == 0 {
        return out;
    }
    let side = |p: [f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
    let mut prev = poly[m - 1];
    let mut prev_side = side(prev);
    for &cur in poly {
        let cur_side = side(cur);
        if prev_side <= 0.0 {
            if cur_side <= 0.0 {
                out.push(cur);
            } else {
                out.push(intersect(prev, cur, prev_side, cur_side));
            }
        } else if cur_side <= 0.0 {
            out.push(intersect(prev, cur, prev_side, cur_side));
            out.push(cur);
        }
        prev = cur;
        prev_side = cur_side;
    }
    out
}

fn intersect(a: [f64; 2], b: [f64; 2], sa: f64, sb: f64) -> [f64; 2] {
    let t = sa / (sa - sb);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(id: u32, coords: &[f64]) -> Point {
        Point::new(id, coords.to_vec())
    }

    #[test]
    fn torus_distance_wraps() {
        let dom = Domain::torus(1, 10.0).unwrap();
        let p = pt(0, &[1.0]);
        let q = pt(1, &[7.0]);
        assert_eq!(distance(&p, &q, &dom), 4.0);
        assert_eq!(distance(&p, &p, &dom), 0.0);
    }

    #[test]
    fn torus_distance_wraps_diagonally() {
        // shift (-1,-1) gives sqrt(2)
        let dom = Domain::torus(2, 10.0).unwrap();
        let p = pt(0, &[0.0, 0.0]);
        let q = pt(1, &[9.0, 9.0]);
        assert!((distance(&p, &q, &dom) - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn k_nearest_breaks_ties_by_id() {
        let dom = Domain::torus(1, 10.0).unwrap();
        let points = vec![pt(0, &[0.0]), pt(1, &[1.0]), pt(2, &[3.0]), pt(3, &[7.0])];
        // 7 is at torus distance 3, tied with the point at 3; smaller id wins.
        let got = k_nearest(&points[0], &points, &dom, 2).unwrap();
        assert_eq!(got[0], (PointId(1), 1.0));
        assert_eq!(got[1].0, PointId(2));
        assert_eq!(got[1].1, 3.0);
    }

    #[test]
    fn k_nearest_zero_is_empty() {
        let dom = Domain::torus(1, 10.0).unwrap();
        let points = vec![pt(0, &[0.0])];
        assert!(k_nearest(&points[0], &points, &dom, 0).unwrap().is_empty());
    }

    #[test]
    fn k_nearest_errors_when_k_too_large() {
        let dom = Domain::torus(1, 10.0).unwrap();
        let points = vec![pt(0, &[0.0]), pt(1, &[1.0])];
        assert!(matches!(
            k_nearest(&points[0], &points, &dom, 2),
            Err(GeometryError::NotEnoughPoints { .. })
        ));
    }

    #[test]
    fn voronoi_four_symmetric_sites() {
        let dom = Domain::torus(2, 10.0).unwrap();
        let sites = vec![
            pt(0, &[2.5, 2.5]),
            pt(1, &[7.5, 2.5]),
            pt(2, &[2.5, 7.5]),
            pt(3, &[7.5, 7.5]),
        ];
        let cells = voronoi_2d(&sites, &dom).unwrap();
        for cell in &cells {
            assert!((cell.area - 25.0).abs() < 1e-9, "area {}", cell.area);
            assert!((cell.perimeter - 20.0).abs() < 1e-9);
            // diagonal 5*sqrt(2) >= L/2: the conservative wrap flag fires
            assert!(cell.wrapped);
        }
        let total: f64 = cells.iter().map(|c| c.area).sum();
        assert!((total - 100.0).abs() < 1e-6);
    }

    #[test]
    fn voronoi_rejects_wrong_dimension_and_duplicates() {
        let dom1 = Domain::torus(1, 10.0).unwrap();
        assert!(matches!(
            voronoi_2d(&[pt(0, &[0.0]), pt(1, &[1.0])], &dom1),
            Err(GeometryError::DimensionUnsupported { .. })
        ));
        let dom2 = Domain::torus(2, 10.0).unwrap();
        let dup = vec![pt(0, &[1.0, 1.0]), pt(1, &[1.0, 1.0])];
        assert!(matches!(
            voronoi_2d(&dup, &dom2),
            Err(GeometryError::DegenerateSites { .. })
        ));
    }

    #[test]
    fn two_random_sites_agree_with_raster_assignment() {
        // Brute-force pixel assignment on a 512^2 raster against polygon
        // membership; mismatches can only hug the shared bisector.
        let dom = Domain::torus(2, 1.0).unwrap();
        let sites = vec![pt(0, &[0.23, 0.61]), pt(1, &[0.74, 0.18])];
        let cells = voronoi_2d(&sites, &dom).unwrap();
        let n = 512usize;
        let mut agree = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                let nearest =
                    if dom.dist2(&x, &sites[0].coords) <= dom.dist2(&x, &sites[1].coords) {
                        0
                    } else {
                        1
                    };
                // Membership in the unwrapped polygon: test all torus images
                // of the pixel against the plane polygon.
                let mut member = None;
                'outer: for (ci, cell) in cells.iter().enumerate() {
                    for sx in [-1.0, 0.0, 1.0] {
                        for sy in [-1.0, 0.0, 1.0] {
                            if cell.contains_plane([x[0] + sx, x[1] + sy]) {
                                member = Some(ci);
                                break 'outer;
                            }
                        }
                    }
                }
                if member == Some(nearest) {
                    agree += 1;
                }
            }
        }
        let frac = agree as f64 / (n * n) as f64;
        assert!(frac >= 0.999, "agreement {frac}");
    }

    #[test]
    fn volume_surface_square_equality_case() {
        // Square cell of side s with the site at the center: ratio = s/4 = r/2.
        let cell = CellPolygon {
            site: PointId(0),
            site_coords: [1.0, 1.0],
            vertices: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
            area: 4.0,
            perimeter: 8.0,
            wrapped: false,
        };
        let r = 1.0; // s/2
        let res = volume_surface_check(&cell, r).unwrap();
        assert!((res.ratio - r / 2.0).abs() < 1e-12);
        assert!(res.pass);
    }

    #[test]
    fn volume_surface_tangent_polygon_equality() {
        // Equilateral triangle with inscribed circle of radius r about the
        // site: area = r/2 * perimeter exactly for tangent polygons.
        let r = 0.35f64;
        let side = 2.0 * r * 3.0f64.sqrt();
        let h = side * 3.0f64.sqrt() / 2.0;
        let verts = vec![[0.0, 0.0], [side, 0.0], [side / 2.0, h]];
        let area = polygon_area(&verts);
        let perim = polygon_perimeter(&verts);
        let cell = CellPolygon {
            site: PointId(0),
            site_coords: [side / 2.0, r],
            vertices: verts,
            area,
            perimeter: perim,
            wrapped: false,
        };
        let res = volume_surface_check(&cell, r).unwrap();
        assert!((res.ratio - r / 2.0).abs() < 1e-12, "ratio {}", res.ratio);
        assert!(res.pass);
    }

    #[test]
    fn volume_surface_rejects_wrapped_cells() {
        let cell = CellPolygon {
            site: PointId(4),
            site_coords: [0.0, 0.0],
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
            area: 0.5,
            perimeter: 3.41,
            wrapped: true,
        };
        assert!(matches!(
            volume_surface_check(&cell, 0.1),
            Err(GeometryError::WrappedCell { site: 4 })
        ));
    }

    #[test]
    fn eroded_area_of_square() {
        let verts = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]];
        // Eroding by delta leaves a (4 - 2 delta)^2 square.
        assert!((eroded_area(&verts, 0.5) - 9.0).abs() < 1e-12);
        assert_eq!(eroded_area(&verts, 2.5), 0.0);
    }

    proptest! {
        #[test]
        fn metric_properties_on_random_triples(
            a in proptest::collection::vec(0.0f64..10.0, 2),
            b in proptest::collection::vec(0.0f64..10.0, 2),
            c in proptest::collection::vec(0.0f64..10.0, 2),
        ) {
            let dom = Domain::torus(2, 10.0).unwrap();
            let dab = dom.distance_coords(&a, &b);
            let dba = dom.distance_coords(&b, &a);
            let dac = dom.distance_coords(&a, &c);
            let dcb = dom.distance_coords(&c, &b);
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert_eq!(dom.distance_coords(&a, &a), 0.0);
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn distance_invariant_under_torus_translation(
            a in proptest::collection::vec(0.0f64..10.0, 2),
            b in proptest::collection::vec(0.0f64..10.0, 2),
            t in proptest::collection::vec(0.0f64..10.0, 2),
        ) {
            let dom = Domain::torus(2, 10.0).unwrap();
            let mut at = [a[0] + t[0], a[1] + t[1]];
            let mut bt = [b[0] + t[0], b[1] + t[1]];
            dom.wrap(&mut at);
            dom.wrap(&mut bt);
            let d0 = dom.distance_coords(&a, &b);
            let d1 = dom.distance_coords(&at, &bt);
            prop_assert!((d0 - d1).abs() < 1e-9);
        }
    }
}
