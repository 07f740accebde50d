//! Samplers and persistence for point configurations.
//!
//! Samplers are pure functions of `(spec, domain)`: the same seed always
//! reproduces the same configuration bit for bit. Configurations are
//! immutable after creation.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, Point, Topology};
use crate::rng::{stream_rng, STREAM_SAMPLER};

/// Schema version of the config file format.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("BadParameters: {0}")]
    BadParameters(String),
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The supported point processes.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessKind {
    /// Poisson with the given intensity: the count is Poisson(lambda L^d),
    /// points i.i.d. uniform.
    Poisson { intensity: f64 },
    /// Exactly `points` i.i.d. uniform points.
    Binomial { points: usize },
    /// Grid of the given spacing translated by a uniform random vector
    /// (and, for d = 2 in a box window, rotated by a uniform angle). The
    /// negative control: its symmetries defeat any equivariant index.
    ShiftedLattice { spacing: f64 },
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Poisson { .. } => "poisson",
            ProcessKind::Binomial { .. } => "binomial",
            ProcessKind::ShiftedLattice { .. } => "shifted_lattice",
        }
    }
}

/// What to sample and with which seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub kind: ProcessKind,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(kind: ProcessKind, seed: u64) -> Self {
        SamplerSpec { kind, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerSpec {
            kind: self.kind.clone(),
            seed,
        }
    }
}

/// A finite point configuration in a window, with sampler provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub domain: Domain,
    pub points: Vec<Point>,
    pub provenance: SamplerSpec,
}

impl PointConfig {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The configuration translated by `shift` on the torus, ids retained.
    pub fn translated(&self, shift: &[f64]) -> Result<PointConfig, ProcessError> {
        if self.domain.topology() != Topology::Torus {
            return Err(ProcessError::BadParameters(
                "translation equivariance is defined on the torus".into(),
            ));
        }
        if shift.len() != self.domain.dimension() {
            return Err(ProcessError::BadParameters(
                "shift dimension does not match the domain".into(),
            ));
        }
        let mut points = self.points.clone();
        for p in &mut points {
            for (c, s) in p.coords.iter_mut().zip(shift) {
                *c += s;
            }
            self.domain.wrap(&mut p.coords);
        }
        Ok(PointConfig {
            domain: self.domain,
            points,
            provenance: self.provenance.clone(),
        })
    }
}

/// Samples a configuration. Deterministic given the spec seed.
pub fn sample(spec: &SamplerSpec, dom: &Domain) -> Result<PointConfig, ProcessError> {
    let mut rng = stream_rng(spec.seed, STREAM_SAMPLER);
    let d = dom.dimension();
    let side = dom.side();
    let points = match &spec.kind {
        ProcessKind::Poisson { intensity } => {
            if *intensity <= 0.0 {
                return Err(ProcessError::BadParameters(
                    "poisson intensity must be positive".into(),
                ));
            }
            let mean = intensity * dom.volume();
            if mean > 5e6 {
                return Err(ProcessError::BadParameters(format!(
                    "poisson mean {mean:.1} too large for a desk-scale window"
                )));
            }
            let poisson = Poisson::new(mean)
                .map_err(|e| ProcessError::BadParameters(format!("poisson: {e}")))?;
            // Condition on a nonempty window; at desk-scale intensities the
            // discarded probability is negligible.
            let mut n = 0usize;
            while n == 0 {
                n = poisson.sample(&mut rng) as usize;
            }
            uniform_points(&mut rng, n, d, side)
        }
        ProcessKind::Binomial { points } => {
            if *points == 0 {
                return Err(ProcessError::BadParameters(
                    "binomial point count must be at least 1".into(),
                ));
            }
            uniform_points(&mut rng, *points, d, side)
        }
        ProcessKind::ShiftedLattice { spacing } => {
            if *spacing <= 0.0 {
                return Err(ProcessError::BadParameters(
                    "lattice spacing must be positive".into(),
                ));
            }
            let per_side = side / spacing;
            let g = per_side.round();
            if (per_side - g).abs() > 1e-9 || g < 1.0 {
                return Err(ProcessError::BadParameters(format!(
                    "lattice spacing {spacing} must divide the window side {side}"
                )));
            }
            let g = g as usize;
            let s_eff = side / g as f64;
            if dom.topology() == Topology::Box && d == 2 {
                rotated_lattice_2d(&mut rng, s_eff, side)
            } else {
                let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * s_eff).collect();
                lattice_points(g, s_eff, &shift, d)
            }
        }
    };
    debug_assert!(points.iter().all(|p| dom.contains(&p.coords)));
    Ok(PointConfig {
        domain: *dom,
        points,
        provenance: spec.clone(),
    })
}

fn uniform_points(rng: &mut impl Rng, n: usize, d: usize, side: f64) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let coords = (0..d).map(|_| rng.gen::<f64>() * side).collect();
            Point::new(i as u32, coords)
        })
        .collect()
}

fn lattice_points(g: usize, s: f64, shift: &[f64], d: usize) -> Vec<Point> {
    let n = g.pow(d as u32);
    let mut points = Vec::with_capacity(n);
    for flat in 0..n {
        let mut rem = flat;
        let mut coords = Vec::with_capacity(d);
        for dim in (0..d).rev() {
            let step = g.pow(dim as u32);
            let a = rem / step;
            rem %= step;
            coords.push(a as f64 * s + shift[coords.len()]);
        }
        points.push(Point::new(flat as u32, coords));
    }
    points
}

fn rotated_lattice_2d(rng: &mut impl Rng, s: f64, side: f64) -> Vec<Point> {
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    let shift = [rng.gen::<f64>() * s, rng.gen::<f64>() * s];
    let (sin, cos) = theta.sin_cos();
    let c = side / 2.0;
    let reach = (side * std::f64::consts::SQRT_2 / 2.0 / s).ceil() as i64 + 2;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            let vx = a as f64 * s;
            let vy = b as f64 * s;
            let x = c + cos * vx - sin * vy + shift[0];
            let y = c + sin * vx + cos * vy + shift[1];
            if x >= 0.0 && x < side && y >= 0.0 && y < side {
                coords.push(vec![x, y]);
            }
        }
    }
    coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
    coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| Point::new(i as u32, c))
        .collect()
}

// ---------------------------------------------------------------------------
// Config file schema: {version, domain:{d,L,topology}, points, provenance}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    version: u32,
    domain: DomainFile,
    points: Vec<Vec<f64>>,
    provenance: ProvenanceFile,
}

#[derive(Serialize, Deserialize)]
struct DomainFile {
    d: usize,
    #[serde(rename = "L")]
    side: f64,
    topology: Topology,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceFile {
    kind: String,
    params: serde_json::Map<String, serde_json::Value>,
    seed: u64,
}

/// Serializes a configuration to the versioned JSON schema.
pub fn to_json(config: &PointConfig) -> String {
    let mut params = serde_json::Map::new();
    match &config.provenance.kind {
        ProcessKind::Poisson { intensity } => {
            params.insert("intensity".into(), (*intensity).into());
        }
        ProcessKind::Binomial { points } => {
            params.insert("points".into(), (*points).into());
        }
        ProcessKind::ShiftedLattice { spacing } => {
            params.insert("spacing".into(), (*spacing).into());
        }
    }
    let file = ConfigFile {
        version: CONFIG_VERSION,
        domain: DomainFile {
            d: config.domain.dimension(),
            side: config.domain.side(),
            topology: config.domain.topology(),
        },
        points: config.points.iter().map(|p| p.coords.clone()).collect(),
        provenance: ProvenanceFile {
            kind: config.provenance.kind.name().into(),
            params,
            seed: config.provenance.seed,
        },
    };
    serde_json::to_string_pretty(&file).expect("config serialization cannot fail")
}

/// Parses and validates a configuration from its JSON schema.
pub fn from_json(text: &str) -> Result<PointConfig, ProcessError> {
    let file: ConfigFile = serde_json::from_str(text)
        .map_err(|e| ProcessError::Parse(format!("config json: {e}")))?;
    if file.version != CONFIG_VERSION {
        return Err(ProcessError::Parse(format!(
            "unsupported config version {} (expected {CONFIG_VERSION})",
            file.version
        )));
    }
    let domain = Domain::new(file.domain.d, file.domain.side, file.domain.topology)
        .map_err(|e| ProcessError::Parse(format!("domain: {e}")))?;
    if file.points.is_empty() {
        return Err(ProcessError::Parse(
            "invariant violated: point count must be at least 1".into(),
        ));
    }
    let mut points = Vec::with_capacity(file.points.len());
    for (i, coords) in file.points.into_iter().enumerate() {
        if !domain.contains(&coords) {
            return Err(ProcessError::Parse(format!(
                "invariant violated: points[{i}] = {coords:?} outside the window [0, {})^{}",
                domain.side(),
                domain.dimension()
            )));
        }
        points.push(Point::new(i as u32, coords));
    }
    let get = |key: &str| -> Result<f64, ProcessError> {
        file.provenance
            .params
            .get(key)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| ProcessError::Parse(format!("provenance.params.{key} missing")))
    };
    let kind = match file.provenance.kind.as_str() {
        "poisson" => ProcessKind::Poisson {
            intensity: get("intensity")?,
        },
        "binomial" => ProcessKind::Binomial {
            points: get("points")? as usize,
        },
        "shifted_lattice" => ProcessKind::ShiftedLattice {
            spacing: get("spacing")?,
        },
        other => {
            return Err(ProcessError::Parse(format!(
                "unknown provenance kind {other:?}"
            )))
        }
    };
    Ok(PointConfig {
        domain,
        points,
        provenance: SamplerSpec::new(kind, file.provenance.seed),
    })
}

/// Writes a configuration to a file.
pub fn save(config: &PointConfig, path: &std::path::Path) -> Result<(), ProcessError> {
    std::fs::write(path, to_json(config))?;
    Ok(())
}

/// Reads a configuration back; round-trips bit-exactly.
pub fn load(path: &std::path::Path) -> Result<PointConfig, ProcessError> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;
    use crate::rng::derive_seed;
    use crate::stats::{chi_square_sf, mean, standard_error};

    fn torus(d: usize, side: f64) -> Domain {
        Domain::torus(d, side).unwrap()
    }

    #[test]
    fn same_seed_same_configuration() {
        let dom = torus(1, 10.0);
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 4 }, 99);
        let a = sample(&spec, &dom).unwrap();
        let b = sample(&spec, &dom).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn binomial_count_is_exact() {
        let dom = torus(2, 1.0);
        for seed in 0..20 {
            let spec = SamplerSpec::new(ProcessKind::Binomial { points: 37 }, seed);
            assert_eq!(sample(&spec, &dom).unwrap().len(), 37);
        }
    }

    #[test]
    fn poisson_mean_matches_lambda_volume() {
        let dom = torus(2, 10.0);
        let counts: Vec<f64> = (0..10_000u64)
            .map(|i| {
                let spec = SamplerSpec::new(
                    ProcessKind::Poisson { intensity: 1.0 },
                    derive_seed(0xA5A5, i),
                );
                sample(&spec, &dom).unwrap().len() as f64
            })
            .collect();
        let m = mean(&counts);
        let se = standard_error(&counts);
        assert!(
            (m - 100.0).abs() <= 3.0 * se,
            "mean {m} se {se} (expected 100)"
        );
    }

    #[test]
    fn poisson_counts_pass_chi_square() {
        // Goodness of fit against Poisson(5) pmf, bins merged to expected >= 5.
        let dom = torus(1, 5.0);
        let trials = 4000u64;
        let lambda = 5.0f64;
        let counts: Vec<usize> = (0..trials)
            .map(|i| {
                let spec = SamplerSpec::new(
                    ProcessKind::Poisson { intensity: 1.0 },
                    derive_seed(0xBEEF, i),
                );
                sample(&spec, &dom).unwrap().len()
            })
            .collect();
        // pmf conditioned on nonzero counts, matching the sampler contract.
        let p0 = (-lambda).exp();
        let pmf = |k: usize| -> f64 {
            let mut p = (-lambda).exp();
            for j in 1..=k {
                p *= lambda / j as f64;
            }
            p / (1.0 - p0)
        };
        let max_k = 14usize;
        let mut observed = vec![0.0; max_k + 2];
        for &c in &counts {
            let bin = c.min(max_k + 1);
            observed[bin] += 1.0;
        }
        let mut expected = vec![0.0; max_k + 2];
        let mut tail = 1.0;
        for (k, slot) in expected.iter_mut().enumerate().take(max_k + 1).skip(1) {
            *slot = pmf(k) * trials as f64;
            tail -= pmf(k);
        }
        expected[max_k + 1] = tail.max(0.0) * trials as f64;
        // merge sparse leading bins
        let mut obs_m = Vec::new();
        let mut exp_m = Vec::new();
        let (mut oa, mut ea) = (0.0, 0.0);
        for k in 1..=max_k + 1 {
            oa += observed[k];
            ea += expected[k];
            if ea >= 5.0 {
                obs_m.push(oa);
                exp_m.push(ea);
                oa = 0.0;
                ea = 0.0;
            }
        }
        if ea > 0.0 {
            *obs_m.last_mut().unwrap() += oa;
            *exp_m.last_mut().unwrap() += ea;
        }
        let stat: f64 = obs_m
            .iter()
            .zip(&exp_m)
            .map(|(o, e)| (o - e) * (o - e) / e)
            .sum();
        let p = chi_square_sf(stat, obs_m.len() - 1);
        assert!(p > 0.001, "chi-square stat {stat}, p = {p}");
    }

    #[test]
    fn lattice_has_expected_torus_distances() {
        let dom = torus(1, 10.0);
        let spec = SamplerSpec::new(ProcessKind::ShiftedLattice { spacing: 2.5 }, 3);
        let cfg = sample(&spec, &dom).unwrap();
        assert_eq!(cfg.len(), 4);
        let mut dists: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                dists.push(distance(&cfg.points[i], &cfg.points[j], &dom));
            }
        }
        for d in dists {
            assert!(
                (d - 2.5).abs() < 1e-9 || (d - 5.0).abs() < 1e-9,
                "distance {d}"
            );
        }
    }

    #[test]
    fn box_lattice_is_rotated_and_stays_in_window() {
        let dom = Domain::new(2, 1.0, Topology::Box).unwrap();
        let spec = SamplerSpec::new(ProcessKind::ShiftedLattice { spacing: 0.25 }, 21);
        let cfg = sample(&spec, &dom).unwrap();
        assert!(cfg.len() >= 9, "rotated lattice kept {} points", cfg.len());
        for p in &cfg.points {
            assert!(dom.contains(&p.coords));
        }
        // the rotation leaves no axis-aligned rows: x-coordinates spread out
        let mut xs: Vec<f64> = cfg.points.iter().map(|p| p.coords[0]).collect();
        xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert!(xs.len() > 4, "axis-aligned lattice slipped through rotation");
        assert_eq!(cfg, sample(&spec, &dom).unwrap());
    }

    #[test]
    fn lattice_rejects_non_dividing_spacing() {
        let dom = torus(1, 10.0);
        let spec = SamplerSpec::new(ProcessKind::ShiftedLattice { spacing: 3.0 }, 3);
        assert!(matches!(
            sample(&spec, &dom),
            Err(ProcessError::BadParameters(_))
        ));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dom = torus(3, 2.0);
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 17 }, 1234);
        let cfg = sample(&spec, &dom).unwrap();
        let text = to_json(&cfg);
        let back = from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn load_rejects_truncated_and_invalid_files() {
        let dom = torus(2, 1.0);
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 3 }, 5);
        let cfg = sample(&spec, &dom).unwrap();
        let text = to_json(&cfg);
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            from_json(truncated),
            Err(ProcessError::Parse(_))
        ));
        let bad = text.replace(
            &format!("{}", cfg.points[0].coords[0]),
            "3.5", // outside the unit window
        );
        assert!(matches!(from_json(&bad), Err(ProcessError::Parse(_))));
    }

    #[test]
    fn translation_wraps_into_window() {
        let dom = torus(2, 1.0);
        let spec = SamplerSpec::new(ProcessKind::Binomial { points: 50 }, 11);
        let cfg = sample(&spec, &dom).unwrap();
        let moved = cfg.translated(&[0.7, 0.9]).unwrap();
        for p in &moved.points {
            assert!(dom.contains(&p.coords));
        }
        // distances are preserved
        for i in 0..5 {
            for j in 6..10 {
                let d0 = distance(&cfg.points[i], &cfg.points[j], &dom);
                let d1 = distance(&moved.points[i], &moved.points[j], &dom);
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }
}
