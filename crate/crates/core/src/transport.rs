//! Monte Carlo verification of mass-transport balance.
//!
//! A transport kernel T(x, y, config) is nonnegative and diagonally
//! invariant under torus translations. Each trial samples a configuration
//! and a uniform origin O, then accumulates the mass sent out of O and the
//! mass arriving at O -- in closed form where the kernel admits it, by
//! uniform secondary sampling otherwise. Over the translation-invariant
//! ensemble the two expectations agree exactly, so the harness checks
//! |out - in| <= 3 (SE_out + SE_in).
//!
//! Trials are independent, draw from per-trial streams, and reduce by
//! commutative accumulation, so reports are reproducible regardless of the
//! worker count.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    chart_rep, eroded_area, point_to_polygon_boundary, voronoi_cell_2d, Domain, Point,
};
use crate::gridfactor::deficiency_transport;
use crate::indexing::default_unit;
use crate::pipeline::{build_grid_pipeline, PipelineError};
use crate::process::{sample, PointConfig, ProcessError, SamplerSpec};
use crate::rng::{derive_seed, stream_rng, STREAM_ORIGIN, STREAM_SECONDARY};
use crate::stats::{mean, standard_error};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("KernelDiverged: trial {trial} carried mass {mass:.3e} above the cap {cap:.3e}")]
    KernelDiverged { trial: usize, mass: f64, cap: f64 },
    #[error("DimensionUnsupported: kernel {kernel} needs d = {required}, domain has d = {actual}")]
    DimensionUnsupported {
        kernel: String,
        required: usize,
        actual: usize,
    },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Ball size for the same-cell-and-ball kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallVolume {
    Fixed(f64),
    /// The mean cell volume `L^d / N` of the sampled configuration; keeps
    /// the kernel nondegenerate at any intensity.
    MeanCell,
}

/// The built-in kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// T = 0 everywhere.
    Zero,
    /// 1 if x and y share a Voronoi cell of the configuration. The lattice
    /// control: out = in = s^d exactly.
    SameCell,
    /// 1 if x and y share a cell and y lies in the ball of the given
    /// volume around the cell's site.
    VoronoiBall { ball_volume: BallVolume },
    /// 1/Vol(P) if y is in the net-level cell P and x is in the part of P
    /// within `delta` of the cell boundary complex.
    ThickenedBoundary { delta: f64, level: usize },
    /// The grid boundary transport: deficient (vertex, axis, direction)
    /// triples send mass 1 along their maximal straight path.
    GridDeficiency { grid_dim: usize },
}

/// A named kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSpec {
    pub name: String,
    pub kind: KernelKind,
}

impl TransportSpec {
    pub fn zero() -> Self {
        TransportSpec {
            name: "zero".into(),
            kind: KernelKind::Zero,
        }
    }

    /// The lattice control kernel.
    pub fn same_cell() -> Self {
        TransportSpec {
            name: "same_cell".into(),
            kind: KernelKind::SameCell,
        }
    }

    pub fn voronoi_ball(ball_volume: BallVolume) -> Self {
        TransportSpec {
            name: "voronoi_ball".into(),
            kind: KernelKind::VoronoiBall { ball_volume },
        }
    }

    pub fn thickened_boundary(delta: f64, level: usize) -> Self {
        TransportSpec {
            name: "thickened_boundary".into(),
            kind: KernelKind::ThickenedBoundary { delta, level },
        }
    }

    pub fn grid_deficiency(grid_dim: usize) -> Self {
        TransportSpec {
            name: "grid_deficiency".into(),
            kind: KernelKind::GridDeficiency { grid_dim },
        }
    }
}

/// The three paper kernels with their default parameters.
pub fn builtin_kernels() -> Vec<TransportSpec> {
    vec![
        TransportSpec::voronoi_ball(BallVolume::MeanCell),
        TransportSpec::thickened_boundary(0.01, 1),
        TransportSpec::grid_deficiency(2),
    ]
}

/// Harness options.
#[derive(Debug, Clone)]
pub struct MtpOptions {
    /// Inner uniform samples for kernels without a closed-form integral.
    pub secondary_samples: usize,
    /// Per-trial mass cap; beyond it the kernel is declared divergent.
    pub mass_cap: f64,
    /// Starting profile length for per-trial index builds.
    pub k0: usize,
}

impl Default for MtpOptions {
    fn default() -> Self {
        MtpOptions {
            secondary_samples: 1024,
            mass_cap: 1e9,
            k0: 1,
        }
    }
}

/// Balance report over the trials.
#[derive(Debug, Clone)]
pub struct TransportReport {
    pub name: String,
    pub trials: usize,
    pub mean_out: f64,
    pub mean_in: f64,
    pub se_out: f64,
    pub se_in: f64,
    /// Estimated intensity constant: expected mass out of a typical
    /// location per unit volume.
    pub intensity_constant: f64,
    pub pass: bool,
    /// Per-trial (out, in) values, for traces and plots.
    pub per_trial: Vec<(f64, f64)>,
}

impl TransportReport {
    fn from_samples(name: String, per_trial: Vec<(f64, f64)>) -> Self {
        let outs: Vec<f64> = per_trial.iter().map(|t| t.0).collect();
        let ins: Vec<f64> = per_trial.iter().map(|t| t.1).collect();
        let mean_out = mean(&outs);
        let mean_in = mean(&ins);
        let se_out = standard_error(&outs);
        let se_in = standard_error(&ins);
        TransportReport {
            name,
            trials: per_trial.len(),
            mean_out,
            mean_in,
            se_out,
            se_in,
            intensity_constant: mean_out,
            pass: (mean_out - mean_in).abs() <= 3.0 * (se_out + se_in),
            per_trial,
        }
    }
}

/// Runs the Monte Carlo balance estimate for a kernel over freshly sampled
/// configurations and uniform origins.
pub fn mtp_estimate(
    spec: &TransportSpec,
    sampler: &SamplerSpec,
    dom: &Domain,
    trials: usize,
    opts: &MtpOptions,
) -> Result<TransportReport, TransportError> {
    check_dimension(spec, dom)?;
    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(spec, sampler, dom, t, opts))
        .collect::<Result<Vec<_>, TransportError>>()?;
    Ok(TransportReport::from_samples(spec.name.clone(), per_trial))
}

fn check_dimension(spec: &TransportSpec, dom: &Domain) -> Result<(), TransportError> {
    let d = dom.dimension();
    let need_2d = |kernel: &str| -> Result<(), TransportError> {
        if d != 2 {
            return Err(TransportError::DimensionUnsupported {
                kernel: kernel.into(),
                required: 2,
                actual: d,
            });
        }
        Ok(())
    };
    match &spec.kind {
        KernelKind::Zero | KernelKind::GridDeficiency { .. } => Ok(()),
        KernelKind::SameCell => {
            if d > 2 {
                return Err(TransportError::DimensionUnsupported {
                    kernel: "same_cell".into(),
                    required: 2,
                    actual: d,
                });
            }
            Ok(())
        }
        KernelKind::VoronoiBall { .. } => need_2d("voronoi_ball"),
        KernelKind::ThickenedBoundary { .. } => need_2d("thickened_boundary"),
    }
}

fn run_trial(
    spec: &TransportSpec,
    sampler: &SamplerSpec,
    dom: &Domain,
    trial: usize,
    opts: &MtpOptions,
) -> Result<(f64, f64), TransportError> {
    let trial_seed = derive_seed(sampler.seed, trial as u64);
    let config = sample(&sampler.with_seed(trial_seed), dom)?;
    let mut origin_rng = stream_rng(trial_seed, STREAM_ORIGIN);
    let origin: Vec<f64> = (0..dom.dimension())
        .map(|_| origin_rng.gen::<f64>() * dom.side())
        .collect();
    let (out, mass_in) = match &spec.kind {
        KernelKind::Zero => (0.0, 0.0),
        KernelKind::SameCell => {
            let vol = cell_volume_at(&config, &origin)?;
            (vol, vol)
        }
        KernelKind::VoronoiBall { ball_volume } => {
            let vol_ball = match ball_volume {
                BallVolume::Fixed(v) => *v,
                BallVolume::MeanCell => dom.volume() / config.len() as f64,
            };
            let radius = (vol_ball / std::f64::consts::PI).sqrt();
            let site = nearest_point(&config, &origin);
            let site_coords = &config.points[site].coords;
            let cell = voronoi_cell_2d(site, &config.points, dom)
                .map_err(ProcessError::Geometry)?;
            let in_ball = dom.distance_coords(&origin, site_coords) <= radius;
            let mass_in = if in_ball { cell.area } else { 0.0 };
            // out: Vol(cell ∩ ball) by uniform secondary sampling
            let mut rng = stream_rng(trial_seed, STREAM_SECONDARY);
            let mut hits = 0usize;
            for _ in 0..opts.secondary_samples {
                let y: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() * dom.side()).collect();
                if nearest_point(&config, &y) == site
                    && dom.distance_coords(&y, site_coords) <= radius
                {
                    hits += 1;
                }
            }
            let out = dom.volume() * hits as f64 / opts.secondary_samples as f64;
            (out, mass_in)
        }
        KernelKind::ThickenedBoundary { delta, level } => {
            let index = crate::indexing::build_index(&config, opts.k0)
                .map_err(PipelineError::Index)?;
            let nets = crate::indexing::build_nets(&config, &index, default_unit(&config))
                .map_err(PipelineError::Geometry)?;
            let lv = (*level).clamp(1, nets.max_level());
            let sites = &nets.level(lv).expect("level exists").sites;
            if sites.len() < 2 {
                (0.0, 0.0)
            } else {
                let site_points: Vec<Point> = sites
                    .iter()
                    .map(|s| config.points[s.index()].clone())
                    .collect();
                let coords: Vec<&[f64]> = site_points
                    .iter()
                    .map(|p| p.coords.as_slice())
                    .collect();
                let (pos1, _) = crate::geometry::nearest_of(dom, &origin, &coords)
                    .expect("sites present");
                let cell = voronoi_cell_2d(pos1, &site_points, dom)
                    .map_err(ProcessError::Geometry)?;
                // φ(P): the part of the cell within δ of its boundary,
                // measured in the chart around the site
                let rep = chart_rep(dom, &site_points[pos1].coords, &origin);
                let out = if point_to_polygon_boundary(rep, &cell.vertices) < *delta {
                    1.0
                } else {
                    0.0
                };
                let mass_in = if !cell.wrapped {
                    let inner = eroded_area(&cell.vertices, *delta);
                    (cell.area - inner) / cell.area
                } else {
                    // wrapped cell: estimate Vol(φ(P))/Vol(P) by sampling
                    // the same polygon-boundary test
                    let mut rng = stream_rng(trial_seed, STREAM_SECONDARY);
                    let mut in_cell = 0usize;
                    let mut in_phi = 0usize;
                    for _ in 0..opts.secondary_samples {
                        let y: Vec<f64> =
                            (0..2).map(|_| rng.gen::<f64>() * dom.side()).collect();
                        let (p1, _) = crate::geometry::nearest_of(dom, &y, &coords)
                            .expect("sites present");
                        if p1 == pos1 {
                            in_cell += 1;
                            let y_rep = chart_rep(dom, &site_points[pos1].coords, &y);
                            if point_to_polygon_boundary(y_rep, &cell.vertices) < *delta {
                                in_phi += 1;
                            }
                        }
                    }
                    if in_cell == 0 {
                        0.0
                    } else {
                        in_phi as f64 / in_cell as f64
                    }
                };
                (out, mass_in)
            }
        }
        KernelKind::GridDeficiency { grid_dim } => {
            let (_, _, grid) = build_grid_pipeline(&config, opts.k0, None, *grid_dim, None)?;
            let rep = deficiency_transport(&grid);
            let n = grid.len() as f64;
            (rep.sent_total as f64 / n, rep.received_total as f64 / n)
        }
    };
    let mass = out.max(mass_in);
    if mass > opts.mass_cap {
        return Err(TransportError::KernelDiverged {
            trial,
            mass,
            cap: opts.mass_cap,
        });
    }
    Ok((out, mass_in))
}

/// Nearest configuration point to a location, ties to the smaller id.
fn nearest_point(config: &PointConfig, x: &[f64]) -> usize {
    let coords: Vec<&[f64]> = config.points.iter().map(|p| p.coords.as_slice()).collect();
    crate::geometry::nearest_of(&config.domain, x, &coords)
        .expect("configuration is nonempty")
        .0
}

/// Volume of the Voronoi cell containing `x` (1D and 2D closed forms).
fn cell_volume_at(config: &PointConfig, x: &[f64]) -> Result<f64, TransportError> {
    let dom = &config.domain;
    let site = nearest_point(config, x);
    match dom.dimension() {
        1 => {
            let n = config.len();
            if n == 1 {
                return Ok(dom.side());
            }
            let mut coords: Vec<f64> = config.points.iter().map(|p| p.coords[0]).collect();
            let site_coord = coords[site];
            coords.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let pos = coords
                .iter()
                .position(|&c| c == site_coord)
                .expect("site coordinate present");
            let right = coords[(pos + 1) % n];
            let left = coords[(pos + n - 1) % n];
            let gap_right = (right - site_coord).rem_euclid(dom.side());
            let gap_left = (site_coord - left).rem_euclid(dom.side());
            Ok((gap_left + gap_right) / 2.0)
        }
        2 => {
            let cell =
                voronoi_cell_2d(site, &config.points, dom).map_err(ProcessError::Geometry)?;
            Ok(cell.area)
        }
        d => Err(TransportError::DimensionUnsupported {
            kernel: "same_cell".into(),
            required: 2,
            actual: d,
        }),
    }
}
