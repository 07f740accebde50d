//! End-to-end builders wiring sampling, indexing, nets, clumping, and the
//! factor constructions together.

use thiserror::Error;

use crate::clumping::{build_voronoi_clumping, Clumping};
use crate::dyadic::{dyadic_clumping, DyadicError, DyadicOutcome, RemainderMode};
use crate::geometry::GeometryError;
use crate::gridfactor::{grid_factor, GridEmbedding, GridError};
use crate::indexing::{build_index, build_nets, default_unit, IndexAssignment, IndexError, NetHierarchy};
use crate::process::PointConfig;
use crate::treefactor::{path_from_tree, tree_from_clumping, FactorGraph, PathFactor, TreeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Everything the tree construction produces along the way.
#[derive(Debug, Clone)]
pub struct TreePipeline {
    pub index: IndexAssignment,
    pub nets: NetHierarchy,
    pub clumping: Clumping,
    pub tree: FactorGraph,
}

/// index -> nets -> Voronoi clumping -> spanning tree.
///
/// `unit` overrides the default net separation unit; `k0` is the starting
/// profile length for the index.
pub fn build_tree_pipeline(
    config: &PointConfig,
    k0: usize,
    unit: Option<f64>,
) -> Result<TreePipeline, PipelineError> {
    let index = build_index(config, k0)?;
    let unit = unit.unwrap_or_else(|| default_unit(config));
    let nets = build_nets(config, &index, unit)?;
    let clumping = build_voronoi_clumping(config, &nets, &index);
    let tree = tree_from_clumping(&clumping, &index)?;
    Ok(TreePipeline {
        index,
        nets,
        clumping,
        tree,
    })
}

/// Tree pipeline extended with the depth-first path factor.
pub fn build_path_pipeline(
    config: &PointConfig,
    k0: usize,
    unit: Option<f64>,
) -> Result<(TreePipeline, PathFactor), PipelineError> {
    let tp = build_tree_pipeline(config, k0, unit)?;
    let path = path_from_tree(&tp.tree, &tp.index)?;
    Ok((tp, path))
}

/// Tree pipeline extended with the dyadic clumping and the grid embedding.
pub fn build_grid_pipeline(
    config: &PointConfig,
    k0: usize,
    unit: Option<f64>,
    grid_dim: usize,
    schedule: Option<&[usize]>,
) -> Result<(TreePipeline, DyadicOutcome, GridEmbedding), PipelineError> {
    let tp = build_tree_pipeline(config, k0, unit)?;
    let dyadic = dyadic_clumping(&tp.tree, &tp.index, schedule, RemainderMode::Strict)?;
    let grid = grid_factor(&dyadic.clumping, &tp.index, grid_dim)?;
    Ok((tp, dyadic, grid))
}
