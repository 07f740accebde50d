//! Equivariant factor graphs on sampled point processes.
//!
//! The crate samples finite point configurations in a periodic window,
//! indexes them equivariantly, and builds one-ended spanning trees,
//! two-ended paths, and grid embeddings on them. A Monte Carlo harness
//! verifies the constructions through mass-transport balance checks.
//!
//! Module map:
//! - [`geometry`]: torus metric, k-NN queries, 2D Voronoi cells.
//! - [`process`]: Poisson/binomial/lattice samplers and config files.
//! - [`indexing`]: the injective index, pair interleaving, independent
//!   sets, and the separated net hierarchy.
//! - [`clumping`]: nested partitions from nearest-site keys, plus checks.
//! - [`treefactor`]: the spanning tree, the path factor, tree statistics.
//! - [`dyadic`]: pairing/contraction levels with clumps of size `2^i`.
//! - [`gridfactor`]: hyperface gluing into a box of the integer grid.
//! - [`transport`]: the mass-transport Monte Carlo harness.
//! - [`pipeline`]: end-to-end builders wiring the stages together.

pub mod clumping;
pub mod dyadic;
pub mod geometry;
pub mod gridfactor;
pub mod indexing;
pub mod pipeline;
pub mod process;
pub mod rng;
pub mod stats;
pub mod transport;
pub mod treefactor;

pub use clumping::{
    build_voronoi_clumping, thickened_boundary_hits, verify_clumping, Clump, Clumping,
    ClumpingKind, ClumpingReport, Partition,
};
pub use dyadic::{
    contract, dyadic_clumping, pairing_round, ContractedTree, DyadicError, DyadicOutcome,
    PairKind, PairingRound, RemainderMode, WorkingTree,
};
pub use gridfactor::{
    deficiency_transport, grid_factor, verify_grid, BlockGlue, DeficiencyReport, GridEmbedding,
    GridError, GridReport,
};
pub use geometry::{
    distance, k_nearest, volume_surface_check, voronoi_2d, CellPolygon, Domain, GeometryError,
    Point, PointId, Topology, VolumeSurfaceCheck,
};
pub use indexing::{
    build_index, build_nets, independent_set, pair_index, AdjacencyGraph, IndexAssignment,
    IndexError, IndexValue, NetHierarchy,
};
pub use pipeline::{
    build_grid_pipeline, build_path_pipeline, build_tree_pipeline, PipelineError, TreePipeline,
};
pub use process::{sample, PointConfig, ProcessError, ProcessKind, SamplerSpec};
pub use transport::{
    builtin_kernels, mtp_estimate, BallVolume, KernelKind, MtpOptions, TransportError,
    TransportReport, TransportSpec,
};
pub use treefactor::{
    path_from_tree, tree_from_clumping, tree_stats, trunk_of, FactorGraph, GraphKind, PathFactor,
    RootedTree, TreeError, TreeStats,
};
