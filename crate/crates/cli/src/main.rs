//! Command-line front end: sampling, factor building, verification
//! suites, and export.
//!
//! Exit codes: 0 success (all checks pass), 1 operational or verification
//! failure, 2 usage error.

mod files;
mod manifest;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use files::GraphFile;
use manifest::ManifestBuilder;
use ppf_core::gridfactor::{deficiency_transport_wrapped, GridEmbedding};
use ppf_core::{
    build_grid_pipeline, build_path_pipeline, build_tree_pipeline, process, sample, Domain,
    GraphKind, ProcessKind, SamplerSpec, Topology,
};

#[derive(Parser)]
#[command(
    name = "ppf",
    version,
    about = "equivariant tree and grid factors on sampled point processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessArg {
    Poisson,
    Binomial,
    Lattice,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Torus,
    Box,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhatArg {
    Tree,
    Path,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Auto,
    Coords,
    Degrees,
    Deficiency,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Tree,
    Grid,
    Clumping,
    Mtp,
    Equivariance,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a point configuration into a config file (plus manifest)
    Sample {
        #[arg(long, value_enum)]
        process: ProcessArg,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        side: f64,
        /// Seed; defaults to $PPF_SEED, then 0.
        #[arg(long, env = "PPF_SEED", default_value_t = 0)]
        seed: u64,
        /// Poisson intensity (points per unit volume).
        #[arg(long, required_if_eq("process", "poisson"))]
        intensity: Option<f64>,
        /// Exact point count for the binomial process.
        #[arg(long, required_if_eq("process", "binomial"))]
        points: Option<usize>,
        /// Lattice spacing (must divide the side).
        #[arg(long, required_if_eq("process", "lattice"))]
        spacing: Option<f64>,
        #[arg(long, value_enum, default_value = "torus")]
        topology: TopologyArg,
        #[arg(long, default_value = "config.json")]
        out: PathBuf,
    },
    /// Build a factor graph from a config file (plus manifest)
    Build {
        #[arg(long, value_enum)]
        what: WhatArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "graph.json")]
        out: PathBuf,
        /// Target grid dimension n for --what grid.
        #[arg(long, default_value_t = 2)]
        grid_dim: usize,
        /// Comma-separated doubling counts per recorded dyadic level.
        #[arg(long)]
        schedule: Option<String>,
        /// Starting profile length for the index.
        #[arg(long, default_value_t = 1)]
        k0: usize,
        /// Net separation unit override.
        #[arg(long)]
        unit: Option<f64>,
    },
    /// Run a verification suite; exit 0 iff every check passes
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Monte Carlo trials (mtp) or translation count (equivariance).
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value_t = 256)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        /// Poisson intensity for the mtp suite.
        #[arg(long, default_value_t = 100.0)]
        intensity: f64,
        /// Thickened-boundary width as a fraction of the side.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        grid_dim: usize,
        /// Write per-trial mtp masses to a CSV file.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Export a graph file as dot or csv
    Export {
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV table: coords (grid), degree histogram, or deficiency
        /// summary. `auto` picks coords for grids, degrees otherwise.
        #[arg(long, value_enum, default_value = "auto")]
        table: TableArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Sample {
            process,
            dim,
            side,
            seed,
            intensity,
            points,
            spacing,
            topology,
            out,
        } => cmd_sample(
            process, dim, side, seed, intensity, points, spacing, topology, &out,
        ),
        Command::Build {
            what,
            input,
            out,
            grid_dim,
            schedule,
            k0,
            unit,
        } => cmd_build(what, &input, &out, grid_dim, schedule.as_deref(), k0, unit),
        Command::Verify {
            suite,
            trials,
            seeds,
            points,
            dim,
            side,
            intensity,
            delta,
            grid_dim,
            trace_out,
        } => {
            let params = verify::SuiteParams {
                seeds: seeds.unwrap_or_else(|| vec![1, 2, 3, 4, 5]),
                trials,
                points,
                dim,
                side,
                intensity,
                delta,
                grid_dim,
                trace_out,
            };
            let name = match suite {
                SuiteArg::Tree => "tree",
                SuiteArg::Grid => "grid",
                SuiteArg::Clumping => "clumping",
                SuiteArg::Mtp => "mtp",
                SuiteArg::Equivariance => "equivariance",
                SuiteArg::All => "all",
            };
            let outcome = verify::run_suite(name, &params)?;
            println!(
                "{}: {} checks, {} failures",
                name, outcome.checks, outcome.failures
            );
            Ok(if outcome.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Export {
            format,
            input,
            out,
            table,
        } => cmd_export(format, &input, &out, table),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    process: ProcessArg,
    dim: usize,
    side: f64,
    seed: u64,
    intensity: Option<f64>,
    points: Option<usize>,
    spacing: Option<f64>,
    topology: TopologyArg,
    out: &std::path::Path,
) -> Result<ExitCode> {
    let topology = match topology {
        TopologyArg::Torus => Topology::Torus,
        TopologyArg::Box => Topology::Box,
    };
    let dom = Domain::new(dim, side, topology)?;
    let kind = match process {
        ProcessArg::Poisson => ProcessKind::Poisson {
            intensity: intensity.expect("enforced by clap"),
        },
        ProcessArg::Binomial => ProcessKind::Binomial {
            points: points.expect("enforced by clap"),
        },
        ProcessArg::Lattice => ProcessKind::ShiftedLattice {
            spacing: spacing.expect("enforced by clap"),
        },
    };
    let spec = SamplerSpec::new(kind, seed);
    let config = sample(&spec, &dom)?;
    process::save(&config, out)?;
    let mut mb = ManifestBuilder::new("sample", seed);
    mb.param("process", config.provenance.kind.name())
        .param("dim", dim)
        .param("side", side)
        .param("n_points", config.len());
    if let Some(v) = intensity {
        mb.param("intensity", v);
    }
    if let Some(v) = points {
        mb.param("points", v);
    }
    if let Some(v) = spacing {
        mb.param("spacing", v);
    }
    mb.output(out)?;
    mb.write_next_to(out)?;
    println!("wrote {} points to {}", config.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_build(
    what: WhatArg,
    input: &std::path::Path,
    out: &std::path::Path,
    grid_dim: usize,
    schedule: Option<&str>,
    k0: usize,
    unit: Option<f64>,
) -> Result<ExitCode> {
    let config = process::load(input)?;
    let schedule_steps: Option<Vec<usize>> = match schedule {
        Some(text) => Some(
            text.split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .context("parsing --schedule (expected comma-separated counts)")?,
        ),
        None => None,
    };
    let mut mb = ManifestBuilder::new("build", config.provenance.seed);
    mb.param("k0", k0).param("n_points", config.len());
    if let Some(u) = unit {
        mb.param("unit", u);
    }
    mb.input(input)?;
    let file = match what {
        WhatArg::Tree => {
            mb.param("what", "tree");
            let tp = build_tree_pipeline(&config, k0, unit)?;
            println!(
                "tree: {} vertices, {} edges, net levels {}",
                config.len(),
                tp.tree.edge_count(),
                tp.nets.max_level()
            );
            GraphFile::from_graph(&tp.tree, None)
        }
        WhatArg::Path => {
            mb.param("what", "path");
            let (_, path) = build_path_pipeline(&config, k0, unit)?;
            println!(
                "path: {} vertices, {} edges",
                config.len(),
                path.graph.edge_count()
            );
            GraphFile::from_graph(&path.graph, None)
        }
        WhatArg::Grid => {
            mb.param("what", "grid").param("grid_dim", grid_dim);
            if let Some(steps) = &schedule_steps {
                mb.param(
                    "schedule",
                    steps
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
            let (_, _, grid) =
                build_grid_pipeline(&config, k0, unit, grid_dim, schedule_steps.as_deref())?;
            println!(
                "grid: box {:?}, {} edges",
                grid.dims(),
                grid.graph.edge_count()
            );
            GraphFile::from_graph(&grid.graph, Some(&grid))
        }
    };
    files::write_graph(out, &file)?;
    mb.output(out)?;
    mb.write_next_to(out)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(
    format: FormatArg,
    input: &std::path::Path,
    out: &std::path::Path,
    table: TableArg,
) -> Result<ExitCode> {
    let file = files::read_graph(input)?;
    let graph = file.to_factor_graph()?;
    let text = match format {
        FormatArg::Dot => {
            let mut dot = String::from("graph g {\n");
            for v in 0..graph.n {
                dot.push_str(&format!("  {v};\n"));
            }
            for (a, b) in &graph.edges {
                dot.push_str(&format!("  {a} -- {b};\n"));
            }
            dot.push_str("}\n");
            dot
        }
        FormatArg::Csv => {
            let coords = file.dense_coords()?;
            let table = match (table, &coords) {
                (TableArg::Auto, Some(_)) => TableArg::Coords,
                (TableArg::Auto, None) => TableArg::Degrees,
                (t, _) => t,
            };
            match table {
                TableArg::Coords => {
                    let coords = coords
                        .as_ref()
                        .context("coords table needs a grid graph file")?;
                    let n_axes = coords.first().map(Vec::len).unwrap_or(0);
                    let degrees = graph.degrees();
                    let mut csv = String::from("id");
                    for a in 1..=n_axes {
                        csv.push_str(&format!(",x{a}"));
                    }
                    csv.push_str(",degree\n");
                    for (id, c) in coords.iter().enumerate() {
                        csv.push_str(&id.to_string());
                        for x in c {
                            csv.push_str(&format!(",{x}"));
                        }
                        csv.push_str(&format!(",{}\n", degrees[id]));
                    }
                    csv
                }
                TableArg::Degrees => {
                    let mut csv = String::from("degree,count\n");
                    for (deg, count) in graph.degree_histogram() {
                        csv.push_str(&format!("{deg},{count}\n"));
                    }
                    csv
                }
                TableArg::Deficiency => {
                    let coords = coords.context("deficiency table needs a grid graph file")?;
                    let grid = grid_from_file(&graph.kind, coords)?;
                    let rep = ppf_core::deficiency_transport(&grid);
                    let wrapped = deficiency_transport_wrapped(&grid);
                    let mut csv = String::from("metric,value\n");
                    csv.push_str(&format!("sent_total,{}\n", rep.sent_total));
                    csv.push_str(&format!("received_total,{}\n", rep.received_total));
                    csv.push_str(&format!("max_received,{}\n", rep.max_received));
                    csv.push_str(&format!(
                        "deficient_directions,{}\n",
                        rep.deficient_directions
                    ));
                    csv.push_str(&format!("deficient_vertices,{}\n", rep.deficient_vertices));
                    csv.push_str(&format!("fraction_deficient,{}\n", rep.fraction_deficient));
                    csv.push_str(&format!(
                        "mean_sent_per_vertex,{}\n",
                        rep.mean_sent_per_vertex
                    ));
                    csv.push_str(&format!("wrapped_sent_total,{}\n", wrapped.sent_total));
                    csv
                }
                TableArg::Auto => unreachable!("resolved above"),
            }
        }
    };
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

/// Reassembles a GridEmbedding from a coords table (for export tooling).
fn grid_from_file(kind: &GraphKind, coords: Vec<Vec<u32>>) -> Result<GridEmbedding> {
    if *kind != GraphKind::Grid {
        bail!("graph file is not a grid");
    }
    let n = coords.first().map(Vec::len).unwrap_or(0);
    let count = coords.len();
    if n == 0 || count == 0 || !count.is_power_of_two() {
        bail!("grid coords must cover 2^m vertices with a fixed dimension");
    }
    let m = count.trailing_zeros() as usize;
    let graph = ppf_core::gridfactor::grid_adjacency(&coords);
    Ok(GridEmbedding {
        n,
        m,
        coords,
        graph,
        glues: Vec::new(),
    })
}
