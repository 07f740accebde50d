//! Verification suites: each check prints one pass/fail line; a suite
//! passes when every check does.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use rand::Rng;

use ppf_core::dyadic::{dyadic_clumping, RemainderMode};
use ppf_core::gridfactor::verify_grid;
use ppf_core::rng::{derive_seed, stream_rng, STREAM_HARNESS};
use ppf_core::transport::{BallVolume, MtpOptions, TransportReport, TransportSpec};
use ppf_core::{
    build_grid_pipeline, build_path_pipeline, build_tree_pipeline, mtp_estimate, sample,
    tree_stats, verify_clumping, Domain, PointConfig, ProcessKind, SamplerSpec,
};

#[derive(Debug, Clone)]
pub struct SuiteParams {
    pub seeds: Vec<u64>,
    pub trials: Option<usize>,
    pub points: usize,
    pub dim: usize,
    pub side: f64,
    pub intensity: f64,
    /// Thickened-boundary width as a fraction of the window side.
    pub delta: f64,
    pub grid_dim: usize,
    pub trace_out: Option<PathBuf>,
}

pub struct SuiteRun {
    pub checks: usize,
    pub failures: usize,
}

impl SuiteRun {
    fn new() -> Self {
        SuiteRun {
            checks: 0,
            failures: 0,
        }
    }

    fn record(&mut self, name: &str, pass: bool, detail: &str) {
        self.checks += 1;
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn merge(&mut self, other: SuiteRun) {
        self.checks += other.checks;
        self.failures += other.failures;
    }

    pub fn all_pass(&self) -> bool {
        self.failures == 0
    }
}

fn binomial(params: &SuiteParams, seed: u64) -> Result<PointConfig> {
    let dom = Domain::torus(params.dim, params.side)?;
    Ok(sample(
        &SamplerSpec::new(
            ProcessKind::Binomial {
                points: params.points,
            },
            seed,
        ),
        &dom,
    )?)
}

pub fn run_suite(name: &str, params: &SuiteParams) -> Result<SuiteRun> {
    match name {
        "tree" => tree_suite(params),
        "clumping" => clumping_suite(params),
        "grid" => grid_suite(params),
        "mtp" => mtp_suite(params),
        "equivariance" => equivariance_suite(params),
        "all" => {
            let mut run = SuiteRun::new();
            for suite in ["tree", "clumping", "grid", "mtp", "equivariance"] {
                run.merge(run_suite(suite, params)?);
            }
            Ok(run)
        }
        other => anyhow::bail!("unknown suite {other:?}"),
    }
}

fn tree_suite(params: &SuiteParams) -> Result<SuiteRun> {
    let mut run = SuiteRun::new();
    for &seed in &params.seeds {
        let cfg = binomial(params, seed)?;
        let tp = build_tree_pipeline(&cfg, 1, None)?;
        let spanning = tp.tree.is_spanning_tree();
        let stats = tree_stats(&tp.tree, &tp.clumping, &tp.index)?;
        let trunks = stats.trunk_violations.is_empty();
        run.record(
            "tree",
            spanning && trunks,
            &format!(
                "seed {seed}: spanning={spanning} trunk_violations={}",
                stats.trunk_violations.len()
            ),
        );
    }
    Ok(run)
}

fn clumping_suite(params: &SuiteParams) -> Result<SuiteRun> {
    let mut run = SuiteRun::new();
    for &seed in &params.seeds {
        let cfg = binomial(params, seed)?;
        let tp = build_tree_pipeline(&cfg, 1, None)?;
        let report = verify_clumping(&tp.clumping);
        let detail = report
            .first_failure()
            .map(|f| format!("seed {seed}: {} failed", f.name))
            .unwrap_or_else(|| format!("seed {seed}: all checks pass"));
        run.record("clumping", report.pass(), &detail);
    }
    Ok(run)
}

fn grid_suite(params: &SuiteParams) -> Result<SuiteRun> {
    let mut run = SuiteRun::new();
    for &seed in &params.seeds {
        let cfg = binomial(params, seed)?;
        match build_grid_pipeline(&cfg, 1, None, params.grid_dim, None) {
            Ok((_, dyadic, grid)) => {
                let report = verify_grid(&grid);
                let sizes_ok = dyadic
                    .clumping
                    .partitions
                    .iter()
                    .enumerate()
                    .all(|(i, p)| p.clumps.iter().all(|c| c.size() == 1 << i));
                run.record(
                    "grid",
                    report.pass() && sizes_ok,
                    &format!(
                        "seed {seed}: box {:?} deficient {}/{} dyadic_sizes_ok={sizes_ok}",
                        report.dims, report.deficient_count, report.expected_deficient
                    ),
                );
            }
            Err(e) => run.record("grid", false, &format!("seed {seed}: {e}")),
        }
    }
    Ok(run)
}

fn mtp_suite(params: &SuiteParams) -> Result<SuiteRun> {
    let mut run = SuiteRun::new();
    let trials = params.trials.unwrap_or(2000);
    let opts = MtpOptions::default();
    let dom2 = Domain::torus(2, params.side)?;
    let base_seed = *params.seeds.first().unwrap_or(&1);
    let mut traces: Vec<(String, TransportReport)> = Vec::new();

    // lattice control: exact balance
    let spacing = params.side / 4.0;
    let lattice = SamplerSpec::new(ProcessKind::ShiftedLattice { spacing }, base_seed);
    let control = mtp_estimate(&TransportSpec::same_cell(), &lattice, &dom2, trials, &opts)?;
    let expected = spacing * spacing;
    let exact = (control.mean_out - expected).abs() < 1e-12
        && (control.mean_out - control.mean_in).abs() < 1e-12;
    run.record(
        "mtp.lattice_control",
        exact && control.pass,
        &format!(
            "out {:.12} in {:.12} expected {expected:.12}",
            control.mean_out, control.mean_in
        ),
    );
    traces.push(("same_cell".into(), control));

    let poisson = SamplerSpec::new(
        ProcessKind::Poisson {
            intensity: params.intensity,
        },
        base_seed,
    );
    for spec in [
        TransportSpec::voronoi_ball(BallVolume::MeanCell),
        TransportSpec::thickened_boundary(params.delta * params.side, 1),
    ] {
        let report = mtp_estimate(&spec, &poisson, &dom2, trials, &opts)?;
        run.record(
            &format!("mtp.{}", report.name),
            report.pass,
            &format!(
                "out {:.6} +- {:.6}, in {:.6} +- {:.6}, c {:.6}",
                report.mean_out, report.se_out, report.mean_in, report.se_in,
                report.intensity_constant
            ),
        );
        traces.push((report.name.clone(), report));
    }

    if let Some(path) = &params.trace_out {
        let mut out = String::from("kernel,trial,mass_out,mass_in\n");
        for (name, report) in &traces {
            for (t, (o, i)) in report.per_trial.iter().enumerate() {
                out.push_str(&format!("{name},{t},{o},{i}\n"));
            }
        }
        let mut f = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        f.write_all(out.as_bytes())?;
        println!("trace written to {}", path.display());
    }
    Ok(run)
}

fn equivariance_suite(params: &SuiteParams) -> Result<SuiteRun> {
    let mut run = SuiteRun::new();
    let translations = params.trials.unwrap_or(50);
    let base_seed = *params.seeds.first().unwrap_or(&1);
    let cfg = binomial(params, base_seed)?;
    let reference = build_artifacts(&cfg, params.grid_dim)?;
    let mut rng = stream_rng(derive_seed(base_seed, 0xE9), STREAM_HARNESS);
    let mut matched = 0usize;
    for _ in 0..translations {
        let shift: Vec<f64> = (0..params.dim)
            .map(|_| rng.gen::<f64>() * params.side)
            .collect();
        let moved = cfg.translated(&shift)?;
        let rebuilt = build_artifacts(&moved, params.grid_dim)?;
        if rebuilt == reference {
            matched += 1;
        }
    }
    run.record(
        "equivariance",
        matched == translations,
        &format!("{matched}/{translations} exact artifact matches under random translations"),
    );
    Ok(run)
}

/// Everything the builders produce, comparable under id correspondence.
#[derive(PartialEq)]
struct Artifacts {
    ranks: Vec<u32>,
    nets: ppf_core::NetHierarchy,
    clumping: ppf_core::Clumping,
    tree: ppf_core::FactorGraph,
    path_order: Vec<ppf_core::PointId>,
    dyadic: ppf_core::Clumping,
    grid_coords: Vec<Vec<u32>>,
}

fn build_artifacts(cfg: &PointConfig, grid_dim: usize) -> Result<Artifacts> {
    let (tp, path) = build_path_pipeline(cfg, 1, None)?;
    let dyadic = dyadic_clumping(&tp.tree, &tp.index, None, RemainderMode::Strict)?;
    let grid = ppf_core::grid_factor(&dyadic.clumping, &tp.index, grid_dim)?;
    Ok(Artifacts {
        ranks: tp.index.ranks().to_vec(),
        nets: tp.nets,
        clumping: tp.clumping,
        tree: tp.tree,
        path_order: path.order,
        dyadic: dyadic.clumping,
        grid_coords: grid.coords,
    })
}
