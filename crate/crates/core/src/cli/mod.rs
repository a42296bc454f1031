//! The `rsot` command line.

mod config;
mod validate;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::applications::{
    barycenter_general, barycenter_lloyd, blue_noise_sphere, format_trace, register, sphere_atoms, BarycenterConfig,
    sample_support, BarycenterSource, BlueNoiseConfig, RiemannianParams, SphereDensity,
};
use crate::error::{Error, Result};
use crate::geometry::{atomize, load_density, load_mesh, Cost, DensityField, QuadratureSpec};
use crate::measures::{
    build_source_hierarchy, build_target_hierarchy, load_point_cloud, load_source_hierarchy, load_target_hierarchy,
    validate_measure, write_point_cloud, write_source_hierarchy, write_target_hierarchy, SourceAtoms,
    SourceHierarchy, TargetHierarchy, TargetMeasure, MASS_TOL,
};
use crate::solver::{solve, solve_multilevel, MultilevelOptions, Solution, Strategy};
use crate::Point;

pub use config::{RunConfig, KNOWN_KEYS};
pub use validate::{gradient_check, oracle_check, run_checks, ValidationReport, GRADIENT_TOL, ORACLE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rsot", version, about = "Entropy-regularized semi-discrete optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the dual potential; writes potential.csv and report.json.
    Solve(SolveArgs),
    /// Build a k-means hierarchy from a point cloud.
    Hierarchy(HierarchyArgs),
    /// Wasserstein barycenter of several source measures.
    Barycenter(BarycenterArgs),
    /// Registration maps, interpolation snapshots and field transfer.
    Register(RegisterArgs),
    /// Blue-noise points on the unit sphere.
    Bluenoise(BluenoiseArgs),
    /// Gradient and oracle self-checks, plus input diagnostics.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Increase log verbosity.
    #[arg(long, short = 'v', action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args, Default)]
pub struct SolverFlags {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// none, pointwise, integrated or geometric.
    #[arg(long)]
    pub truncation: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta_thr: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub scaling_steps: Option<usize>,
    /// quadratic, power<p> or geodesic2.
    #[arg(long)]
    pub cost: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SourceFlags {
    /// Source atoms as CSV `x[,y[,z]],mass`.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Source mesh (`smesh 1 <d>` format).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Per-vertex density for the mesh.
    #[arg(long)]
    pub density: Option<PathBuf>,
    #[arg(long)]
    pub quadrature: Option<u8>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub src: SourceFlags,
    /// Target CSV `x[,y[,z]],weight`.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Manifest of a source hierarchy.
    #[arg(long)]
    pub source_hierarchy: Option<PathBuf>,
    /// Manifest of a target hierarchy.
    #[arg(long)]
    pub target_hierarchy: Option<PathBuf>,
    /// source, target or combined.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub epsilon_start: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HierarchyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Point cloud CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Level sizes, coarsest first, ending with the input size.
    #[arg(long)]
    pub sizes: Option<String>,
    /// target or source.
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Args)]
pub struct BarycenterArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub src: SourceFlags,
    /// Comma-separated source CSVs.
    #[arg(long)]
    pub sources: Option<String>,
    /// Support size.
    #[arg(long)]
    pub n_b: Option<usize>,
    /// Comma-separated barycentric weights.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// lloyd or general.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Initial support CSV; random source atoms otherwise.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub src: SourceFlags,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Per-atom scalar field, one value per line.
    #[arg(long)]
    pub field: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BluenoiseArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Number of points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Icosphere subdivision level for the source atoms.
    #[arg(long)]
    pub subdivisions: Option<usize>,
    /// uniform or harmonic.
    #[arg(long)]
    pub sphere_density: Option<String>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub tol_y: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Random instances for the gradient check.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Optional source CSV to diagnose.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Optional target CSV to diagnose.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

fn push_path(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<PathBuf>) {
    if let Some(v) = v {
        out.push((key, v.display().to_string()));
    }
}

impl SolverFlags {
    fn pairs(&self, out: &mut Vec<(&'static str, String)>) {
        push(out, "epsilon", &self.epsilon);
        push(out, "tolerance", &self.tolerance);
        push(out, "truncation", &self.truncation);
        push(out, "tau", &self.tau);
        push(out, "delta_thr", &self.delta_thr);
        push(out, "max_iter", &self.max_iter);
        push(out, "scaling_steps", &self.scaling_steps);
        push(out, "cost", &self.cost);
    }
}

impl SourceFlags {
    fn pairs(&self, out: &mut Vec<(&'static str, String)>) {
        push_path(out, "source", &self.source);
        push_path(out, "mesh", &self.mesh);
        push_path(out, "density", &self.density);
        push(out, "quadrature", &self.quadrature);
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(a) => &a.common,
            Command::Hierarchy(a) => &a.common,
            Command::Barycenter(a) => &a.common,
            Command::Register(a) => &a.common,
            Command::Bluenoise(a) => &a.common,
            Command::Validate(a) => &a.common,
        }
    }

    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        match self {
            Command::Solve(a) => {
                a.solver.pairs(&mut v);
                a.src.pairs(&mut v);
                push_path(&mut v, "target", &a.target);
                push_path(&mut v, "source_hierarchy", &a.source_hierarchy);
                push_path(&mut v, "target_hierarchy", &a.target_hierarchy);
                push(&mut v, "strategy", &a.strategy);
                push(&mut v, "epsilon_start", &a.epsilon_start);
            }
            Command::Hierarchy(a) => {
                push_path(&mut v, "input", &a.input);
                push(&mut v, "sizes", &a.sizes);
                push(&mut v, "kind", &a.kind);
            }
            Command::Barycenter(a) => {
                a.solver.pairs(&mut v);
                a.src.pairs(&mut v);
                push(&mut v, "sources", &a.sources);
                push(&mut v, "n_b", &a.n_b);
                push(&mut v, "lambda", &a.lambda);
                push(&mut v, "damping", &a.damping);
                push(&mut v, "mode", &a.mode);
                push(&mut v, "max_outer", &a.max_outer);
                push_path(&mut v, "init", &a.init);
            }
            Command::Register(a) => {
                a.solver.pairs(&mut v);
                a.src.pairs(&mut v);
                push_path(&mut v, "target", &a.target);
                push_path(&mut v, "field", &a.field);
            }
            Command::Bluenoise(a) => {
                a.solver.pairs(&mut v);
                push(&mut v, "n", &a.n);
                push(&mut v, "subdivisions", &a.subdivisions);
                push(&mut v, "sphere_density", &a.sphere_density);
                push(&mut v, "max_outer", &a.max_outer);
                push(&mut v, "tol_y", &a.tol_y);
            }
            Command::Validate(a) => {
                push(&mut v, "instances", &a.instances);
                push_path(&mut v, "source", &a.source);
                push_path(&mut v, "target", &a.target);
            }
        }
        let c = self.common();
        push_path(&mut v, "output", &c.output);
        push(&mut v, "seed", &c.seed);
        push(&mut v, "workers", &c.workers);
        v
    }
}

/// File, then `--set` overrides, then named flags.
pub fn resolve_config(cmd: &Command) -> Result<RunConfig> {
    let c = cmd.common();
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for s in &c.set {
        cfg.set_pair(s)?;
    }
    for (k, v) in cmd.flag_pairs() {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let level = match cli.command.common().verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Run a parsed command on the configured worker pool.
pub fn run(cmd: &Command) -> Result<i32> {
    let cfg = resolve_config(cmd)?;
    let workers: usize = cfg.parsed_or("workers", 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    pool.install(|| match cmd {
        Command::Solve(_) => cmd_solve(&cfg),
        Command::Hierarchy(_) => cmd_hierarchy(&cfg),
        Command::Barycenter(_) => cmd_barycenter(&cfg),
        Command::Register(_) => cmd_register(&cfg),
        Command::Bluenoise(_) => cmd_bluenoise(&cfg),
        Command::Validate(_) => cmd_validate(&cfg),
    })
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let d = cfg.output_dir();
    fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    Ok(d)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(v).expect("json value serializes") + "\n"))
}

fn exit_code(converged: bool) -> i32 {
    if converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn load_target(path: &Path) -> Result<TargetMeasure> {
    let pc = load_point_cloud(path)?;
    let s: f64 = pc.weights.iter().sum();
    if (s - 1.0).abs() > MASS_TOL {
        log::warn!("{}: weights sum to {s}; renormalizing", path.display());
    }
    pc.into_normalized_target()
}

/// Source from `source` CSV or `mesh` (+ `density`, `quadrature`).
fn load_source(cfg: &RunConfig) -> Result<Option<SourceAtoms>> {
    if let Some(p) = cfg.path("source") {
        return load_point_cloud(&p)?.into_source().map(Some);
    }
    let Some(m) = cfg.path("mesh") else {
        return Ok(None);
    };
    let mesh = load_mesh(&m)?;
    let rho = match cfg.path("density") {
        Some(d) => load_density(&d, &mesh)?,
        None => DensityField::constant(&mesh, 1.0)?,
    };
    let q = QuadratureSpec::new(cfg.parsed_or("quadrature", 1u8)?)?;
    atomize(&mesh, &rho, q).map(Some)
}

fn write_potential_and_report(dir: &Path, sol: &Solution) -> Result<()> {
    sol.potential.write_csv(dir.join("potential.csv"))?;
    write_text(&dir.join("report.json"), &sol.report.to_json())
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let solver = cfg.solver(Cost::Quadratic)?;
    let sh = cfg.path("source_hierarchy").map(load_source_hierarchy).transpose()?;
    let th = cfg.path("target_hierarchy").map(load_target_hierarchy).transpose()?;
    let dir = out_dir(cfg)?;
    let sol = if sh.is_some() || th.is_some() {
        let strategy = match (&sh, &th) {
            (Some(_), Some(_)) => cfg.strategy()?,
            (Some(_), None) => Strategy::SourceOnly,
            _ => Strategy::TargetOnly,
        };
        let sh = match sh {
            Some(h) => h,
            None => {
                let a = load_source(cfg)?.ok_or_else(|| Error::param("source", "required"))?;
                SourceHierarchy::from_levels(vec![a])?
            }
        };
        let th = match th {
            Some(h) => h,
            None => TargetHierarchy::from_levels(vec![load_target(&cfg.require_path("target")?)?])?,
        };
        let opts = MultilevelOptions {
            epsilon_start: cfg.parsed("epsilon_start")?,
        };
        solve_multilevel(&sh, &th, &solver, strategy, opts)?
    } else {
        let a = load_source(cfg)?.ok_or_else(|| Error::param("source", "required (or mesh)"))?;
        let t = load_target(&cfg.require_path("target")?)?;
        solve(&a, &t, &solver, None)?
    };
    write_potential_and_report(&dir, &sol)?;
    if !sol.converged() {
        eprintln!(
            "not converged: {} after {:?} iterations, |g|_1 = {:e}",
            sol.report.status().as_str(),
            sol.report.iterations_per_level,
            sol.report.grad_l1
        );
    }
    Ok(exit_code(sol.converged()))
}

pub fn cmd_hierarchy(cfg: &RunConfig) -> Result<i32> {
    let input = cfg.require_path("input")?;
    let sizes: Vec<usize> = cfg.list("sizes")?.ok_or_else(|| Error::param("sizes", "required"))?;
    let seed = cfg.seed()?;
    let dir = out_dir(cfg)?;
    let pc = load_point_cloud(&input)?;
    let files = match cfg.get("kind").unwrap_or("target") {
        "target" => {
            let t = pc.into_normalized_target()?;
            write_target_hierarchy(&dir, &build_target_hierarchy(&t, &sizes, seed)?)?
        }
        "source" => {
            let a = pc.into_source()?;
            write_source_hierarchy(&dir, &build_source_hierarchy(&a, &sizes, seed)?)?
        }
        k => return Err(Error::param("kind", format!("expected target or source, got '{k}'"))),
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(EXIT_OK)
}

fn initial_support(cfg: &RunConfig, sources: &[SourceAtoms], n_b: usize) -> Result<Vec<Point>> {
    if let Some(p) = cfg.path("init") {
        return Ok(load_point_cloud(&p)?.points);
    }
    sample_support(&sources[0], n_b, cfg.seed()?)
}

pub fn cmd_barycenter(cfg: &RunConfig) -> Result<i32> {
    let solver = cfg.solver(Cost::Quadratic)?;
    let mut sources = Vec::new();
    if let Some(list) = cfg.get("sources") {
        for p in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            sources.push(load_point_cloud(Path::new(p))?.into_source()?);
        }
    } else if let Some(a) = load_source(cfg)? {
        sources.push(a);
    }
    if sources.is_empty() {
        return Err(Error::param("sources", "required"));
    }
    let n_b: usize = cfg.parsed("n_b")?.ok_or_else(|| Error::param("n_b", "required"))?;
    let k = sources.len();
    let d = BarycenterConfig::new(k, n_b);
    let bc = BarycenterConfig {
        lambda: cfg.list("lambda")?.unwrap_or(d.lambda),
        damping: cfg.parsed_or("damping", d.damping)?,
        alpha: cfg.parsed_or("alpha", d.alpha)?,
        beta: cfg.parsed_or("beta", d.beta)?,
        tol_nu: cfg.parsed_or("tol_nu", d.tol_nu)?,
        tol_y: cfg.parsed_or("tol_y", d.tol_y)?,
        max_outer: cfg.parsed_or("max_outer", d.max_outer)?,
        rms_tol: cfg.parsed_or("rms_tol", d.rms_tol)?,
        solver,
        ..d
    };
    let y0 = initial_support(cfg, &sources, n_b)?;
    let inputs: Vec<BarycenterSource> = sources.iter().map(BarycenterSource::new).collect();
    let mode = cfg.get("mode").unwrap_or("lloyd").to_string();
    let r = match mode.as_str() {
        "lloyd" => barycenter_lloyd(&inputs, &bc, y0)?,
        "general" => barycenter_general(&inputs, &bc, y0, None)?,
        m => return Err(Error::param("mode", format!("expected lloyd or general, got '{m}'"))),
    };
    let dim = sources[0].dim();
    let dir = out_dir(cfg)?;
    write_point_cloud(dir.join("barycenter.csv"), dim, &r.points, &r.weights)?;
    write_text(&dir.join("trace.csv"), &format_trace(&r.trace))?;
    let iters = dir.join("iterates");
    fs::create_dir_all(&iters).map_err(|e| Error::io(&iters, e))?;
    for it in &r.trace {
        write_point_cloud(iters.join(format!("iter_{:04}.csv", it.iteration)), dim, &it.points, &it.weights)?;
    }
    write_json(
        &dir.join("report.json"),
        &json!({
            "mode": mode,
            "converged": r.converged,
            "outer_iterations": r.trace.len(),
            "final_rms_movement": r.trace.last().map(|t| t.rms_movement),
        }),
    )?;
    Ok(exit_code(r.converged))
}

fn load_field(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let tok = l.rsplit(',').next().unwrap_or(l).trim();
        match tok.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if out.is_empty() => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("bad field value '{tok}'"),
                })
            }
        }
    }
    Ok(out)
}

fn snapshot_name(alpha: f64) -> String {
    format!("interp_{:03}.csv", (alpha * 100.0).round() as u32)
}

pub fn cmd_register(cfg: &RunConfig) -> Result<i32> {
    let solver = cfg.solver(Cost::Quadratic)?;
    let a = load_source(cfg)?.ok_or_else(|| Error::param("source", "required (or mesh)"))?;
    let t = load_target(&cfg.require_path("target")?)?;
    let field = cfg.path("field").map(|p| load_field(&p)).transpose()?;
    let r = register(&a, &t, &solver, field.as_deref())?;
    let dir = out_dir(cfg)?;
    let dim = a.dim();
    write_potential_and_report(&dir, &r.solution)?;
    write_point_cloud(dir.join("barycentric_map.csv"), dim, &r.barycentric.images, &r.barycentric.displacement)?;
    let idx: Vec<f64> = r.modal.indices.as_ref().map(|v| v.iter().map(|&j| j as f64).collect()).unwrap_or_default();
    write_point_cloud(dir.join("modal_map.csv"), dim, &r.modal.images, &idx)?;
    write_point_cloud(dir.join("displacement.csv"), dim, a.points(), &r.barycentric.displacement)?;
    for (alpha, pts) in &r.snapshots {
        write_point_cloud(dir.join(snapshot_name(*alpha)), dim, pts, a.masses())?;
    }
    if let Some(tr) = &r.transfer {
        write_point_cloud(dir.join("field_barycentric.csv"), dim, &r.barycentric.images, &tr.at_images)?;
        write_point_cloud(dir.join("field_modal.csv"), dim, &r.modal.images, &tr.at_images)?;
        for (name, vals) in [("field_target_first.csv", &tr.first_per_target), ("field_target_mean.csv", &tr.mean_per_target)] {
            let Some(vals) = vals else { continue };
            let (pts, v): (Vec<Point>, Vec<f64>) = t
                .points()
                .iter()
                .zip(vals)
                .filter_map(|(p, v)| v.map(|v| (*p, v)))
                .unzip();
            write_point_cloud(dir.join(name), dim, &pts, &v)?;
        }
    }
    Ok(exit_code(r.solution.converged()))
}

pub fn cmd_bluenoise(cfg: &RunConfig) -> Result<i32> {
    let d = BlueNoiseConfig::default();
    let bn = BlueNoiseConfig {
        solver: cfg.solver(Cost::SquaredGeodesic)?,
        tol_y: cfg.parsed_or("tol_y", d.tol_y)?,
        max_outer: cfg.parsed_or("max_outer", d.max_outer)?,
        riemannian: RiemannianParams {
            alpha: cfg.parsed_or("riemannian_alpha", d.riemannian.alpha)?,
            tol: cfg.parsed_or("riemannian_tol", d.riemannian.tol)?,
            max_iter: cfg.parsed_or("riemannian_max_iter", d.riemannian.max_iter)?,
        },
    };
    let n: usize = cfg.parsed("n")?.ok_or_else(|| Error::param("n", "required"))?;
    let density: SphereDensity = cfg.parsed_or("sphere_density", SphereDensity::Uniform)?;
    let atoms = sphere_atoms(cfg.parsed_or("subdivisions", 3)?, density)?;
    let r = blue_noise_sphere(&atoms, n, &bn, cfg.seed()?)?;
    let dir = out_dir(cfg)?;
    write_point_cloud(dir.join("points.csv"), 3, &r.points, &r.residuals)?;
    let mut trace = String::from("iteration,max_movement\n");
    for (i, m) in r.movement.iter().enumerate() {
        trace.push_str(&format!("{},{m:?}\n", i + 1));
    }
    write_text(&dir.join("trace.csv"), &trace)?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "converged": r.converged,
            "outer_iterations": r.iterations,
            "max_residual": r.residuals.iter().copied().fold(0.0, f64::max),
        }),
    )?;
    Ok(exit_code(r.converged))
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<i32> {
    let mut messages = Vec::new();
    for key in ["source", "target"] {
        if let Some(p) = cfg.path(key) {
            let pc = load_point_cloud(&p)?;
            let w = if key == "target" {
                pc.weights.clone()
            } else {
                let s: f64 = pc.weights.iter().sum();
                pc.weights.iter().map(|w| w / s).collect()
            };
            for m in validate_measure(&pc.points, &w).messages() {
                messages.push(format!("{}: {m}", p.display()));
            }
        }
    }
    let r = run_checks(cfg.seed()?, cfg.parsed_or("instances", 20)?, messages)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("validate.json"), &serde_json::to_value(&r).expect("report serializes"))?;
    println!(
        "gradient check: max rel error {:e} over {} instances ({})",
        r.gradient_max_rel_error,
        r.gradient_instances,
        if r.gradient_max_rel_error <= GRADIENT_TOL { "ok" } else { "FAILED" }
    );
    println!(
        "oracle check: max L-inf {:e} over {} instances ({})",
        r.oracle_max_linf,
        r.oracle_instances,
        if r.oracle_max_linf <= ORACLE_TOL { "ok" } else { "FAILED" }
    );
    for m in &r.measure_messages {
        println!("input: {m}");
    }
    Ok(if r.passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
