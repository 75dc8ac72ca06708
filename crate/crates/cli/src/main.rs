//! Command-line entry point: `blebsim run`, `blebsim verify`,
//! `blebsim mesh-info`.
//!
//! Exit codes: 0 on success, 1 on configuration or input errors, 2 on
//! solver or runtime failures (including failed verification gates).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use blebsim_cli::config::{self, ConfigError, MeshSource, RunConfig};
use blebsim_cli::mesh_io::{read_mesh, MeshFileError};
use blebsim_cli::vtk::write_vtk;
use blebsim_core::assembly::{volume, VectorField};
use blebsim_core::geometry::{cube_sphere, make_discocyte, GeometryError};
use blebsim_core::mesh::{MeshError, SurfaceMesh};
use blebsim_core::sim::{SimError, TimeStepper};
use blebsim_core::solver::{MassMode, SolverOptions};
use blebsim_core::verify::{manufactured_convergence, ConvergenceConfig, VerifyError};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    MeshFile(#[from] MeshFileError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("verification failed: minimum position-error order {min:.3} is below {threshold}")]
    VerificationFailed { min: f64, threshold: f64 },
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for problems in the user's configuration or input files, 2 for
    /// failures of the solver or the run itself.
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::MeshFile(_)
            | CliError::Geometry(_)
            | CliError::Mesh(_)
            | CliError::Sim(SimError::Params(_))
            | CliError::Sim(SimError::Model(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "blebsim",
    version,
    about = "Surface finite-element simulator for the onset of cell blebbing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the membrane force balance and write VTK snapshots
    Run(RunArgs),
    /// Run the manufactured-solution convergence study and emit a CSV
    Verify(VerifyArgs),
    /// Print statistics of the chosen mesh without simulating
    MeshInfo(MeshInfoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Plain-text `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in mesh (`sphere`, `discocyte`) or path to an .off/.obj file
    #[arg(long)]
    mesh: Option<String>,
    /// Bisection refinement passes applied to the base mesh
    #[arg(long)]
    refine: Option<usize>,
    /// Time-step size
    #[arg(long)]
    tau: Option<f64>,
    /// Final time
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Output directory for snapshots and run.log
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot cadence in steps (initial and final states always written)
    #[arg(long = "output-every")]
    output_every: Option<usize>,
    /// Parameter preset: table1, imgdata, weak_linkers, high_tension,
    /// high_pressure
    #[arg(long)]
    preset: Option<String>,
    /// Force model: sharp, regularized, manufactured
    #[arg(long)]
    mode: Option<String>,
    /// Transition width of the regularized force model
    #[arg(long)]
    epsilon: Option<f64>,
    /// Mass treatment in the curvature solve: consistent, lumped
    #[arg(long)]
    solver: Option<String>,
    /// Extra `key=value` override; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated refinement levels for the convergence study
    #[arg(long, default_value = "3,4,5,6")]
    levels: String,
    /// Mass treatment in the curvature solve: consistent, lumped
    #[arg(long)]
    solver: Option<String>,
}

#[derive(Args)]
struct MeshInfoArgs {
    /// Plain-text `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in mesh (`sphere`, `discocyte`) or path to an .off/.obj file
    #[arg(long)]
    mesh: Option<String>,
    /// Bisection refinement passes applied to the base mesh
    #[arg(long)]
    refine: Option<usize>,
}

fn parse_solver_flag(value: &str) -> Result<MassMode, ConfigError> {
    value.parse().map_err(|e| ConfigError::BadValue {
        at: String::from("--solver"),
        key: String::from("solver"),
        reason: format!("{e}"),
    })
}

/// Assemble the effective configuration: defaults, then the config file
/// (its own preset key first), then the `--preset` flag, then explicit
/// flags and `--set` overrides.
fn build_config(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        config::parse_file(&mut cfg, path)?;
    }
    if let Some(name) = &args.preset {
        config::apply_preset(&mut cfg, name)?;
    }
    if let Some(mesh) = &args.mesh {
        cfg.mesh = MeshSource::parse(mesh);
    }
    if let Some(refine) = args.refine {
        cfg.refine = refine;
    }
    if let Some(tau) = args.tau {
        cfg.params.tau = tau;
    }
    if let Some(t_end) = args.t_end {
        cfg.params.t_end = t_end;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(every) = args.output_every {
        cfg.output_every = every;
    }
    if let Some(mode) = &args.mode {
        config::apply_key(&mut cfg, "mode", mode, "--mode")?;
    }
    if let Some(epsilon) = args.epsilon {
        cfg.params.epsilon = epsilon;
    }
    if let Some(solver) = &args.solver {
        cfg.solver = parse_solver_flag(solver)?;
    }
    for assignment in &args.set {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            at: format!("--set {assignment}"),
        })?;
        config::apply_key(&mut cfg, key.trim(), value.trim(), "--set")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_mesh(cfg: &RunConfig) -> Result<SurfaceMesh, CliError> {
    match &cfg.mesh {
        MeshSource::Sphere => Ok(cube_sphere(cfg.refine)?),
        MeshSource::Discocyte => Ok(make_discocyte(cfg.refine)?),
        MeshSource::File(path) => {
            let mesh = read_mesh(Path::new(path))?;
            if cfg.refine > 0 {
                // File meshes are refined without reprojection; midpoints
                // stay on the polyhedral surface.
                Ok(mesh.refine_bisect(cfg.refine, |v| v)?)
            } else {
                Ok(mesh)
            }
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let cfg = build_config(&args)?;
    let mesh = build_mesh(&cfg)?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        context: format!("creating {}", out_dir.display()),
        source,
    })?;

    let options = SolverOptions {
        mass_mode: cfg.solver,
        ..SolverOptions::default()
    };
    let stepper = TimeStepper::new(mesh, cfg.mode, cfg.params, options)?;
    println!(
        "mesh: {} ({} vertices, {} triangles, h_max {:.4})",
        cfg.mesh,
        stepper.mesh().n_vertices(),
        stepper.mesh().n_triangles(),
        stepper.mesh().h_max()
    );
    println!(
        "integrating {} steps of tau = {} to t_end = {} ({} model, {} mass)",
        stepper.n_steps(),
        cfg.params.tau,
        cfg.params.t_end,
        cfg.mode,
        cfg.solver
    );

    let start = Instant::now();
    let mut n_snapshots = 0usize;
    let (final_state, reports) = stepper.run(cfg.output_every, |snapshot| {
        let path = out_dir.join(format!("snapshot_{:06}.vtk", snapshot.step));
        write_vtk(&path, snapshot)?;
        n_snapshots += 1;
        Ok(())
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut log = String::new();
    let _ = writeln!(
        log,
        "# step time residual_u residual_w outer_iterations broken_linkers volume"
    );
    for r in &reports {
        let _ = writeln!(
            log,
            "{} {:.6} {:.6e} {:.6e} {}/{}/{} {} {:.8e}",
            r.step,
            r.time,
            r.residual_u,
            r.residual_w,
            r.outer_iterations[0],
            r.outer_iterations[1],
            r.outer_iterations[2],
            r.broken_linkers,
            r.volume
        );
    }
    let _ = writeln!(log, "# wall time: {wall:.3} s");
    std::fs::write(out_dir.join("run.log"), log).map_err(|source| CliError::Io {
        context: String::from("writing run.log"),
        source,
    })?;

    println!(
        "finished: t = {:.4}, {} broken linkers, {} snapshots in {}, wall {:.3} s",
        final_state.time,
        final_state.broken_linkers(),
        n_snapshots,
        out_dir.display(),
        wall
    );
    Ok(())
}

/// Minimum acceptable convergence order of the position error between
/// consecutive study levels.
const VERIFY_EOC_THRESHOLD: f64 = 1.0;

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let mut levels = Vec::new();
    for token in args.levels.split(',') {
        let level: usize = token.trim().parse().map_err(|_| ConfigError::BadValue {
            at: String::from("--levels"),
            key: String::from("levels"),
            reason: format!("bad level `{token}`"),
        })?;
        levels.push(level);
    }
    if levels.len() < 2 {
        return Err(ConfigError::BadValue {
            at: String::from("--levels"),
            key: String::from("levels"),
            reason: String::from("need at least two levels to estimate an order"),
        }
        .into());
    }
    let mass_mode = match &args.solver {
        Some(value) => parse_solver_flag(value)?,
        None => MassMode::Consistent,
    };

    let cfg = ConvergenceConfig {
        mass_mode,
        ..ConvergenceConfig::default()
    };
    let report = manufactured_convergence(&levels, &cfg)?;
    let orders = report.orders();

    println!("level,h_max,error_u,error_w,eoc_u,eoc_w");
    for (index, row) in report.rows.iter().enumerate() {
        let (eoc_u, eoc_w) = if index == 0 {
            (String::new(), String::new())
        } else {
            (
                format!("{:.4}", orders[index - 1][0]),
                format!("{:.4}", orders[index - 1][1]),
            )
        };
        println!(
            "{},{:.6e},{:.6e},{:.6e},{},{}",
            row.level, row.h_max, row.errors[0], row.errors[1], eoc_u, eoc_w
        );
    }

    let min_order = orders
        .iter()
        .map(|o| o[0])
        .fold(f64::INFINITY, f64::min);
    let first = report.rows.first().unwrap();
    let last = report.rows.last().unwrap();
    let aggregate =
        (first.errors[0] / last.errors[0]).ln() / (first.h_max / last.h_max).ln();
    let pass = min_order >= VERIFY_EOC_THRESHOLD;
    println!(
        "summary: status={} min_eoc_u={:.4} aggregate_eoc_u={:.4} threshold={}",
        if pass { "pass" } else { "fail" },
        min_order,
        aggregate,
        VERIFY_EOC_THRESHOLD
    );
    if pass {
        Ok(())
    } else {
        Err(CliError::VerificationFailed {
            min: min_order,
            threshold: VERIFY_EOC_THRESHOLD,
        })
    }
}

fn cmd_mesh_info(args: MeshInfoArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        config::parse_file(&mut cfg, path)?;
    }
    if let Some(mesh) = &args.mesh {
        cfg.mesh = MeshSource::parse(mesh);
    }
    if let Some(refine) = args.refine {
        cfg.refine = refine;
    }
    let mesh = build_mesh(&cfg)?;
    let stats = mesh.stats();
    let reference: VectorField = mesh.vertices().to_vec();
    println!("mesh: {}", cfg.mesh);
    println!("refinement passes: {}", cfg.refine);
    println!("vertices: {}", stats.n_vertices);
    println!("triangles: {}", stats.n_triangles);
    println!("edges: {}", mesh.n_edges());
    println!("euler characteristic: {}", mesh.euler_characteristic());
    println!("closed: {}", mesh.is_closed());
    println!("h_max: {:.6}", stats.h_max);
    println!("area: {:.6}", stats.total_area);
    println!("volume: {:.6}", volume(&mesh, &reference));
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here too; they keep their
            // conventional success status while real usage errors are
            // configuration errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::MeshInfo(args) => cmd_mesh_info(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
